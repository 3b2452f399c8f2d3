#include "decnn/model.hpp"

namespace decnn {

void ModelConfig::validate() const {
  auto check_group = [](const FilterGroup& g) {
    if (g.filters < 1) throw ParameterError("filter group needs at least one filter");
    if (g.kernel < 1 || g.kernel % 2 == 0) {
      throw ParameterError("kernel width must be odd and positive, got " +
                           std::to_string(g.kernel));
    }
  };
  if (layer1.empty()) throw ParameterError("layer 1 needs at least one filter group");
  for (const auto& g : layer1) check_group(g);
  for (const auto& g : upper_layers) check_group(g);
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ParameterError("dropout rate must lie in [0, 1)");
  }
  if (num_labels != kNumLabels) {
    throw ParameterError("label alphabet is {B, I, O}; num_labels must be 3");
  }
}

Index ModelConfig::layer1_channels() const {
  Index c = 0;
  for (const auto& g : layer1) c += g.filters;
  return c;
}

Index ModelConfig::feature_channels() const {
  return upper_layers.empty() ? layer1_channels() : upper_layers.back().filters;
}

template class DeCnn<float>;
template class DeCnn<double>;

}  // namespace decnn
