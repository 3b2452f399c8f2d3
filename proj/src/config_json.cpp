#include "decnn/config_json.hpp"

#include <set>

#include "decnn/errors.hpp"

namespace decnn {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
  if (!j.is_object()) throw ParameterError(ctx + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ParameterError(ctx + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParameterError(ctx + ": bad value for '" + key + "': " + e.what());
  }
}

json groups_to_json(const std::vector<FilterGroup>& groups) {
  json arr = json::array();
  for (const auto& g : groups) arr.push_back({{"filters", g.filters}, {"kernel", g.kernel}});
  return arr;
}

std::vector<FilterGroup> groups_from_json(const json& arr, const std::string& ctx) {
  if (!arr.is_array()) throw ParameterError(ctx + ": expected an array of filter groups");
  std::vector<FilterGroup> groups;
  for (const auto& g : arr) {
    reject_unknown(g, {"filters", "kernel"}, ctx);
    FilterGroup fg;
    read(g, "filters", fg.filters, ctx);
    read(g, "kernel", fg.kernel, ctx);
    groups.push_back(fg);
  }
  return groups;
}

}  // namespace

json to_json(const ModelConfig& cfg) {
  return {{"emb_mode", std::string(to_string(cfg.emb_mode))},
          {"layer1", groups_to_json(cfg.layer1)},
          {"upper_layers", groups_to_json(cfg.upper_layers)},
          {"dropout", cfg.dropout_rate},
          {"num_labels", cfg.num_labels},
          {"maxpool_ablation", cfg.maxpool_ablation},
          {"seed", cfg.seed}};
}

json to_json(const TrainConfig& cfg) {
  return {{"lr", cfg.lr},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"holdout", cfg.holdout},
          {"holdout_random", cfg.holdout_random},
          {"patience", cfg.patience},
          {"seed", cfg.seed}};
}

json to_json(const TrainerConfig& cfg) {
  return {{"dim", cfg.dim},
          {"epochs", cfg.epochs},
          {"window", cfg.window},
          {"negatives", cfg.negatives},
          {"min_count", cfg.min_count},
          {"initial_lr", cfg.initial_lr},
          {"subsample_t", cfg.subsample_t},
          {"min_n", cfg.ngrams.min_n},
          {"max_n", cfg.ngrams.max_n},
          {"buckets", cfg.buckets},
          {"threads", cfg.threads},
          {"seed", cfg.seed}};
}

ModelConfig model_config_from_json(const json& j, const std::string& ctx) {
  reject_unknown(j, {"emb_mode", "layer1", "upper_layers", "dropout", "num_labels",
                     "maxpool_ablation", "seed"},
                 ctx);
  ModelConfig cfg;
  std::string mode(to_string(cfg.emb_mode));
  read(j, "emb_mode", mode, ctx);
  cfg.emb_mode = parse_embedding_mode(mode);
  if (j.contains("layer1")) cfg.layer1 = groups_from_json(j["layer1"], ctx + ".layer1");
  if (j.contains("upper_layers")) {
    cfg.upper_layers = groups_from_json(j["upper_layers"], ctx + ".upper_layers");
  }
  read(j, "dropout", cfg.dropout_rate, ctx);
  read(j, "num_labels", cfg.num_labels, ctx);
  read(j, "maxpool_ablation", cfg.maxpool_ablation, ctx);
  read(j, "seed", cfg.seed, ctx);
  cfg.validate();
  return cfg;
}

TrainConfig train_config_from_json(const json& j, const std::string& ctx) {
  reject_unknown(j, {"lr", "epochs", "batch_size", "holdout", "holdout_random", "patience", "seed"},
                 ctx);
  TrainConfig cfg;
  read(j, "lr", cfg.lr, ctx);
  read(j, "epochs", cfg.epochs, ctx);
  read(j, "batch_size", cfg.batch_size, ctx);
  read(j, "holdout", cfg.holdout, ctx);
  read(j, "holdout_random", cfg.holdout_random, ctx);
  read(j, "patience", cfg.patience, ctx);
  read(j, "seed", cfg.seed, ctx);
  cfg.validate();
  return cfg;
}

TrainerConfig trainer_config_from_json(const json& j, const std::string& ctx) {
  reject_unknown(j, {"dim", "epochs", "window", "negatives", "min_count", "initial_lr",
                     "subsample_t", "min_n", "max_n", "buckets", "threads", "seed"},
                 ctx);
  TrainerConfig cfg;
  read(j, "dim", cfg.dim, ctx);
  read(j, "epochs", cfg.epochs, ctx);
  read(j, "window", cfg.window, ctx);
  read(j, "negatives", cfg.negatives, ctx);
  read(j, "min_count", cfg.min_count, ctx);
  read(j, "initial_lr", cfg.initial_lr, ctx);
  read(j, "subsample_t", cfg.subsample_t, ctx);
  read(j, "min_n", cfg.ngrams.min_n, ctx);
  read(j, "max_n", cfg.ngrams.max_n, ctx);
  read(j, "buckets", cfg.buckets, ctx);
  read(j, "threads", cfg.threads, ctx);
  read(j, "seed", cfg.seed, ctx);
  cfg.validate();
  return cfg;
}

}  // namespace decnn
