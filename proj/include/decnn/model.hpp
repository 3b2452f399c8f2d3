#pragma once

// Dual-embedding CNN tagger:
//
//   tokens -> [general | domain] lookup (frozen) -> dropout
//          -> layer 1: parallel filter groups (e.g. k=3 and k=5), concatenated
//          -> upper layers: one filter group each
//          (every conv layer: same padding, ReLU, dropout)
//          -> position-shared linear -> row softmax over {B, I, O}
//
// With the max-pool ablation the last ReLU output is replaced by its
// per-channel maximum over positions, broadcast back to every position.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "decnn/corpus.hpp"
#include "decnn/embeddings.hpp"
#include "decnn/tensor.hpp"

namespace decnn {

struct FilterGroup {
  int filters = 0;
  int kernel = 1;

  bool operator==(const FilterGroup&) const = default;
};

struct ModelConfig {
  EmbeddingMode emb_mode = EmbeddingMode::dual;
  std::vector<FilterGroup> layer1 = {{128, 3}, {128, 5}};
  std::vector<FilterGroup> upper_layers = {{256, 5}, {256, 5}, {256, 5}};
  double dropout_rate = 0.55;
  int num_labels = kNumLabels;
  bool maxpool_ablation = false;
  std::uint64_t seed = 1;

  /// Throws ParameterError on even kernels, empty layer 1, bad dropout, or
  /// a label count other than three.
  void validate() const;
  Index layer1_channels() const;
  /// Channel count entering the linear layer.
  Index feature_channels() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Intermediates of one conv layer kept for the backward pass.
template <typename Scalar>
struct ConvStageTrace {
  SeqTensor<Scalar> input;
  std::vector<SeqTensor<Scalar>> pre_activation;  // one per filter group
  SeqTensor<Scalar> activation;                   // ReLU output, groups concatenated
  std::vector<Index> pool_argmax;                 // max-pool ablation only
  SeqTensor<Scalar> dropout_mask;
  SeqTensor<Scalar> output;
};

template <typename Scalar>
struct ForwardTrace {
  bool recorded = false;
  SeqTensor<Scalar> embedded;
  SeqTensor<Scalar> embed_mask;
  std::vector<ConvStageTrace<Scalar>> stages;
  SeqTensor<Scalar> logits;
  SeqTensor<Scalar> probs;
};

template <typename Scalar>
class DeCnn {
 public:
  /// Glorot-initialized from `config.seed`, without an embedder; feed inputs
  /// through forward_input().
  DeCnn(ModelConfig config, Index input_dim) : config_(std::move(config)), input_dim_(input_dim) {
    config_.validate();
    if (input_dim_ < 1) throw ParameterError("model input dimension must be positive");
    build();
  }

  DeCnn(ModelConfig config, std::shared_ptr<const DualEmbedder> embedder)
      : DeCnn(std::move(config), embedder ? embedder->dim() : Index(0)) {
    if (embedder->mode() != config_.emb_mode) {
      throw ParameterError("embedder mode '" + std::string(to_string(embedder->mode())) +
                           "' does not match configured mode '" +
                           std::string(to_string(config_.emb_mode)) + "'");
    }
    embedder_ = std::move(embedder);
  }

  const ModelConfig& config() const { return config_; }
  Index input_dim() const { return input_dim_; }
  const std::shared_ptr<const DualEmbedder>& embedder() const { return embedder_; }

  void attach_embedder(std::shared_ptr<const DualEmbedder> embedder) {
    if (!embedder) throw ParameterError("attach_embedder: null embedder");
    if (embedder->mode() != config_.emb_mode || embedder->dim() != input_dim_) {
      throw DimensionError("embedder (" + std::string(to_string(embedder->mode())) + ", dim " +
                           std::to_string(embedder->dim()) + ") does not fit model (" +
                           std::string(to_string(config_.emb_mode)) + ", dim " +
                           std::to_string(input_dim_) + ")");
    }
    embedder_ = std::move(embedder);
  }

  /// Toggles the max-pool ablation on an existing set of parameters.
  void set_maxpool_ablation(bool on) { config_.maxpool_ablation = on; }

  std::vector<ConvLayerParams<Scalar>>& layer1() { return layer1_; }
  const std::vector<ConvLayerParams<Scalar>>& layer1() const { return layer1_; }
  std::vector<ConvLayerParams<Scalar>>& upper_layers() { return upper_; }
  const std::vector<ConvLayerParams<Scalar>>& upper_layers() const { return upper_; }
  LinearParams<Scalar>& output_layer() { return output_; }
  const LinearParams<Scalar>& output_layer() const { return output_; }

  SeqTensor<Scalar> embed(std::span<const std::string> tokens) const {
    if (!embedder_) throw StateError("model has no embedder attached");
    return embedder_->lookup(tokens).template cast<Scalar>();
  }

  /// Label distributions (n x 3) for a token sequence.
  SeqTensor<Scalar> forward(std::span<const std::string> tokens, bool training, Rng& rng) const {
    return forward_input(embed(tokens), training, rng);
  }

  /// Same as forward() but insists on the max-pool ablation being enabled.
  SeqTensor<Scalar> forward_maxpool_ablation(std::span<const std::string> tokens, bool training,
                                             Rng& rng) const {
    if (!config_.maxpool_ablation) {
      throw UsageError("forward_maxpool_ablation called on a model without the max-pool ablation");
    }
    return forward(tokens, training, rng);
  }

  /// Forward pass from an already embedded (n x input_dim) tensor. When
  /// `trace` is given every intermediate needed by backward() is stored.
  SeqTensor<Scalar> forward_input(const SeqTensor<Scalar>& embedded, bool training, Rng& rng,
                                  ForwardTrace<Scalar>* trace = nullptr) const {
    if (embedded.rows() < 1) throw DataError("forward: empty sequence");
    if (embedded.cols() != input_dim_) {
      throw DimensionError("forward: input has " + std::to_string(embedded.cols()) +
                           " channels, model expects " + std::to_string(input_dim_));
    }
    const Index n = embedded.rows();
    auto x = dropout(embedded, config_.dropout_rate, rng, training);
    if (trace) {
      trace->recorded = false;
      trace->embedded = embedded;
      trace->embed_mask = x.mask;
      trace->stages.clear();
    }
    SeqTensor<Scalar> h = std::move(x.output);

    const std::size_t stage_count = 1 + upper_.size();
    for (std::size_t s = 0; s < stage_count; ++s) {
      const bool last = s + 1 == stage_count;
      std::span<const ConvLayerParams<Scalar>> groups =
          s == 0 ? std::span<const ConvLayerParams<Scalar>>(layer1_)
                 : std::span<const ConvLayerParams<Scalar>>(&upper_[s - 1], 1);

      ConvStageTrace<Scalar> st;
      Index channels = 0;
      for (const auto& g : groups) channels += g.out_channels;
      SeqTensor<Scalar> act(n, channels);
      Index col = 0;
      for (const auto& g : groups) {
        SeqTensor<Scalar> pre = conv1d_same(h, g);
        act.middleCols(col, g.out_channels) = relu(pre);
        col += g.out_channels;
        if (trace) st.pre_activation.push_back(std::move(pre));
      }
      SeqTensor<Scalar> pooled;
      if (last && config_.maxpool_ablation) {
        st.pool_argmax.resize(static_cast<std::size_t>(channels));
        pooled.resize(n, channels);
        for (Index c = 0; c < channels; ++c) {
          Index arg = 0;
          for (Index i = 1; i < n; ++i) {
            if (act(i, c) > act(arg, c)) arg = i;
          }
          st.pool_argmax[static_cast<std::size_t>(c)] = arg;
          pooled.col(c).setConstant(act(arg, c));
        }
      }
      auto dropped = dropout(pooled.size() ? pooled : act, config_.dropout_rate, rng, training);
      if (trace) {
        st.input = std::move(h);
        st.activation = std::move(act);
        st.dropout_mask = std::move(dropped.mask);
        st.output = dropped.output;
        trace->stages.push_back(std::move(st));
      }
      h = std::move(dropped.output);
    }

    SeqTensor<Scalar> logits = linear_positionwise(h, output_);
    SeqTensor<Scalar> probs = softmax_rows(logits);
    if (trace) {
      trace->logits = std::move(logits);
      trace->probs = probs;
      trace->recorded = true;
    }
    return probs;
  }

  /// Cross-entropy of the traced forward pass against `labels`, scaled by
  /// `scale`; accumulates parameter gradients and returns the unscaled loss.
  Scalar backward(const ForwardTrace<Scalar>& trace, std::span<const int> labels,
                  Scalar scale = Scalar(1)) {
    if (!trace.recorded) throw StateError("backward called before a recorded forward pass");
    LossResult<Scalar> loss = cross_entropy_loss(trace.probs, labels);
    backward_logits(trace, loss.grad_logits * scale);
    return loss.loss;
  }

  /// Backpropagates a gradient w.r.t. the pre-softmax logits. The embedded
  /// input receives no gradient.
  void backward_logits(const ForwardTrace<Scalar>& trace, const SeqTensor<Scalar>& grad_logits) {
    if (!trace.recorded) throw StateError("backward called before a recorded forward pass");
    const std::size_t stage_count = trace.stages.size();
    SeqTensor<Scalar> grad =
        linear_positionwise_backward(trace.stages.back().output, output_, grad_logits);

    for (std::size_t s = stage_count; s-- > 0;) {
      const auto& st = trace.stages[s];
      SeqTensor<Scalar> grad_act = dropout_backward(st.dropout_mask, grad);
      if (!st.pool_argmax.empty()) {
        SeqTensor<Scalar> unpooled = SeqTensor<Scalar>::Zero(grad_act.rows(), grad_act.cols());
        for (Index c = 0; c < grad_act.cols(); ++c) {
          unpooled(st.pool_argmax[static_cast<std::size_t>(c)], c) = grad_act.col(c).sum();
        }
        grad_act = std::move(unpooled);
      }
      std::span<ConvLayerParams<Scalar>> groups =
          s == 0 ? std::span<ConvLayerParams<Scalar>>(layer1_)
                 : std::span<ConvLayerParams<Scalar>>(&upper_[s - 1], 1);
      SeqTensor<Scalar> grad_in = SeqTensor<Scalar>::Zero(st.input.rows(), st.input.cols());
      Index col = 0;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        const Index width = groups[g].out_channels;
        const SeqTensor<Scalar> grad_pre =
            relu_backward(st.pre_activation[g], SeqTensor<Scalar>(grad_act.middleCols(col, width)));
        col += width;
        if (s == 0) {
          // Frozen embeddings: only parameter gradients are needed here.
          conv1d_same_backward(st.input, groups[g], grad_pre);
        } else {
          grad_in += conv1d_same_backward(st.input, groups[g], grad_pre);
        }
      }
      if (s == 0) break;
      // This stage's input is the previous stage's (dropped-out) output.
      grad = std::move(grad_in);
    }
  }

  void zero_grad() {
    for (auto& g : layer1_) g.zero_grad();
    for (auto& g : upper_) g.zero_grad();
    output_.zero_grad();
  }

  /// Every trainable tensor with its gradient, in a fixed order.
  std::vector<ParamSlot<Scalar>> parameter_slots() {
    std::vector<ParamSlot<Scalar>> slots;
    auto add_conv = [&](ConvLayerParams<Scalar>& p) {
      slots.push_back(param_slot(p.weights, p.weight_grad));
      slots.push_back(param_slot(p.bias, p.bias_grad));
    };
    for (auto& g : layer1_) add_conv(g);
    for (auto& g : upper_) add_conv(g);
    slots.push_back(param_slot(output_.weights, output_.weight_grad));
    slots.push_back(param_slot(output_.bias, output_.bias_grad));
    return slots;
  }

  /// Inference-mode argmax per position; ties go to the lowest label index.
  std::vector<Label> predict_labels(std::span<const std::string> tokens) const {
    Rng unused(0);
    return argmax_labels(forward(tokens, false, unused));
  }

  static std::vector<Label> argmax_labels(const SeqTensor<Scalar>& probs) {
    std::vector<Label> labels(static_cast<std::size_t>(probs.rows()));
    for (Index i = 0; i < probs.rows(); ++i) {
      Index best = 0;
      for (Index c = 1; c < probs.cols(); ++c) {
        if (probs(i, c) > probs(i, best)) best = c;
      }
      labels[static_cast<std::size_t>(i)] = static_cast<Label>(best);
    }
    return labels;
  }

 private:
  void build() {
    Rng rng = make_rng(config_.seed, "init");
    layer1_.clear();
    upper_.clear();
    for (const auto& g : config_.layer1) {
      layer1_.emplace_back(input_dim_, g.filters, g.kernel);
      layer1_.back().init_glorot(rng);
    }
    Index channels = config_.layer1_channels();
    for (const auto& g : config_.upper_layers) {
      upper_.emplace_back(channels, g.filters, g.kernel);
      upper_.back().init_glorot(rng);
      channels = g.filters;
    }
    output_ = LinearParams<Scalar>(channels, config_.num_labels);
    output_.init_glorot(rng);
  }

  ModelConfig config_;
  Index input_dim_ = 0;
  std::shared_ptr<const DualEmbedder> embedder_;
  std::vector<ConvLayerParams<Scalar>> layer1_;
  std::vector<ConvLayerParams<Scalar>> upper_;
  LinearParams<Scalar> output_;
};

}  // namespace decnn
