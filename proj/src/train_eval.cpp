#include "decnn/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "decnn/errors.hpp"

namespace decnn {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ParameterError("learning rate must be positive");
  if (epochs < 1) throw ParameterError("epochs must be at least 1");
  if (batch_size < 1) throw ParameterError("batch_size must be at least 1");
  if (patience < 0) throw ParameterError("patience must be non-negative");
}

namespace {

SpanScore finish_score(std::size_t tp, std::size_t predicted, std::size_t gold) {
  SpanScore s;
  s.true_positives = tp;
  s.predicted = predicted;
  s.gold = gold;
  s.precision = predicted > 0 ? double(tp) / double(predicted) : 0.0;
  s.recall = gold > 0 ? double(tp) / double(gold) : 0.0;
  const double sum = s.precision + s.recall;
  s.f1 = sum > 0.0 ? 2.0 * s.precision * s.recall / sum : 0.0;
  return s;
}

struct EncodedSplit {
  std::vector<SeqTensor<float>> inputs;
  std::vector<std::vector<int>> labels;
  /// Dataset index of each encoded sentence (sentences without tokens are skipped).
  std::vector<std::size_t> source;
};

EncodedSplit encode(const DeCnn<float>& model, const Dataset& ds) {
  EncodedSplit out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds.sentences[i];
    if (s.tokens.empty()) continue;
    out.inputs.push_back(model.embed(s.words()));
    out.labels.push_back(s.label_indices());
    out.source.push_back(i);
  }
  return out;
}

std::vector<std::vector<Label>> predict_encoded(const DeCnn<float>& model, const Dataset& ds,
                                                const EncodedSplit& enc) {
  std::vector<std::vector<Label>> predicted(ds.size());
  Rng unused(0);
  for (std::size_t k = 0; k < enc.inputs.size(); ++k) {
    predicted[enc.source[k]] =
        DeCnn<float>::argmax_labels(model.forward_input(enc.inputs[k], false, unused));
  }
  return predicted;
}

// Shuffled batches of similar-length sentences: shuffle, sort by length within
// pools of several batches, cut, then shuffle batch order.
std::vector<std::vector<std::size_t>> make_batches(const EncodedSplit& enc, int batch_size,
                                                   Rng& rng) {
  const std::size_t n = enc.inputs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto shuffle = [&](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * double(i));
      std::swap(v[i - 1], v[j]);
    }
  };
  shuffle(order);
  const auto bs = static_cast<std::size_t>(batch_size);
  const std::size_t pool = bs * 8;
  for (std::size_t p = 0; p < n; p += pool) {
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(n, p + pool));
    std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(p), last,
                     [&](std::size_t a, std::size_t b) {
                       return enc.inputs[a].rows() < enc.inputs[b].rows();
                     });
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < n; b += bs) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + bs)));
  }
  shuffle(batches);
  return batches;
}

}  // namespace

SpanScore score_spans(std::span<const std::vector<Span>> gold,
                      std::span<const std::vector<Span>> predicted) {
  if (gold.size() != predicted.size()) {
    throw DimensionError("score_spans: " + std::to_string(predicted.size()) +
                         " predicted sentences for " + std::to_string(gold.size()) + " gold");
  }
  std::size_t tp = 0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    n_gold += gold[s].size();
    n_pred += predicted[s].size();
    std::vector<bool> used(gold[s].size(), false);
    for (const Span& p : predicted[s]) {
      for (std::size_t g = 0; g < gold[s].size(); ++g) {
        if (!used[g] && gold[s][g] == p) {
          used[g] = true;
          ++tp;
          break;
        }
      }
    }
  }
  return finish_score(tp, n_pred, n_gold);
}

SpanScore score_labels(const Dataset& dataset, std::span<const std::vector<Label>> predicted) {
  if (predicted.size() != dataset.size()) {
    throw DimensionError("score_labels: prediction count does not match dataset size");
  }
  std::vector<std::vector<Span>> gold;
  std::vector<std::vector<Span>> pred;
  gold.reserve(dataset.size());
  pred.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset.sentences[i];
    gold.push_back(s.spans);
    pred.push_back(bio_to_spans(s.tokens, predicted[i]));
  }
  return score_spans(gold, pred);
}

std::vector<std::vector<Label>> predict_dataset(const DeCnn<float>& model, const Dataset& dataset) {
  return predict_encoded(model, dataset, encode(model, dataset));
}

SpanScore evaluate(const DeCnn<float>& model, const Dataset& dataset) {
  return score_labels(dataset, predict_dataset(model, dataset));
}

nlohmann::json to_json(const SpanScore& s) {
  return {{"precision", s.precision}, {"recall", s.recall},       {"f1", s.f1},
          {"true_positives", s.true_positives}, {"predicted_spans", s.predicted},
          {"gold_spans", s.gold}};
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"mean_loss", r.mean_loss},
          {"val_precision", r.validation.precision},
          {"val_recall", r.validation.recall},
          {"val_f1", r.validation.f1}};
}

TrainingLog train(DeCnn<float>& model, const Dataset& training, const Dataset& validation,
                  const TrainConfig& cfg, std::ostream* log_stream) {
  cfg.validate();
  const EncodedSplit train_enc = encode(model, training);
  if (train_enc.inputs.empty()) throw DataError("training set has no tokenized sentences");

  TrainingLog log;
  log.validated_on_train = validation.empty();
  const Dataset& selection = log.validated_on_train ? training : validation;
  const EncodedSplit selection_enc = log.validated_on_train ? train_enc : encode(model, selection);

  Rng shuffle_rng = make_rng(cfg.seed, "shuffle");
  Rng dropout_rng = make_rng(cfg.seed, "dropout");
  AdamState<float> adam;
  adam.lr = cfg.lr;
  ForwardTrace<float> trace;

  DeCnn<float> best = model;
  log.best_f1 = -1.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& batch : make_batches(train_enc, cfg.batch_size, shuffle_rng)) {
      model.zero_grad();
      const float scale = 1.0f / static_cast<float>(batch.size());
      for (std::size_t idx : batch) {
        model.forward_input(train_enc.inputs[idx], true, dropout_rng, &trace);
        loss_sum += model.backward(trace, train_enc.labels[idx], scale);
      }
      const auto slots = model.parameter_slots();
      adam_step<float>(slots, adam);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = loss_sum / double(train_enc.inputs.size());
    record.validation =
        score_labels(selection, predict_encoded(model, selection, selection_enc));
    log.epochs.push_back(record);
    if (log_stream) *log_stream << to_json(record).dump() << '\n' << std::flush;

    if (record.validation.f1 > log.best_f1) {
      log.best_f1 = record.validation.f1;
      log.best_epoch = epoch;
      best = model;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  model = std::move(best);
  return log;
}

EvalReport summarize_runs(std::vector<SpanScore> runs, std::vector<std::uint64_t> seeds) {
  EvalReport r;
  r.runs = std::move(runs);
  r.seeds = std::move(seeds);
  if (r.runs.empty()) return r;
  const double n = double(r.runs.size());
  for (const auto& s : r.runs) {
    r.mean_precision += s.precision;
    r.mean_recall += s.recall;
    r.mean_f1 += s.f1;
  }
  r.mean_precision /= n;
  r.mean_recall /= n;
  r.mean_f1 /= n;
  if (r.runs.size() > 1) {
    double ss = 0.0;
    for (const auto& s : r.runs) ss += (s.f1 - r.mean_f1) * (s.f1 - r.mean_f1);
    r.stddev_f1 = std::sqrt(ss / (n - 1.0));
  }
  return r;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    auto j = to_json(report.runs[i]);
    if (i < report.seeds.size()) j["seed"] = report.seeds[i];
    runs.push_back(std::move(j));
  }
  return {{"run_count", report.run_count()},   {"mean_precision", report.mean_precision},
          {"mean_recall", report.mean_recall}, {"mean_f1", report.mean_f1},
          {"stddev_f1", report.stddev_f1},     {"runs", std::move(runs)}};
}

EvalReport run_protocol(const ProtocolInputs& inputs, int runs, std::uint64_t seed,
                        SeedSchedule schedule, std::ostream* log_stream) {
  if (runs < 1) throw ParameterError("run_protocol needs at least one run");
  if (!inputs.embedder) throw ParameterError("run_protocol needs an embedder");
  std::vector<SpanScore> scores;
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < runs; ++r) {
    const std::uint64_t s = schedule == SeedSchedule::increment ? seed + std::uint64_t(r) : seed;
    ModelConfig mcfg = inputs.model;
    mcfg.seed = s;
    TrainConfig tcfg = inputs.train;
    tcfg.seed = s;
    auto [kept, held] = hold_out(inputs.training, tcfg.holdout,
                                 tcfg.holdout_random ? std::optional<std::uint64_t>(s) : std::nullopt);
    DeCnn<float> model(mcfg, inputs.embedder);
    if (log_stream) *log_stream << nlohmann::json{{"run", r + 1}, {"seed", s}}.dump() << '\n';
    train(model, kept, held, tcfg, log_stream);
    scores.push_back(evaluate(model, inputs.test));
    seeds.push_back(s);
  }
  return summarize_runs(std::move(scores), std::move(seeds));
}

}  // namespace decnn
