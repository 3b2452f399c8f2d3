#pragma once

// Mini-batch Adam training with validation-based snapshot selection, exact
// span-match evaluation, and the multi-run averaging protocol.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "json.hpp"

#include "decnn/corpus.hpp"
#include "decnn/model.hpp"

namespace decnn {

struct TrainConfig {
  double lr = 1e-4;
  int epochs = 200;
  int batch_size = 32;
  std::size_t holdout = 150;
  /// Hold out a seeded random subset instead of the last sentences.
  bool holdout_random = false;
  /// Stop after this many epochs without a validation improvement; 0 disables.
  int patience = 30;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Micro-averaged exact-match span counts. P = tp/predicted (0 when nothing
/// is predicted), R = tp/gold (0 when there is no gold span),
/// F1 = 2PR/(P+R) (0 when P+R = 0).
struct SpanScore {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Scores per-sentence span lists; a predicted span is a hit iff its offsets
/// equal a not-yet-matched gold span of the same sentence.
SpanScore score_spans(std::span<const std::vector<Span>> gold,
                      std::span<const std::vector<Span>> predicted);

/// Decodes per-sentence label sequences (with BIO repair) and scores them
/// against the dataset's gold spans.
SpanScore score_labels(const Dataset& dataset, std::span<const std::vector<Label>> predicted);

std::vector<std::vector<Label>> predict_dataset(const DeCnn<float>& model, const Dataset& dataset);

SpanScore evaluate(const DeCnn<float>& model, const Dataset& dataset);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  SpanScore validation;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_f1 = 0.0;
  /// True when validation fell back to the training split (no hold-out).
  bool validated_on_train = false;
};

/// Trains `model` in place and leaves it at the epoch snapshot with the best
/// validation F1 (earliest on ties). With an empty `validation` set the
/// training split is used for selection. Throws DataError on an empty
/// training set. Each finished epoch is written to `log_stream` as one JSON
/// line when given.
TrainingLog train(DeCnn<float>& model, const Dataset& training, const Dataset& validation,
                  const TrainConfig& cfg, std::ostream* log_stream = nullptr);

nlohmann::json to_json(const SpanScore& score);
nlohmann::json to_json(const EpochRecord& record);

struct EvalReport {
  std::vector<SpanScore> runs;
  std::vector<std::uint64_t> seeds;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;
  double stddev_f1 = 0.0;

  std::size_t run_count() const { return runs.size(); }
};

EvalReport summarize_runs(std::vector<SpanScore> runs, std::vector<std::uint64_t> seeds);
nlohmann::json to_json(const EvalReport& report);

struct ProtocolInputs {
  ModelConfig model;
  TrainConfig train;
  std::shared_ptr<const DualEmbedder> embedder;
  Dataset training;
  Dataset test;
};

enum class SeedSchedule { increment, fixed };

/// Trains `runs` independent models with seeds seed, seed+1, ... (or the same
/// seed every run under SeedSchedule::fixed), evaluates each on the test
/// split and reports per-run scores and their mean.
EvalReport run_protocol(const ProtocolInputs& inputs, int runs, std::uint64_t seed,
                        SeedSchedule schedule = SeedSchedule::increment,
                        std::ostream* log_stream = nullptr);

}  // namespace decnn
