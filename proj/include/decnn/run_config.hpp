#pragma once

// Experiment description shared by the command-line subcommands:
//
//   {
//     "paths": {"general_emb", "domain_emb", "train", "test", "corpus", "out_dir"},
//     "data_format": "jsonl_spans" | "conll_two_col",
//     "seed": 1, "runs": 1,
//     "model": {...}, "train": {...}, "embeddings": {...}
//   }
//
// Every key is optional; relative paths resolve against the config file's
// directory. Unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "decnn/corpus.hpp"
#include "decnn/domain_embed_trainer.hpp"
#include "decnn/model.hpp"
#include "decnn/train_eval.hpp"

namespace decnn {

struct RunPaths {
  std::optional<std::filesystem::path> general_emb;
  std::optional<std::filesystem::path> domain_emb;
  std::optional<std::filesystem::path> train;
  std::optional<std::filesystem::path> test;
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> out_dir;
};

struct RunConfig {
  RunPaths paths;
  DataFormat data_format = DataFormat::jsonl_spans;
  std::uint64_t seed = 1;
  int runs = 1;
  ModelConfig model;
  TrainConfig train;
  TrainerConfig embeddings;

  /// Applies one seed to the model, training and embedding trainer.
  void set_seed(std::uint64_t s);
};

/// Throws ParameterError on unknown keys or invalid values.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

/// Names ("paths.train", ...) of the paths a subcommand needs but the config
/// leaves unset; the embedding tables required depend on the model's mode.
std::vector<std::string> missing_paths(const RunConfig& cfg, bool need_train, bool need_test);

}  // namespace decnn
