#pragma once

// JSON (de)serialization of the configuration structs. Readers start from
// the defaults, override the keys present, and reject unknown keys.

#include "json.hpp"

#include "decnn/domain_embed_trainer.hpp"
#include "decnn/model.hpp"
#include "decnn/train_eval.hpp"

namespace decnn {

nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const TrainerConfig& cfg);

/// `context` prefixes error messages (e.g. "config section 'model'").
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& context = "model");
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& context = "train");
TrainerConfig trainer_config_from_json(const nlohmann::json& j,
                                       const std::string& context = "embeddings");

}  // namespace decnn
