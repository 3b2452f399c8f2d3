#include "decnn/run_config.hpp"

#include <fstream>
#include <set>

#include "decnn/config_json.hpp"
#include "decnn/errors.hpp"

namespace decnn {

namespace {

using nlohmann::json;

void read_path(const json& paths, const char* key, std::optional<std::filesystem::path>& out,
               const std::filesystem::path& base) {
  if (!paths.contains(key)) return;
  const json& v = paths.at(key);
  if (v.is_null()) return;
  if (!v.is_string()) throw ParameterError(std::string("paths.") + key + " must be a string");
  std::filesystem::path p = v.get<std::string>();
  out = p.is_absolute() ? p : base / p;
}

}  // namespace

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  model.seed = s;
  train.seed = s;
  embeddings.seed = s;
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ParameterError("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    static const std::set<std::string> allowed{"paths", "data_format", "seed",      "runs",
                                               "model", "train",       "embeddings"};
    if (!allowed.contains(key)) throw ParameterError("config: unknown key '" + key + "'");
  }
  RunConfig cfg;
  if (j.contains("paths")) {
    const json& p = j["paths"];
    if (!p.is_object()) throw ParameterError("config.paths: expected an object");
    for (const auto& [key, value] : p.items()) {
      static const std::set<std::string> allowed{"general_emb", "domain_emb", "train",
                                                 "test",        "corpus",     "out_dir"};
      if (!allowed.contains(key)) throw ParameterError("config.paths: unknown key '" + key + "'");
    }
    read_path(p, "general_emb", cfg.paths.general_emb, base_dir);
    read_path(p, "domain_emb", cfg.paths.domain_emb, base_dir);
    read_path(p, "train", cfg.paths.train, base_dir);
    read_path(p, "test", cfg.paths.test, base_dir);
    read_path(p, "corpus", cfg.paths.corpus, base_dir);
    read_path(p, "out_dir", cfg.paths.out_dir, base_dir);
  }
  try {
    if (j.contains("data_format")) {
      cfg.data_format = parse_data_format(j["data_format"].get<std::string>());
    }
    if (j.contains("runs")) cfg.runs = j["runs"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  if (cfg.runs < 1) throw ParameterError("config: runs must be at least 1");
  cfg.model = model_config_from_json(j.value("model", json::object()), "config.model");
  cfg.train = train_config_from_json(j.value("train", json::object()), "config.train");
  cfg.embeddings =
      trainer_config_from_json(j.value("embeddings", json::object()), "config.embeddings");
  // A top-level seed is the default for every component that does not set
  // its own.
  if (j.contains("seed")) {
    if (!j.value("model", json::object()).contains("seed")) cfg.model.seed = cfg.seed;
    if (!j.value("train", json::object()).contains("seed")) cfg.train.seed = cfg.seed;
    if (!j.value("embeddings", json::object()).contains("seed")) cfg.embeddings.seed = cfg.seed;
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParameterError("config '" + path.string() + "': " + e.what());
  }
  return run_config_from_json(j, std::filesystem::absolute(path).parent_path());
}

json to_json(const RunConfig& cfg) {
  json paths = json::object();
  auto put = [&](const char* key, const std::optional<std::filesystem::path>& p) {
    if (p) paths[key] = p->string();
  };
  put("general_emb", cfg.paths.general_emb);
  put("domain_emb", cfg.paths.domain_emb);
  put("train", cfg.paths.train);
  put("test", cfg.paths.test);
  put("corpus", cfg.paths.corpus);
  put("out_dir", cfg.paths.out_dir);
  return {{"paths", paths},
          {"data_format", std::string(to_string(cfg.data_format))},
          {"seed", cfg.seed},
          {"runs", cfg.runs},
          {"model", to_json(cfg.model)},
          {"train", to_json(cfg.train)},
          {"embeddings", to_json(cfg.embeddings)}};
}

std::vector<std::string> missing_paths(const RunConfig& cfg, bool need_train, bool need_test) {
  std::vector<std::string> missing;
  if (cfg.model.emb_mode != EmbeddingMode::domain_only && !cfg.paths.general_emb) {
    missing.emplace_back("paths.general_emb");
  }
  if (cfg.model.emb_mode != EmbeddingMode::general_only && !cfg.paths.domain_emb) {
    missing.emplace_back("paths.domain_emb");
  }
  if (need_train && !cfg.paths.train) missing.emplace_back("paths.train");
  if (need_test && !cfg.paths.test) missing.emplace_back("paths.test");
  return missing;
}

}  // namespace decnn
