#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "decnn/errors.hpp"
#include "decnn/model_io.hpp"
#include "test_support.hpp"

using namespace decnn;
namespace fs = std::filesystem;

namespace {

struct Saved {
  fs::path dir;
  fs::path model;
  fs::path general;
  fs::path domain;
};

Saved save_toy(const std::string& name, EmbeddingMode mode = EmbeddingMode::dual) {
  Saved s;
  s.dir = fs::path(DECNN_TEST_TMP) / "model_io" / name;
  fs::create_directories(s.dir);
  s.model = s.dir / "model.bin";
  s.general = s.dir / "general.vec";
  s.domain = s.dir / "domain.vec";
  const auto task = testing::make_overfit_task(2, 4);
  save_table(*task.general, s.general);
  save_table(*task.domain, s.domain);
  auto embedder = std::make_shared<const DualEmbedder>(
      std::make_shared<const EmbeddingTable>(load_table(s.general)),
      std::make_shared<const EmbeddingTable>(load_table(s.domain)), mode);
  auto cfg = testing::tiny_config(mode);
  cfg.seed = 77;
  DeCnn<float> model(cfg, embedder);
  ModelSources sources;
  if (mode != EmbeddingMode::domain_only) sources.general = EmbeddingRef{s.general};
  if (mode != EmbeddingMode::general_only) sources.domain = EmbeddingRef{s.domain};
  save_model(model, s.model, sources);
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary).write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("save and load reproduce parameters and predictions exactly") {
  const Saved s = save_toy("roundtrip");
  const LoadedModel loaded = load_model(s.model);
  auto cfg = testing::tiny_config();
  cfg.seed = 77;
  CHECK(loaded.model.config() == cfg);

  const auto task = testing::make_overfit_task(2, 4);
  auto embedder = std::make_shared<const DualEmbedder>(task.general, task.domain, EmbeddingMode::dual);
  DeCnn<float> fresh(cfg, embedder);
  CHECK(loaded.model.layer1()[1].weights == fresh.layer1()[1].weights);
  CHECK(loaded.model.upper_layers()[2].bias == fresh.upper_layers()[2].bias);
  CHECK(loaded.model.output_layer().weights == fresh.output_layer().weights);

  for (const auto& sent : task.data.sentences) {
    CHECK(loaded.model.predict_labels(sent.words()) == fresh.predict_labels(sent.words()));
  }
  REQUIRE(loaded.sources.general);
  CHECK(loaded.sources.general->path == fs::absolute(s.general));
  CHECK(loaded.sources.general->hash == hash_file(s.general));
}

TEST_CASE("single-table models reference only their table") {
  const Saved s = save_toy("general_only", EmbeddingMode::general_only);
  fs::remove(s.domain);
  const LoadedModel loaded = load_model(s.model);
  CHECK(!loaded.sources.domain);
  CHECK(loaded.model.embedder()->mode() == EmbeddingMode::general_only);
}

TEST_CASE("a flipped byte fails the checksum") {
  const Saved s = save_toy("corrupt");
  std::string bytes = slurp(s.model);
  bytes[bytes.size() / 2] ^= 0x40;
  spit(s.model, bytes);
  CHECK_THROWS_AS(read_model_parameters(s.model), IntegrityError);
}

TEST_CASE("truncated or foreign files are format errors") {
  const Saved s = save_toy("truncated");
  const std::string bytes = slurp(s.model);
  spit(s.model, bytes.substr(0, 10));
  CHECK_THROWS_AS(read_model_parameters(s.model), FormatError);
  spit(s.model, "not a model at all, clearly not a model");
  CHECK_THROWS_AS(read_model_parameters(s.model), FormatError);
  CHECK_THROWS_AS(read_model_parameters(s.dir / "absent.bin"), IoError);
}

TEST_CASE("changed or missing embedding files are detected") {
  const Saved s = save_toy("embeddings_changed");
  {
    std::ofstream out(s.domain, std::ios::app);
    out << "extra 0 0 0 0\n";
  }
  CHECK_THROWS_AS(load_model(s.model), IntegrityError);
  // Parameters alone still load.
  CHECK_NOTHROW(read_model_parameters(s.model));

  const Saved m = save_toy("embeddings_missing");
  fs::remove(m.general);
  CHECK_THROWS_WITH_AS(load_model(m.model), doctest::Contains("general.vec"), IoError);
}

TEST_CASE("header tampering with a recomputed checksum is a format error") {
  const Saved s = save_toy("tampered_header");
  std::string bytes = slurp(s.model);
  const auto at = bytes.find("\"input_dim\"");
  REQUIRE(at != std::string::npos);
  bytes.replace(at, 11, "\"inpux_dim\"");
  Fnv1a64 h;
  h.update(bytes.data(), bytes.size() - 8);
  std::uint64_t d = h.digest();
  for (int i = 0; i < 8; ++i) bytes[bytes.size() - 8 + std::size_t(i)] = char((d >> (8 * i)) & 0xFF);
  spit(s.model, bytes);
  CHECK_THROWS_AS(read_model_parameters(s.model), FormatError);
}
