#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "decnn/domain_embed_trainer.hpp"
#include "decnn/errors.hpp"
#include "test_support.hpp"

using namespace decnn;

namespace {

TrainerConfig small_config() {
  TrainerConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 3;
  cfg.min_count = 1;
  cfg.buckets = 5000;
  cfg.subsample_t = 1e-2;
  return cfg;
}

}  // namespace

TEST_CASE("vocabulary counts, cutoff and ordering") {
  const std::vector<std::string> lines{"b a c a", "  a b\td  ", "", "e"};
  TrainerConfig cfg;
  cfg.min_count = 2;
  const auto stats = build_vocab(lines, cfg);
  CHECK(stats.words == std::vector<std::string>{"a", "b"});
  CHECK(stats.counts == std::vector<std::int64_t>{3, 2});
  CHECK(stats.total_tokens == 8);
  CHECK(stats.retained_tokens == 5);
  CHECK(stats.index.at("b") == 1);

  cfg.min_count = 1;
  const auto all = build_vocab(lines, cfg);
  // Ties on count break bytewise.
  CHECK(all.words == std::vector<std::string>{"a", "b", "c", "d", "e"});
  double z = 0;
  for (auto c : all.counts) z += std::pow(double(c), 0.75);
  double sum = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all.negative_distribution[i] == doctest::Approx(std::pow(double(all.counts[i]), 0.75) / z));
    sum += all.negative_distribution[i];
  }
  CHECK(sum == doctest::Approx(1.0));

  const std::vector<std::string> blank{"", "   "};
  CHECK_THROWS_AS(build_vocab(blank, cfg), DataError);
}

TEST_CASE("negative sampler follows its distribution") {
  const std::vector<double> dist{0.5, 0.3, 0.2, 0.0};
  const NegativeSampler sampler(dist);
  Rng rng(17);
  std::vector<int> hist(4, 0);
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) ++hist[static_cast<std::size_t>(sampler.sample(rng))];
  CHECK(hist[3] == 0);
  for (std::size_t i = 0; i < 3; ++i) {
    // Binomial standard error is at most ~0.0012 here; allow 5 sigma.
    CHECK(std::abs(double(hist[i]) / draws - dist[i]) < 0.006);
  }
  CHECK_THROWS_AS(NegativeSampler(std::vector<double>{}), DataError);
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    TrainerConfig cfg;
    mutate(cfg);
    return cfg;
  };
  CHECK_THROWS_AS(bad([](auto& c) { c.dim = 0; }).validate(), ParameterError);
  CHECK_THROWS_AS(bad([](auto& c) { c.window = 0; }).validate(), ParameterError);
  CHECK_THROWS_AS(bad([](auto& c) { c.ngrams = {4, 3}; }).validate(), ParameterError);
  CHECK_THROWS_AS(bad([](auto& c) { c.initial_lr = 0; }).validate(), ParameterError);
  CHECK_THROWS_AS(bad([](auto& c) { c.threads = 0; }).validate(), ParameterError);
  CHECK_NOTHROW(TrainerConfig{}.validate());
}

TEST_CASE("single-threaded training is reproducible from the seed") {
  const auto corpus = testing::make_community_corpus(3, 3000, 10);
  const auto cfg = small_config();
  const auto a = train_embeddings(corpus.lines, cfg);
  const auto b = train_embeddings(corpus.lines, cfg);
  CHECK(a.table.words() == b.table.words());
  CHECK(a.table.vectors() == b.table.vectors());
  CHECK(a.log.epoch_loss == b.log.epoch_loss);

  auto other = cfg;
  other.seed = 2;
  CHECK(train_embeddings(corpus.lines, other).table.vectors() != a.table.vectors());
}

TEST_CASE("training loss falls and vectors stay finite") {
  const auto corpus = testing::make_community_corpus(4, 5000, 10);
  auto cfg = small_config();
  cfg.epochs = 5;
  const auto result = train_embeddings(corpus.lines, cfg);
  REQUIRE(result.log.epoch_loss.size() == 5);
  CHECK(result.log.pairs > 0);
  CHECK(result.log.epoch_loss.back() < result.log.epoch_loss.front());
  CHECK(result.table.vectors().allFinite());
  CHECK(result.table.size() == 20);
  CHECK(result.table.dim() == 16);
}

TEST_CASE("exported table carries the trained n-gram buckets") {
  const std::vector<std::string> lines(50, "the pizza crust was crisp and the sauce was rich");
  auto cfg = small_config();
  cfg.buckets = kDefaultBucketCount;
  const auto result = train_embeddings(lines, cfg);
  const auto& sub = result.table.subwords();
  CHECK(sub.bucket_count == cfg.buckets);
  CHECK(sub.range == cfg.ngrams);
  // Only buckets touched by vocabulary words are stored.
  std::set<std::uint32_t> touched;
  for (const auto& w : result.table.words()) {
    for (auto b : ngram_buckets(w, cfg.ngrams, cfg.buckets)) touched.insert(b);
  }
  CHECK(sub.rows.size() == touched.size());
  for (const auto& [b, row] : sub.rows) CHECK(touched.contains(b));

  // An unseen word sharing n-grams gets a nonzero composed vector; one
  // sharing none gets zeros.
  CHECK(!result.table.vector("pizzas").isZero());
  CHECK(result.table.vector("qqqq").isZero());
}

TEST_CASE("multi-threaded training runs and stays finite") {
  const auto corpus = testing::make_community_corpus(5, 4000, 10);
  auto cfg = small_config();
  cfg.threads = 3;
  const auto result = train_embeddings(corpus.lines, cfg);
  CHECK(result.table.vectors().allFinite());
  CHECK(result.log.epoch_loss.size() == 3);
}

TEST_CASE("corpus edge cases") {
  auto cfg = small_config();
  cfg.min_count = 100;
  const std::vector<std::string> lines{"rare words only"};
  CHECK_THROWS_AS(train_embeddings(lines, cfg), DataError);

  std::istringstream in("one two\n\nthree\n");
  CHECK(read_corpus_lines(in).size() == 3);
  CHECK_THROWS_AS(read_corpus_lines(std::filesystem::path(DECNN_TEST_TMP) / "nope.txt"), IoError);

  // A one-word vocabulary has no negatives to draw but still trains.
  cfg.min_count = 1;
  const std::vector<std::string> mono{"same same same same"};
  CHECK(train_embeddings(mono, cfg).table.size() == 1);

  CHECK_THROWS_AS(export_table(EmbeddingTable{}, std::filesystem::path(DECNN_TEST_TMP) / "x.vec"),
                  DataError);
}
