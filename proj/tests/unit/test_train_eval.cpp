#include "doctest.h"

#include <sstream>

#include "decnn/errors.hpp"
#include "decnn/train_eval.hpp"
#include "test_support.hpp"

using namespace decnn;

namespace {

std::vector<Label> L(std::string_view s) {
  std::vector<Label> out;
  for (char c : s) out.push_back(c == 'B' ? Label::B : c == 'I' ? Label::I : Label::O);
  return out;
}

Dataset sentences_with_labels(std::initializer_list<std::string_view> gold) {
  Dataset ds;
  for (auto g : gold) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < g.size(); ++i) words.push_back("w" + std::to_string(i));
    ds.sentences.push_back(sentence_from_tokens(words, L(g)));
  }
  return ds;
}

}  // namespace

TEST_CASE("exact-match scoring: hand-checked example") {
  // Gold: [0,2) and [3,4) in sentence 0, [1,2) in sentence 1.
  const Dataset ds = sentences_with_labels({"BIOB", "OBO"});
  // Prediction: first span too short, second exact; sentence 1 exact plus a
  // spurious span.
  const std::vector<std::vector<Label>> pred{L("BOOB"), L("BBO")};
  const SpanScore s = score_labels(ds, pred);
  CHECK(s.true_positives == 2);
  CHECK(s.predicted == 4);
  CHECK(s.gold == 3);
  CHECK(s.precision == doctest::Approx(0.5));
  CHECK(s.recall == doctest::Approx(2.0 / 3));
  CHECK(s.f1 == doctest::Approx(2 * 0.5 * (2.0 / 3) / (0.5 + 2.0 / 3)));
}

TEST_CASE("degenerate score cases") {
  const Dataset no_gold = sentences_with_labels({"OOO"});
  CHECK(score_labels(no_gold, std::vector<std::vector<Label>>{L("OOO")}).f1 == 0.0);
  const auto spurious = score_labels(no_gold, std::vector<std::vector<Label>>{L("BOO")});
  CHECK(spurious.precision == 0.0);
  CHECK(spurious.recall == 0.0);
  const Dataset gold = sentences_with_labels({"BOO"});
  const auto silent = score_labels(gold, std::vector<std::vector<Label>>{L("OOO")});
  CHECK(silent.precision == 0.0);
  CHECK(silent.recall == 0.0);
  CHECK(silent.f1 == 0.0);
  CHECK(score_labels(gold, std::vector<std::vector<Label>>{L("BOO")}).f1 == 1.0);
  // A stray I decodes as a span start.
  CHECK(score_labels(gold, std::vector<std::vector<Label>>{L("IOO")}).f1 == 1.0);
  CHECK_THROWS_AS(score_labels(gold, std::vector<std::vector<Label>>{}), DimensionError);
}

TEST_CASE("duplicate predicted spans count once") {
  const std::vector<std::vector<Span>> gold{{{0, 3}}};
  const std::vector<std::vector<Span>> pred{{{0, 3}, {0, 3}}};
  const auto s = score_spans(gold, pred);
  CHECK(s.true_positives == 1);
  CHECK(s.predicted == 2);
}

TEST_CASE("scoring agrees with the brute-force oracle on random sequences") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    Dataset ds;
    std::vector<std::vector<Label>> gold, pred;
    const int sentences = 1 + int(uniform01(rng) * 4);
    for (int s = 0; s < sentences; ++s) {
      const std::size_t len = 1 + std::size_t(uniform01(rng) * 7);
      std::vector<Label> g, p;
      for (std::size_t i = 0; i < len; ++i) {
        g.push_back(static_cast<Label>(int(uniform01(rng) * 3)));
        p.push_back(static_cast<Label>(int(uniform01(rng) * 3)));
      }
      std::vector<std::string> words(len, "x");
      ds.sentences.push_back(sentence_from_tokens(words, g));
      gold.push_back(g);
      pred.push_back(p);
    }
    const auto mine = score_labels(ds, pred);
    const auto oracle = testing::oracle_span_f1(gold, pred);
    CHECK(mine.precision == doctest::Approx(oracle.precision));
    CHECK(mine.recall == doctest::Approx(oracle.recall));
    CHECK(mine.f1 == doctest::Approx(oracle.f1));
  }
}

TEST_CASE("run summaries") {
  SpanScore a, b;
  a.precision = 0.8;
  a.recall = 0.6;
  a.f1 = 0.7;
  b.precision = 0.6;
  b.recall = 0.4;
  b.f1 = 0.5;
  const auto r = summarize_runs({a, b}, {1, 2});
  CHECK(r.run_count() == 2);
  CHECK(r.mean_precision == doctest::Approx(0.7));
  CHECK(r.mean_f1 == doctest::Approx(0.6));
  CHECK(r.stddev_f1 == doctest::Approx(std::sqrt(0.02)));
  const auto j = to_json(r);
  CHECK(j["runs"].size() == 2);
  CHECK(j["runs"][1]["seed"] == 2);
  CHECK(summarize_runs({a}, {1}).stddev_f1 == 0.0);
}

TEST_CASE("training config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = {};
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("training logs one JSON line per epoch and keeps the best snapshot") {
  const auto task = testing::make_overfit_task(5, 12);
  auto embedder = std::make_shared<const DualEmbedder>(task.general, task.domain, EmbeddingMode::dual);
  DeCnn<float> model(testing::tiny_config(), embedder);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 4;
  cfg.lr = 1e-3;
  cfg.patience = 0;
  auto [kept, held] = hold_out(task.data, 4);
  std::ostringstream log_text;
  const TrainingLog log = train(model, kept, held, cfg, &log_text);
  REQUIRE(log.epochs.size() == 6);
  CHECK(!log.validated_on_train);
  std::istringstream lines(log_text.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("val_f1"));
    CHECK(j["epoch"] == ++count);
  }
  CHECK(count == 6);
  // The returned model is the earliest epoch with the top validation F1.
  double top = -1;
  int first = 0;
  for (const auto& e : log.epochs) {
    if (e.validation.f1 > top) {
      top = e.validation.f1;
      first = e.epoch;
    }
  }
  CHECK(log.best_epoch == first);
  CHECK(evaluate(model, held).f1 == doctest::Approx(log.best_f1));
}

TEST_CASE("training is reproducible from the seed") {
  const auto task = testing::make_overfit_task(6, 10);
  auto embedder = std::make_shared<const DualEmbedder>(task.general, task.domain, EmbeddingMode::dual);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 3;
  DeCnn<float> a(testing::tiny_config(), embedder);
  DeCnn<float> b(testing::tiny_config(), embedder);
  const auto la = train(a, task.data, Dataset{}, cfg);
  const auto lb = train(b, task.data, Dataset{}, cfg);
  CHECK(la.validated_on_train);
  for (std::size_t i = 0; i < la.epochs.size(); ++i) {
    CHECK(la.epochs[i].mean_loss == lb.epochs[i].mean_loss);
  }
  CHECK(a.output_layer().weights == b.output_layer().weights);
}

TEST_CASE("patience stops training early") {
  const auto task = testing::make_overfit_task(7, 8);
  auto embedder = std::make_shared<const DualEmbedder>(task.general, task.domain, EmbeddingMode::dual);
  DeCnn<float> model(testing::tiny_config(), embedder);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.patience = 2;
  cfg.lr = 1e-9;  // nothing improves after the first epoch
  const auto log = train(model, task.data, Dataset{}, cfg);
  CHECK(log.epochs.size() == 3);
  CHECK(log.best_epoch == 1);
}

TEST_CASE("empty training data is rejected") {
  const auto task = testing::make_overfit_task(7, 2);
  auto embedder = std::make_shared<const DualEmbedder>(task.general, task.domain, EmbeddingMode::dual);
  DeCnn<float> model(testing::tiny_config(), embedder);
  CHECK_THROWS_AS(train(model, Dataset{}, Dataset{}, TrainConfig{}), DataError);
}

TEST_CASE("protocol seeds runs and rejects bad inputs") {
  const auto task = testing::make_overfit_task(8, 10);
  ProtocolInputs in;
  in.model = testing::tiny_config();
  in.train.epochs = 2;
  in.train.holdout = 2;
  in.embedder = std::make_shared<const DualEmbedder>(task.general, task.domain, EmbeddingMode::dual);
  in.training = task.data;
  in.test = task.data;
  const auto report = run_protocol(in, 3, 40);
  CHECK(report.seeds == std::vector<std::uint64_t>{40, 41, 42});
  const auto fixed = run_protocol(in, 2, 40, SeedSchedule::fixed);
  CHECK(fixed.seeds == std::vector<std::uint64_t>{40, 40});
  CHECK(fixed.runs[0].f1 == fixed.runs[1].f1);
  CHECK(fixed.runs[0].f1 == report.runs[0].f1);
  CHECK_THROWS_AS(run_protocol(in, 0, 1), ParameterError);
  in.train.holdout = 10;
  CHECK_THROWS_AS(run_protocol(in, 1, 1), DataError);
}
