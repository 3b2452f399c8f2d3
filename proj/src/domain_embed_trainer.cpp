#include "decnn/domain_embed_trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <thread>

#include "decnn/errors.hpp"
#include "decnn/random.hpp"

namespace decnn {

void TrainerConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ParameterError("embedding trainer: " + what);
  };
  require(dim > 0, "dim must be positive");
  require(epochs >= 1, "epochs must be at least 1");
  require(window >= 1, "window must be at least 1");
  require(negatives >= 1, "negatives must be at least 1");
  require(min_count >= 1, "min_count must be at least 1");
  require(initial_lr > 0.0, "initial_lr must be positive");
  require(subsample_t > 0.0, "subsample_t must be positive");
  require(ngrams.min_n >= 1 && ngrams.max_n >= ngrams.min_n, "invalid n-gram range");
  require(buckets >= 1, "bucket count must be positive");
  require(threads >= 1, "threads must be at least 1");
}

namespace {

template <typename Fn>
void for_each_token(std::string_view line, Fn&& fn) {
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) fn(line.substr(i, j - i));
    i = j;
  }
}

float sigmoid(float x) {
  if (x > 30.f) return 1.f;
  if (x < -30.f) return 0.f;
  return 1.f / (1.f + std::exp(-x));
}

}  // namespace

CorpusStats build_vocab(std::span<const std::string> lines, const TrainerConfig& cfg) {
  std::unordered_map<std::string, std::int64_t> counts;
  std::int64_t total = 0;
  for (const auto& line : lines) {
    for_each_token(line, [&](std::string_view tok) {
      ++counts[std::string(tok)];
      ++total;
    });
  }
  if (total == 0) throw DataError("embedding corpus is empty");

  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto& [word, count] : counts) {
    if (count >= cfg.min_count) kept.emplace_back(word, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  CorpusStats stats;
  stats.total_tokens = total;
  double z = 0.0;
  for (auto& [word, count] : kept) {
    stats.index.emplace(word, static_cast<int>(stats.words.size()));
    stats.words.push_back(word);
    stats.counts.push_back(count);
    stats.retained_tokens += count;
    z += std::pow(double(count), 0.75);
  }
  stats.negative_distribution.reserve(kept.size());
  for (auto count : stats.counts) {
    stats.negative_distribution.push_back(std::pow(double(count), 0.75) / z);
  }
  return stats;
}

std::vector<std::string> read_corpus_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(std::move(line));
  return lines;
}

std::vector<std::string> read_corpus_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path.string() + "'");
  return read_corpus_lines(in);
}

NegativeSampler::NegativeSampler(std::span<const double> distribution) {
  if (distribution.empty()) throw DataError("negative sampler needs a nonempty vocabulary");
  cdf_.reserve(distribution.size());
  double acc = 0.0;
  for (double p : distribution) {
    acc += p;
    cdf_.push_back(acc);
  }
}

int NegativeSampler::sample(Rng& rng) const {
  const double u = uniform01(rng) * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<int>(it - cdf_.begin());
}

namespace {

struct SubwordLayout {
  /// Input rows per vocabulary word: its own row, then its n-gram rows.
  std::vector<std::vector<int>> inputs;
  /// Hash bucket of each n-gram row (row = vocab size + position).
  std::vector<std::uint32_t> bucket_ids;
};

SubwordLayout layout_subwords(const CorpusStats& stats, const TrainerConfig& cfg) {
  SubwordLayout layout;
  std::unordered_map<std::uint32_t, int> row_of;
  const int nwords = static_cast<int>(stats.size());
  layout.inputs.resize(stats.size());
  for (int w = 0; w < nwords; ++w) {
    auto& ids = layout.inputs[static_cast<std::size_t>(w)];
    ids.push_back(w);
    for (std::uint32_t b : ngram_buckets(stats.words[static_cast<std::size_t>(w)], cfg.ngrams,
                                         cfg.buckets)) {
      auto [it, inserted] = row_of.emplace(b, nwords + static_cast<int>(layout.bucket_ids.size()));
      if (inserted) layout.bucket_ids.push_back(b);
      ids.push_back(it->second);
    }
  }
  return layout;
}

struct SgnsModel {
  SeqTensor<float> input;
  SeqTensor<float> output;
};

struct WorkerTotals {
  double loss = 0.0;
  std::int64_t pairs = 0;
};

// One pass over `sentences[begin, end)`. `processed` counts tokens across all
// workers and drives the linear learning-rate decay.
WorkerTotals run_shard(SgnsModel& model, const SubwordLayout& layout, const CorpusStats& stats,
                       const NegativeSampler& sampler, const std::vector<float>& keep_prob,
                       const std::vector<std::vector<int>>& sentences, std::size_t begin,
                       std::size_t end, const TrainerConfig& cfg, double scheduled_tokens,
                       std::atomic<std::int64_t>& processed, Rng& rng) {
  WorkerTotals totals;
  const Index dim = model.input.cols();
  RowVector<float> hidden(dim);
  RowVector<float> grad(dim);
  std::vector<int> kept;
  for (std::size_t s = begin; s < end; ++s) {
    const auto& sent = sentences[s];
    const double progress = double(processed.load(std::memory_order_relaxed)) / scheduled_tokens;
    const float lr = static_cast<float>(cfg.initial_lr * std::max(0.0, 1.0 - progress));
    processed.fetch_add(static_cast<std::int64_t>(sent.size()), std::memory_order_relaxed);

    kept.clear();
    for (int w : sent) {
      if (uniform01(rng) < keep_prob[static_cast<std::size_t>(w)]) kept.push_back(w);
    }
    const int n = static_cast<int>(kept.size());
    for (int i = 0; i < n; ++i) {
      const int radius = 1 + static_cast<int>(uniform01(rng) * cfg.window);
      const auto& rows = layout.inputs[static_cast<std::size_t>(kept[static_cast<std::size_t>(i)])];
      for (int c = std::max(0, i - radius); c <= std::min(n - 1, i + radius); ++c) {
        if (c == i) continue;
        hidden.setZero();
        for (int r : rows) hidden += model.input.row(r);
        hidden /= static_cast<float>(rows.size());

        grad.setZero();
        double pair_loss = 0.0;
        const int target = kept[static_cast<std::size_t>(c)];
        for (int k = 0; k <= cfg.negatives; ++k) {
          int id = target;
          float label = 1.f;
          if (k > 0) {
            if (stats.size() < 2) break;
            do {
              id = sampler.sample(rng);
            } while (id == target);
            label = 0.f;
          }
          auto out_row = model.output.row(id);
          const float score = sigmoid(out_row.dot(hidden));
          const float p = label > 0.f ? score : 1.f - score;
          pair_loss -= std::log(std::max(p, 1e-7f));
          const float g = lr * (label - score);
          grad += g * out_row;
          out_row += g * hidden;
        }
        for (int r : rows) model.input.row(r) += grad;
        totals.loss += pair_loss;
        ++totals.pairs;
      }
    }
  }
  return totals;
}

}  // namespace

TrainedEmbeddings train_embeddings(std::span<const std::string> lines, const TrainerConfig& cfg) {
  cfg.validate();
  const CorpusStats stats = build_vocab(lines, cfg);
  if (stats.size() == 0) {
    throw DataError("no word reaches min_count " + std::to_string(cfg.min_count));
  }

  std::vector<std::vector<int>> sentences;
  sentences.reserve(lines.size());
  std::int64_t corpus_tokens = 0;
  for (const auto& line : lines) {
    std::vector<int> ids;
    for_each_token(line, [&](std::string_view tok) {
      auto it = stats.index.find(std::string(tok));
      if (it != stats.index.end()) ids.push_back(it->second);
    });
    corpus_tokens += static_cast<std::int64_t>(ids.size());
    if (!ids.empty()) sentences.push_back(std::move(ids));
  }

  std::vector<float> keep_prob(stats.size());
  for (std::size_t w = 0; w < stats.size(); ++w) {
    const double f = double(stats.counts[w]) / double(stats.retained_tokens);
    const double ratio = cfg.subsample_t / f;
    keep_prob[w] = static_cast<float>(std::sqrt(ratio) + ratio);
  }

  const SubwordLayout layout = layout_subwords(stats, cfg);
  const auto nwords = static_cast<Index>(stats.size());
  const auto nrows = nwords + static_cast<Index>(layout.bucket_ids.size());

  SgnsModel model;
  model.input.resize(nrows, cfg.dim);
  model.output = SeqTensor<float>::Zero(nwords, cfg.dim);
  {
    Rng init = make_rng(cfg.seed, "embedding-init");
    const double bound = 1.0 / cfg.dim;
    float* p = model.input.data();
    for (Index i = 0; i < model.input.size(); ++i) {
      p[i] = static_cast<float>((2.0 * uniform01(init) - 1.0) * bound);
    }
  }

  const NegativeSampler sampler(stats.negative_distribution);
  const double scheduled = double(cfg.epochs) * double(std::max<std::int64_t>(corpus_tokens, 1));
  std::atomic<std::int64_t> processed{0};
  EmbeddingTrainingLog log;

  const auto threads = static_cast<std::size_t>(cfg.threads);
  std::vector<Rng> rngs;
  for (std::size_t t = 0; t < threads; ++t) {
    rngs.push_back(make_rng(cfg.seed, "negative-sampling-" + std::to_string(t)));
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    WorkerTotals epoch_totals;
    if (threads == 1) {
      epoch_totals = run_shard(model, layout, stats, sampler, keep_prob, sentences, 0,
                               sentences.size(), cfg, scheduled, processed, rngs[0]);
    } else {
      std::vector<WorkerTotals> parts(threads);
      std::vector<std::thread> pool;
      const std::size_t per = (sentences.size() + threads - 1) / threads;
      for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t b = std::min(sentences.size(), t * per);
        const std::size_t e = std::min(sentences.size(), b + per);
        pool.emplace_back([&, t, b, e] {
          parts[t] = run_shard(model, layout, stats, sampler, keep_prob, sentences, b, e, cfg,
                               scheduled, processed, rngs[t]);
        });
      }
      for (auto& th : pool) th.join();
      for (const auto& p : parts) {
        epoch_totals.loss += p.loss;
        epoch_totals.pairs += p.pairs;
      }
    }
    log.pairs += epoch_totals.pairs;
    log.epoch_loss.push_back(epoch_totals.pairs > 0 ? epoch_totals.loss / double(epoch_totals.pairs)
                                                    : 0.0);
  }

  SeqTensor<float> word_vectors(nwords, cfg.dim);
  for (Index w = 0; w < nwords; ++w) {
    const auto& rows = layout.inputs[static_cast<std::size_t>(w)];
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(cfg.dim);
    for (int r : rows) sum += model.input.row(r).cast<double>();
    word_vectors.row(w) = (sum / double(rows.size())).cast<float>();
  }

  SubwordBuckets buckets;
  buckets.bucket_count = cfg.buckets;
  buckets.range = cfg.ngrams;
  buckets.vectors = model.input.bottomRows(nrows - nwords);
  for (std::size_t b = 0; b < layout.bucket_ids.size(); ++b) {
    buckets.rows.emplace(layout.bucket_ids[b], static_cast<Index>(b));
  }

  return {EmbeddingTable(stats.words, std::move(word_vectors), std::move(buckets)),
          std::move(log)};
}

void export_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  if (table.size() == 0) throw DataError("refusing to export an embedding table with no words");
  save_table(table, path);
}

}  // namespace decnn
