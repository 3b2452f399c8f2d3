#pragma once

// Skip-gram with negative sampling over words enriched with hashed character
// n-grams, for training in-domain embeddings from a raw review corpus.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "decnn/embeddings.hpp"
#include "decnn/subword.hpp"

namespace decnn {

struct TrainerConfig {
  int dim = 100;
  int epochs = 30;
  int window = 5;
  int negatives = 5;
  int min_count = 5;
  double initial_lr = 0.05;
  double subsample_t = 1e-4;
  NgramRange ngrams{3, 6};
  std::uint32_t buckets = kDefaultBucketCount;
  std::uint64_t seed = 1;
  /// 1 = deterministic sequential SGD. More threads run lock-free
  /// asynchronous updates whose result depends on scheduling.
  int threads = 1;

  void validate() const;
};

struct CorpusStats {
  std::vector<std::string> words;
  std::vector<std::int64_t> counts;
  std::unordered_map<std::string, int> index;
  /// Tokens read, including those dropped by min_count.
  std::int64_t total_tokens = 0;
  /// Tokens belonging to retained words.
  std::int64_t retained_tokens = 0;
  /// counts^0.75, normalized to sum to 1.
  std::vector<double> negative_distribution;

  std::size_t size() const { return words.size(); }
};

/// Counts whitespace-separated tokens, one sentence per line. Words with
/// count >= min_count are kept, ordered by descending count then bytewise.
/// Throws DataError on an empty corpus.
CorpusStats build_vocab(std::span<const std::string> lines, const TrainerConfig& cfg);

std::vector<std::string> read_corpus_lines(std::istream& in);
std::vector<std::string> read_corpus_lines(const std::filesystem::path& path);

/// Draws negative-sample ids from the counts^0.75 distribution.
class NegativeSampler {
 public:
  explicit NegativeSampler(std::span<const double> distribution);
  int sample(Rng& rng) const;

 private:
  std::vector<double> cdf_;
};

struct EmbeddingTrainingLog {
  /// Mean per-pair negative-sampling loss for each epoch.
  std::vector<double> epoch_loss;
  std::int64_t pairs = 0;
};

struct TrainedEmbeddings {
  EmbeddingTable table;
  EmbeddingTrainingLog log;
};

/// Trains word + n-gram input vectors. An exported word vector is the mean of
/// its own row and its n-gram bucket rows; only buckets hit by some vocabulary
/// word are stored. Learning rate decays linearly to zero over the scheduled
/// token count (epochs x corpus tokens).
TrainedEmbeddings train_embeddings(std::span<const std::string> lines, const TrainerConfig& cfg);

/// save_table() that refuses an empty vocabulary with DataError.
void export_table(const EmbeddingTable& table, const std::filesystem::path& path);

}  // namespace decnn
