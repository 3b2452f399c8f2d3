#pragma once

// Frozen word-embedding tables and the dual (general | domain) input layer.
//
// File format (UTF-8 text, one entry per line, single-space separated):
//   [header]            "<words> <dim>" or "<words> <dim> <buckets> <min_n> <max_n>"
//   <word> v_1 ... v_dim
//   bucket:<index> v_1 ... v_dim     (subword n-gram rows; needs the 5-field header)

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "decnn/subword.hpp"
#include "decnn/tensor.hpp"

namespace decnn {

/// Hashed character n-gram vectors. Only buckets that carry a vector are
/// stored; an absent bucket contributes nothing to a composed vector.
struct SubwordBuckets {
  std::uint32_t bucket_count = 0;
  NgramRange range;
  std::unordered_map<std::uint32_t, Index> rows;
  SeqTensor<float> vectors;

  bool empty() const { return bucket_count == 0; }
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  /// Duplicate words keep their first row.
  EmbeddingTable(std::vector<std::string> words, SeqTensor<float> vectors,
                 SubwordBuckets subwords = {});

  Index dim() const { return vectors_.cols(); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const SeqTensor<float>& vectors() const { return vectors_; }
  const SubwordBuckets& subwords() const { return subwords_; }
  bool has_subwords() const { return !subwords_.empty(); }

  std::optional<Index> find(std::string_view word) const;
  /// Exact match first, then ASCII-lowercased match.
  std::optional<Index> resolve(std::string_view word) const;

  /// Stored row when the word resolves, otherwise oov_vector().
  RowVector<float> vector(std::string_view word) const;

  /// Mean of the bucket vectors of the word's n-grams. Zero vector when the
  /// table has no subword buckets or none of the n-grams has a stored row.
  RowVector<float> oov_vector(std::string_view word) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, Index> index_;
  SeqTensor<float> vectors_;
  SubwordBuckets subwords_;
};

struct LoadOptions {
  /// When set, only words in this set are kept (bucket rows are always kept).
  const std::unordered_set<std::string>* keep = nullptr;
  /// Stop after this many kept words; 0 means no cap.
  std::size_t max_words = 0;
};

/// Reads the text format above. Throws FormatError (with line number) on an
/// inconsistent dimension, a malformed number, or an empty file.
EmbeddingTable load_table(const std::filesystem::path& path, const LoadOptions& options = {});

void save_table(const EmbeddingTable& table, const std::filesystem::path& path);

/// Every token of the given token lists plus its lowercase form; the set of
/// table words lookup() could ever ask for.
std::unordered_set<std::string> lookup_vocabulary(
    std::span<const std::vector<std::string>> token_lists);

enum class EmbeddingMode { dual, general_only, domain_only };

EmbeddingMode parse_embedding_mode(std::string_view name);
std::string_view to_string(EmbeddingMode mode);

/// Frozen input layer: row i of lookup() is general(token_i) ++ domain(token_i)
/// in dual mode, or one of the two in the single-table modes.
class DualEmbedder {
 public:
  DualEmbedder(std::shared_ptr<const EmbeddingTable> general,
               std::shared_ptr<const EmbeddingTable> domain, EmbeddingMode mode);

  EmbeddingMode mode() const { return mode_; }
  Index dim() const;
  Index general_dim() const;
  Index domain_dim() const;
  const std::shared_ptr<const EmbeddingTable>& general() const { return general_; }
  const std::shared_ptr<const EmbeddingTable>& domain() const { return domain_; }

  SeqTensor<float> lookup(std::span<const std::string> tokens) const;

 private:
  bool uses_general() const { return mode_ != EmbeddingMode::domain_only; }
  bool uses_domain() const { return mode_ != EmbeddingMode::general_only; }

  std::shared_ptr<const EmbeddingTable> general_;
  std::shared_ptr<const EmbeddingTable> domain_;
  EmbeddingMode mode_;
};

}  // namespace decnn
