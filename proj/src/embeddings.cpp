#include "decnn/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <fstream>

#include "decnn/errors.hpp"
#include "decnn/utf8.hpp"

namespace decnn {

EmbeddingTable::EmbeddingTable(std::vector<std::string> words, SeqTensor<float> vectors,
                               SubwordBuckets subwords)
    : subwords_(std::move(subwords)) {
  if (static_cast<Index>(words.size()) != vectors.rows()) {
    throw DimensionError("embedding table: " + std::to_string(words.size()) + " words for " +
                         std::to_string(vectors.rows()) + " rows");
  }
  if (vectors.cols() < 1) throw DimensionError("embedding table needs dim > 0");
  if (!subwords_.empty() && subwords_.vectors.cols() != vectors.cols()) {
    throw DimensionError("subword buckets have a different dimension than word vectors");
  }
  // Drop later duplicates so every vocab entry owns exactly one row.
  std::vector<Index> keep;
  keep.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (index_.emplace(words[i], static_cast<Index>(keep.size())).second) {
      keep.push_back(static_cast<Index>(i));
    }
  }
  if (keep.size() == words.size()) {
    words_ = std::move(words);
    vectors_ = std::move(vectors);
    return;
  }
  vectors_.resize(static_cast<Index>(keep.size()), vectors.cols());
  words_.reserve(keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    vectors_.row(static_cast<Index>(r)) = vectors.row(keep[r]);
    words_.push_back(std::move(words[static_cast<std::size_t>(keep[r])]));
  }
}

std::optional<Index> EmbeddingTable::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<Index> EmbeddingTable::resolve(std::string_view word) const {
  if (auto hit = find(word)) return hit;
  const std::string lower = utf8::ascii_lower(word);
  if (lower != word) return find(lower);
  return std::nullopt;
}

RowVector<float> EmbeddingTable::vector(std::string_view word) const {
  if (auto row = resolve(word)) return vectors_.row(*row);
  return oov_vector(word);
}

RowVector<float> EmbeddingTable::oov_vector(std::string_view word) const {
  if (!has_subwords()) return RowVector<float>::Zero(dim());
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(dim());
  int hits = 0;
  for (std::uint32_t bucket : ngram_buckets(word, subwords_.range, subwords_.bucket_count)) {
    auto it = subwords_.rows.find(bucket);
    if (it == subwords_.rows.end()) continue;
    sum += subwords_.vectors.row(it->second).cast<double>();
    ++hits;
  }
  if (hits == 0) return RowVector<float>::Zero(dim());
  return (sum / double(hits)).cast<float>();
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

constexpr std::string_view kBucketPrefix = "bucket:";

}  // namespace

EmbeddingTable load_table(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file '" + path.string() + "'");
  const std::string where = "embedding file '" + path.string() + "'";

  Index dim = 0;
  SubwordBuckets buckets;
  std::vector<std::string> words;
  std::vector<float> word_values;
  std::vector<float> bucket_values;
  Index bucket_rows = 0;
  std::size_t rows_seen = 0;

  std::string line;
  std::size_t line_no = 0;
  bool any_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw FormatError(where + " line " + std::to_string(line_no) + ": " + why);
    };

    if (!any_content) {
      any_content = true;
      long long a = 0, b = 0;
      if ((fields.size() == 2 || fields.size() == 5) && parse_number(fields[0], a) &&
          parse_number(fields[1], b)) {
        if (b <= 0) fail("header declares non-positive dimension");
        dim = static_cast<Index>(b);
        if (fields.size() == 5) {
          long long count = 0;
          if (!parse_number(fields[2], count) || !parse_number(fields[3], buckets.range.min_n) ||
              !parse_number(fields[4], buckets.range.max_n) || count <= 0 ||
              count > std::numeric_limits<std::uint32_t>::max() || buckets.range.min_n < 1 ||
              buckets.range.max_n < buckets.range.min_n) {
            fail("malformed subword header");
          }
          buckets.bucket_count = static_cast<std::uint32_t>(count);
        }
        continue;
      }
    }

    if (dim == 0) dim = static_cast<Index>(fields.size()) - 1;
    if (dim < 1) fail("entry has no vector values");
    if (static_cast<Index>(fields.size()) < dim + 1) {
      fail("expected " + std::to_string(dim) + " values, found " +
           std::to_string(fields.size() - 1));
    }
    // Tokens containing spaces (present in some public releases) keep all
    // leading fields as the key.
    const std::size_t key_fields = fields.size() - static_cast<std::size_t>(dim);
    std::string key(fields[0]);
    for (std::size_t k = 1; k < key_fields; ++k) {
      key += ' ';
      key += fields[k];
    }

    const bool is_bucket = key.starts_with(kBucketPrefix);
    ++rows_seen;
    if (!is_bucket) {
      if (options.max_words != 0 && words.size() >= options.max_words) continue;
      if (options.keep != nullptr && !options.keep->contains(key)) continue;
    }
    auto& values = is_bucket ? bucket_values : word_values;
    const std::size_t base = values.size();
    values.resize(base + static_cast<std::size_t>(dim));
    for (Index v = 0; v < dim; ++v) {
      if (!parse_number(fields[key_fields + static_cast<std::size_t>(v)],
                        values[base + static_cast<std::size_t>(v)])) {
        fail("malformed number '" + std::string(fields[key_fields + static_cast<std::size_t>(v)]) +
             "'");
      }
    }
    if (is_bucket) {
      std::uint32_t id = 0;
      if (!parse_number(std::string_view(key).substr(kBucketPrefix.size()), id)) {
        fail("malformed bucket key '" + key + "'");
      }
      if (buckets.empty()) fail("bucket rows require a subword header");
      if (id >= buckets.bucket_count) fail("bucket index out of range");
      if (!buckets.rows.emplace(id, bucket_rows).second) {
        values.resize(base);
        continue;
      }
      ++bucket_rows;
    } else {
      words.push_back(std::move(key));
    }
  }
  if (!any_content) throw FormatError(where + " is empty");
  // Filtering may legitimately keep nothing; only a file without rows is bad.
  if (rows_seen == 0) throw FormatError(where + " has no entries");

  using Map = Eigen::Map<const SeqTensor<float>>;
  SeqTensor<float> vectors = Map(word_values.data(), static_cast<Index>(words.size()), dim);
  if (!buckets.empty()) buckets.vectors = Map(bucket_values.data(), bucket_rows, dim);
  return EmbeddingTable(std::move(words), std::move(vectors), std::move(buckets));
}

namespace {

void write_row(std::ofstream& out, std::string_view key, const auto& row) {
  out << key;
  char buf[32];
  for (Index v = 0; v < row.size(); ++v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, static_cast<float>(row(v)));
    out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
  }
  out << '\n';
}

}  // namespace

void save_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embedding file '" + path.string() + "'");
  const auto& sub = table.subwords();
  out << table.size() << ' ' << table.dim();
  if (!sub.empty()) {
    out << ' ' << sub.bucket_count << ' ' << sub.range.min_n << ' ' << sub.range.max_n;
  }
  out << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    write_row(out, table.words()[i], table.vectors().row(static_cast<Index>(i)));
  }
  if (!sub.empty()) {
    std::vector<std::pair<std::uint32_t, Index>> ordered(sub.rows.begin(), sub.rows.end());
    std::sort(ordered.begin(), ordered.end());
    for (const auto& [bucket, row] : ordered) {
      write_row(out, std::string(kBucketPrefix) + std::to_string(bucket), sub.vectors.row(row));
    }
  }
  if (!out) throw IoError("failed writing embedding file '" + path.string() + "'");
}

std::unordered_set<std::string> lookup_vocabulary(
    std::span<const std::vector<std::string>> token_lists) {
  std::unordered_set<std::string> vocab;
  for (const auto& tokens : token_lists) {
    for (const auto& t : tokens) {
      vocab.insert(t);
      vocab.insert(utf8::ascii_lower(t));
    }
  }
  return vocab;
}

EmbeddingMode parse_embedding_mode(std::string_view name) {
  if (name == "dual") return EmbeddingMode::dual;
  if (name == "general-only" || name == "general_only") return EmbeddingMode::general_only;
  if (name == "domain-only" || name == "domain_only") return EmbeddingMode::domain_only;
  throw ParameterError("unknown embedding mode '" + std::string(name) + "'");
}

std::string_view to_string(EmbeddingMode mode) {
  switch (mode) {
    case EmbeddingMode::dual:
      return "dual";
    case EmbeddingMode::general_only:
      return "general-only";
    case EmbeddingMode::domain_only:
      return "domain-only";
  }
  return "dual";
}

DualEmbedder::DualEmbedder(std::shared_ptr<const EmbeddingTable> general,
                           std::shared_ptr<const EmbeddingTable> domain, EmbeddingMode mode)
    : general_(std::move(general)), domain_(std::move(domain)), mode_(mode) {
  if (uses_general() && !general_) throw ParameterError("mode needs a general embedding table");
  if (uses_domain() && !domain_) throw ParameterError("mode needs a domain embedding table");
}

Index DualEmbedder::general_dim() const { return uses_general() ? general_->dim() : 0; }
Index DualEmbedder::domain_dim() const { return uses_domain() ? domain_->dim() : 0; }
Index DualEmbedder::dim() const { return general_dim() + domain_dim(); }

SeqTensor<float> DualEmbedder::lookup(std::span<const std::string> tokens) const {
  if (tokens.empty()) throw DataError("lookup: empty token sequence");
  const Index gd = general_dim();
  const Index dd = domain_dim();
  SeqTensor<float> out(static_cast<Index>(tokens.size()), gd + dd);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto r = static_cast<Index>(i);
    if (gd > 0) out.row(r).head(gd) = general_->vector(tokens[i]);
    if (dd > 0) out.row(r).tail(dd) = domain_->vector(tokens[i]);
  }
  return out;
}

}  // namespace decnn
