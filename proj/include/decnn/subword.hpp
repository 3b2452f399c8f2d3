#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace decnn {

inline constexpr std::uint32_t kDefaultBucketCount = 2'000'000;

struct NgramRange {
  int min_n = 3;
  int max_n = 6;

  bool operator==(const NgramRange&) const = default;
};

std::uint32_t fnv1a32(std::string_view bytes);

/// Incremental 64-bit FNV-1a, used for content hashes of files and payloads.
class Fnv1a64 {
 public:
  void update(const void* data, std::size_t size);
  void update(std::string_view bytes) { update(bytes.data(), bytes.size()); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t hash_file(const std::filesystem::path& path);

/// Character n-grams (by code point) of "<word>", shortest first.
std::vector<std::string> char_ngrams(std::string_view word, NgramRange range);

/// Bucket index of every n-gram of `word`: fnv1a32(gram) mod bucket_count.
std::vector<std::uint32_t> ngram_buckets(std::string_view word, NgramRange range,
                                         std::uint32_t bucket_count);

}  // namespace decnn
