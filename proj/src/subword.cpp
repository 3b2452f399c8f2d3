#include "decnn/subword.hpp"

#include <array>
#include <fstream>

#include "decnn/errors.hpp"
#include "decnn/utf8.hpp"

namespace decnn {

std::uint32_t fnv1a32(std::string_view bytes) {
  std::uint32_t h = 2166136261u;
  for (char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 16777619u;
  }
  return h;
}

void Fnv1a64::update(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state_ ^= p[i];
    state_ *= 0x100000001b3ULL;
  }
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  Fnv1a64 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.digest();
}

std::vector<std::string> char_ngrams(std::string_view word, NgramRange range) {
  std::u32string cps = U"<";
  cps += utf8::decode(word);
  cps += U">";
  std::vector<std::string> grams;
  const auto len = static_cast<int>(cps.size());
  for (int n = range.min_n; n <= range.max_n; ++n) {
    for (int i = 0; i + n <= len; ++i) {
      grams.push_back(utf8::encode(std::u32string_view(cps).substr(i, n)));
    }
  }
  return grams;
}

std::vector<std::uint32_t> ngram_buckets(std::string_view word, NgramRange range,
                                         std::uint32_t bucket_count) {
  std::vector<std::uint32_t> ids;
  if (bucket_count == 0) return ids;
  for (const auto& g : char_ngrams(word, range)) ids.push_back(fnv1a32(g) % bucket_count);
  return ids;
}

}  // namespace decnn
