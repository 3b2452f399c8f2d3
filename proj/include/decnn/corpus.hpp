#pragma once

// Span-annotated review sentences: tokenization with code-point offsets,
// character-span <-> BIO conversion, and dataset files.
//
// All offsets count Unicode scalar values (code points), half-open [start, end).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace decnn {

enum class Label : int { B = 0, I = 1, O = 2 };

inline constexpr int kNumLabels = 3;

char label_char(Label label);
Label parse_label(std::string_view text);

struct Token {
  std::string surface;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  auto operator<=>(const Span&) const = default;
};

struct Sentence {
  std::string text;
  std::vector<Token> tokens;
  std::vector<Span> spans;
  std::vector<Label> labels;

  std::vector<std::string> words() const;
  std::vector<int> label_indices() const;
};

/// Rule-based tokenizer: whitespace split, then punctuation split. Hyphens
/// and apostrophes between word characters stay inside the token, as do
/// '.' and ',' between digits. A run of one repeated punctuation mark is a
/// single token ("...", "!!").
std::vector<Token> tokenize(std::string_view text);

/// A token is inside a span when they share at least one character. The
/// first covered token of each span is B, later ones I, the rest O.
/// Throws DataError on overlapping spans, empty spans, or a token claimed by
/// two spans.
std::vector<Label> spans_to_bio(std::span<const Token> tokens, std::span<const Span> spans);
std::vector<Label> spans_to_bio(const Sentence& sentence);

/// Maximal B I* runs back to character spans. An I that does not continue a
/// run opens one, as if it were B.
std::vector<Span> bio_to_spans(std::span<const Token> tokens, std::span<const Label> labels);

/// Rewrites every I that does not continue a run as B. Returns the number of
/// labels changed.
std::size_t repair_bio(std::vector<Label>& labels);

bool is_valid_bio(std::span<const Label> labels);

/// Tokenizes `text` and derives BIO labels from `spans`.
Sentence make_sentence(std::string text, std::vector<Span> spans);

/// Builds a sentence from pre-tokenized words joined by single spaces, with
/// spans recovered from (repaired) labels.
Sentence sentence_from_tokens(std::span<const std::string> words, std::vector<Label> labels);

enum class DataFormat { jsonl_spans, conll_two_col };
enum class Split { train, validation, test };

DataFormat parse_data_format(std::string_view name);
std::string_view to_string(DataFormat format);

struct Dataset {
  std::vector<Sentence> sentences;
  Split split = Split::train;
  /// Non-fatal notes from loading (e.g. repaired BIO sequences).
  std::vector<std::string> warnings;

  std::size_t size() const { return sentences.size(); }
  bool empty() const { return sentences.empty(); }
  /// Number of B labels over all sentences.
  std::size_t aspect_count() const;
};

Dataset read_dataset(std::istream& in, DataFormat format, Split split = Split::train);
Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     Split split = Split::train);

void write_dataset(std::ostream& out, const Dataset& dataset, DataFormat format);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset, DataFormat format);

/// Carves `count` validation sentences out of `train`. Without a seed the
/// last `count` sentences in file order are held out; with a seed a uniform
/// random subset is, keeping file order within both parts.
std::pair<Dataset, Dataset> hold_out(const Dataset& train, std::size_t count,
                                     std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace decnn
