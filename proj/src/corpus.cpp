#include "decnn/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "decnn/errors.hpp"
#include "decnn/random.hpp"
#include "decnn/utf8.hpp"

namespace decnn {

namespace {

bool is_space(char32_t c) {
  switch (c) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case U'\v':
    case U'\f':
    case 0x00A0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  // Latin-1 punctuation, general punctuation block, CJK punctuation.
  return (c >= 0x00A1 && c <= 0x00BF && c != 0x00AA && c != 0x00B2 && c != 0x00B3 &&
          c != 0x00B5 && c != 0x00B9 && c != 0x00BA) ||
         c == 0x00D7 || c == 0x00F7 || (c >= 0x2010 && c <= 0x2027) ||
         (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x3003) ||
         (c >= 0x3008 && c <= 0x3011);
}

bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

bool is_word(char32_t c) { return !is_space(c) && !is_punct(c); }

// Punctuation at `j` that stays inside the current word.
bool is_joiner(const std::u32string& cps, std::size_t j, std::size_t chunk_end) {
  if (j == 0 || j + 1 >= chunk_end) return false;
  const char32_t prev = cps[j - 1];
  const char32_t next = cps[j + 1];
  const char32_t c = cps[j];
  if (c == U'-' || c == U'\'' || c == 0x2019) return is_word(prev) && is_word(next);
  if (c == U'.' || c == U',') return is_digit(prev) && is_digit(next);
  return false;
}

std::string spans_str(const Span& a, const Span& b) {
  return "[" + std::to_string(a.start) + "," + std::to_string(a.end) + ") and [" +
         std::to_string(b.start) + "," + std::to_string(b.end) + ")";
}

}  // namespace

char label_char(Label label) {
  switch (label) {
    case Label::B:
      return 'B';
    case Label::I:
      return 'I';
    case Label::O:
      return 'O';
  }
  return 'O';
}

Label parse_label(std::string_view text) {
  if (text == "B" || text.starts_with("B-")) return Label::B;
  if (text == "I" || text.starts_with("I-")) return Label::I;
  if (text == "O") return Label::O;
  throw DataError("unknown label '" + std::string(text) + "'");
}

std::vector<std::string> Sentence::words() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

std::vector<int> Sentence::label_indices() const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (Label l : labels) out.push_back(static_cast<int>(l));
  return out;
}

std::vector<Token> tokenize(std::string_view text) {
  const std::u32string cps = utf8::decode(text);
  std::vector<Token> tokens;
  auto emit = [&](std::size_t a, std::size_t b) {
    tokens.push_back(
        Token{utf8::encode(std::u32string_view(cps).substr(a, b - a)), a, b});
  };

  std::size_t i = 0;
  while (i < cps.size()) {
    if (is_space(cps[i])) {
      ++i;
      continue;
    }
    std::size_t chunk_end = i;
    while (chunk_end < cps.size() && !is_space(cps[chunk_end])) ++chunk_end;

    std::size_t j = i;
    while (j < chunk_end) {
      if (is_punct(cps[j])) {
        std::size_t k = j + 1;
        while (k < chunk_end && cps[k] == cps[j]) ++k;
        emit(j, k);
        j = k;
      } else {
        std::size_t k = j + 1;
        while (k < chunk_end && (is_word(cps[k]) || is_joiner(cps, k, chunk_end))) ++k;
        emit(j, k);
        j = k;
      }
    }
    i = chunk_end;
  }
  return tokens;
}

std::vector<Label> spans_to_bio(std::span<const Token> tokens, std::span<const Span> spans) {
  std::vector<Span> sorted(spans.begin(), spans.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t s = 0; s < sorted.size(); ++s) {
    if (sorted[s].start >= sorted[s].end) {
      throw DataError("empty aspect span [" + std::to_string(sorted[s].start) + "," +
                      std::to_string(sorted[s].end) + ")");
    }
    if (s > 0 && sorted[s].start < sorted[s - 1].end) {
      throw DataError("overlapping aspect spans " + spans_str(sorted[s - 1], sorted[s]));
    }
  }

  std::vector<Label> labels(tokens.size(), Label::O);
  std::vector<const Span*> owner(tokens.size(), nullptr);
  for (const Span& span : sorted) {
    bool first = true;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      const bool overlaps = tokens[t].start < span.end && span.start < tokens[t].end;
      if (!overlaps) continue;
      if (owner[t] != nullptr) {
        throw DataError("token '" + tokens[t].surface + "' is covered by aspect spans " +
                        spans_str(*owner[t], span));
      }
      owner[t] = &span;
      labels[t] = first ? Label::B : Label::I;
      first = false;
    }
  }
  return labels;
}

std::vector<Label> spans_to_bio(const Sentence& sentence) {
  return spans_to_bio(sentence.tokens, sentence.spans);
}

std::vector<Span> bio_to_spans(std::span<const Token> tokens, std::span<const Label> labels) {
  if (tokens.size() != labels.size()) {
    throw DimensionError("bio_to_spans: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(tokens.size()) + " tokens");
  }
  std::vector<Span> spans;
  bool open = false;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    switch (labels[t]) {
      case Label::B:
        spans.push_back({tokens[t].start, tokens[t].end});
        open = true;
        break;
      case Label::I:
        if (open) {
          spans.back().end = tokens[t].end;
        } else {
          spans.push_back({tokens[t].start, tokens[t].end});
          open = true;
        }
        break;
      case Label::O:
        open = false;
        break;
    }
  }
  return spans;
}

std::size_t repair_bio(std::vector<Label>& labels) {
  std::size_t changed = 0;
  Label prev = Label::O;
  for (Label& l : labels) {
    if (l == Label::I && prev == Label::O) {
      l = Label::B;
      ++changed;
    }
    prev = l;
  }
  return changed;
}

bool is_valid_bio(std::span<const Label> labels) {
  Label prev = Label::O;
  for (Label l : labels) {
    if (l == Label::I && prev == Label::O) return false;
    prev = l;
  }
  return true;
}

Sentence make_sentence(std::string text, std::vector<Span> spans) {
  Sentence s;
  s.text = std::move(text);
  s.tokens = tokenize(s.text);
  std::sort(spans.begin(), spans.end());
  s.spans = std::move(spans);
  s.labels = spans_to_bio(s.tokens, s.spans);
  return s;
}

Sentence sentence_from_tokens(std::span<const std::string> words, std::vector<Label> labels) {
  if (words.size() != labels.size()) {
    throw DimensionError("sentence_from_tokens: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(words.size()) + " tokens");
  }
  Sentence s;
  std::size_t offset = 0;
  for (std::size_t t = 0; t < words.size(); ++t) {
    if (t > 0) {
      s.text.push_back(' ');
      ++offset;
    }
    const std::size_t len = utf8::length(words[t]);
    s.tokens.push_back(Token{words[t], offset, offset + len});
    s.text += words[t];
    offset += len;
  }
  repair_bio(labels);
  s.labels = std::move(labels);
  s.spans = bio_to_spans(s.tokens, s.labels);
  return s;
}

DataFormat parse_data_format(std::string_view name) {
  if (name == "jsonl_spans" || name == "jsonl") return DataFormat::jsonl_spans;
  if (name == "conll_two_col" || name == "conll") return DataFormat::conll_two_col;
  throw ParameterError("unknown data format '" + std::string(name) + "'");
}

std::string_view to_string(DataFormat format) {
  return format == DataFormat::jsonl_spans ? "jsonl_spans" : "conll_two_col";
}

std::size_t Dataset::aspect_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += std::count(s.labels.begin(), s.labels.end(), Label::B);
  return n;
}

namespace {

Dataset read_jsonl(std::istream& in, Split split) {
  Dataset ds;
  ds.split = split;
  std::string line;
  std::size_t line_no = 0;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++record;
    auto fail = [&](const std::string& why) {
      throw FormatError("jsonl record " + std::to_string(record) + " (line " +
                        std::to_string(line_no) + "): " + why);
    };
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(e.what());
    }
    if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string()) {
      fail("missing string field 'text'");
    }
    std::vector<Span> spans;
    if (obj.contains("spans")) {
      if (!obj["spans"].is_array()) fail("'spans' must be an array");
      for (const auto& pair : obj["spans"]) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_unsigned() ||
            !pair[1].is_number_unsigned()) {
          fail("each span must be a [start, end] pair of non-negative integers");
        }
        spans.push_back({pair[0].get<std::size_t>(), pair[1].get<std::size_t>()});
      }
    }
    const auto text = obj["text"].get<std::string>();
    const std::size_t len = utf8::length(text);
    for (const Span& sp : spans) {
      if (sp.end > len) fail("span end " + std::to_string(sp.end) + " exceeds text length");
    }
    try {
      ds.sentences.push_back(make_sentence(text, std::move(spans)));
    } catch (const DataError& e) {
      fail(e.what());
    }
  }
  return ds;
}

Dataset read_conll(std::istream& in, Split split) {
  Dataset ds;
  ds.split = split;
  std::vector<std::string> words;
  std::vector<Label> labels;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (words.empty()) return;
    if (!is_valid_bio(labels)) {
      ds.warnings.push_back("sentence " + std::to_string(ds.sentences.size() + 1) +
                            " ending at line " + std::to_string(line_no) +
                            ": invalid BIO sequence repaired");
    }
    ds.sentences.push_back(sentence_from_tokens(words, std::move(labels)));
    words.clear();
    labels.clear();
  };
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError("conll line " + std::to_string(line_no) + ": expected 'token<TAB>label'");
    }
    std::string label_text = line.substr(tab + 1);
    while (!label_text.empty() && (label_text.back() == ' ' || label_text.back() == '\t')) {
      label_text.pop_back();
    }
    try {
      labels.push_back(parse_label(label_text));
    } catch (const DataError& e) {
      throw FormatError("conll line " + std::to_string(line_no) + ": " + e.what());
    }
    words.push_back(line.substr(0, tab));
  }
  flush();
  return ds;
}

}  // namespace

Dataset read_dataset(std::istream& in, DataFormat format, Split split) {
  return format == DataFormat::jsonl_spans ? read_jsonl(in, split) : read_conll(in, split);
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format, Split split) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  return read_dataset(in, format, split);
}

void write_dataset(std::ostream& out, const Dataset& dataset, DataFormat format) {
  if (format == DataFormat::jsonl_spans) {
    for (const auto& s : dataset.sentences) {
      nlohmann::json spans = nlohmann::json::array();
      for (const Span& sp : s.spans) spans.push_back({sp.start, sp.end});
      out << nlohmann::json{{"text", s.text}, {"spans", spans}}.dump() << '\n';
    }
    return;
  }
  for (const auto& s : dataset.sentences) {
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      out << s.tokens[t].surface << '\t' << label_char(s.labels[t]) << '\n';
    }
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset, DataFormat format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
  write_dataset(out, dataset, format);
  if (!out) throw IoError("failed writing dataset '" + path.string() + "'");
}

std::pair<Dataset, Dataset> hold_out(const Dataset& train, std::size_t count,
                                     std::optional<std::uint64_t> seed) {
  if (count >= train.size() && count > 0) {
    throw DataError("cannot hold out " + std::to_string(count) + " of " +
                    std::to_string(train.size()) + " training sentences");
  }
  std::vector<bool> held(train.size(), false);
  if (!seed) {
    for (std::size_t i = train.size() - count; i < train.size(); ++i) held[i] = true;
  } else {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(*seed, "holdout");
    // Partial Fisher-Yates with our own uniform draw for portability.
    for (std::size_t i = 0; i < count; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform01(rng) * double(order.size() - i));
      std::swap(order[i], order[j]);
      held[order[i]] = true;
    }
  }
  Dataset kept;
  Dataset validation;
  kept.split = Split::train;
  validation.split = Split::validation;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (held[i] ? validation : kept).sentences.push_back(train.sentences[i]);
  }
  return {std::move(kept), std::move(validation)};
}

}  // namespace decnn
