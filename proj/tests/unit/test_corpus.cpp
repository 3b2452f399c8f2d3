#include "doctest.h"

#include <algorithm>
#include <sstream>

#include "decnn/corpus.hpp"
#include "decnn/errors.hpp"
#include "decnn/utf8.hpp"

using namespace decnn;

namespace {

std::vector<std::string> surfaces(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& t : tokenize(text)) out.push_back(t.surface);
  return out;
}

std::vector<Label> labels_of(std::string_view s) {
  std::vector<Label> out;
  for (char c : s) out.push_back(parse_label(std::string(1, c)));
  return out;
}

}  // namespace

TEST_CASE("tokenizer splits punctuation and keeps joiners") {
  using V = std::vector<std::string>;
  CHECK(surfaces("The battery life is great!") == V{"The", "battery", "life", "is", "great", "!"});
  CHECK(surfaces("built-in mic, isn't it?") == V{"built-in", "mic", ",", "isn't", "it", "?"});
  CHECK(surfaces("costs $1,299.99 ...") == V{"costs", "$", "1,299.99", "..."});
  CHECK(surfaces("wow!!! (really)") == V{"wow", "!!!", "(", "really", ")"});
  CHECK(surfaces("end.") == V{"end", "."});
  CHECK(surfaces("-dash start") == V{"-", "dash", "start"});
  CHECK(surfaces("   ").empty());
  CHECK(surfaces("").empty());
}

TEST_CASE("token offsets count code points") {
  const auto toks = tokenize("café au lait");
  REQUIRE(toks.size() == 3);
  CHECK(toks[0].start == 0);
  CHECK(toks[0].end == 4);
  CHECK(toks[1].start == 5);
  CHECK(toks[2].end == 12);
  CHECK(utf8::slice("café au lait", toks[2].start, toks[2].end) == "lait");
}

TEST_CASE("invalid UTF-8 decodes to replacement characters") {
  const std::string bad = "a\xff" "b";
  CHECK(utf8::length(bad) == 3);
  CHECK(utf8::decode(bad)[1] == 0xFFFD);
}

TEST_CASE("spans to BIO: multi-token aspect and partial overlap") {
  // "The battery life is great" with "battery life" as one aspect.
  auto s = make_sentence("The battery life is great", {{4, 16}});
  CHECK(s.labels == labels_of("OBIOO"));
  // A span covering only part of a token still tags that token.
  s = make_sentence("The battery life is great", {{5, 7}});
  CHECK(s.labels == labels_of("OBOOO"));
}

TEST_CASE("spans to BIO rejects malformed span sets") {
  const auto toks = tokenize("one two three");
  const std::vector<Span> overlapping{{0, 5}, {4, 7}};
  CHECK_THROWS_AS(spans_to_bio(toks, overlapping), DataError);
  const std::vector<Span> empty{{2, 2}};
  CHECK_THROWS_AS(spans_to_bio(toks, empty), DataError);
  // Disjoint character spans that touch the same token.
  const std::vector<Span> same_token{{0, 1}, {2, 3}};
  CHECK_THROWS_AS(spans_to_bio(toks, same_token), DataError);
}

TEST_CASE("BIO to spans decodes maximal runs and repairs stray I") {
  const auto toks = tokenize("a b c d e");
  auto spans = bio_to_spans(toks, labels_of("BIOIB"));
  REQUIRE(spans.size() == 3);
  CHECK(spans[0] == Span{0, 3});
  CHECK(spans[1] == Span{6, 7});
  CHECK(spans[2] == Span{8, 9});
  CHECK(bio_to_spans(toks, labels_of("OOOOO")).empty());
  CHECK(bio_to_spans(toks, labels_of("IIIII")).size() == 1);
  CHECK_THROWS_AS(bio_to_spans(toks, labels_of("BIO")), DimensionError);
}

TEST_CASE("repair_bio rewrites orphan I only") {
  auto l = labels_of("IOIBIIOI");
  CHECK(!is_valid_bio(l));
  CHECK(repair_bio(l) == 3);
  CHECK(l == labels_of("BOBBIIOB"));
  CHECK(is_valid_bio(l));
  CHECK(repair_bio(l) == 0);
}

TEST_CASE("span/BIO round trip over every label sequence of length 5") {
  const auto toks = tokenize("w1 w2 w3 w4 w5");
  for (int code = 0; code < 243; ++code) {
    std::vector<Label> l;
    for (int c = code, k = 0; k < 5; ++k, c /= 3) l.push_back(static_cast<Label>(c % 3));
    const auto spans = bio_to_spans(toks, l);
    auto repaired = l;
    repair_bio(repaired);
    CHECK(spans_to_bio(toks, spans) == repaired);
  }
}

TEST_CASE("label parsing") {
  CHECK(parse_label("B-ASPECT") == Label::B);
  CHECK(parse_label("I-x") == Label::I);
  CHECK(parse_label("O") == Label::O);
  CHECK_THROWS_AS(parse_label("X"), DataError);
  CHECK_THROWS_AS(parse_label(""), DataError);
  CHECK(label_char(Label::I) == 'I');
}

TEST_CASE("jsonl dataset round trip") {
  std::istringstream in(
      "{\"text\": \"The battery life is great\", \"spans\": [[4, 16]]}\n"
      "\n"
      "{\"text\": \"Bad screen, nice keys.\", \"spans\": [[4, 10], [17, 21]]}\n"
      "{\"text\": \"Nothing here\"}\n");
  const Dataset ds = read_dataset(in, DataFormat::jsonl_spans, Split::test);
  REQUIRE(ds.size() == 3);
  CHECK(ds.split == Split::test);
  CHECK(ds.aspect_count() == 3);
  CHECK(ds.sentences[1].labels == labels_of("OBOOBO"));
  CHECK(ds.sentences[2].spans.empty());

  std::ostringstream out;
  write_dataset(out, ds, DataFormat::jsonl_spans);
  std::istringstream again(out.str());
  const Dataset back = read_dataset(again, DataFormat::jsonl_spans);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.sentences[i].text == ds.sentences[i].text);
    CHECK(back.sentences[i].spans == ds.sentences[i].spans);
  }
}

TEST_CASE("jsonl errors name the record") {
  auto fails_with = [](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    try {
      read_dataset(in, DataFormat::jsonl_spans);
    } catch (const FormatError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_with("{\"text\": \"ok\"}\n{bad json\n", "record 2"));
  CHECK(fails_with("{\"spans\": []}\n", "'text'"));
  CHECK(fails_with("{\"text\": \"abc\", \"spans\": [[0, 9]]}\n", "exceeds"));
  CHECK(fails_with("{\"text\": \"abc\", \"spans\": [[0]]}\n", "pair"));
  CHECK(fails_with("{\"text\": \"a b\", \"spans\": [[0, 3], [2, 3]]}\n", "record 1"));
}

TEST_CASE("conll reading repairs invalid sequences with a warning") {
  std::istringstream in(
      "The\tO\nbattery\tB-ASP\nlife\tI-ASP\n\n"
      "stray\tI\nword\tO\n");
  const Dataset ds = read_dataset(in, DataFormat::conll_two_col);
  REQUIRE(ds.size() == 2);
  CHECK(ds.sentences[0].text == "The battery life");
  CHECK(ds.sentences[0].spans == std::vector<Span>{{4, 16}});
  CHECK(ds.sentences[1].labels == labels_of("BO"));
  REQUIRE(ds.warnings.size() == 1);
  CHECK(ds.warnings[0].find("repaired") != std::string::npos);
}

TEST_CASE("conll errors carry line numbers") {
  std::istringstream no_tab("good\tO\nbad line\n");
  CHECK_THROWS_WITH_AS(read_dataset(no_tab, DataFormat::conll_two_col),
                       doctest::Contains("line 2"), FormatError);
  std::istringstream bad_label("w\tQ\n");
  CHECK_THROWS_AS(read_dataset(bad_label, DataFormat::conll_two_col), FormatError);
}

TEST_CASE("conll round trip keeps labels") {
  Dataset ds;
  ds.sentences.push_back(make_sentence("Great pizza , slow service", {{6, 11}, {14, 26}}));
  std::ostringstream out;
  write_dataset(out, ds, DataFormat::conll_two_col);
  std::istringstream in(out.str());
  const Dataset back = read_dataset(in, DataFormat::conll_two_col);
  REQUIRE(back.size() == 1);
  CHECK(back.sentences[0].labels == ds.sentences[0].labels);
  CHECK(back.sentences[0].words() == ds.sentences[0].words());
}

TEST_CASE("format names") {
  CHECK(parse_data_format("jsonl") == DataFormat::jsonl_spans);
  CHECK(parse_data_format("conll_two_col") == DataFormat::conll_two_col);
  CHECK_THROWS_AS(parse_data_format("xml"), ParameterError);
  CHECK(to_string(DataFormat::conll_two_col) == "conll_two_col");
}

TEST_CASE("hold-out splits") {
  Dataset ds;
  for (int i = 0; i < 10; ++i) ds.sentences.push_back(make_sentence("s" + std::to_string(i), {}));

  auto [train, val] = hold_out(ds, 3);
  REQUIRE(train.size() == 7);
  REQUIRE(val.size() == 3);
  CHECK(val.sentences[0].text == "s7");
  CHECK(val.split == Split::validation);

  auto [rtrain, rval] = hold_out(ds, 3, 42);
  auto [rtrain2, rval2] = hold_out(ds, 3, 42);
  CHECK(rtrain.size() == 7);
  CHECK(rval.size() == 3);
  std::vector<std::string> a, b;
  for (const auto& s : rval.sentences) a.push_back(s.text);
  for (const auto& s : rval2.sentences) b.push_back(s.text);
  CHECK(a == b);
  CHECK(std::is_sorted(a.begin(), a.end()));  // file order preserved

  auto [all, none] = hold_out(ds, 0);
  CHECK(all.size() == 10);
  CHECK(none.empty());
  CHECK_THROWS_AS(hold_out(ds, 10), DataError);
}
