#include <algorithm>
#include <cmath>
#include <random>

#include "ccd/common/error.hpp"
#include "ccd/textfeat/preprocess.hpp"
#include "ccd/textfeat/tfidf.hpp"
#include "doctest.h"

using namespace ccd;
using namespace ccd::text;
using Tokens = std::vector<std::string>;

TEST_CASE("preprocess expands contractions") {
  CHECK(preprocess("I don't know") == Tokens{"i", "do", "not", "know"});
  CHECK(preprocess("I don\xE2\x80\x99t know") == Tokens{"i", "do", "not", "know"});
  CHECK(preprocess("We're DONE, aren't we?") == Tokens{"we", "are", "done", "are", "not", "we"});
  CHECK(preprocess("'cause it's fine") == Tokens{"because", "it", "is", "fine"});
  CHECK(preprocess("don't-know") == Tokens{"do", "not", "know"});
}

TEST_CASE("preprocess strips special characters and whitespace") {
  CHECK(preprocess("").empty());
  CHECK(preprocess("   \t\n").empty());
  CHECK(preprocess("  {Hello}  WORLD ") == Tokens{"hello", "world"});
  CHECK(preprocess("[inaudible] ok") == Tokens{"inaudible", "ok"});
  CHECK(preprocess("loop... then, turn!") == Tokens{"loop", "then", "turn"});
}

TEST_CASE("unknown apostrophe forms lose the apostrophe") {
  CHECK(preprocess("the pair's code") == Tokens{"the", "pairs", "code"});
  CHECK(preprocess("'quoted'") == Tokens{"quoted"});
  CHECK(preprocess("wan'na go") == Tokens{"want", "to", "go"});
}

TEST_CASE("builtin contraction table") {
  const auto& t = ContractionTable::builtin();
  CHECK(t.size() >= 100);
  REQUIRE(t.find("don't") != nullptr);
  CHECK(*t.find("Don't") == "do not");
  CHECK(t.find("pizza") == nullptr);

  ContractionTable custom = ContractionTable::parse("# comment\ny'know\tyou know\n");
  CHECK(preprocess("y'know", custom) == Tokens{"you", "know"});
  CHECK_THROWS_AS(ContractionTable::parse("broken line\n"), ParseError);
}

TEST_CASE("preprocess is idempotent") {
  const std::vector<std::string> samples = {
      "I don't know",  "  {Hello}  WORLD ", "wait what?? i'M confused", "y'all gonna   [laughs] run it",
      "it's 5 o'clock", "Rock'n'roll, ain't it", "caf\xC3\xA9 na\xC3\xAFve", "that'd've been ok",
  };
  for (const auto& s : samples) {
    const Tokens once = preprocess(s);
    CHECK(preprocess(join(once)) == once);
  }
  // Random strings over a small alphabet that includes apostrophes and brackets.
  std::mt19937_64 rng(3);
  const std::string alphabet = "abdnot' {}[].,!IT";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 24);
  for (int i = 0; i < 500; ++i) {
    std::string s;
    const std::size_t n = len(rng);
    for (std::size_t k = 0; k < n; ++k) s += alphabet[pick(rng)];
    const Tokens once = preprocess(s);
    CHECK(preprocess(join(once)) == once);
  }
}

TEST_CASE("builtin expansions contain no keys") {
  // Needed for idempotence: expanding never yields a further contraction.
  const auto& t = ContractionTable::builtin();
  for (const auto& [key, expansion] : t.entries()) {
    for (const auto& tok : preprocess(expansion, ContractionTable())) CHECK_MESSAGE(t.find(tok) == nullptr, key);
  }
}

TEST_CASE("fit_vocab counts document frequency") {
  const std::vector<Document> docs = {{"a", "b"}, {"b", "c"}};
  Vocabulary v = fit_vocab(docs, 1);
  CHECK(v.terms() == Tokens{"a", "b", "c"});
  CHECK(v.df() == std::vector<std::size_t>{1, 2, 1});
  CHECK(v.n_docs() == 2);

  Vocabulary v2 = fit_vocab(docs, 2);
  CHECK(v2.terms() == Tokens{"b"});

  const std::vector<Document> one = {{"x"}};
  Vocabulary v3 = fit_vocab(one);
  CHECK(v3.terms() == Tokens{"x"});
  CHECK(v3.n_docs() == 1);

  CHECK_THROWS_AS(fit_vocab(docs, 3), DataError);
  CHECK_THROWS_AS(fit_vocab(std::vector<Document>{}), DataError);
}

TEST_CASE("repeated tokens count once toward df") {
  const std::vector<Document> docs = {{"a", "a", "a"}, {"b"}};
  CHECK(fit_vocab(docs).df() == std::vector<std::size_t>{1, 1});
}

TEST_CASE("tfidf hand-computed example") {
  const std::vector<Document> docs = {{"a", "b"}, {"b", "c"}};
  Vocabulary v = fit_vocab(docs);
  // idf(a) = ln(3/2) + 1, idf(b) = ln(3/3) + 1 = 1
  const double wa = std::log(1.5) + 1.0;
  auto raw = tfidf_weights({"a", "b"}, v);
  CHECK(raw[0] == doctest::Approx(1.4055).epsilon(1e-4));
  CHECK(raw[0] == doctest::Approx(wa));
  CHECK(raw[1] == doctest::Approx(1.0));
  CHECK(raw[2] == 0.0);

  auto x = tfidf({"a", "b"}, v);
  const double n = std::sqrt(wa * wa + 1.0);
  CHECK(x[0] == doctest::Approx(wa / n));
  CHECK(x[0] == doctest::Approx(0.8148).epsilon(1e-4));
  CHECK(x[1] == doctest::Approx(0.5797).epsilon(1e-4));
  CHECK(x[2] == 0.0);

  CHECK(tfidf({"zzz", "q"}, v) == std::vector<double>{0, 0, 0});
  CHECK(tfidf({"b"}, v) == std::vector<double>{0, 1, 0});
  // Term frequency is a raw count.
  auto twice = tfidf_weights({"a", "a"}, v);
  CHECK(twice[0] == doctest::Approx(2 * wa));
}

TEST_CASE("tfidf vectors are unit or zero and order independent") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> word(0, 9), len(0, 6);
  std::vector<Document> docs;
  for (int i = 0; i < 40; ++i) {
    Document d;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) d.push_back("w" + std::to_string(word(rng)));
    docs.push_back(d);
  }
  Vocabulary v = fit_vocab(docs);
  auto shuffled = docs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  Vocabulary vs = fit_vocab(shuffled);
  CHECK(v == vs);
  for (const auto& d : docs) {
    auto x = tfidf(d, v);
    double norm = 0.0;
    for (double e : x) norm += e * e;
    if (norm == 0.0) CHECK(d.empty());
    else CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(x == tfidf(d, vs));
  }
}

TEST_CASE("vocabulary json round trip") {
  const std::vector<Document> docs = {{"a", "b"}, {"b", "c"}};
  Vocabulary v = fit_vocab(docs);
  CHECK(Vocabulary::from_json(v.to_json()) == v);
  CHECK_THROWS_AS(Vocabulary::from_json("{}"), DataError);
  CHECK_THROWS_AS(Vocabulary({"b", "a"}, {1, 1}, 2), DataError);
}
