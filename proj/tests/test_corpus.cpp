#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "tbsa/corpus.hpp"

using namespace tbsa;

namespace {

Corpus parse_str(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset_stream(in, "<test>");
}

// Small synthetic corpus builder for property checks.
Corpus make_corpus(int n_sentences, uint64_t seed) {
  static const char* words[] = {"the", "food", "service", "was", "great",
                                "bad", "ok",   "staff",   "slow"};
  Rng rng(seed);
  std::vector<Sentence> sents;
  for (int s = 0; s < n_sentences; ++s) {
    Sentence sent;
    sent.id = "s" + std::to_string(s + 1);
    int n = 2 + static_cast<int>(rng.index(5));
    int aspect_at = static_cast<int>(rng.index(static_cast<size_t>(n))) + 1;
    bool has_aspect = rng.bernoulli(0.7);
    SentTag pol = static_cast<SentTag>(rng.index(3));
    for (int i = 1; i <= n; ++i) {
      Token t;
      t.index = i;
      t.surface = words[rng.index(9)];
      t.head = i == 1 ? 0 : 1 + static_cast<int>(rng.index(static_cast<size_t>(i - 1)));
      t.deprel = "dep";
      if (has_aspect && i == aspect_at) {
        t.aspect = AspectTag::B;
        t.senti = pol;
      }
      sent.tokens.push_back(t);
    }
    sents.push_back(std::move(sent));
  }
  return corpus_from_sentences(std::move(sents));
}

}  // namespace

TEST_CASE("two-token fixture parses with expected counts") {
  Corpus c = parse_str(
      "1\tgreat\t2\tamod\tO\tNONE\n"
      "2\tservice\t0\troot\tB\tPOS\n");
  REQUIRE(c.size() == 1);
  REQUIRE(c.sentences[0].size() == 2);
  CHECK(c.sentences[0].tokens[0].surface == "great");
  CHECK(c.sentences[0].tokens[1].head == 0);
  CHECK(c.sentiment_counts[0] == 1);
  CHECK(c.sentiment_counts[1] == 0);
  CHECK(c.vocabulary.size() == 2);
}

TEST_CASE("head beyond sentence length is a validation error") {
  CHECK_THROWS_AS(parse_str("1\tfood\t5\tnsubj\tB\tPOS\n2\tok\t1\tdep\tO\tNONE\n"),
                  ValidationError);
}

TEST_CASE("inconsistent tag pairs are validation errors naming the sentence") {
  CHECK_THROWS_WITH(parse_str("1\tfood\t0\troot\tO\tPOS\n"),
                    Catch::Matchers::ContainsSubstring("s1"));
  CHECK_THROWS_AS(parse_str("1\tfood\t0\troot\tB\tNONE\n"), ValidationError);
}

TEST_CASE("I without a preceding B is rejected") {
  CHECK_THROWS_AS(parse_str("1\tfood\t0\troot\tI\tPOS\n"), ValidationError);
  CHECK_THROWS_AS(parse_str("1\ta\t0\troot\tO\tNONE\n2\tb\t1\tdep\tI\tPOS\n"), ValidationError);
}

TEST_CASE("wrong column count is a parse error with the line number") {
  CHECK_THROWS_WITH(parse_str("1\tfood\t0\troot\tB\n"), Catch::Matchers::ContainsSubstring(":1:"));
  CHECK_THROWS_AS(parse_str("1\tfood\t0\troot\tB\tPOS\textra\n"), ParseError);
}

TEST_CASE("self-heading token is rejected") {
  CHECK_THROWS_AS(parse_str("1\tfood\t1\troot\tB\tPOS\n"), ValidationError);
}

TEST_CASE("parse after serialize is the identity") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    Corpus c = make_corpus(12, seed);
    Corpus rt = parse_str(serialize_dataset(c));
    REQUIRE(rt.size() == c.size());
    CHECK(serialize_dataset(rt) == serialize_dataset(c));
    CHECK(rt.vocabulary == c.vocabulary);
    CHECK(rt.sentiment_counts == c.sentiment_counts);
  }
}

TEST_CASE("load_embeddings reads file vectors and seeds the rest") {
  std::map<std::string, int> vocab{{"food", 0}, {"service", 1}};

  SECTION("direct read") {
    std::istringstream in("food 0.1 0.2\n");
    EmbeddingTable t = load_embeddings_stream(in, "<emb>", vocab, 2, 7);
    CHECK(t.at(0) == std::vector<double>{0.1, 0.2});
    CHECK(t.at(1).size() == 2);
  }

  SECTION("fallback vectors are reproducible and bounded") {
    std::istringstream in1("food 0.1 0.2\n"), in2("food 0.1 0.2\n");
    EmbeddingTable a = load_embeddings_stream(in1, "<emb>", vocab, 2, 7);
    EmbeddingTable b = load_embeddings_stream(in2, "<emb>", vocab, 2, 7);
    CHECK(a.at(1) == b.at(1));
    for (double v : a.at(1)) CHECK(std::abs(v) <= 0.1);
  }

  SECTION("length mismatch is a load error") {
    std::istringstream in("food 0.1\n");
    CHECK_THROWS_AS(load_embeddings_stream(in, "<emb>", vocab, 2, 7), ParseError);
  }

  SECTION("dim must be positive") {
    std::istringstream in("");
    CHECK_THROWS_AS(load_embeddings_stream(in, "<emb>", vocab, 0, 7), ValidationError);
  }
}

TEST_CASE("split_train_dev partitions the corpus") {
  Corpus c = make_corpus(10, 5);

  SECTION("fraction 0.2 of 10 gives 8/2") {
    auto [train, dev] = split_train_dev(c, 0.2, 11);
    CHECK(train.size() == 8);
    CHECK(dev.size() == 2);
  }

  SECTION("same seed reproduces the split") {
    auto [t1, d1] = split_train_dev(c, 0.3, 42);
    auto [t2, d2] = split_train_dev(c, 0.3, 42);
    CHECK(serialize_dataset(t1) == serialize_dataset(t2));
    CHECK(serialize_dataset(d1) == serialize_dataset(d2));
  }

  SECTION("invalid fraction and tiny corpus are errors") {
    CHECK_THROWS_AS(split_train_dev(c, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(split_train_dev(c, 1.0, 1), ValidationError);
    Corpus one = make_corpus(1, 3);
    CHECK_THROWS_AS(split_train_dev(one, 0.5, 1), ValidationError);
  }

  SECTION("disjoint and exhaustive for many fractions and seeds") {
    for (double frac : {0.1, 0.25, 0.5, 0.9}) {
      for (uint64_t seed : {1u, 9u, 77u}) {
        auto [train, dev] = split_train_dev(c, frac, seed);
        CHECK(train.size() + dev.size() == c.size());
        std::multiset<std::string> all, got;
        for (const auto& s : c.sentences) all.insert(serialize_dataset(corpus_from_sentences({s})));
        for (const auto& s : train.sentences)
          got.insert(serialize_dataset(corpus_from_sentences({s})));
        for (const auto& s : dev.sentences)
          got.insert(serialize_dataset(corpus_from_sentences({s})));
        CHECK(all == got);
      }
    }
  }
}

TEST_CASE("sentiment_distribution matches hand-derived ratios") {
  // counts 2160/804/637 over 3601 aspect tokens
  std::vector<Sentence> sents;
  long counts[3] = {2160, 804, 637};
  int id = 0;
  for (int pol = 0; pol < 3; ++pol)
    for (long k = 0; k < counts[pol]; ++k) {
      Sentence s;
      s.id = "s" + std::to_string(++id);
      Token t;
      t.index = 1;
      t.surface = "x";
      t.head = 0;
      t.deprel = "root";
      t.aspect = AspectTag::B;
      t.senti = static_cast<SentTag>(pol);
      s.tokens.push_back(t);
      sents.push_back(std::move(s));
    }
  Corpus c = corpus_from_sentences(std::move(sents));
  auto d = sentiment_distribution(c);
  CHECK(d[0] == Catch::Approx(0.5998).margin(1e-4));
  CHECK(d[1] == Catch::Approx(0.2233).margin(1e-4));
  CHECK(d[2] == Catch::Approx(0.1769).margin(1e-4));
  CHECK(std::abs(d[0] + d[1] + d[2] - 1.0) < 1e-12);
}

TEST_CASE("sentiment_distribution degenerate and symmetric cases") {
  Corpus only_pos = parse_str("1\tfood\t0\troot\tB\tPOS\n");
  auto d = sentiment_distribution(only_pos);
  CHECK(d == std::array<double, 3>{1.0, 0.0, 0.0});

  Corpus even = parse_str(
      "1\ta\t0\troot\tB\tPOS\n\n"
      "1\tb\t0\troot\tB\tNEG\n\n"
      "1\tc\t0\troot\tB\tNEU\n");
  auto e = sentiment_distribution(even);
  for (double v : e) CHECK(v == Catch::Approx(1.0 / 3).epsilon(1e-12));

  Corpus none = parse_str("1\tthe\t0\troot\tO\tNONE\n");
  CHECK_THROWS_AS(sentiment_distribution(none), ValidationError);
}

TEST_CASE("sentiment_distribution is invariant under sentence reordering") {
  Corpus c = make_corpus(20, 13);
  auto base = sentiment_distribution(c);
  Corpus rev = c;
  std::reverse(rev.sentences.begin(), rev.sentences.end());
  rev.rebuild_index();
  auto flipped = sentiment_distribution(rev);
  CHECK(base == flipped);
  CHECK(std::abs(base[0] + base[1] + base[2] - 1.0) < 1e-12);
}
