#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "tbsa/graph.hpp"

using namespace tbsa;

namespace {

Sentence chain_sentence(int n) {  // token i+1 headed by i, token 1 is root
  Sentence s;
  s.id = "s1";
  for (int i = 1; i <= n; ++i) {
    Token t;
    t.index = i;
    t.surface = "w" + std::to_string(i);
    t.head = i - 1;
    t.deprel = "dep";
    s.tokens.push_back(t);
  }
  return s;
}

Corpus parse_str(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset_stream(in, "<test>");
}

}  // namespace

TEST_CASE("single-token sentence yields no edges but both node kinds") {
  HeteroGraph g = init_graph(chain_sentence(1), 3);
  g.audit();
  CHECK(g.n_words == 1);
  CHECK(g.node_count() == 4);
  for (int t = 0; t < 4; ++t) CHECK(g.edge_count(static_cast<EdgeType>(t)) == 0);
}

TEST_CASE("window-3 position neighborhood of token 4 in a 9-token sentence") {
  HeteroGraph g = init_graph(chain_sentence(9), 3);
  g.audit();
  std::vector<int> nb = g.neighbors(EdgeType::Position)[3];  // row of token 4
  CHECK(nb == std::vector<int>{0, 1, 2, 4, 5, 6});
}

TEST_CASE("dependency heads become To edges with From as transpose") {
  Sentence s;
  s.id = "s1";
  Token a, b;
  a.index = 1;
  a.surface = "great";
  a.head = 2;
  a.deprel = "amod";
  b.index = 2;
  b.surface = "service";
  b.head = 0;
  b.deprel = "root";
  s.tokens = {a, b};
  HeteroGraph g = init_graph(s, 0);
  g.audit();
  CHECK(g.has_edge(EdgeType::To, 1, 0));   // head 2 -> dependent 1
  CHECK(g.has_edge(EdgeType::From, 0, 1));
  CHECK(g.edge_count(EdgeType::To) == 1);
  CHECK(g.edge_count(EdgeType::Position) == 0);
}

TEST_CASE("edge sets are window-monotone") {
  Sentence s = chain_sentence(7);
  for (int w = 0; w < 6; ++w) {
    HeteroGraph small = init_graph(s, w);
    HeteroGraph big = init_graph(s, w + 1);
    for (int i = 0; i < small.node_count(); ++i)
      for (int j : small.neighbors(EdgeType::Position)[static_cast<size_t>(i)])
        CHECK(big.has_edge(EdgeType::Position, i, j));
  }
}

TEST_CASE("add_sentiment_edge is symmetric, capped, and idempotent by max") {
  HeteroGraph g = init_graph(chain_sentence(4), 2);
  g.add_sentiment_edge(NodeId::word(3), NodeId::senti(0), 0.8);
  g.audit();
  int w3 = 2, pos_row = 4;
  CHECK(g.has_edge(EdgeType::Sentiment, w3, pos_row));
  CHECK(g.has_edge(EdgeType::Sentiment, pos_row, w3));

  g.add_sentiment_edge(NodeId::word(3), NodeId::senti(0), 0.9);
  g.audit();
  CHECK(g.senti_conf.at({w3, 0}) == 0.9);
  CHECK(g.sentiment_degree(0) == 1);

  g.add_sentiment_edge(NodeId::word(3), NodeId::senti(0), 0.7);
  CHECK(g.senti_conf.at({w3, 0}) == 0.9);  // max of old and new

  CHECK_THROWS_AS(g.add_sentiment_edge(NodeId::senti(0), NodeId::senti(1), 0.9), ValidationError);
  CHECK_THROWS_AS(g.add_sentiment_edge(NodeId::word(1), NodeId::senti(0), 0.0), ValidationError);
}

TEST_CASE("drop_sentiment_edges enforces ceil budgets with conf/index tie-break") {
  SECTION("four POS edges against budget two") {
    HeteroGraph g = init_graph(chain_sentence(4), 0);
    g.add_sentiment_edge(NodeId::word(1), NodeId::senti(0), 0.9);
    g.add_sentiment_edge(NodeId::word(2), NodeId::senti(0), 0.6);
    g.add_sentiment_edge(NodeId::word(3), NodeId::senti(0), 0.8);
    g.add_sentiment_edge(NodeId::word(4), NodeId::senti(0), 0.7);
    auto dropped = g.drop_sentiment_edges({0.5, 0.3, 0.2});
    g.audit();
    // E = 4 linked words, budget(POS) = ceil(0.5*4) = 2: words 1 and 3 survive
    CHECK(g.sentiment_degree(0) == 2);
    CHECK(g.senti_conf.count({0, 0}) == 1);
    CHECK(g.senti_conf.count({2, 0}) == 1);
    REQUIRE(dropped.size() == 2);
    CHECK(g.sentiment_degree(0) <= 2);
  }

  SECTION("confidence ties broken by lower word index") {
    HeteroGraph g = init_graph(chain_sentence(3), 0);
    g.add_sentiment_edge(NodeId::word(1), NodeId::senti(1), 0.5);
    g.add_sentiment_edge(NodeId::word(2), NodeId::senti(1), 0.5);
    g.add_sentiment_edge(NodeId::word(3), NodeId::senti(1), 0.5);
    g.drop_sentiment_edges({0.0, 1.0 / 3.0, 0.0});  // budget(NEG) = ceil(1) = 1
    CHECK(g.sentiment_degree(1) == 1);
    CHECK(g.senti_conf.count({0, 1}) == 1);  // word 1 kept
  }

  SECTION("no sentiment edges is a no-op") {
    HeteroGraph g = init_graph(chain_sentence(3), 1);
    auto dropped = g.drop_sentiment_edges({0.3, 0.3, 0.4});
    CHECK(dropped.empty());
    g.audit();
  }

  SECTION("degrees already within budget leave the graph unchanged") {
    HeteroGraph g = init_graph(chain_sentence(4), 1);
    g.add_sentiment_edge(NodeId::word(1), NodeId::senti(0), 0.9);
    g.add_sentiment_edge(NodeId::word(2), NodeId::senti(1), 0.9);
    auto before = g.dump();
    auto dropped = g.drop_sentiment_edges({0.5, 0.5, 0.0});
    CHECK(dropped.empty());
    CHECK(g.dump() == before);
  }
}

TEST_CASE("pmi edges follow strict positivity") {
  SECTION("perfect association yields an edge") {
    Corpus c = parse_str(
        "1\tgreat\t0\troot\tO\tNONE\n2\tfood\t1\tdep\tO\tNONE\n\n"
        "1\tgreat\t0\troot\tO\tNONE\n2\tfood\t1\tdep\tO\tNONE\n\n"
        "1\tother\t0\troot\tO\tNONE\n");
    auto edges = pmi_edges(c, c.sentences[0]);
    CHECK(edges.count({1, 2}) == 1);
  }

  SECTION("words never co-occurring get no edge") {
    Corpus c = parse_str(
        "1\tgreat\t0\troot\tO\tNONE\n\n"
        "1\tfood\t0\troot\tO\tNONE\n");
    Sentence probe;
    probe.id = "p";
    Token a, b;
    a.index = 1;
    a.surface = "great";
    a.head = 0;
    a.deprel = "root";
    b.index = 2;
    b.surface = "food";
    b.head = 1;
    b.deprel = "dep";
    probe.tokens = {a, b};
    CHECK(pmi_edges(c, probe).empty());
  }

  SECTION("independence gives PMI exactly zero: no edge under strict >") {
    // p(a)=0.5, p(b)=0.5, p(a,b)=0.25 over 4 sentences
    Corpus c = parse_str(
        "1\ta\t0\troot\tO\tNONE\n2\tb\t1\tdep\tO\tNONE\n\n"
        "1\ta\t0\troot\tO\tNONE\n\n"
        "1\tb\t0\troot\tO\tNONE\n\n"
        "1\tc\t0\troot\tO\tNONE\n");
    PmiStats stats(c);
    CHECK(stats.pmi("a", "b") == Catch::Approx(0.0).margin(1e-12));
    CHECK(pmi_edges(stats, c.sentences[0]).empty());
  }

  SECTION("symmetric output, invariant under training reordering") {
    Corpus c = parse_str(
        "1\tx\t0\troot\tO\tNONE\n2\ty\t1\tdep\tO\tNONE\n3\tz\t1\tdep\tO\tNONE\n\n"
        "1\tx\t0\troot\tO\tNONE\n2\ty\t1\tdep\tO\tNONE\n\n"
        "1\tz\t0\troot\tO\tNONE\n");
    Corpus rev = c;
    std::reverse(rev.sentences.begin(), rev.sentences.end());
    rev.rebuild_index();
    CHECK(pmi_edges(c, c.sentences[0]) == pmi_edges(rev, c.sentences[0]));
  }
}

TEST_CASE("pmi graph keeps position edges and transpose invariant") {
  Corpus c = parse_str(
      "1\tgreat\t0\troot\tO\tNONE\n2\tfood\t1\tdep\tO\tNONE\n\n"
      "1\tgreat\t0\troot\tO\tNONE\n2\tfood\t1\tdep\tO\tNONE\n\n"
      "1\tother\t0\troot\tO\tNONE\n");
  PmiStats stats(c);
  HeteroGraph g = init_graph_pmi(c.sentences[0], 3, stats);
  g.audit();
  CHECK(g.has_edge(EdgeType::To, 0, 1));
  CHECK(g.has_edge(EdgeType::To, 1, 0));
  CHECK(g.has_edge(EdgeType::Position, 0, 1));
}

TEST_CASE("graph dump is deterministic and ordered") {
  HeteroGraph g = init_graph(chain_sentence(2), 1);
  g.add_sentiment_edge(NodeId::word(1), NodeId::senti(2), 0.8);
  std::string d = g.dump();
  CHECK(d.find("EDGE to w1 w2") != std::string::npos);
  CHECK(d.find("EDGE from w2 w1") != std::string::npos);
  CHECK(d.find("EDGE sentiment w1 NEU 0.8") != std::string::npos);
  CHECK(d == g.dump());
}
