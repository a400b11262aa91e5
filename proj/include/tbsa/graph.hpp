#ifndef TBSA_GRAPH_HPP
#define TBSA_GRAPH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tbsa/corpus.hpp"

namespace tbsa {

enum class EdgeType { To = 0, From = 1, Position = 2, Sentiment = 3 };

inline const char* to_string(EdgeType t) {
  switch (t) {
    case EdgeType::To: return "to";
    case EdgeType::From: return "from";
    case EdgeType::Position: return "position";
    default: return "sentiment";
  }
}

struct NodeId {
  enum class Kind { Word, Sentiment };
  Kind kind;
  int index;  // word position 1..n, or sentiment index 0..2 (POS/NEG/NEU)

  static NodeId word(int i) { return {Kind::Word, i}; }
  static NodeId senti(int s) { return {Kind::Sentiment, s}; }
};

inline std::string node_name(const NodeId& n) {
  if (n.kind == NodeId::Kind::Word) return "w" + std::to_string(n.index);
  static const char* names[3] = {"POS", "NEG", "NEU"};
  return names[n.index];
}

// Word nodes plus the three sentiment nodes, with one out-neighbor list per
// edge type. Row layout: word i -> row i-1, sentiment s -> row n_words+s.
// To/From are mutual transposes; Position and Sentiment are stored in both
// directions. Sentiment edges carry a confidence.
class HeteroGraph {
 public:
  int n_words = 0;
  std::array<std::vector<std::vector<int>>, 4> adj;
  std::map<std::pair<int, int>, double> senti_conf;  // (word_row, senti 0..2) -> conf

  HeteroGraph() = default;
  explicit HeteroGraph(int words) : n_words(words) {
    for (auto& a : adj) a.assign(static_cast<size_t>(node_count()), {});
  }

  int node_count() const { return n_words + 3; }

  int row_of(const NodeId& n) const {
    if (n.kind == NodeId::Kind::Word) {
      if (n.index < 1 || n.index > n_words) throw ValidationError("word node index out of range");
      return n.index - 1;
    }
    if (n.index < 0 || n.index > 2) throw ValidationError("sentiment node index out of range");
    return n_words + n.index;
  }

  const std::vector<std::vector<int>>& neighbors(EdgeType t) const {
    return adj[static_cast<size_t>(t)];
  }

  bool has_edge(EdgeType t, int src_row, int dst_row) const {
    const auto& nb = adj[static_cast<size_t>(t)][static_cast<size_t>(src_row)];
    return std::binary_search(nb.begin(), nb.end(), dst_row);
  }

  size_t edge_count(EdgeType t) const {
    size_t n = 0;
    for (const auto& nb : adj[static_cast<size_t>(t)]) n += nb.size();
    return n;
  }

  void add_edge(EdgeType t, int src_row, int dst_row) {
    if (src_row == dst_row) throw ValidationError("graph edges may not be self-loops");
    auto& nb = adj[static_cast<size_t>(t)][static_cast<size_t>(src_row)];
    auto it = std::lower_bound(nb.begin(), nb.end(), dst_row);
    if (it == nb.end() || *it != dst_row) nb.insert(it, dst_row);
  }

  void remove_edge(EdgeType t, int src_row, int dst_row) {
    auto& nb = adj[static_cast<size_t>(t)][static_cast<size_t>(src_row)];
    auto it = std::lower_bound(nb.begin(), nb.end(), dst_row);
    if (it != nb.end() && *it == dst_row) nb.erase(it);
  }

  // Symmetric word<->sentiment edge; re-adding keeps the max confidence.
  void add_sentiment_edge(const NodeId& word, const NodeId& senti, double conf) {
    if (word.kind != NodeId::Kind::Word || senti.kind != NodeId::Kind::Sentiment)
      throw ValidationError("add_sentiment_edge: expected a word node and a sentiment node");
    if (!(conf > 0.0 && conf <= 1.0))
      throw ValidationError("add_sentiment_edge: confidence must be in (0,1]");
    int wr = row_of(word), sr = row_of(senti);
    add_edge(EdgeType::Sentiment, wr, sr);
    add_edge(EdgeType::Sentiment, sr, wr);
    auto key = std::make_pair(wr, senti.index);
    auto [it, inserted] = senti_conf.emplace(key, conf);
    if (!inserted) it->second = std::max(it->second, conf);
  }

  struct DroppedEdge {
    int word;  // 1-based word index
    int senti;
  };

  // Caps every sentiment node's degree at ceil(dist[s] * E), E = number of
  // distinct sentiment-linked words before dropping. Highest confidence wins,
  // ties go to the lower word index.
  std::vector<DroppedEdge> drop_sentiment_edges(const std::array<double, 3>& dist) {
    std::set<int> linked_words;
    for (const auto& [key, conf] : senti_conf) linked_words.insert(key.first);
    std::vector<DroppedEdge> dropped;
    if (linked_words.empty()) return dropped;
    double e_total = static_cast<double>(linked_words.size());

    for (int s = 0; s < 3; ++s) {
      size_t budget = static_cast<size_t>(std::ceil(dist[static_cast<size_t>(s)] * e_total));
      std::vector<std::pair<double, int>> edges;  // (conf, word_row)
      for (const auto& [key, conf] : senti_conf)
        if (key.second == s) edges.emplace_back(conf, key.first);
      if (edges.size() <= budget) continue;
      std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      for (size_t i = budget; i < edges.size(); ++i) {
        int wr = edges[i].second;
        int sr = n_words + s;
        remove_edge(EdgeType::Sentiment, wr, sr);
        remove_edge(EdgeType::Sentiment, sr, wr);
        senti_conf.erase({wr, s});
        dropped.push_back({wr + 1, s});
      }
    }
    return dropped;
  }

  size_t sentiment_degree(int s) const {
    return adj[static_cast<size_t>(EdgeType::Sentiment)][static_cast<size_t>(n_words + s)].size();
  }

  // Structural invariants; cheap enough to run after every mutation in tests.
  void audit() const {
    for (int t = 0; t < 4; ++t) {
      const auto& lists = adj[static_cast<size_t>(t)];
      if (static_cast<int>(lists.size()) != node_count())
        throw ValidationError("graph audit: adjacency size mismatch");
      for (int i = 0; i < node_count(); ++i) {
        const auto& nb = lists[static_cast<size_t>(i)];
        for (size_t k = 0; k < nb.size(); ++k) {
          if (nb[k] == i) throw ValidationError("graph audit: self-loop");
          if (k && nb[k] <= nb[k - 1]) throw ValidationError("graph audit: unsorted or duplicate edge");
          if (nb[k] < 0 || nb[k] >= node_count())
            throw ValidationError("graph audit: neighbor out of range");
        }
      }
    }
    auto check_pair = [&](EdgeType a, EdgeType b, const char* what) {
      for (int i = 0; i < node_count(); ++i)
        for (int j : adj[static_cast<size_t>(a)][static_cast<size_t>(i)])
          if (!has_edge(b, j, i)) throw ValidationError(std::string("graph audit: ") + what);
    };
    check_pair(EdgeType::To, EdgeType::From, "To is not the transpose of From");
    check_pair(EdgeType::From, EdgeType::To, "From is not the transpose of To");
    check_pair(EdgeType::Position, EdgeType::Position, "Position not symmetric");
    check_pair(EdgeType::Sentiment, EdgeType::Sentiment, "Sentiment not symmetric");
    for (int i = 0; i < n_words; ++i) {
      for (int t = 0; t < 3; ++t)
        for (int j : adj[static_cast<size_t>(t)][static_cast<size_t>(i)])
          if (j >= n_words)
            throw ValidationError("graph audit: word-word relation touches a sentiment node");
      for (int j : adj[static_cast<size_t>(EdgeType::Sentiment)][static_cast<size_t>(i)])
        if (j < n_words)
          throw ValidationError("graph audit: sentiment edge between two word nodes");
    }
    for (int s = 0; s < 3; ++s) {
      int row = n_words + s;
      for (int t = 0; t < 3; ++t)
        if (!adj[static_cast<size_t>(t)][static_cast<size_t>(row)].empty())
          throw ValidationError("graph audit: sentiment node in a word-word relation");
    }
    for (const auto& [key, conf] : senti_conf)
      if (!(conf > 0.0 && conf <= 1.0)) throw ValidationError("graph audit: confidence out of (0,1]");
  }

  std::string name_of_row(int row) const {
    if (row < n_words) return "w" + std::to_string(row + 1);
    static const char* names[3] = {"POS", "NEG", "NEU"};
    return names[row - n_words];
  }

  // "EDGE <type> <src> <dst> [conf]" lines ordered by (type, src, dst).
  std::string dump() const {
    std::ostringstream os;
    for (int t = 0; t < 4; ++t)
      for (int i = 0; i < node_count(); ++i)
        for (int j : adj[static_cast<size_t>(t)][static_cast<size_t>(i)]) {
          os << "EDGE " << to_string(static_cast<EdgeType>(t)) << " " << name_of_row(i) << " "
             << name_of_row(j);
          if (static_cast<EdgeType>(t) == EdgeType::Sentiment) {
            int wr = i < n_words ? i : j;
            int s = (i < n_words ? j : i) - n_words;
            auto it = senti_conf.find({wr, s});
            if (it != senti_conf.end()) os << " " << it->second;
          }
          os << "\n";
        }
    return os.str();
  }
};

// Syntactic To (head -> dependent), From (its transpose), and Position edges
// linking i,j when 0 < |i-j| <= window. The sentiment edge set starts empty.
inline HeteroGraph init_graph(const Sentence& sent, int window) {
  if (window < 0) throw ValidationError("init_graph: window must be >= 0");
  sent.validate();
  HeteroGraph g(sent.size());
  for (const Token& t : sent.tokens) {
    if (t.head == 0) continue;
    g.add_edge(EdgeType::To, t.head - 1, t.index - 1);
    g.add_edge(EdgeType::From, t.index - 1, t.head - 1);
  }
  for (int i = 1; i <= g.n_words; ++i)
    for (int j = i + 1; j <= g.n_words && j - i <= window; ++j) {
      g.add_edge(EdgeType::Position, i - 1, j - 1);
      g.add_edge(EdgeType::Position, j - 1, i - 1);
    }
  return g;
}

// Sentence-level co-occurrence statistics for PMI edges.
struct PmiStats {
  std::map<std::string, long> word_docs;
  std::map<std::pair<std::string, std::string>, long> pair_docs;
  long n_docs = 0;

  explicit PmiStats(const Corpus& corpus) {
    n_docs = static_cast<long>(corpus.size());
    for (const Sentence& s : corpus.sentences) {
      std::set<std::string> uniq;
      for (const Token& t : s.tokens) uniq.insert(t.surface);
      for (const auto& w : uniq) ++word_docs[w];
      for (auto a = uniq.begin(); a != uniq.end(); ++a)
        for (auto b = std::next(a); b != uniq.end(); ++b) ++pair_docs[{*a, *b}];
    }
  }

  // log p(a,b) / (p(a) p(b)); -inf when the pair was never observed.
  double pmi(const std::string& a, const std::string& b) const {
    const std::string& lo = a <= b ? a : b;
    const std::string& hi = a <= b ? b : a;
    long joint;
    if (a == b) {
      auto it = word_docs.find(a);
      joint = it == word_docs.end() ? 0 : it->second;
    } else {
      auto it = pair_docs.find({lo, hi});
      joint = it == pair_docs.end() ? 0 : it->second;
    }
    if (joint == 0) return -std::numeric_limits<double>::infinity();
    auto wa = word_docs.find(a), wb = word_docs.find(b);
    double pa = static_cast<double>(wa->second) / static_cast<double>(n_docs);
    double pb = static_cast<double>(wb->second) / static_cast<double>(n_docs);
    double pab = static_cast<double>(joint) / static_cast<double>(n_docs);
    return std::log(pab / (pa * pb));
  }
};

// Symmetric set of (i,j) word-position pairs, i < j, with PMI > 0.
inline std::set<std::pair<int, int>> pmi_edges(const PmiStats& stats, const Sentence& sent) {
  std::set<std::pair<int, int>> out;
  int n = sent.size();
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) {
      double v = stats.pmi(sent.tokens[static_cast<size_t>(i - 1)].surface,
                           sent.tokens[static_cast<size_t>(j - 1)].surface);
      if (v > 0.0) out.insert({i, j});
    }
  return out;
}

inline std::set<std::pair<int, int>> pmi_edges(const Corpus& train_corpus, const Sentence& sent) {
  return pmi_edges(PmiStats(train_corpus), sent);
}

// Ablation graph: PMI co-occurrence edges replace the syntactic To/From sets
// (stored symmetrically in both so the transpose invariant holds); Position
// edges are kept.
inline HeteroGraph init_graph_pmi(const Sentence& sent, int window, const PmiStats& stats) {
  if (window < 0) throw ValidationError("init_graph: window must be >= 0");
  sent.validate();
  HeteroGraph g(sent.size());
  for (const auto& [i, j] : pmi_edges(stats, sent)) {
    g.add_edge(EdgeType::To, i - 1, j - 1);
    g.add_edge(EdgeType::To, j - 1, i - 1);
    g.add_edge(EdgeType::From, i - 1, j - 1);
    g.add_edge(EdgeType::From, j - 1, i - 1);
  }
  for (int i = 1; i <= g.n_words; ++i)
    for (int j = i + 1; j <= g.n_words && j - i <= window; ++j) {
      g.add_edge(EdgeType::Position, i - 1, j - 1);
      g.add_edge(EdgeType::Position, j - 1, i - 1);
    }
  return g;
}

}  // namespace tbsa

#endif
