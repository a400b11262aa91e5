#ifndef TBSA_DHG_HPP
#define TBSA_DHG_HPP

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "tbsa/model.hpp"

namespace tbsa {

struct DhgConfig {
  int times = 2;           // prediction/modification iterations
  double epsilon = 0.75;   // confidence threshold for adding an edge
  double mu = 10.0;        // teacher-forcing schedule constant
  double tf_keep = 0.2;    // fraction of gold edges kept under teacher forcing
  std::array<double, 3> train_dist{1.0 / 3, 1.0 / 3, 1.0 / 3};  // degree budgets for the drop step

  void validate() const {
    if (times < 1) throw ValidationError("dhg: times must be >= 1");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ValidationError("dhg: epsilon must be in (0,1]");
    if (mu <= 0.0) throw ValidationError("dhg: mu must be positive");
    if (!(tf_keep > 0.0 && tf_keep <= 1.0)) throw ValidationError("dhg: tf_keep must be in (0,1]");
  }
};

// p~ = 1 - mu / (mu + exp(epoch/mu)); strictly increasing in epoch, limit 1.
// The probability of trusting the model's own edges over the ground truth.
inline double teacher_forcing_prob(int epoch, double mu) {
  if (mu <= 0.0) throw ValidationError("teacher_forcing_prob: mu must be positive");
  if (epoch < 0) throw ValidationError("teacher_forcing_prob: epoch must be >= 0");
  return 1.0 - mu / (mu + std::exp(static_cast<double>(epoch) / mu));
}

// Gold (word, sentiment) pairs over aspect tokens, each kept independently
// with probability tf_keep.
inline std::vector<std::pair<int, int>> teacher_edges(const Sentence& sent, double tf_keep,
                                                      Rng& rng) {
  if (!(tf_keep > 0.0 && tf_keep <= 1.0))
    throw ValidationError("teacher_edges: tf_keep must be in (0,1]");
  std::vector<std::pair<int, int>> out;
  for (const Token& t : sent.tokens) {
    if (t.senti == SentTag::NONE) continue;
    if (rng.bernoulli(tf_keep)) out.emplace_back(t.index, static_cast<int>(t.senti));
  }
  return out;
}

struct AddedEdge {
  int word;  // 1-based token index
  int senti;
  double conf;
  bool forced;  // came from teacher forcing rather than a confident prediction
};

struct IterationTrace {
  struct Iter {
    std::vector<std::array<double, 3>> probs;  // per-word similarity distribution
    std::vector<AddedEdge> added;
    std::vector<HeteroGraph::DroppedEdge> dropped;
    double m_checksum = 0.0, n_checksum = 0.0;
  };
  std::vector<Iter> iters;

  std::string dump() const {
    static const char* names[3] = {"POS", "NEG", "NEU"};
    std::string out;
    char buf[96];
    for (size_t l = 0; l < iters.size(); ++l) {
      for (const AddedEdge& e : iters[l].added) {
        std::snprintf(buf, sizeof(buf), "ITER %zu ADD %d->%s %.6f%s\n", l + 1, e.word,
                      names[e.senti], e.conf, e.forced ? " forced" : "");
        out += buf;
      }
      for (const auto& d : iters[l].dropped) {
        std::snprintf(buf, sizeof(buf), "ITER %zu DROP %d->%s\n", l + 1, d.word, names[d.senti]);
        out += buf;
      }
    }
    return out;
  }
};

struct DhgRunMode {
  bool train = false;
  int epoch = 0;
  double dropout = 0.0;
  uint64_t seed = 0;

  static DhgRunMode eval() { return {}; }
  static DhgRunMode training(int epoch, double dropout, uint64_t seed) {
    return {true, epoch, dropout, seed};
  }
};

struct DhgResult {
  TensorPtr m_full, n_full;    // all node rows after the final iteration
  TensorPtr m_words, n_words;  // word rows only
  HeteroGraph graph;           // graph after the final modification step
  IterationTrace trace;
};

inline std::vector<size_t> embedding_ids(const Sentence& sent,
                                         const std::map<std::string, int>& vocab, size_t unk_id) {
  std::vector<size_t> ids;
  ids.reserve(sent.tokens.size());
  for (const Token& t : sent.tokens) {
    auto it = vocab.find(t.surface);
    ids.push_back(it == vocab.end() ? unk_id : static_cast<size_t>(it->second));
  }
  return ids;
}

// The iterative predict-and-modify loop. Iteration l runs the AE and AS
// stacks on graph G^{l-1}, reads off word-sentiment similarities, inserts
// edges (confident predictions, or teacher-forced gold edges early in
// training), then rebalances sentiment-node degrees. Edge decisions are
// structural: no gradient flows through them.
inline DhgResult run_dhg(Tape& tape, const Sentence& sent, const HeteroGraph& graph0,
                         const ModelParams& params, const std::map<std::string, int>& vocab,
                         const DhgConfig& cfg, const DhgRunMode& mode) {
  cfg.validate();
  if (!graph0.senti_conf.empty() || graph0.edge_count(EdgeType::Sentiment) != 0)
    throw ValidationError("run_dhg: initial graph must have no sentiment edges");
  if (graph0.n_words != sent.size())
    throw ValidationError("run_dhg: graph and sentence disagree on word count");

  size_t h = params.config.hidden;
  size_t n_words = static_cast<size_t>(sent.size());
  Rng rng(derive_seed(mode.seed, {0xd46ULL, static_cast<uint64_t>(mode.epoch)}));

  TensorPtr x_words = take_rows(tape, params.emb, embedding_ids(sent, vocab, params.unk_id()));
  TensorPtr x = vcat(tape, x_words, params.senti_emb);
  TensorPtr h0 = make_tensor({static_cast<size_t>(graph0.node_count()), h});

  TensorPtr shared_out =
      run_stack(tape, params.shared, x, h0, graph0, mode.dropout, mode.train, rng);
  TensorPtr m_prev = shared_out;
  TensorPtr n_prev = shared_out;

  std::vector<size_t> word_rows(n_words);
  for (size_t i = 0; i < n_words; ++i) word_rows[i] = i;

  // One coin per sentence pass: trust predictions with probability p~(epoch).
  bool use_predicted = true;
  if (mode.train) use_predicted = rng.bernoulli(teacher_forcing_prob(mode.epoch, cfg.mu));

  DhgResult res;
  res.graph = graph0;
  TensorPtr m, n;
  for (int l = 1; l <= cfg.times; ++l) {
    const HeteroGraph g_in = res.graph;  // G^{l-1}; additions below affect l+1 only
    m = run_stack(tape, params.ae, x, m_prev, g_in, mode.dropout, mode.train, rng);
    n = run_stack(tape, params.as_, x, n_prev, g_in, mode.dropout, mode.train, rng);

    TensorPtr nw = take_rows(tape, n, word_rows);
    TensorPtr probs = as_sim_probs(tape, nw, params.senti_emb);

    IterationTrace::Iter iter;
    iter.probs.resize(n_words);
    for (size_t i = 0; i < n_words; ++i)
      for (int s = 0; s < 3; ++s) iter.probs[i][s] = probs->at(i, static_cast<size_t>(s));

    if (use_predicted) {
      for (size_t i = 0; i < n_words; ++i)
        for (int s = 0; s < 3; ++s) {
          double c = iter.probs[i][s];
          if (c > cfg.epsilon) {
            res.graph.add_sentiment_edge(NodeId::word(static_cast<int>(i) + 1), NodeId::senti(s),
                                         c);
            iter.added.push_back({static_cast<int>(i) + 1, s, c, false});
          }
        }
    } else {
      for (const auto& [w, s] : teacher_edges(sent, cfg.tf_keep, rng)) {
        res.graph.add_sentiment_edge(NodeId::word(w), NodeId::senti(s), 1.0);
        iter.added.push_back({w, s, 1.0, true});
      }
    }
    iter.dropped = res.graph.drop_sentiment_edges(cfg.train_dist);

    for (double v : m->val) iter.m_checksum += v;
    for (double v : n->val) iter.n_checksum += v;
    res.trace.iters.push_back(std::move(iter));

    m_prev = m;
    n_prev = n;
  }

  res.m_full = m;
  res.n_full = n;
  res.m_words = take_rows(tape, m, word_rows);
  res.n_words = take_rows(tape, n, word_rows);
  return res;
}

// Single static pass (no graph modification): shared stack, then one AE and
// one AS stack application on the initial graph. run_dhg with times=1 in
// eval mode computes exactly this for the returned hidden states.
inline DhgResult run_static(Tape& tape, const Sentence& sent, const HeteroGraph& graph0,
                            const ModelParams& params, const std::map<std::string, int>& vocab,
                            double dropout_rate = 0.0, bool train = false, uint64_t seed = 0) {
  size_t h = params.config.hidden;
  size_t n_words = static_cast<size_t>(sent.size());
  Rng rng(derive_seed(seed, {0xd46ULL, 0}));

  TensorPtr x_words = take_rows(tape, params.emb, embedding_ids(sent, vocab, params.unk_id()));
  TensorPtr x = vcat(tape, x_words, params.senti_emb);
  TensorPtr h0 = make_tensor({static_cast<size_t>(graph0.node_count()), h});

  TensorPtr shared_out = run_stack(tape, params.shared, x, h0, graph0, dropout_rate, train, rng);
  DhgResult res;
  res.graph = graph0;
  res.m_full = run_stack(tape, params.ae, x, shared_out, graph0, dropout_rate, train, rng);
  res.n_full = run_stack(tape, params.as_, x, shared_out, graph0, dropout_rate, train, rng);
  std::vector<size_t> word_rows(n_words);
  for (size_t i = 0; i < n_words; ++i) word_rows[i] = i;
  res.m_words = take_rows(tape, res.m_full, word_rows);
  res.n_words = take_rows(tape, res.n_full, word_rows);
  return res;
}

}  // namespace tbsa

#endif
