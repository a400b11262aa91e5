#ifndef TBSA_MODEL_HPP
#define TBSA_MODEL_HPP

#include <array>
#include <string>
#include <vector>

#include "tbsa/graph.hpp"
#include "tbsa/tensor.hpp"

namespace tbsa {

// AE label indices. O must be 0 so uniform-potential Viterbi ties resolve to
// the all-O path.
constexpr int kLabelO = 0;
constexpr int kLabelB = 1;
constexpr int kLabelI = 2;
constexpr int kNumAeLabels = 3;
constexpr int kStart = 3;  // virtual start state, row 3 of the transition table
constexpr int kNumPairs = (kNumAeLabels + 1) * kNumAeLabels;  // 12

inline int ae_label_of(AspectTag t) {
  switch (t) {
    case AspectTag::O: return kLabelO;
    case AspectTag::B: return kLabelB;
    default: return kLabelI;
  }
}

inline AspectTag aspect_of_label(int l) {
  switch (l) {
    case kLabelO: return AspectTag::O;
    case kLabelB: return AspectTag::B;
    default: return AspectTag::I;
  }
}

// One gated message-passing layer. All matrices act on row vectors from the
// right: y = x W. Channels index the four edge types (To, From, Position,
// Sentiment).
struct CellWeights {
  std::array<TensorPtr, 4> Wz, Wr, Wc;  // hidden x hidden, one per relation
  TensorPtr k;                          // shared aggregation bias, length hidden
  TensorPtr Vz, Vr, Vc;                 // input -> hidden
  TensorPtr Uz, Ur, Uc;                 // hidden -> hidden

  void collect(std::vector<TensorPtr>& out) const {
    for (const auto& w : Wz) out.push_back(w);
    for (const auto& w : Wr) out.push_back(w);
    for (const auto& w : Wc) out.push_back(w);
    out.push_back(k);
    out.push_back(Vz);
    out.push_back(Vr);
    out.push_back(Vc);
    out.push_back(Uz);
    out.push_back(Ur);
    out.push_back(Uc);
  }
};

struct ModelConfig {
  size_t hidden = 64;
  size_t layers = 3;  // per stack
  // Message-passing weights start wide so node features are O(1) from the
  // first step; heads start near uniform so their learned margins are not
  // fighting initialization noise. cell_init 0 means 1.5/sqrt(hidden).
  double emb_init = 0.5;
  double cell_init = 0.0;
  double head_init = 0.05;

  double cell_range() const {
    return cell_init > 0.0 ? cell_init : 1.5 / std::sqrt(static_cast<double>(hidden));
  }
};

struct ModelParams {
  ModelConfig config;
  size_t vocab_size = 0;  // embedding rows = vocab_size + 1 (last row = unknown)

  TensorPtr emb;                          // (vocab+1, hidden)
  std::vector<CellWeights> shared, ae, as_;
  TensorPtr senti_emb;                    // (3, hidden); x input of sentiment nodes
  TensorPtr crf_w;                        // (hidden, 12), column = prev*3 + label
  TensorPtr crf_b;                        // (12)
  TensorPtr mlp_w;                        // (hidden, 4) -> POS/NEG/NEU/NONE logits
  TensorPtr mlp_b;                        // (4)

  size_t unk_id() const { return vocab_size; }

  std::vector<TensorPtr> all() const {
    std::vector<TensorPtr> out;
    out.push_back(emb);
    for (const auto& c : shared) c.collect(out);
    for (const auto& c : ae) c.collect(out);
    for (const auto& c : as_) c.collect(out);
    out.push_back(senti_emb);
    out.push_back(crf_w);
    out.push_back(crf_b);
    out.push_back(mlp_w);
    out.push_back(mlp_b);
    return out;
  }

  ModelParams clone() const {
    ModelParams p = *this;
    auto copy = [](TensorPtr& t) { t = std::make_shared<Tensor>(*t); };
    copy(p.emb);
    auto copy_cell = [&](CellWeights& c) {
      for (auto& w : c.Wz) copy(w);
      for (auto& w : c.Wr) copy(w);
      for (auto& w : c.Wc) copy(w);
      copy(c.k);
      copy(c.Vz);
      copy(c.Vr);
      copy(c.Vc);
      copy(c.Uz);
      copy(c.Ur);
      copy(c.Uc);
    };
    for (auto& c : p.shared) copy_cell(c);
    for (auto& c : p.ae) copy_cell(c);
    for (auto& c : p.as_) copy_cell(c);
    copy(p.senti_emb);
    copy(p.crf_w);
    copy(p.crf_b);
    copy(p.mlp_w);
    copy(p.mlp_b);
    return p;
  }
};

namespace detail {
inline TensorPtr named(TensorPtr t, const std::string& name) {
  t->name = name;
  return t;
}

inline CellWeights init_cell(const std::string& prefix, size_t h, double range, Rng& rng) {
  static const char* rel[4] = {"to", "from", "pos", "senti"};
  CellWeights c;
  for (int r = 0; r < 4; ++r) {
    c.Wz[r] = named(rand_uniform({h, h}, -range, range, rng), prefix + "." + rel[r] + ".Wz");
    c.Wr[r] = named(rand_uniform({h, h}, -range, range, rng), prefix + "." + rel[r] + ".Wr");
    c.Wc[r] = named(rand_uniform({h, h}, -range, range, rng), prefix + "." + rel[r] + ".Wc");
  }
  c.k = named(make_tensor({h}), prefix + ".k");
  c.Vz = named(rand_uniform({h, h}, -range, range, rng), prefix + ".Vz");
  c.Vr = named(rand_uniform({h, h}, -range, range, rng), prefix + ".Vr");
  c.Vc = named(rand_uniform({h, h}, -range, range, rng), prefix + ".Vc");
  c.Uz = named(rand_uniform({h, h}, -range, range, rng), prefix + ".Uz");
  c.Ur = named(rand_uniform({h, h}, -range, range, rng), prefix + ".Ur");
  c.Uc = named(rand_uniform({h, h}, -range, range, rng), prefix + ".Uc");
  return c;
}
}  // namespace detail

inline ModelParams init_params(const ModelConfig& cfg, size_t vocab_size, uint64_t seed) {
  Rng rng(derive_seed(seed, {0x9a2a3aULL}));
  size_t h = cfg.hidden;
  double cr = cfg.cell_range();
  ModelParams p;
  p.config = cfg;
  p.vocab_size = vocab_size;
  p.emb = detail::named(rand_uniform({vocab_size + 1, h}, -cfg.emb_init, cfg.emb_init, rng), "emb");
  static const char* stacks[3] = {"shared", "ae", "as"};
  for (int s = 0; s < 3; ++s) {
    auto& vec = s == 0 ? p.shared : (s == 1 ? p.ae : p.as_);
    for (size_t l = 0; l < cfg.layers; ++l)
      vec.push_back(
          detail::init_cell(std::string(stacks[s]) + "." + std::to_string(l), h, cr, rng));
  }
  double hr = cfg.head_init;
  p.senti_emb = detail::named(rand_uniform({3, h}, -hr, hr, rng), "senti_emb");
  p.crf_w = detail::named(rand_uniform({h, kNumPairs}, -hr, hr, rng), "crf.W");
  p.crf_b = detail::named(make_tensor({kNumPairs}), "crf.b");
  p.mlp_w = detail::named(rand_uniform({h, 4}, -hr, hr, rng), "mlp.W");
  p.mlp_b = detail::named(make_tensor({4}), "mlp.b");
  return p;
}

// Mean over relation-neighbors plus the shared bias; isolated nodes get
// exactly k.
inline TensorPtr neighbor_aggregate(Tape& tape, const HeteroGraph& g, const TensorPtr& h,
                                    EdgeType relation, const TensorPtr& k) {
  return add_rowvec(tape, adj_mean(tape, h, g.neighbors(relation)), k);
}

// Gated update: z and r gate a GRU-style candidate built from the four
// per-relation neighbor aggregates, the node input, and the previous hidden
// state. With z forced to 0 the output is exactly h_prev.
inline TensorPtr hggnn_cell(Tape& tape, const CellWeights& w, const TensorPtr& x,
                            const TensorPtr& h_prev, const HeteroGraph& g) {
  if (h_prev->shape.size() != 2 || static_cast<int>(h_prev->shape[0]) != g.node_count())
    throw ShapeError("hggnn_cell: hidden rows " + h_prev->shape_str() + " do not match node count");

  std::array<TensorPtr, 4> agg;
  for (int r = 0; r < 4; ++r)
    agg[r] = neighbor_aggregate(tape, g, h_prev, static_cast<EdgeType>(r), w.k);

  auto channel_sum = [&](const std::array<TensorPtr, 4>& wm, const TensorPtr& v,
                         const TensorPtr& u, const TensorPtr& h_in) {
    TensorPtr s = matmul(tape, agg[0], wm[0]);
    for (int r = 1; r < 4; ++r) s = add(tape, s, matmul(tape, agg[r], wm[r]));
    s = add(tape, s, matmul(tape, x, v));
    return add(tape, s, matmul(tape, h_in, u));
  };

  TensorPtr z = sigmoid(tape, channel_sum(w.Wz, w.Vz, w.Uz, h_prev));
  TensorPtr r = sigmoid(tape, channel_sum(w.Wr, w.Vr, w.Ur, h_prev));
  TensorPtr cand = tanh_op(tape, channel_sum(w.Wc, w.Vc, w.Uc, mul(tape, r, h_prev)));
  TensorPtr h = add(tape, mul(tape, affine(tape, z, 1.0, -1.0), h_prev), mul(tape, z, cand));
  check_finite(*h, "hggnn_cell");
  return h;
}

// Applies the stack's layers in order, feeding the same (optionally dropped
// out) input x to every layer.
inline TensorPtr run_stack(Tape& tape, const std::vector<CellWeights>& stack, const TensorPtr& x,
                           const TensorPtr& h0, const HeteroGraph& g, double dropout_rate,
                           bool train, Rng& rng) {
  TensorPtr xin = dropout(tape, x, dropout_rate, train, rng);
  TensorPtr h = h0;
  for (const CellWeights& w : stack) h = hggnn_cell(tape, w, xin, h, g);
  return h;
}

// --- CRF ---------------------------------------------------------------

// Validates a BIO label sequence (I requires a preceding B or I).
inline void check_bio(const std::vector<int>& tags) {
  for (size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] < 0 || tags[i] >= kNumAeLabels)
      throw ValidationError("crf: label index out of range");
    if (tags[i] == kLabelI && (i == 0 || tags[i - 1] == kLabelO))
      throw ValidationError("crf: I tag without preceding B or I");
  }
}

// Pair scores for one sentence: out[i, p*3+y] = crf_w[:,p*3+y] . m_i + crf_b,
// the log-potential of labeling token i with y after label p (p=3 is START).
inline TensorPtr crf_pair_scores(Tape& tape, const TensorPtr& m, const TensorPtr& crf_w,
                                 const TensorPtr& crf_b) {
  return add_rowvec(tape, matmul(tape, m, crf_w), crf_b);
}

namespace detail {
inline double logsumexp3(const double* v) {
  double mx = std::max(v[0], std::max(v[1], v[2]));
  return mx + std::log(std::exp(v[0] - mx) + std::exp(v[1] - mx) + std::exp(v[2] - mx));
}
}  // namespace detail

// log P(gold | scores) = gold-path score - log Z. Fused primitive: the
// backward pass uses forward-backward pairwise marginals.
inline TensorPtr crf_log_likelihood_scores(Tape& tape, const TensorPtr& scores,
                                           const std::vector<int>& gold) {
  size_t n = gold.size();
  if (n == 0) throw ValidationError("crf: empty sentence");
  if (scores->shape.size() != 2 || scores->shape[0] != n ||
      scores->shape[1] != static_cast<size_t>(kNumPairs))
    throw ShapeError("crf: score tensor " + scores->shape_str() + " does not match sentence");
  check_bio(gold);

  const int K = kNumAeLabels;
  auto sc = [&](size_t i, int p, int y) { return scores->val[i * kNumPairs + p * K + y]; };

  // forward recursion in log space
  std::vector<std::array<double, 3>> alpha(n);
  for (int y = 0; y < K; ++y) alpha[0][y] = sc(0, kStart, y);
  for (size_t i = 1; i < n; ++i)
    for (int y = 0; y < K; ++y) {
      double terms[3];
      for (int p = 0; p < K; ++p) terms[p] = alpha[i - 1][p] + sc(i, p, y);
      alpha[i][y] = detail::logsumexp3(terms);
    }
  double log_z = detail::logsumexp3(alpha[n - 1].data());

  double gold_score = sc(0, kStart, gold[0]);
  for (size_t i = 1; i < n; ++i) gold_score += sc(i, gold[i - 1], gold[i]);

  auto out = make_scalar(gold_score - log_z);
  scores->ensure_grad();
  out->ensure_grad();
  tape.record([scores, out, gold, n, log_z, alpha = std::move(alpha)] {
    const int Kl = kNumAeLabels;
    auto sc2 = [&](size_t i, int p, int y) { return scores->val[i * kNumPairs + p * Kl + y]; };
    // backward recursion
    std::vector<std::array<double, 3>> beta(n);
    beta[n - 1] = {0.0, 0.0, 0.0};
    for (size_t i = n - 1; i-- > 0;)
      for (int p = 0; p < Kl; ++p) {
        double terms[3];
        for (int y = 0; y < Kl; ++y) terms[y] = sc2(i + 1, p, y) + beta[i + 1][y];
        beta[i][p] = detail::logsumexp3(terms);
      }
    double g = out->grad[0];
    auto add_grad = [&](size_t i, int p, int y, double v) {
      scores->grad[i * kNumPairs + p * Kl + y] += g * v;
    };
    // d ll / d score = gold indicator - pairwise marginal
    add_grad(0, kStart, gold[0], 1.0);
    for (size_t i = 1; i < n; ++i) add_grad(i, gold[i - 1], gold[i], 1.0);
    for (int y = 0; y < Kl; ++y)
      add_grad(0, kStart, y, -std::exp(sc2(0, kStart, y) + beta[0][y] - log_z));
    for (size_t i = 1; i < n; ++i)
      for (int p = 0; p < Kl; ++p)
        for (int y = 0; y < Kl; ++y)
          add_grad(i, p, y, -std::exp(alpha[i - 1][p] + sc2(i, p, y) + beta[i][y] - log_z));
  });
  return out;
}

inline TensorPtr crf_log_likelihood(Tape& tape, const TensorPtr& m, const TensorPtr& crf_w,
                                    const TensorPtr& crf_b, const std::vector<int>& gold) {
  return crf_log_likelihood_scores(tape, crf_pair_scores(tape, m, crf_w, crf_b), gold);
}

// Highest-scoring label sequence; among ties, the lexicographically smallest
// label-index path. Suffix DP plus a greedy left-to-right walk makes the
// lexicographic tie-break exact.
inline std::vector<int> crf_viterbi_scores(const Tensor& scores) {
  const int K = kNumAeLabels;
  size_t n = scores.shape[0];
  if (scores.shape.size() != 2 || scores.shape[1] != static_cast<size_t>(kNumPairs))
    throw ShapeError("crf_viterbi: bad score tensor " + scores.shape_str());
  auto sc = [&](size_t i, int p, int y) { return scores.val[i * kNumPairs + p * K + y]; };

  // best[i][p]: best achievable suffix score from position i given previous label p
  std::vector<std::array<double, 4>> best(n + 1);
  best[n] = {0.0, 0.0, 0.0, 0.0};
  for (size_t i = n; i-- > 0;)
    for (int p = 0; p < 4; ++p) {
      double b = -std::numeric_limits<double>::infinity();
      for (int y = 0; y < K; ++y) b = std::max(b, sc(i, p, y) + best[i + 1][y]);
      best[i][p] = b;
    }
  std::vector<int> out(n);
  int prev = kStart;
  for (size_t i = 0; i < n; ++i) {
    for (int y = 0; y < K; ++y)
      if (sc(i, prev, y) + best[i + 1][y] == best[i][prev]) {
        out[i] = y;
        break;
      }
    prev = out[i];
  }
  return out;
}

inline std::vector<int> crf_viterbi(const Tensor& m, const Tensor& crf_w, const Tensor& crf_b) {
  size_t n = m.shape[0], h = m.shape[1];
  Tensor scores;
  scores.shape = {n, static_cast<size_t>(kNumPairs)};
  scores.val.assign(n * kNumPairs, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (int c = 0; c < kNumPairs; ++c) {
      double acc = crf_b.val[static_cast<size_t>(c)];
      for (size_t d = 0; d < h; ++d) acc += m.val[i * h + d] * crf_w.val[d * kNumPairs + c];
      scores.val[i * kNumPairs + c] = acc;
    }
  return crf_viterbi_scores(scores);
}

// --- sentiment heads -----------------------------------------------------

// Per-token distribution over POS/NEG/NEU/NONE.
inline TensorPtr as_mlp_probs(Tape& tape, const TensorPtr& n_hidden, const TensorPtr& mlp_w,
                              const TensorPtr& mlp_b) {
  return row_softmax(tape, add_rowvec(tape, matmul(tape, n_hidden, mlp_w), mlp_b));
}

// Per-token distribution over POS/NEG/NEU from inner products with the
// sentiment-node embeddings.
inline TensorPtr as_sim_probs(Tape& tape, const TensorPtr& n_hidden, const TensorPtr& senti_emb) {
  if (senti_emb->shape.size() != 2 || senti_emb->shape[0] != 3)
    throw ShapeError("as_sim_probs: sentiment embeddings must have 3 rows");
  return row_softmax(tape, matmul_nt(tape, n_hidden, senti_emb));
}

}  // namespace tbsa

#endif
