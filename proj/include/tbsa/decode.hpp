#ifndef TBSA_DECODE_HPP
#define TBSA_DECODE_HPP

#include <array>
#include <string>
#include <vector>

#include "tbsa/dhg.hpp"

namespace tbsa {

struct AspectPrediction {
  int start = 0, end = 0;  // 1-based, inclusive
  SentTag senti = SentTag::NEU;
  double confidence = 0.0;
};

// Maximal B[I]* runs as (start,end) spans, ordered by start. A stray I after
// O (or at the start) is promoted to B.
inline std::vector<std::pair<int, int>> bio_spans(const std::vector<AspectTag>& tags) {
  std::vector<std::pair<int, int>> spans;
  int n = static_cast<int>(tags.size());
  for (int i = 0; i < n; ++i) {
    if (tags[static_cast<size_t>(i)] == AspectTag::O) continue;
    int start = i;
    while (i + 1 < n && tags[static_cast<size_t>(i + 1)] == AspectTag::I) ++i;
    spans.emplace_back(start + 1, i + 1);
  }
  return spans;
}

// Mean of the span's token distributions; argmax with ties resolved in
// POS < NEG < NEU order; confidence is the winning averaged probability.
inline std::pair<SentTag, double> span_sentiment(std::pair<int, int> span,
                                                 const std::vector<std::array<double, 3>>& dists) {
  if (span.first > span.second || span.first < 1 ||
      span.second > static_cast<int>(dists.size()))
    throw ValidationError("span_sentiment: empty or out-of-range span");
  std::array<double, 3> mean{0, 0, 0};
  int len = span.second - span.first + 1;
  for (int i = span.first; i <= span.second; ++i)
    for (int s = 0; s < 3; ++s)
      mean[static_cast<size_t>(s)] += dists[static_cast<size_t>(i - 1)][static_cast<size_t>(s)];
  for (double& v : mean) v /= len;
  int best = 0;
  for (int s = 1; s < 3; ++s)
    if (mean[static_cast<size_t>(s)] > mean[static_cast<size_t>(best)]) best = s;
  return {static_cast<SentTag>(best), mean[static_cast<size_t>(best)]};
}

// 3-class distribution used for span averaging: elementwise mean of the
// similarity head and the MLP head's first three classes renormalized.
inline std::vector<std::array<double, 3>> combined_token_dists(const Tensor& sim,
                                                               const Tensor& mlp) {
  size_t n = sim.shape[0];
  if (mlp.shape[0] != n) throw ShapeError("combined_token_dists: row mismatch");
  std::vector<std::array<double, 3>> out(n);
  for (size_t i = 0; i < n; ++i) {
    double z = mlp.at(i, 0) + mlp.at(i, 1) + mlp.at(i, 2);
    for (size_t s = 0; s < 3; ++s)
      out[i][s] = 0.5 * (sim.at(i, s) + (z > 0 ? mlp.at(i, s) / z : 1.0 / 3));
  }
  return out;
}

inline std::vector<std::pair<int, int>> gold_aspect_spans(const Sentence& sent) {
  std::vector<AspectTag> tags;
  tags.reserve(sent.tokens.size());
  for (const Token& t : sent.tokens) tags.push_back(t.aspect);
  return bio_spans(tags);
}

struct SentencePrediction {
  std::vector<int> viterbi;                        // AE label index per token
  std::vector<std::array<double, 3>> token_dist;   // combined 3-class distribution
  std::vector<AspectPrediction> aspects;
  IterationTrace trace;
  HeteroGraph final_graph;
};

struct GraphSettings {
  int window = 3;
  bool use_pmi = false;
  std::shared_ptr<PmiStats> pmi_stats;

  HeteroGraph build(const Sentence& s) const {
    if (use_pmi) {
      if (!pmi_stats) throw ValidationError("graph settings: PMI mode without statistics");
      return init_graph_pmi(s, window, *pmi_stats);
    }
    return init_graph(s, window);
  }
};

inline SentencePrediction predict_sentence(const Sentence& sent, const ModelParams& params,
                                           const std::map<std::string, int>& vocab,
                                           const DhgConfig& cfg, const GraphSettings& gs) {
  Tape tape;
  HeteroGraph g0 = gs.build(sent);
  DhgResult res = run_dhg(tape, sent, g0, params, vocab, cfg, DhgRunMode::eval());

  SentencePrediction out;
  out.trace = std::move(res.trace);
  out.final_graph = std::move(res.graph);

  TensorPtr scores = crf_pair_scores(tape, res.m_words, params.crf_w, params.crf_b);
  out.viterbi = crf_viterbi_scores(*scores);

  TensorPtr sim = as_sim_probs(tape, res.n_words, params.senti_emb);
  TensorPtr mlp = as_mlp_probs(tape, res.n_words, params.mlp_w, params.mlp_b);
  out.token_dist = combined_token_dists(*sim, *mlp);

  std::vector<AspectTag> tags;
  tags.reserve(out.viterbi.size());
  for (int l : out.viterbi) tags.push_back(aspect_of_label(l));
  for (const auto& span : bio_spans(tags)) {
    auto [senti, conf] = span_sentiment(span, out.token_dist);
    out.aspects.push_back({span.first, span.second, senti, conf});
  }
  return out;
}

inline std::string span_surface(const Sentence& sent, int start, int end) {
  std::string s;
  for (int i = start; i <= end; ++i) {
    if (i > start) s += ' ';
    s += sent.tokens[static_cast<size_t>(i - 1)].surface;
  }
  return s;
}

// One line per aspect: id, start, end, surface, sentiment, confidence.
inline std::string format_predictions(const Sentence& sent,
                                      const std::vector<AspectPrediction>& preds) {
  std::string out;
  char buf[64];
  for (const AspectPrediction& p : preds) {
    std::snprintf(buf, sizeof(buf), "%.6f", p.confidence);
    out += sent.id + "\t" + std::to_string(p.start) + "\t" + std::to_string(p.end) + "\t" +
           span_surface(sent, p.start, p.end) + "\t" + to_string(p.senti) + "\t" + buf + "\n";
  }
  return out;
}

}  // namespace tbsa

#endif
