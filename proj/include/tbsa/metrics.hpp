#ifndef TBSA_METRICS_HPP
#define TBSA_METRICS_HPP

#include <array>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tbsa/decode.hpp"

namespace tbsa {

using Span = std::pair<int, int>;
using Pair = std::pair<Span, SentTag>;  // exact span + polarity

inline double f1_from_counts(long tp, long pred, long gold) {
  if (pred == 0 && gold == 0) return 1.0;  // correct abstention
  double p = pred > 0 ? static_cast<double>(tp) / static_cast<double>(pred) : 0.0;
  double r = gold > 0 ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
  return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
}

struct MetricsReport {
  double f_a = 0.0, acc_s = 0.0, f_s = 0.0, f_all = 0.0, sentence_acc_noop = 0.0;
  bool has_noop = false;  // the no-opinion accuracy is defined only on a nonempty subset

  long aspect_tp = 0, aspect_pred = 0, aspect_gold = 0;
  long pair_tp = 0, pair_pred = 0, pair_gold = 0;
  long senti_correct = 0, senti_total = 0;
  std::array<std::array<long, 3>, 3> senti_confusion{};  // [gold][pred], over gold spans
  long noop_correct = 0, noop_total = 0;

  void finish() {
    f_a = f1_from_counts(aspect_tp, aspect_pred, aspect_gold);
    f_all = f1_from_counts(pair_tp, pair_pred, pair_gold);
    acc_s = senti_total > 0
                ? static_cast<double>(senti_correct) / static_cast<double>(senti_total)
                : 0.0;
    // macro F over classes that occur in gold or predictions; others excluded
    double sum = 0.0;
    int classes = 0;
    for (int c = 0; c < 3; ++c) {
      long tp = senti_confusion[c][c];
      long gold = 0, pred = 0;
      for (int o = 0; o < 3; ++o) {
        gold += senti_confusion[c][o];
        pred += senti_confusion[o][c];
      }
      if (gold == 0 && pred == 0) continue;
      ++classes;
      sum += f1_from_counts(tp, pred, gold);
    }
    f_s = classes > 0 ? sum / classes : 0.0;
    has_noop = noop_total > 0;
    sentence_acc_noop =
        has_noop ? static_cast<double>(noop_correct) / static_cast<double>(noop_total) : 0.0;
  }
};

// Exact-span-match micro F1 over the corpus.
inline double f_aspect(const std::vector<std::vector<Span>>& pred,
                       const std::vector<std::vector<Span>>& gold, MetricsReport* rep = nullptr) {
  if (pred.size() != gold.size()) throw ValidationError("f_aspect: sentence count mismatch");
  long tp = 0, np = 0, ng = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    np += static_cast<long>(pred[i].size());
    ng += static_cast<long>(gold[i].size());
    for (const Span& s : pred[i])
      for (const Span& g : gold[i])
        if (s == g) {
          ++tp;
          break;
        }
  }
  if (rep) {
    rep->aspect_tp = tp;
    rep->aspect_pred = np;
    rep->aspect_gold = ng;
  }
  return f1_from_counts(tp, np, ng);
}

// Micro F1 over (span, polarity) pairs; both elements must match.
inline double f_all(const std::vector<std::vector<Pair>>& pred,
                    const std::vector<std::vector<Pair>>& gold, MetricsReport* rep = nullptr) {
  if (pred.size() != gold.size()) throw ValidationError("f_all: sentence count mismatch");
  long tp = 0, np = 0, ng = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    np += static_cast<long>(pred[i].size());
    ng += static_cast<long>(gold[i].size());
    for (const Pair& s : pred[i])
      for (const Pair& g : gold[i])
        if (s == g) {
          ++tp;
          break;
        }
  }
  if (rep) {
    rep->pair_tp = tp;
    rep->pair_pred = np;
    rep->pair_gold = ng;
  }
  return f1_from_counts(tp, np, ng);
}

// Polarity accuracy and macro F over gold spans, scored from the model's
// per-token distributions (conditioning on gold spans keeps the sentiment
// metrics independent of extraction quality).
inline std::pair<double, double> sentiment_scores(
    const std::vector<std::vector<Pair>>& gold,
    const std::vector<std::vector<std::array<double, 3>>>& token_dists,
    MetricsReport* rep = nullptr) {
  if (gold.size() != token_dists.size())
    throw ValidationError("sentiment_scores: sentence count mismatch");
  MetricsReport local;
  MetricsReport& r = rep ? *rep : local;
  for (size_t i = 0; i < gold.size(); ++i)
    for (const Pair& g : gold[i]) {
      auto [senti, conf] = span_sentiment(g.first, token_dists[i]);
      (void)conf;
      ++r.senti_total;
      if (senti == g.second) ++r.senti_correct;
      r.senti_confusion[static_cast<size_t>(g.second)][static_cast<size_t>(senti)]++;
    }
  r.finish();
  return {r.acc_s, r.f_s};
}

enum class SubsetKind { All, Multi, Noop };

inline SubsetKind subset_from_string(const std::string& s) {
  if (s == "all") return SubsetKind::All;
  if (s == "multi") return SubsetKind::Multi;
  if (s == "noop") return SubsetKind::Noop;
  throw ValidationError("unknown subset '" + s + "' (expected all|multi|noop)");
}

// multi: >= 2 gold aspects; noop: 0 gold aspects; all: identity.
inline Corpus subset_filter(const Corpus& corpus, SubsetKind kind) {
  if (kind == SubsetKind::All) return corpus;
  std::vector<Sentence> keep;
  for (const Sentence& s : corpus.sentences) {
    size_t n_aspects = gold_aspect_spans(s).size();
    if (kind == SubsetKind::Multi ? n_aspects >= 2 : n_aspects == 0) keep.push_back(s);
  }
  Corpus out;
  out.sentences = std::move(keep);
  out.rebuild_index();
  return out;
}

// Fraction of no-gold-aspect sentences where the model also predicts nothing.
inline double sentence_acc_noop(const std::vector<std::vector<Span>>& pred,
                                const std::vector<std::vector<Span>>& gold,
                                MetricsReport* rep = nullptr) {
  if (pred.size() != gold.size()) throw ValidationError("sentence_acc_noop: count mismatch");
  long total = 0, correct = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!gold[i].empty()) continue;
    ++total;
    if (pred[i].empty()) ++correct;
  }
  if (total == 0) throw ValidationError("sentence_acc_noop: no no-opinion sentences in subset");
  if (rep) {
    rep->noop_correct = correct;
    rep->noop_total = total;
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

// Full evaluation of a model over a corpus.
inline MetricsReport evaluate(const Corpus& corpus, const ModelParams& params,
                              const std::map<std::string, int>& vocab, const DhgConfig& cfg,
                              const GraphSettings& gs) {
  MetricsReport rep;
  std::vector<std::vector<Span>> pred_spans, gold_spans;
  std::vector<std::vector<Pair>> pred_pairs, gold_pairs;
  std::vector<std::vector<std::array<double, 3>>> dists;
  for (const Sentence& s : corpus.sentences) {
    SentencePrediction p = predict_sentence(s, params, vocab, cfg, gs);
    std::vector<Span> ps;
    std::vector<Pair> pp;
    for (const AspectPrediction& a : p.aspects) {
      ps.emplace_back(a.start, a.end);
      pp.push_back({{a.start, a.end}, a.senti});
    }
    std::vector<Span> gs_;
    std::vector<Pair> gp;
    for (const Span& g : gold_aspect_spans(s)) {
      gs_.push_back(g);
      gp.push_back({g, s.tokens[static_cast<size_t>(g.first - 1)].senti});
    }
    pred_spans.push_back(std::move(ps));
    pred_pairs.push_back(std::move(pp));
    gold_spans.push_back(std::move(gs_));
    gold_pairs.push_back(std::move(gp));
    dists.push_back(p.token_dist);
  }
  f_aspect(pred_spans, gold_spans, &rep);
  f_all(pred_pairs, gold_pairs, &rep);
  sentiment_scores(gold_pairs, dists, &rep);
  for (size_t i = 0; i < gold_spans.size(); ++i) {
    if (!gold_spans[i].empty()) continue;
    ++rep.noop_total;
    if (pred_spans[i].empty()) ++rep.noop_correct;
  }
  rep.finish();
  return rep;
}

inline std::string format_report(const MetricsReport& r) {
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-10s %8s   %s\n", "metric", "value", "counts");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-10s %8.4f   tp=%ld pred=%ld gold=%ld\n", "F-a", r.f_a,
                r.aspect_tp, r.aspect_pred, r.aspect_gold);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-10s %8.4f   correct=%ld total=%ld\n", "acc-s", r.acc_s,
                r.senti_correct, r.senti_total);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-10s %8.4f\n", "F-s", r.f_s);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-10s %8.4f   tp=%ld pred=%ld gold=%ld\n", "F-all", r.f_all,
                r.pair_tp, r.pair_pred, r.pair_gold);
  out += buf;
  if (r.has_noop) {
    std::snprintf(buf, sizeof(buf), "%-10s %8.4f   correct=%ld total=%ld\n", "acc-noop",
                  r.sentence_acc_noop, r.noop_correct, r.noop_total);
    out += buf;
  }
  return out;
}

inline std::string format_report_kv(const MetricsReport& r) {
  char buf[512];
  std::string out;
  auto kv = [&](const char* k, double v) {
    std::snprintf(buf, sizeof(buf), "%s=%.6f\n", k, v);
    out += buf;
  };
  kv("f_a", r.f_a);
  kv("acc_s", r.acc_s);
  kv("f_s", r.f_s);
  kv("f_all", r.f_all);
  if (r.has_noop) kv("sentence_acc_noop", r.sentence_acc_noop);
  std::snprintf(buf, sizeof(buf),
                "aspect_tp=%ld\naspect_pred=%ld\naspect_gold=%ld\npair_tp=%ld\npair_pred=%ld\n"
                "pair_gold=%ld\nsenti_correct=%ld\nsenti_total=%ld\nnoop_correct=%ld\n"
                "noop_total=%ld\n",
                r.aspect_tp, r.aspect_pred, r.aspect_gold, r.pair_tp, r.pair_pred, r.pair_gold,
                r.senti_correct, r.senti_total, r.noop_correct, r.noop_total);
  out += buf;
  return out;
}

}  // namespace tbsa

#endif
