#ifndef TBSA_TRAINER_HPP
#define TBSA_TRAINER_HPP

#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <thread>
#include <vector>

#include "tbsa/checkpoint.hpp"
#include "tbsa/metrics.hpp"
#include "tbsa/optim.hpp"

namespace tbsa {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-4;
  double clip_norm = 1.0;
  double dropout = 0.5;
  double lambda = 1.0;
  double dev_fraction = 0.2;
  uint64_t seed = 42;
  size_t hidden = 64;
  size_t layers = 3;
  int workers = 1;
  int window = 3;
  bool pmi_edges = false;
  DhgConfig dhg;

  void validate() const {
    if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (learning_rate <= 0) throw ValidationError("train: learning_rate must be positive");
    if (clip_norm <= 0) throw ValidationError("train: clip_norm must be positive");
    if (dropout < 0 || dropout >= 1) throw ValidationError("train: dropout must be in [0,1)");
    if (lambda < 0) throw ValidationError("train: lambda must be >= 0");
    if (!(dev_fraction > 0 && dev_fraction < 1))
      throw ValidationError("train: dev_fraction must be in (0,1)");
    if (hidden < 1 || layers < 1) throw ValidationError("train: hidden and layers must be >= 1");
    if (workers < 1) throw ValidationError("train: workers must be >= 1");
    if (window < 0) throw ValidationError("train: window must be >= 0");
    dhg.validate();
  }

  std::map<std::string, std::string> fingerprint() const {
    char buf[64];
    std::map<std::string, std::string> m;
    auto put = [&](const char* k, double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      m[k] = buf;
    };
    m["epochs"] = std::to_string(epochs);
    m["batch_size"] = std::to_string(batch_size);
    put("learning_rate", learning_rate);
    put("clip_norm", clip_norm);
    put("dropout", dropout);
    put("lambda", lambda);
    put("dev_fraction", dev_fraction);
    m["seed"] = std::to_string(seed);
    m["window"] = std::to_string(window);
    m["graph_edges"] = pmi_edges ? "pmi" : "syntax";
    m["dhg.times"] = std::to_string(dhg.times);
    put("dhg.epsilon", dhg.epsilon);
    put("dhg.mu", dhg.mu);
    put("dhg.tf_keep", dhg.tf_keep);
    put("dist.pos", dhg.train_dist[0]);
    put("dist.neg", dhg.train_dist[1]);
    put("dist.neu", dhg.train_dist[2]);
    return m;
  }
};

// --- loss contracts (plain-double mirrors of the tape assembly) -----------

// Mean over sentences of per-token-normalized CRF negative log-likelihood.
inline double loss_ae(const std::vector<double>& nll_per_sentence,
                      const std::vector<int>& lengths) {
  if (nll_per_sentence.empty() || nll_per_sentence.size() != lengths.size())
    throw ValidationError("loss_ae: empty batch or length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < nll_per_sentence.size(); ++i)
    acc += nll_per_sentence[i] / static_cast<double>(lengths[i]);
  return acc / static_cast<double>(nll_per_sentence.size());
}

// Half the token-mean 4-class cross-entropy of the MLP head over all tokens
// plus half the token-mean 3-class cross-entropy of the similarity head over
// aspect tokens; aspect-free sentences contribute 0 to the second term.
inline double loss_as(const std::vector<std::vector<std::array<double, 4>>>& mlp_probs,
                      const std::vector<std::vector<std::array<double, 3>>>& sim_probs,
                      const std::vector<std::vector<int>>& gold4) {
  size_t n_sent = mlp_probs.size();
  if (n_sent == 0 || sim_probs.size() != n_sent || gold4.size() != n_sent)
    throw ValidationError("loss_as: empty batch or size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < n_sent; ++i) {
    size_t n = gold4[i].size();
    double mlp_term = 0.0, sim_term = 0.0;
    long aspects = 0;
    for (size_t j = 0; j < n; ++j) {
      int g = gold4[i][j];
      mlp_term -= std::log(mlp_probs[i][j][static_cast<size_t>(g)]);
      if (g < 3) {
        sim_term -= std::log(sim_probs[i][j][static_cast<size_t>(g)]);
        ++aspects;
      }
    }
    mlp_term /= static_cast<double>(n);
    if (aspects > 0) sim_term /= static_cast<double>(aspects);
    acc += 0.5 * mlp_term + 0.5 * sim_term;
  }
  return acc / static_cast<double>(n_sent);
}

inline double total_loss(double l_ae, double l_as, double lambda) { return l_ae + lambda * l_as; }

// --- per-sentence tape assembly -------------------------------------------

inline std::vector<int> gold_ae_labels(const Sentence& s) {
  std::vector<int> out;
  out.reserve(s.tokens.size());
  for (const Token& t : s.tokens) out.push_back(ae_label_of(t.aspect));
  return out;
}

inline std::vector<int> gold_as_labels(const Sentence& s) {  // 4-class, NONE = 3
  std::vector<int> out;
  out.reserve(s.tokens.size());
  for (const Token& t : s.tokens) out.push_back(static_cast<int>(t.senti));
  return out;
}

// loss_i = nll/n + lambda * (mlp/2n + sim/2a); built on the sentence's tape.
inline TensorPtr sentence_loss(Tape& tape, const Sentence& sent, const DhgResult& res,
                               const ModelParams& params, double lambda) {
  size_t n = static_cast<size_t>(sent.size());
  std::vector<int> ae = gold_ae_labels(sent);
  std::vector<int> as4 = gold_as_labels(sent);

  TensorPtr ll = crf_log_likelihood(tape, res.m_words, params.crf_w, params.crf_b, ae);
  TensorPtr loss = scale(tape, ll, -1.0 / static_cast<double>(n));

  TensorPtr mlp = as_mlp_probs(tape, res.n_words, params.mlp_w, params.mlp_b);
  std::vector<char> all_mask(n, 1);
  TensorPtr mlp_nll = pick_nll(tape, mlp, as4, all_mask);
  TensorPtr as_term = scale(tape, mlp_nll, 0.5 / static_cast<double>(n));

  std::vector<char> aspect_mask(n, 0);
  std::vector<int> as3(n, 0);
  size_t aspects = 0;
  for (size_t j = 0; j < n; ++j)
    if (as4[j] < 3) {
      aspect_mask[j] = 1;
      as3[j] = as4[j];
      ++aspects;
    }
  if (aspects > 0) {
    TensorPtr sim = as_sim_probs(tape, res.n_words, params.senti_emb);
    TensorPtr sim_nll = pick_nll(tape, sim, as3, aspect_mask);
    as_term = add(tape, as_term, scale(tape, sim_nll, 0.5 / static_cast<double>(aspects)));
  }
  return add(tape, loss, scale(tape, as_term, lambda));
}

// --- training loop ----------------------------------------------------------

struct TrainedCheckpoint {
  ModelParams params;
  std::map<std::string, int> vocab;
  int epoch = -1;
  MetricsReport dev;
  TrainConfig cfg;
};

inline CheckpointData pack_checkpoint(const TrainedCheckpoint& best) {
  auto meta = best.cfg.fingerprint();
  char buf[64];
  meta["best_epoch"] = std::to_string(best.epoch);
  std::snprintf(buf, sizeof(buf), "%.6f", best.dev.f_all);
  meta["dev_f_all"] = buf;
  std::snprintf(buf, sizeof(buf), "%.6f", best.dev.f_a);
  meta["dev_f_a"] = buf;
  std::snprintf(buf, sizeof(buf), "%.6f", best.dev.acc_s);
  meta["dev_acc_s"] = buf;
  std::snprintf(buf, sizeof(buf), "%.6f", best.dev.f_s);
  meta["dev_f_s"] = buf;
  return pack_model(best.params, best.vocab, std::move(meta));
}

// Rebuilds the run configuration stored in a checkpoint.
inline std::pair<DhgConfig, GraphSettings> run_config_from(const CheckpointData& ck) {
  DhgConfig dhg;
  dhg.times = std::stoi(ck.get_meta("dhg.times"));
  dhg.epsilon = std::stod(ck.get_meta("dhg.epsilon"));
  dhg.mu = std::stod(ck.get_meta("dhg.mu"));
  dhg.tf_keep = std::stod(ck.get_meta("dhg.tf_keep"));
  dhg.train_dist = {std::stod(ck.get_meta("dist.pos")), std::stod(ck.get_meta("dist.neg")),
                    std::stod(ck.get_meta("dist.neu"))};
  GraphSettings gs;
  gs.window = std::stoi(ck.get_meta("window"));
  gs.use_pmi = ck.get_meta("graph_edges") == "pmi";
  return {dhg, gs};
}

// Copies pretrained vectors into the trainable embedding rows. The model
// feeds sentiment-node embeddings and word embeddings through the same input
// matrices, so the embedding size must equal the hidden size.
inline void apply_pretrained(ModelParams& params, const EmbeddingTable& table) {
  if (static_cast<size_t>(table.dimension) != params.config.hidden)
    throw ValidationError("embedding dimension " + std::to_string(table.dimension) +
                          " must equal hidden dimension " +
                          std::to_string(params.config.hidden) +
                          " (set --hidden to the concatenated embedding size)");
  size_t h = params.config.hidden;
  for (const auto& [id, vec] : table.vectors) {
    if (id < 0 || static_cast<size_t>(id) >= params.vocab_size) continue;
    for (size_t d = 0; d < h; ++d) params.emb->val[static_cast<size_t>(id) * h + d] = vec[d];
  }
}

inline TrainedCheckpoint fit(const Corpus& train, const Corpus& dev, const TrainConfig& cfg_in,
                             std::ostream* log = nullptr,
                             const std::string& metrics_log_path = "",
                             const EmbeddingTable* pretrained = nullptr) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  train.validate();
  dev.validate();
  if (train.size() == 0) throw ValidationError("fit: empty training corpus");
  cfg.dhg.train_dist = sentiment_distribution(train);

  GraphSettings gs;
  gs.window = cfg.window;
  gs.use_pmi = cfg.pmi_edges;
  if (cfg.pmi_edges) gs.pmi_stats = std::make_shared<PmiStats>(train);

  ModelConfig mc;
  mc.hidden = cfg.hidden;
  mc.layers = cfg.layers;
  ModelParams params = init_params(mc, train.vocabulary.size(), cfg.seed);
  if (pretrained) apply_pretrained(params, *pretrained);
  std::vector<TensorPtr> plist = params.all();
  for (const auto& p : plist) p->ensure_grad();
  AdamState adam(cfg.learning_rate);

  std::vector<HeteroGraph> graphs;
  graphs.reserve(train.size());
  for (const Sentence& s : train.sentences) graphs.push_back(gs.build(s));

  std::ofstream metrics_log;
  if (!metrics_log_path.empty()) {
    metrics_log.open(metrics_log_path);
    if (!metrics_log) throw IoError("cannot open metrics log: " + metrics_log_path);
  }

  TrainedCheckpoint best;
  best.vocab = train.vocabulary;
  best.cfg = cfg;
  double best_f_all = -1.0;

  size_t n_train = train.size();
  std::vector<size_t> order(n_train);
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, {0x5u, static_cast<uint64_t>(epoch)}));
    for (size_t i = 0; i + 1 < n_train; ++i)
      std::swap(order[i], order[i + shuffle_rng.index(n_train - i)]);

    double epoch_loss = 0.0;
    for (size_t batch_start = 0; batch_start < n_train;
         batch_start += static_cast<size_t>(cfg.batch_size)) {
      size_t batch_end = std::min(n_train, batch_start + static_cast<size_t>(cfg.batch_size));
      size_t batch_n = batch_end - batch_start;

      // Each worker accumulates into its own parameter clone; clones are
      // merged in worker order so the result is independent of scheduling.
      int n_workers = std::min<int>(cfg.workers, static_cast<int>(batch_n));
      std::vector<ModelParams> clones;
      std::vector<double> worker_loss(static_cast<size_t>(n_workers), 0.0);
      std::vector<std::string> worker_error(static_cast<size_t>(n_workers));
      for (int w = 1; w < n_workers; ++w) clones.push_back(params.clone());

      auto process = [&](int w) {
        const ModelParams& local = w == 0 ? params : clones[static_cast<size_t>(w - 1)];
        try {
          for (size_t b = batch_start + static_cast<size_t>(w); b < batch_end;
               b += static_cast<size_t>(n_workers)) {
            size_t si = order[b];
            const Sentence& sent = train.sentences[si];
            Tape tape;
            uint64_t pass_seed = derive_seed(cfg.seed, {0x9a55ULL, static_cast<uint64_t>(epoch),
                                                        static_cast<uint64_t>(si)});
            DhgResult res =
                run_dhg(tape, sent, graphs[si], local, train.vocabulary, cfg.dhg,
                        DhgRunMode::training(epoch, cfg.dropout, pass_seed));
            TensorPtr loss = sentence_loss(tape, sent, res, local, cfg.lambda);
            if (!std::isfinite(loss->val[0]))
              throw NumericError("non-finite loss on sentence " + sent.id);
            worker_loss[static_cast<size_t>(w)] += loss->val[0];
            tape.backward_seeded(loss, 1.0 / static_cast<double>(batch_n));
          }
        } catch (const std::exception& e) {
          worker_error[static_cast<size_t>(w)] = e.what();
        }
      };

      if (n_workers == 1) {
        process(0);
      } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < n_workers; ++w) threads.emplace_back(process, w);
        for (auto& t : threads) t.join();
      }
      for (const auto& err : worker_error)
        if (!err.empty()) throw NumericError("training aborted: " + err);

      for (int w = 1; w < n_workers; ++w) {
        std::vector<TensorPtr> clone_list = clones[static_cast<size_t>(w - 1)].all();
        for (size_t t = 0; t < plist.size(); ++t)
          for (size_t i = 0; i < plist[t]->grad.size(); ++i)
            plist[t]->grad[i] += clone_list[t]->grad[i];
      }
      for (double l : worker_loss) epoch_loss += l;

      clip_global_norm(plist, cfg.clip_norm);
      adam.step(plist);
    }
    epoch_loss /= static_cast<double>(n_train);

    MetricsReport devrep = evaluate(dev, params, train.vocabulary, cfg.dhg, gs);
    if (metrics_log.is_open()) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.4f\t%.4f\t%.4f\t%.4f\n", epoch, epoch_loss,
                    devrep.f_a, devrep.acc_s, devrep.f_s, devrep.f_all);
      metrics_log << buf;
    }
    if (log) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "epoch %d  loss %.6f  dev F-a %.4f  F-all %.4f\n", epoch,
                    epoch_loss, devrep.f_a, devrep.f_all);
      *log << buf << std::flush;
    }
    if (devrep.f_all > best_f_all) {
      best_f_all = devrep.f_all;
      best.params = params.clone();
      best.epoch = epoch;
      best.dev = devrep;
    }
  }
  return best;
}

}  // namespace tbsa

#endif
