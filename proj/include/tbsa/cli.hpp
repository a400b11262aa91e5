#ifndef TBSA_CLI_HPP
#define TBSA_CLI_HPP

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tbsa/gradcheck.hpp"
#include "tbsa/trainer.hpp"

namespace tbsa {

inline int log_level() {  // 0 quiet, 1 info, 2 debug
  const char* v = std::getenv("TBSA_LOG");
  if (!v) return 1;
  std::string s(v);
  if (s == "quiet") return 0;
  if (s == "debug") return 2;
  return 1;
}

// Loads one or two embedding files and concatenates them per word.
inline EmbeddingTable load_embedding_stack(const std::vector<std::string>& files,
                                           std::vector<int> dims,
                                           const std::map<std::string, int>& vocab,
                                           uint64_t seed) {
  if (dims.empty()) dims.assign(files.size(), 0);
  if (dims.size() != files.size())
    throw ValidationError("--emb-dim must be given once per --embeddings file");
  EmbeddingTable out;
  for (size_t f = 0; f < files.size(); ++f) {
    int dim = dims[f];
    if (dim <= 0) {  // infer from the first row
      std::ifstream probe(files[f]);
      if (!probe) throw IoError("cannot open embedding file: " + files[f]);
      std::string line;
      if (!std::getline(probe, line)) throw ParseError(files[f] + ": empty embedding file");
      std::istringstream ls(line);
      std::string w;
      double v;
      ls >> w;
      dim = 0;
      while (ls >> v) ++dim;
      if (dim == 0) throw ParseError(files[f] + ": no vector values in first row");
    }
    EmbeddingTable t = load_embeddings(files[f], vocab, dim, derive_seed(seed, {0xe6b, f}));
    if (f == 0) {
      out = std::move(t);
    } else {
      out.dimension += t.dimension;
      for (auto& [id, vec] : out.vectors) {
        const auto& extra = t.at(id);
        vec.insert(vec.end(), extra.begin(), extra.end());
      }
    }
  }
  return out;
}

// Flat key=value config file; keys match the long flag names. Values set
// here act as defaults that explicit flags override.
inline void apply_config_file(const std::string& path, TrainConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    try {
      if (key == "epochs") cfg.epochs = std::stoi(val);
      else if (key == "batch-size") cfg.batch_size = std::stoi(val);
      else if (key == "lr") cfg.learning_rate = std::stod(val);
      else if (key == "clip-norm") cfg.clip_norm = std::stod(val);
      else if (key == "dropout") cfg.dropout = std::stod(val);
      else if (key == "lambda") cfg.lambda = std::stod(val);
      else if (key == "dev-fraction") cfg.dev_fraction = std::stod(val);
      else if (key == "hidden") cfg.hidden = std::stoul(val);
      else if (key == "layers") cfg.layers = std::stoul(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "workers") cfg.workers = std::stoi(val);
      else if (key == "window") cfg.window = std::stoi(val);
      else if (key == "dhg-times") cfg.dhg.times = std::stoi(val);
      else if (key == "dhg-epsilon") cfg.dhg.epsilon = std::stod(val);
      else if (key == "dhg-mu") cfg.dhg.mu = std::stod(val);
      else if (key == "tf-keep") cfg.dhg.tf_keep = std::stod(val);
      else if (key == "pmi") cfg.pmi_edges = val == "1" || val == "true";
      else throw ParseError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

struct GradcheckFixture {
  Corpus corpus;
  ModelParams params;
  DhgConfig dhg;
  GraphSettings gs;
};

// Tiny deterministic setup used by the gradcheck command and the acceptance
// suite: one 3-token sentence with one aspect, syntax + position edges.
inline GradcheckFixture make_gradcheck_fixture(size_t hidden, int times, uint64_t seed) {
  std::istringstream data(
      "1\tgreat\t2\tamod\tO\tNONE\n"
      "2\tfood\t0\troot\tB\tPOS\n"
      "3\t!\t2\tpunct\tO\tNONE\n");
  GradcheckFixture fx{parse_dataset_stream(data, "<gradcheck>"),
                      ModelParams{},
                      DhgConfig{},
                      GraphSettings{}};
  ModelConfig mc;
  mc.hidden = hidden;
  mc.layers = 3;
  fx.params = init_params(mc, fx.corpus.vocabulary.size(), seed);
  fx.dhg.times = times;
  fx.gs.window = 3;
  return fx;
}

// Eval-mode total loss of the fixture sentence as a function of the
// parameters; dropout off, teacher forcing off.
inline double gradcheck_loss(GradcheckFixture& fx, bool with_backward, double lambda = 1.0) {
  const Sentence& sent = fx.corpus.sentences[0];
  Tape tape;
  HeteroGraph g0 = fx.gs.build(sent);
  DhgResult res = run_dhg(tape, sent, g0, fx.params, fx.corpus.vocabulary, fx.dhg,
                          DhgRunMode::eval());
  TensorPtr loss = sentence_loss(tape, sent, res, fx.params, lambda);
  if (with_backward) tape.backward(loss);
  return loss->val[0];
}

inline int run_cli(std::vector<std::string> args) {
  CLI::App app{"Joint aspect extraction and target sentiment tagging over a dynamic "
               "heterogeneous word/sentiment graph"};
  app.require_subcommand(1);

  TrainConfig cfg;
  std::string data_path, model_path, out_path, subset = "all", train_data_path, config_path;
  std::vector<std::string> emb_files;
  std::vector<int> emb_dims;
  bool trace = false;
  size_t gc_hidden = 8;
  int gc_times = 2;
  double gc_eps = 1e-3;

  // config values must be in place before CLI11 binds flag values over them
  for (size_t i = 0; i + 1 < args.size(); ++i)
    if (args[i] == "--config") config_path = args[i + 1];
  for (const auto& a : args)
    if (a.rfind("--config=", 0) == 0) config_path = a.substr(9);
  if (!config_path.empty()) {
    try {
      apply_config_file(config_path, cfg);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", cfg.seed, "global random seed");
    cmd->add_option("--workers", cfg.workers, "parallel sentence workers per batch");
    cmd->add_option("--dhg-times", cfg.dhg.times, "graph modification iterations");
    cmd->add_option("--dhg-epsilon", cfg.dhg.epsilon, "edge confidence threshold");
    cmd->add_option("--window", cfg.window, "positional edge window");
    cmd->add_flag_callback("--pmi", [&] { cfg.pmi_edges = true; },
                           "co-occurrence edges instead of syntactic edges");
  };

  CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->add_option("--config", config_path, "flat key=value config file; flags override");
  train->add_option("--data", data_path, "training dataset (TSV)")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--out", out_path, "checkpoint output path")->required();
  train->add_option("--embeddings", emb_files, "pretrained embedding file (repeatable)")
      ->check(CLI::ExistingFile);
  train->add_option("--emb-dim", emb_dims, "vector size per embedding file (default: inferred)");
  train->add_option("--epochs", cfg.epochs, "training epochs");
  train->add_option("--batch-size", cfg.batch_size, "sentences per batch");
  train->add_option("--lr", cfg.learning_rate, "Adam learning rate");
  train->add_option("--clip-norm", cfg.clip_norm, "global gradient norm cap");
  train->add_option("--dropout", cfg.dropout, "input dropout rate");
  train->add_option("--lambda", cfg.lambda, "sentiment loss weight");
  train->add_option("--dev-fraction", cfg.dev_fraction, "held-out fraction of training data");
  train->add_option("--hidden", cfg.hidden, "hidden dimension");
  train->add_option("--layers", cfg.layers, "layers per stack");
  train->add_option("--dhg-mu", cfg.dhg.mu, "teacher forcing schedule constant");
  train->add_option("--tf-keep", cfg.dhg.tf_keep, "kept fraction of gold edges under forcing");
  add_common(train);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->add_option("--model", model_path, "checkpoint path")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_path, "dataset (TSV)")->required()->check(CLI::ExistingFile);
  eval->add_option("--subset", subset, "all|multi|noop")->default_str("all");
  eval->add_option("--out", out_path, "write machine-readable key=value report here");
  eval->add_option("--train-data", train_data_path,
                   "training dataset for PMI statistics (PMI checkpoints only)")
      ->check(CLI::ExistingFile);
  int eval_times_override = 0;
  eval->add_option("--dhg-times", eval_times_override, "override stored iteration count");

  CLI::App* predict = app.add_subcommand("predict", "write aspect/sentiment predictions");
  predict->add_option("--model", model_path, "checkpoint path")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--data", data_path, "dataset (TSV)")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out_path, "predictions output path")->required();
  predict->add_flag("--trace", trace, "also write <out>.trace with per-iteration graph changes");
  predict->add_option("--train-data", train_data_path,
                      "training dataset for PMI statistics (PMI checkpoints only)")
      ->check(CLI::ExistingFile);

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--hidden", gc_hidden, "hidden dimension of the probe model");
  gradcheck->add_option("--times", gc_times, "graph iterations of the probe run");
  gradcheck->add_option("--seed", cfg.seed, "probe seed");
  gradcheck->add_option("--eps", gc_eps, "central-difference step");

  CLI::App* stats = app.add_subcommand("stats", "corpus statistics");
  stats->add_option("--data", data_path, "dataset (TSV)")->required()->check(CLI::ExistingFile);

  std::vector<const char*> argv;
  argv.push_back("tbsa");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train->parsed()) {
      Corpus corpus = parse_dataset(data_path);
      auto [train_c, dev_c] = split_train_dev(corpus, cfg.dev_fraction, cfg.seed);
      if (log_level() >= 1)
        std::cerr << "train: " << train_c.size() << " sentences, dev: " << dev_c.size()
                  << ", vocab: " << train_c.vocabulary.size() << "\n";
      EmbeddingTable pretrained;
      const EmbeddingTable* pre = nullptr;
      if (!emb_files.empty()) {
        pretrained = load_embedding_stack(emb_files, emb_dims, train_c.vocabulary, cfg.seed);
        pre = &pretrained;
      }
      TrainedCheckpoint best =
          fit(train_c, dev_c, cfg, log_level() >= 2 ? &std::cerr : nullptr, out_path + ".metrics",
              pre);
      save_checkpoint(pack_checkpoint(best), out_path);
      if (log_level() >= 1) {
        std::cerr << "best epoch " << best.epoch << "\n" << format_report(best.dev);
        std::cerr << "checkpoint written to " << out_path << "\n";
      }
      return 0;
    }

    if (eval->parsed()) {
      CheckpointData ck = load_checkpoint(model_path);
      auto [params, vocab] = unpack_model(ck);
      auto [dhg, gs] = run_config_from(ck);
      if (eval_times_override > 0) dhg.times = eval_times_override;
      if (gs.use_pmi) {
        if (train_data_path.empty())
          throw ValidationError("this checkpoint uses PMI edges; pass --train-data");
        gs.pmi_stats = std::make_shared<PmiStats>(parse_dataset(train_data_path));
      }
      Corpus data = subset_filter(parse_dataset(data_path), subset_from_string(subset));
      if (data.size() == 0) throw ValidationError("subset '" + subset + "' selected no sentences");
      MetricsReport rep = evaluate(data, params, vocab, dhg, gs);
      std::cout << format_report(rep);
      if (!out_path.empty()) write_text_file(out_path, format_report_kv(rep));
      return 0;
    }

    if (predict->parsed()) {
      CheckpointData ck = load_checkpoint(model_path);
      auto [params, vocab] = unpack_model(ck);
      auto [dhg, gs] = run_config_from(ck);
      if (gs.use_pmi) {
        if (train_data_path.empty())
          throw ValidationError("this checkpoint uses PMI edges; pass --train-data");
        gs.pmi_stats = std::make_shared<PmiStats>(parse_dataset(train_data_path));
      }
      Corpus data = parse_dataset(data_path);
      std::string preds, traces;
      for (const Sentence& s : data.sentences) {
        SentencePrediction p = predict_sentence(s, params, vocab, dhg, gs);
        preds += format_predictions(s, p.aspects);
        if (trace) {
          traces += "SENT " + s.id + "\n";
          traces += p.final_graph.dump();
          traces += p.trace.dump();
        }
      }
      write_text_file(out_path, preds);
      if (trace) write_text_file(out_path + ".trace", traces);
      return 0;
    }

    if (gradcheck->parsed()) {
      GradcheckFixture fx = make_gradcheck_fixture(gc_hidden, gc_times, cfg.seed);
      GradCheckResult res = grad_check(
          [&](bool back) { return gradcheck_loss(fx, back); }, fx.params.all(), gc_eps);
      std::printf("max relative error %.3e (param %s[%zu]: analytic %.6e, numeric %.6e)\n",
                  res.max_rel_error, res.worst_param.c_str(), res.worst_index, res.analytic,
                  res.numeric);
      return res.max_rel_error < 1e-4 ? 0 : 1;
    }

    if (stats->parsed()) {
      Corpus data = parse_dataset(data_path);
      long tokens = 0, spans = 0, multi = 0, noop = 0;
      std::array<long, 3> span_polarity{0, 0, 0};
      for (const Sentence& s : data.sentences) {
        tokens += s.size();
        auto gold = gold_aspect_spans(s);
        spans += static_cast<long>(gold.size());
        if (gold.size() >= 2) ++multi;
        if (gold.empty()) ++noop;
        for (const auto& g : gold)
          ++span_polarity[static_cast<size_t>(s.tokens[static_cast<size_t>(g.first - 1)].senti)];
      }
      std::printf("%-22s %ld\n", "sentences", static_cast<long>(data.size()));
      std::printf("%-22s %ld\n", "tokens", tokens);
      std::printf("%-22s %zu\n", "vocabulary", data.vocabulary.size());
      std::printf("%-22s %ld\n", "aspect spans", spans);
      std::printf("%-22s %ld\n", "  positive", span_polarity[0]);
      std::printf("%-22s %ld\n", "  negative", span_polarity[1]);
      std::printf("%-22s %ld\n", "  neutral", span_polarity[2]);
      std::printf("%-22s %ld %ld %ld\n", "aspect tokens p/n/n", data.sentiment_counts[0],
                  data.sentiment_counts[1], data.sentiment_counts[2]);
      std::printf("%-22s %ld\n", "multi-aspect sentences", multi);
      std::printf("%-22s %ld\n", "no-aspect sentences", noop);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace tbsa

#endif
