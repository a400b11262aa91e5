#ifndef TBSA_CORPUS_HPP
#define TBSA_CORPUS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tbsa/common.hpp"

namespace tbsa {

enum class AspectTag { O = 0, B = 1, I = 2 };
enum class SentTag { POS = 0, NEG = 1, NEU = 2, NONE = 3 };

inline const char* to_string(AspectTag t) {
  switch (t) {
    case AspectTag::O: return "O";
    case AspectTag::B: return "B";
    default: return "I";
  }
}

inline const char* to_string(SentTag t) {
  switch (t) {
    case SentTag::POS: return "POS";
    case SentTag::NEG: return "NEG";
    case SentTag::NEU: return "NEU";
    default: return "NONE";
  }
}

inline AspectTag aspect_from_string(const std::string& s) {
  if (s == "O") return AspectTag::O;
  if (s == "B") return AspectTag::B;
  if (s == "I") return AspectTag::I;
  throw ParseError("unknown aspect tag '" + s + "'");
}

inline SentTag sent_from_string(const std::string& s) {
  if (s == "POS") return SentTag::POS;
  if (s == "NEG") return SentTag::NEG;
  if (s == "NEU") return SentTag::NEU;
  if (s == "NONE") return SentTag::NONE;
  throw ParseError("unknown sentiment tag '" + s + "'");
}

struct Token {
  int index = 0;  // 1-based position
  std::string surface;
  int head = 0;  // 0 = syntactic root, else 1-based head position
  std::string deprel;
  AspectTag aspect = AspectTag::O;
  SentTag senti = SentTag::NONE;
};

struct Sentence {
  std::string id;
  std::vector<Token> tokens;

  int size() const { return static_cast<int>(tokens.size()); }

  bool is_aspect(int i) const {  // 1-based
    AspectTag t = tokens[static_cast<size_t>(i - 1)].aspect;
    return t == AspectTag::B || t == AspectTag::I;
  }

  // Throws ValidationError naming the sentence id on any broken invariant.
  void validate() const {
    if (tokens.empty()) throw ValidationError("sentence " + id + ": empty");
    int n = size();
    for (int i = 0; i < n; ++i) {
      const Token& t = tokens[static_cast<size_t>(i)];
      std::string at = "sentence " + id + ", token " + std::to_string(i + 1) + ": ";
      if (t.index != i + 1) throw ValidationError(at + "index must be " + std::to_string(i + 1));
      if (t.head < 0 || t.head > n)
        throw ValidationError(at + "head " + std::to_string(t.head) + " out of range 0.." +
                              std::to_string(n));
      if (t.head == t.index) throw ValidationError(at + "token cannot head itself");
      bool is_asp = t.aspect != AspectTag::O;
      if (is_asp != (t.senti != SentTag::NONE))
        throw ValidationError(at + "tag pair (" + to_string(t.aspect) + ", " + to_string(t.senti) +
                              ") is inconsistent");
      if (t.aspect == AspectTag::I &&
          (i == 0 || tokens[static_cast<size_t>(i - 1)].aspect == AspectTag::O))
        throw ValidationError(at + "I tag without preceding B or I");
      if (t.aspect == AspectTag::I && t.senti != tokens[static_cast<size_t>(i - 1)].senti)
        throw ValidationError(at + "sentiment changes inside an aspect span");
    }
  }
};

struct Corpus {
  std::vector<Sentence> sentences;
  std::map<std::string, int> vocabulary;  // surface -> dense id 0..|V|-1
  std::array<long, 3> sentiment_counts{0, 0, 0};  // aspect-token counts POS/NEG/NEU

  size_t size() const { return sentences.size(); }

  void rebuild_index() {
    vocabulary.clear();
    sentiment_counts = {0, 0, 0};
    int next = 0;
    for (const Sentence& s : sentences)
      for (const Token& t : s.tokens) {
        if (vocabulary.emplace(t.surface, next).second) ++next;
        if (t.senti != SentTag::NONE) ++sentiment_counts[static_cast<size_t>(t.senti)];
      }
  }

  void validate() const {
    for (const Sentence& s : sentences) s.validate();
  }
};

inline Corpus corpus_from_sentences(std::vector<Sentence> sents) {
  Corpus c;
  c.sentences = std::move(sents);
  c.validate();
  c.rebuild_index();
  return c;
}

// Rows: INDEX \t TOKEN \t HEAD \t DEPREL \t ASPECT \t SENTIMENT.
// Blank line ends a sentence.
inline Corpus parse_dataset_stream(std::istream& in, const std::string& origin) {
  std::vector<Sentence> sents;
  Sentence cur;
  cur.id = "s1";
  std::string line;
  long lineno = 0;
  auto flush = [&] {
    if (!cur.tokens.empty()) {
      sents.push_back(std::move(cur));
      cur = Sentence{};
      cur.id = "s" + std::to_string(sents.size() + 1);
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 6)
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected 6 TAB-separated columns, got " +
                       std::to_string(cols.size()));
    Token t;
    try {
      t.index = std::stoi(cols[0]);
      t.head = std::stoi(cols[2]);
    } catch (const std::exception&) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": INDEX and HEAD must be integers");
    }
    t.surface = cols[1];
    t.deprel = cols[3];
    t.aspect = aspect_from_string(cols[4]);
    t.senti = sent_from_string(cols[5]);
    cur.tokens.push_back(std::move(t));
  }
  flush();
  return corpus_from_sentences(std::move(sents));
}

inline Corpus parse_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);
  return parse_dataset_stream(in, path);
}

inline std::string serialize_dataset(const Corpus& c) {
  std::ostringstream os;
  for (size_t si = 0; si < c.sentences.size(); ++si) {
    if (si) os << "\n";
    for (const Token& t : c.sentences[si].tokens)
      os << t.index << '\t' << t.surface << '\t' << t.head << '\t' << t.deprel << '\t'
         << to_string(t.aspect) << '\t' << to_string(t.senti) << '\n';
  }
  return os.str();
}

struct EmbeddingTable {
  int dimension = 0;
  std::map<int, std::vector<double>> vectors;  // word id -> vector

  const std::vector<double>& at(int id) const {
    auto it = vectors.find(id);
    if (it == vectors.end()) throw ValidationError("embedding id not present");
    return it->second;
  }
};

// In-vocabulary words get their file vectors; missing words get a seeded
// uniform vector in [-0.1, 0.1], keyed by the word string so the fallback is
// reproducible across loads.
inline EmbeddingTable load_embeddings_stream(std::istream& in, const std::string& origin,
                                             const std::map<std::string, int>& vocab, int dim,
                                             uint64_t seed = 1) {
  if (dim <= 0) throw ValidationError("load_embeddings: dim must be positive");
  EmbeddingTable table;
  table.dimension = dim;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    auto it = vocab.find(word);
    std::vector<double> vec;
    vec.reserve(static_cast<size_t>(dim));
    double v;
    while (ls >> v) vec.push_back(v);
    if (static_cast<int>(vec.size()) != dim)
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                       " values for '" + word + "', got " + std::to_string(vec.size()));
    if (it != vocab.end()) table.vectors[it->second] = std::move(vec);
  }
  for (const auto& [word, id] : vocab) {
    if (table.vectors.count(id)) continue;
    Rng rng(derive_seed(seed, {hash_str(word)}));
    std::vector<double> vec(static_cast<size_t>(dim));
    for (double& x : vec) x = rng.uniform(-0.1, 0.1);
    table.vectors[id] = std::move(vec);
  }
  return table;
}

inline EmbeddingTable load_embeddings(const std::string& path, const std::map<std::string, int>& vocab,
                                      int dim, uint64_t seed = 1) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path);
  return load_embeddings_stream(in, path, vocab, dim, seed);
}

// Disjoint, exhaustive split with dev size = round(fraction * N).
inline std::pair<Corpus, Corpus> split_train_dev(const Corpus& corpus, double dev_fraction,
                                                 uint64_t seed) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0))
    throw ValidationError("split_train_dev: dev_fraction must be in (0,1)");
  if (corpus.size() < 2) throw ValidationError("split_train_dev: need at least 2 sentences");
  size_t n = corpus.size();
  size_t dev_n = static_cast<size_t>(std::llround(dev_fraction * static_cast<double>(n)));
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(derive_seed(seed, {0x5fee7ULL}));
  for (size_t i = 0; i + 1 < n; ++i) std::swap(order[i], order[i + rng.index(n - i)]);

  std::vector<char> in_dev(n, 0);
  for (size_t i = 0; i < dev_n; ++i) in_dev[order[i]] = 1;
  std::vector<Sentence> train, dev;
  for (size_t i = 0; i < n; ++i)
    (in_dev[i] ? dev : train).push_back(corpus.sentences[i]);
  return {corpus_from_sentences(std::move(train)), corpus_from_sentences(std::move(dev))};
}

// Proportions of POS/NEG/NEU over aspect-token sentiment tags.
inline std::array<double, 3> sentiment_distribution(const Corpus& corpus) {
  long total = corpus.sentiment_counts[0] + corpus.sentiment_counts[1] + corpus.sentiment_counts[2];
  if (total == 0) throw ValidationError("sentiment_distribution: corpus has no aspect tokens");
  std::array<double, 3> d;
  for (size_t i = 0; i < 3; ++i)
    d[i] = static_cast<double>(corpus.sentiment_counts[i]) / static_cast<double>(total);
  return d;
}

}  // namespace tbsa

#endif
