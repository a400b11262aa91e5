#ifndef TBSA_CHECKPOINT_HPP
#define TBSA_CHECKPOINT_HPP

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tbsa/model.hpp"

namespace tbsa {

// Self-describing parameter container: a text header (version, sorted
// key=value metadata, vocabulary) followed by named tensors with raw double
// payloads. Load followed by save reproduces the file byte for byte.
struct CheckpointData {
  std::map<std::string, std::string> meta;
  std::vector<std::string> vocab;                       // id order 0..n-1
  std::vector<std::pair<std::string, TensorPtr>> tensors;  // fixed order

  std::string get_meta(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw ValidationError("checkpoint: missing metadata key '" + key + "'");
    return it->second;
  }
};

inline void write_checkpoint(std::ostream& out, const CheckpointData& ck) {
  out << "tbsa-checkpoint v1\n";
  out << "meta " << ck.meta.size() << "\n";
  for (const auto& [k, v] : ck.meta) {
    if (k.find('\n') != std::string::npos || v.find('\n') != std::string::npos ||
        k.find('=') != std::string::npos)
      throw ValidationError("checkpoint: metadata keys/values must be single-line, '=' free keys");
    out << k << "=" << v << "\n";
  }
  out << "vocab " << ck.vocab.size() << "\n";
  for (const std::string& w : ck.vocab) {
    if (w.find('\n') != std::string::npos) throw ValidationError("checkpoint: word contains newline");
    out << w << "\n";
  }
  out << "tensors " << ck.tensors.size() << "\n";
  for (const auto& [name, t] : ck.tensors) {
    out << name << " " << t->shape.size();
    for (size_t d : t->shape) out << " " << d;
    out << "\n";
    out.write(reinterpret_cast<const char*>(t->val.data()),
              static_cast<std::streamsize>(t->val.size() * sizeof(double)));
    out << "\n";
  }
  if (!out) throw IoError("checkpoint: write failed");
}

inline void save_checkpoint(const CheckpointData& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint file for writing: " + path);
  write_checkpoint(out, ck);
}

inline CheckpointData read_checkpoint(std::istream& in) {
  CheckpointData ck;
  std::string line;
  if (!std::getline(in, line) || line != "tbsa-checkpoint v1")
    throw ParseError("checkpoint: bad or missing version tag");
  auto expect_count = [&](const char* section) -> size_t {
    if (!std::getline(in, line)) throw ParseError("checkpoint: truncated file");
    std::istringstream ls(line);
    std::string word;
    size_t count;
    if (!(ls >> word >> count) || word != section)
      throw ParseError(std::string("checkpoint: expected '") + section + " <count>' line");
    return count;
  };
  size_t n_meta = expect_count("meta");
  for (size_t i = 0; i < n_meta; ++i) {
    if (!std::getline(in, line)) throw ParseError("checkpoint: truncated metadata");
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("checkpoint: metadata line without '='");
    ck.meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  size_t n_vocab = expect_count("vocab");
  for (size_t i = 0; i < n_vocab; ++i) {
    if (!std::getline(in, line)) throw ParseError("checkpoint: truncated vocabulary");
    ck.vocab.push_back(line);
  }
  size_t n_tensors = expect_count("tensors");
  for (size_t i = 0; i < n_tensors; ++i) {
    if (!std::getline(in, line)) throw ParseError("checkpoint: truncated tensor header");
    std::istringstream ls(line);
    std::string name;
    size_t ndim;
    if (!(ls >> name >> ndim)) throw ParseError("checkpoint: bad tensor header");
    std::vector<size_t> shape(ndim);
    size_t total = 1;
    for (size_t d = 0; d < ndim; ++d) {
      if (!(ls >> shape[d])) throw ParseError("checkpoint: bad tensor shape");
      total *= shape[d];
    }
    auto t = make_tensor(shape);
    t->name = name;
    in.read(reinterpret_cast<char*>(t->val.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(total * sizeof(double)))
      throw ParseError("checkpoint: truncated tensor payload for '" + name + "'");
    if (in.get() != '\n') throw ParseError("checkpoint: missing separator after tensor '" + name + "'");
    ck.tensors.emplace_back(name, std::move(t));
  }
  return ck;
}

inline CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint file: " + path);
  return read_checkpoint(in);
}

// --- model <-> container ------------------------------------------------

inline CheckpointData pack_model(const ModelParams& params,
                                 const std::map<std::string, int>& vocab,
                                 std::map<std::string, std::string> meta) {
  CheckpointData ck;
  ck.meta = std::move(meta);
  ck.meta["hidden"] = std::to_string(params.config.hidden);
  ck.meta["layers"] = std::to_string(params.config.layers);
  ck.meta["vocab_size"] = std::to_string(params.vocab_size);
  ck.vocab.resize(vocab.size());
  for (const auto& [word, id] : vocab) ck.vocab[static_cast<size_t>(id)] = word;
  for (const TensorPtr& t : params.all()) ck.tensors.emplace_back(t->name, t);
  return ck;
}

inline std::pair<ModelParams, std::map<std::string, int>> unpack_model(const CheckpointData& ck) {
  ModelConfig cfg;
  cfg.hidden = std::stoul(ck.get_meta("hidden"));
  cfg.layers = std::stoul(ck.get_meta("layers"));
  size_t vocab_size = std::stoul(ck.get_meta("vocab_size"));
  if (vocab_size != ck.vocab.size())
    throw ValidationError("checkpoint: vocab_size does not match stored vocabulary");

  ModelParams params = init_params(cfg, vocab_size, 0);
  std::map<std::string, TensorPtr> by_name;
  for (const auto& [name, t] : ck.tensors) by_name[name] = t;
  for (const TensorPtr& slot : params.all()) {
    auto it = by_name.find(slot->name);
    if (it == by_name.end())
      throw ValidationError("checkpoint: missing parameter '" + slot->name + "'");
    if (it->second->shape != slot->shape)
      throw ValidationError("checkpoint: shape mismatch for '" + slot->name + "'");
    slot->val = it->second->val;
  }
  std::map<std::string, int> vocab;
  for (size_t i = 0; i < ck.vocab.size(); ++i) vocab[ck.vocab[i]] = static_cast<int>(i);
  if (vocab.size() != ck.vocab.size())
    throw ValidationError("checkpoint: duplicate word in stored vocabulary");
  return {std::move(params), std::move(vocab)};
}

}  // namespace tbsa

#endif
