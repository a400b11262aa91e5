#ifndef TBSA_COMMON_HPP
#define TBSA_COMMON_HPP

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace tbsa {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file (bad row, wrong column count, ...).
struct ParseError : Error {
  using Error::Error;
};

// Well-formed input violating a domain invariant.
struct ValidationError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable sub-stream seeds: same (base, salts) always yields the same seed,
// independent of how many other streams were drawn before.
inline uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> salts) {
  uint64_t s = splitmix64(base);
  for (uint64_t v : salts) s = splitmix64(s ^ v);
  return s;
}

inline uint64_t hash_str(const std::string& s) {
  // FNV-1a
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// mt19937_64 with hand-rolled uniform mapping; std::uniform_real_distribution
// is implementation-defined, which would break byte-exact reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // [0, n)
  size_t index(size_t n) { return static_cast<size_t>(uniform() * static_cast<double>(n)) % n; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace tbsa

#endif
