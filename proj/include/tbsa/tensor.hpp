#ifndef TBSA_TENSOR_HPP
#define TBSA_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "tbsa/common.hpp"

namespace tbsa {

// Dense row-major double tensor. Gradients live next to the values and are
// allocated lazily the first time the tensor enters a recorded operation.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> val;
  std::vector<double> grad;  // empty until ensure_grad()
  std::string name;          // set for parameters, empty for intermediates

  size_t size() const { return val.size(); }

  size_t rows() const { return shape.empty() ? 1 : shape[0]; }

  size_t cols() const {
    if (shape.size() < 2) return shape.empty() ? 1 : shape[0];
    return shape[1];
  }

  double& at(size_t r, size_t c) { return val[r * cols() + c]; }
  double at(size_t r, size_t c) const { return val[r * cols() + c]; }

  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
  }

  void zero_grad() {
    if (!grad.empty()) grad.assign(grad.size(), 0.0);
  }

  bool has_grad() const { return grad.size() == val.size(); }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ")";
    return os.str();
  }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(std::vector<size_t> shape, double fill = 0.0) {
  auto t = std::make_shared<Tensor>();
  size_t n = 1;
  for (size_t d : shape) n *= d;
  t->shape = std::move(shape);
  t->val.assign(n, fill);
  return t;
}

inline TensorPtr make_scalar(double v) {
  auto t = make_tensor({1});
  t->val[0] = v;
  return t;
}

inline TensorPtr make_vector(std::vector<double> v) {
  auto t = std::make_shared<Tensor>();
  t->shape = {v.size()};
  t->val = std::move(v);
  return t;
}

inline TensorPtr make_matrix(size_t r, size_t c, std::vector<double> v) {
  if (v.size() != r * c) throw ShapeError("make_matrix: value count does not match shape");
  auto t = std::make_shared<Tensor>();
  t->shape = {r, c};
  t->val = std::move(v);
  return t;
}

inline TensorPtr rand_uniform(std::vector<size_t> shape, double lo, double hi, Rng& rng) {
  auto t = make_tensor(std::move(shape));
  for (double& v : t->val) v = rng.uniform(lo, hi);
  return t;
}

inline void check_finite(const Tensor& t, const char* where) {
  for (double v : t.val)
    if (!std::isfinite(v)) throw NumericError(std::string(where) + ": non-finite value");
}

// Records one backward closure per primitive, in execution order. Creation
// order is a valid topological order because an op can only consume tensors
// that already exist, so reverse replay visits each record exactly once.
class Tape {
 public:
  void record(std::function<void()> back) { ops_.push_back(std::move(back)); }

  size_t size() const { return ops_.size(); }

  void backward(const TensorPtr& loss) {
    if (loss->size() != 1) throw NumericError("backward: loss must be a scalar");
    backward_seeded(loss, 1.0);
  }

  void backward_seeded(const TensorPtr& loss, double seed) {
    if (loss->size() != 1) throw NumericError("backward: loss must be a scalar");
    loss->ensure_grad();
    loss->grad[0] += seed;
    for (size_t i = ops_.size(); i-- > 0;) ops_[i]();
  }

  void clear() { ops_.clear(); }

 private:
  std::vector<std::function<void()>> ops_;
};

namespace detail {
inline void bad_shapes(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                   b.shape_str());
}
inline void prep(const TensorPtr& t) { t->ensure_grad(); }
}  // namespace detail

// --- primitive operations ---------------------------------------------------
// Each returns a fresh tensor and records its backward closure on the tape.

inline TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
    detail::bad_shapes("matmul", *a, *b);
  size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
  auto out = make_tensor({m, n});
  const double* av = a->val.data();
  const double* bv = b->val.data();
  double* ov = out->val.data();
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < k; ++p) {
      double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv + p * n;
      double* orow = ov + i * n;
      for (size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  detail::prep(a);
  detail::prep(b);
  detail::prep(out);
  tape.record([a, b, out, m, k, n] {
    const double* g = out->grad.data();
    // dA += dY * B^T ; dB += A^T * dY
    for (size_t i = 0; i < m; ++i)
      for (size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        const double* grow = g + i * n;
        const double* brow = b->val.data() + p * n;
        for (size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
        a->grad[i * k + p] += acc;
      }
    for (size_t p = 0; p < k; ++p)
      for (size_t i = 0; i < m; ++i) {
        double aip = a->val[i * k + p];
        if (aip == 0.0) continue;
        const double* grow = g + i * n;
        double* brow = b->grad.data() + p * n;
        for (size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
      }
  });
  return out;
}

// a (m,k) times b^T where b is (n,k); avoids materializing transposes.
inline TensorPtr matmul_nt(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[1])
    detail::bad_shapes("matmul_nt", *a, *b);
  size_t m = a->shape[0], k = a->shape[1], n = b->shape[0];
  auto out = make_tensor({m, n});
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      const double* arow = a->val.data() + i * k;
      const double* brow = b->val.data() + j * k;
      for (size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      out->val[i * n + j] = acc;
    }
  detail::prep(a);
  detail::prep(b);
  detail::prep(out);
  tape.record([a, b, out, m, k, n] {
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) {
        double g = out->grad[i * n + j];
        if (g == 0.0) continue;
        double* arow = a->grad.data() + i * k;
        double* brow = b->grad.data() + j * k;
        const double* av = a->val.data() + i * k;
        const double* bv = b->val.data() + j * k;
        for (size_t p = 0; p < k; ++p) {
          arow[p] += g * bv[p];
          brow[p] += g * av[p];
        }
      }
  });
  return out;
}

inline TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape) detail::bad_shapes("add", *a, *b);
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->val[i] = a->val[i] + b->val[i];
  detail::prep(a);
  detail::prep(b);
  detail::prep(out);
  tape.record([a, b, out] {
    for (size_t i = 0; i < out->size(); ++i) {
      a->grad[i] += out->grad[i];
      b->grad[i] += out->grad[i];
    }
  });
  return out;
}

inline TensorPtr sub(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape) detail::bad_shapes("sub", *a, *b);
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->val[i] = a->val[i] - b->val[i];
  detail::prep(a);
  detail::prep(b);
  detail::prep(out);
  tape.record([a, b, out] {
    for (size_t i = 0; i < out->size(); ++i) {
      a->grad[i] += out->grad[i];
      b->grad[i] -= out->grad[i];
    }
  });
  return out;
}

// Adds a length-n vector to every row of an (m,n) matrix.
inline TensorPtr add_rowvec(Tape& tape, const TensorPtr& a, const TensorPtr& v) {
  if (a->shape.size() != 2 || v->size() != a->shape[1]) detail::bad_shapes("add_rowvec", *a, *v);
  size_t m = a->shape[0], n = a->shape[1];
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out->val[i * n + j] = a->val[i * n + j] + v->val[j];
  detail::prep(a);
  detail::prep(v);
  detail::prep(out);
  tape.record([a, v, out, m, n] {
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) {
        a->grad[i * n + j] += out->grad[i * n + j];
        v->grad[j] += out->grad[i * n + j];
      }
  });
  return out;
}

inline TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape) detail::bad_shapes("mul", *a, *b);
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->val[i] = a->val[i] * b->val[i];
  detail::prep(a);
  detail::prep(b);
  detail::prep(out);
  tape.record([a, b, out] {
    for (size_t i = 0; i < out->size(); ++i) {
      a->grad[i] += out->grad[i] * b->val[i];
      b->grad[i] += out->grad[i] * a->val[i];
    }
  });
  return out;
}

inline TensorPtr scale(Tape& tape, const TensorPtr& a, double c) {
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->val[i] = a->val[i] * c;
  detail::prep(a);
  detail::prep(out);
  tape.record([a, out, c] {
    for (size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i] * c;
  });
  return out;
}

// c0 + c1 * a, elementwise. one_minus(x) is affine(x, 1, -1).
inline TensorPtr affine(Tape& tape, const TensorPtr& a, double c0, double c1) {
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->val[i] = c0 + c1 * a->val[i];
  detail::prep(a);
  detail::prep(out);
  tape.record([a, out, c1] {
    for (size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i] * c1;
  });
  return out;
}

inline TensorPtr sigmoid(Tape& tape, const TensorPtr& a) {
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) {
    double x = a->val[i];
    out->val[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  detail::prep(a);
  detail::prep(out);
  tape.record([a, out] {
    for (size_t i = 0; i < out->size(); ++i) {
      double y = out->val[i];
      a->grad[i] += out->grad[i] * y * (1.0 - y);
    }
  });
  return out;
}

inline TensorPtr tanh_op(Tape& tape, const TensorPtr& a) {
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->val[i] = std::tanh(a->val[i]);
  detail::prep(a);
  detail::prep(out);
  tape.record([a, out] {
    for (size_t i = 0; i < out->size(); ++i) {
      double y = out->val[i];
      a->grad[i] += out->grad[i] * (1.0 - y * y);
    }
  });
  return out;
}

inline TensorPtr row_softmax(Tape& tape, const TensorPtr& a) {
  if (a->shape.size() != 2) throw ShapeError("row_softmax: expected a matrix, got " + a->shape_str());
  size_t m = a->shape[0], n = a->shape[1];
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < m; ++i) {
    const double* row = a->val.data() + i * n;
    double mx = row[0];
    for (size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    for (size_t j = 0; j < n; ++j) out->val[i * n + j] = std::exp(row[j] - mx) / z;
  }
  detail::prep(a);
  detail::prep(out);
  tape.record([a, out, m, n] {
    for (size_t i = 0; i < m; ++i) {
      const double* p = out->val.data() + i * n;
      const double* g = out->grad.data() + i * n;
      double dot = 0.0;
      for (size_t j = 0; j < n; ++j) dot += g[j] * p[j];
      for (size_t j = 0; j < n; ++j) a->grad[i * n + j] += p[j] * (g[j] - dot);
    }
  });
  return out;
}

inline TensorPtr inner(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->size() != b->size()) detail::bad_shapes("inner", *a, *b);
  double acc = 0.0;
  for (size_t i = 0; i < a->size(); ++i) acc += a->val[i] * b->val[i];
  auto out = make_scalar(acc);
  detail::prep(a);
  detail::prep(b);
  detail::prep(out);
  tape.record([a, b, out] {
    double g = out->grad[0];
    for (size_t i = 0; i < a->size(); ++i) {
      a->grad[i] += g * b->val[i];
      b->grad[i] += g * a->val[i];
    }
  });
  return out;
}

inline TensorPtr concat(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  auto out = make_tensor({a->size() + b->size()});
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i];
  for (size_t i = 0; i < b->size(); ++i) out->val[a->size() + i] = b->val[i];
  detail::prep(a);
  detail::prep(b);
  detail::prep(out);
  tape.record([a, b, out] {
    for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
    for (size_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[a->size() + i];
  });
  return out;
}

// Stacks the rows of a on top of the rows of b (column counts must match).
inline TensorPtr vcat(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[1])
    detail::bad_shapes("vcat", *a, *b);
  size_t n = a->shape[1];
  auto out = make_tensor({a->shape[0] + b->shape[0], n});
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i];
  for (size_t i = 0; i < b->size(); ++i) out->val[a->size() + i] = b->val[i];
  detail::prep(a);
  detail::prep(b);
  detail::prep(out);
  tape.record([a, b, out] {
    for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
    for (size_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[a->size() + i];
  });
  return out;
}

inline TensorPtr sum_all(Tape& tape, const TensorPtr& a) {
  double acc = 0.0;
  for (double v : a->val) acc += v;
  auto out = make_scalar(acc);
  detail::prep(a);
  detail::prep(out);
  tape.record([a, out] {
    for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[0];
  });
  return out;
}

inline TensorPtr mean_all(Tape& tape, const TensorPtr& a) {
  if (a->size() == 0) throw ShapeError("mean_all: empty tensor");
  double acc = 0.0;
  for (double v : a->val) acc += v;
  auto out = make_scalar(acc / static_cast<double>(a->size()));
  detail::prep(a);
  detail::prep(out);
  tape.record([a, out] {
    double g = out->grad[0] / static_cast<double>(a->size());
    for (size_t i = 0; i < a->size(); ++i) a->grad[i] += g;
  });
  return out;
}

// Gathers rows of a (m,n) matrix; backward scatter-adds.
inline TensorPtr take_rows(Tape& tape, const TensorPtr& a, std::vector<size_t> idx) {
  if (a->shape.size() != 2) throw ShapeError("take_rows: expected a matrix, got " + a->shape_str());
  size_t n = a->shape[1];
  for (size_t r : idx)
    if (r >= a->shape[0]) throw ShapeError("take_rows: row index out of range");
  auto out = make_tensor({idx.size(), n});
  for (size_t i = 0; i < idx.size(); ++i)
    for (size_t j = 0; j < n; ++j) out->val[i * n + j] = a->val[idx[i] * n + j];
  detail::prep(a);
  detail::prep(out);
  tape.record([a, out, idx = std::move(idx), n] {
    for (size_t i = 0; i < idx.size(); ++i)
      for (size_t j = 0; j < n; ++j) a->grad[idx[i] * n + j] += out->grad[i * n + j];
  });
  return out;
}

// Per-row mean over neighbor rows: out[i] = mean_{j in nb[i]} h[j], zero when
// the neighbor list is empty. nb indexes rows of h.
inline TensorPtr adj_mean(Tape& tape, const TensorPtr& h,
                          const std::vector<std::vector<int>>& nb) {
  if (h->shape.size() != 2 || nb.size() != h->shape[0])
    throw ShapeError("adj_mean: node count mismatch with hidden rows " + h->shape_str());
  size_t m = h->shape[0], n = h->shape[1];
  auto out = make_tensor({m, n});
  for (size_t i = 0; i < m; ++i) {
    if (nb[i].empty()) continue;
    double inv = 1.0 / static_cast<double>(nb[i].size());
    double* orow = out->val.data() + i * n;
    for (int j : nb[i]) {
      const double* hrow = h->val.data() + static_cast<size_t>(j) * n;
      for (size_t c = 0; c < n; ++c) orow[c] += hrow[c];
    }
    for (size_t c = 0; c < n; ++c) orow[c] *= inv;
  }
  detail::prep(h);
  detail::prep(out);
  tape.record([h, out, nb, m, n] {
    for (size_t i = 0; i < m; ++i) {
      if (nb[i].empty()) continue;
      double inv = 1.0 / static_cast<double>(nb[i].size());
      const double* grow = out->grad.data() + i * n;
      for (int j : nb[i]) {
        double* hrow = h->grad.data() + static_cast<size_t>(j) * n;
        for (size_t c = 0; c < n; ++c) hrow[c] += grow[c] * inv;
      }
    }
  });
  return out;
}

// Sum over selected rows of -log p[i, idx[i]]. Rows with mask[i]==false are
// skipped. Inputs are probabilities (e.g. softmax output), assumed positive.
inline TensorPtr pick_nll(Tape& tape, const TensorPtr& p, const std::vector<int>& idx,
                          const std::vector<char>& mask) {
  if (p->shape.size() != 2 || idx.size() != p->shape[0] || mask.size() != p->shape[0])
    throw ShapeError("pick_nll: index/mask length mismatch with " + p->shape_str());
  size_t n = p->shape[1];
  double acc = 0.0;
  for (size_t i = 0; i < idx.size(); ++i) {
    if (!mask[i]) continue;
    if (idx[i] < 0 || static_cast<size_t>(idx[i]) >= n)
      throw ShapeError("pick_nll: class index out of range");
    acc -= std::log(p->val[i * n + static_cast<size_t>(idx[i])]);
  }
  auto out = make_scalar(acc);
  detail::prep(p);
  detail::prep(out);
  tape.record([p, out, idx, mask, n] {
    double g = out->grad[0];
    for (size_t i = 0; i < idx.size(); ++i) {
      if (!mask[i]) continue;
      size_t k = i * n + static_cast<size_t>(idx[i]);
      p->grad[k] -= g / p->val[k];
    }
  });
  return out;
}

// Inverted dropout. Identity (the same tensor, no record) in eval mode or at
// rate 0; in train mode survivors are scaled by 1/(1-rate).
inline TensorPtr dropout(Tape& tape, const TensorPtr& a, double rate, bool train, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout: rate must be in [0,1)");
  if (!train || rate == 0.0) return a;
  double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(a->size());
  for (double& m : *mask) m = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i] * (*mask)[i];
  detail::prep(a);
  detail::prep(out);
  tape.record([a, out, mask] {
    for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i] * (*mask)[i];
  });
  return out;
}

}  // namespace tbsa

#endif
