#ifndef TBSA_OPTIM_HPP
#define TBSA_OPTIM_HPP

#include <cmath>
#include <vector>

#include "tbsa/tensor.hpp"

namespace tbsa {

// Adam with bias correction. Moment buffers are indexed by position in the
// parameter list, so the list must be stable across steps.
class AdamState {
 public:
  explicit AdamState(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
                     double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  long step_count() const { return step_; }
  double learning_rate() const { return lr_; }

  void step(const std::vector<TensorPtr>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed size");
    for (const auto& p : params)
      if (!p->has_grad()) throw NumericError("adam: parameter '" + p->name + "' has no gradient");

    ++step_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (size_t t = 0; t < params.size(); ++t) {
      Tensor& p = *params[t];
      if (m_[t].size() != p.size()) throw ShapeError("adam: moment shape mismatch");
      for (size_t i = 0; i < p.size(); ++i) {
        double g = p.grad[i];
        m_[t][i] = beta1_ * m_[t][i] + (1.0 - beta1_) * g;
        v_[t][i] = beta2_ * v_[t][i] + (1.0 - beta2_) * g * g;
        double mhat = m_[t][i] / bc1;
        double vhat = v_[t][i] / bc2;
        p.val[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
      p.zero_grad();
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long step_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

inline double global_grad_norm(const std::vector<TensorPtr>& params) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p->grad) sq += g * g;
  return std::sqrt(sq);
}

// Scales all gradients by max_norm/norm when the global L2 norm exceeds
// max_norm; otherwise leaves them untouched.
inline double clip_global_norm(const std::vector<TensorPtr>& params, double max_norm) {
  if (max_norm <= 0.0) throw ValidationError("clip_global_norm: max_norm must be positive");
  double norm = global_grad_norm(params);
  if (norm > max_norm) {
    double s = max_norm / norm;
    for (const auto& p : params)
      for (double& g : p->grad) g *= s;
  }
  return norm;
}

}  // namespace tbsa

#endif
