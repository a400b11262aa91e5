#ifndef TBSA_GRADCHECK_HPP
#define TBSA_GRADCHECK_HPP

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

#include "tbsa/tensor.hpp"

namespace tbsa {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  double analytic = 0.0, numeric = 0.0;
};

// Central-difference check of d f / d params against reverse-mode gradients.
// f(true) must run forward + backward (accumulating into param grads) and
// return the loss; f(false) runs forward only. f must be deterministic in the
// parameter values (dropout off). Samples up to max_coords coordinates per
// tensor with a fixed seed.
inline GradCheckResult grad_check(const std::function<double(bool)>& f,
                                  const std::vector<TensorPtr>& params, double eps,
                                  size_t max_coords = 200, uint64_t seed = 12345) {
  if (eps <= 0.0) throw ValidationError("grad_check: eps must be positive");

  for (const auto& p : params) {
    p->ensure_grad();
    p->zero_grad();
  }
  f(true);  // analytic gradients

  GradCheckResult res;
  Rng rng(derive_seed(seed, {0x67c0deULL}));
  for (const auto& p : params) {
    std::vector<size_t> coords(p->size());
    std::iota(coords.begin(), coords.end(), size_t{0});
    if (coords.size() > max_coords) {
      for (size_t i = 0; i < max_coords; ++i)
        std::swap(coords[i], coords[i + rng.index(coords.size() - i)]);
      coords.resize(max_coords);
    }
    for (size_t c : coords) {
      double keep = p->val[c];
      p->val[c] = keep + eps;
      double fp = f(false);
      p->val[c] = keep - eps;
      double fm = f(false);
      p->val[c] = keep;
      double numeric = (fp - fm) / (2.0 * eps);
      double analytic = p->grad[c];
      double denom = std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      double rel = std::abs(analytic - numeric) / denom;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = p->name;
        res.worst_index = c;
        res.analytic = analytic;
        res.numeric = numeric;
      }
    }
  }
  for (const auto& p : params) p->zero_grad();
  return res;
}

}  // namespace tbsa

#endif
