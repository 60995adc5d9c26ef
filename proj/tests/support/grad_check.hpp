#pragma once

#include <cmath>
#include <functional>

#include "f2r/params.hpp"

namespace f2r::testing {

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  int checked = 0;
};

/// Central-difference check of analytic gradients over randomly sampled
/// parameter entries. loss_fn(true) must evaluate the loss and accumulate
/// gradients into the store; loss_fn(false) must only evaluate.
inline GradCheckResult check_gradients(ParamStore& store,
                                       const std::function<double(bool)>& loss_fn, int samples,
                                       Rng& rng, double eps = 1e-5) {
  store.zero_grads();
  loss_fn(true);

  auto tensors = store.all();
  std::vector<ad::Matrix> grads;
  grads.reserve(tensors.size());
  for (Tensor* t : tensors) grads.push_back(t->grad);
  store.zero_grads();

  GradCheckResult result;
  std::uniform_int_distribution<std::size_t> pick_tensor(0, tensors.size() - 1);
  for (int s = 0; s < samples; ++s) {
    const std::size_t ti = pick_tensor(rng);
    Tensor& t = *tensors[ti];
    std::uniform_int_distribution<Eigen::Index> pr(0, t.value.rows() - 1);
    std::uniform_int_distribution<Eigen::Index> pc(0, t.value.cols() - 1);
    const Eigen::Index r = pr(rng);
    const Eigen::Index c = pc(rng);

    const double saved = t.value(r, c);
    t.value(r, c) = saved + eps;
    const double lp = loss_fn(false);
    t.value(r, c) = saved - eps;
    const double lm = loss_fn(false);
    t.value(r, c) = saved;

    const double fd = (lp - lm) / (2.0 * eps);
    const double an = grads[ti](r, c);
    result.max_rel_err = std::max(result.max_rel_err, rel_err(an, fd));
    ++result.checked;
  }
  return result;
}

}  // namespace f2r::testing
