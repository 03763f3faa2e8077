#pragma once

// Central finite-difference verification of the reverse-mode gradients on the
// 64-bit model. The loss callback must return the summed (unnormalized) loss
// and, when the grads pointer is non-null, accumulate analytic gradients.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ssmpc/model.hpp"
#include "ssmpc/rng.hpp"

namespace test_helpers {

struct GradCheckResult {
  long checked = 0;
  long failed = 0;
  double worst_rel = 0.0;       // worst |analytic - fd| / max(|analytic|, |fd|) among failures
  std::string worst_tensor;
};

using LossFn =
    std::function<double(ssmpc::ModelT<double>&, ssmpc::ModelT<double>::Params*)>;

// Samples `samples` scalar parameters uniformly across all tensors and checks
// d(loss)/d(param) against (loss(w+h) - loss(w-h)) / 2h.
inline GradCheckResult finite_difference_check(ssmpc::ModelT<double>& model, const LossFn& loss,
                                               long samples, uint64_t seed) {
  auto grads = model.zero_grads();
  loss(model, &grads);

  auto param_tensors = model.params.tensors();
  auto grad_tensors = grads.tensors();
  std::vector<long> sizes;
  long total = 0;
  for (const auto& t : param_tensors) {
    sizes.push_back(t.mat->size());
    total += t.mat->size();
  }

  constexpr double h = 1e-6;
  constexpr double tol_rel = 1e-4;
  constexpr double tol_abs = 1e-7;

  ssmpc::Rng rng(seed);
  GradCheckResult result;
  for (long s = 0; s < samples; ++s) {
    long flat = static_cast<long>(rng.next_u64() % static_cast<uint64_t>(total));
    size_t ti = 0;
    while (flat >= sizes[ti]) {
      flat -= sizes[ti];
      ++ti;
    }
    double* w = param_tensors[ti].mat->data() + flat;
    const double saved = *w;

    *w = saved + h;
    const double up = loss(model, nullptr);
    *w = saved - h;
    const double down = loss(model, nullptr);
    *w = saved;

    const double fd = (up - down) / (2.0 * h);
    const double analytic = *(grad_tensors[ti].mat->data() + flat);
    const double denom = std::max(std::abs(analytic), std::abs(fd));
    const double err = std::abs(analytic - fd);
    ++result.checked;
    if (err > tol_rel * denom + tol_abs) {
      ++result.failed;
      const double rel = denom > 0.0 ? err / denom : err;
      if (rel > result.worst_rel) {
        result.worst_rel = rel;
        result.worst_tensor = param_tensors[ti].name;
      }
    }
  }
  return result;
}

}  // namespace test_helpers
