#pragma once

#include <functional>
#include <vector>

#include "hctc/tensor.hpp"

namespace hctc {

// Scalar function of a parameter set. When `grads` is non-null the function
// must also fill one gradient tensor per parameter (same shapes, same order).
using DifferentiableFn =
    std::function<double(const std::vector<Tensor2D>& params, std::vector<Tensor2D>* grads)>;

struct GradCheckConfig {
  double epsilon = 1e-5;          // must lie in [1e-7, 1e-4]
  std::size_t max_coords = 50;    // sampled coordinates per parameter tensor
  std::uint64_t seed = 1;
};

// Compares analytic gradients against central finite differences on sampled
// coordinates and returns the max of
//   |analytic - numeric| / max(1, |analytic|, |numeric|).
// The function is evaluated twice at the base point first; if the two values
// are not bit-identical the oracle is invalid and an error is thrown.
double grad_check(const DifferentiableFn& fn, std::vector<Tensor2D> params,
                  const GradCheckConfig& cfg = {});

}  // namespace hctc
