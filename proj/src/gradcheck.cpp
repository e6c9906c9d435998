#include "hctc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hctc/rng.hpp"

namespace hctc {

double grad_check(const DifferentiableFn& fn, std::vector<Tensor2D> params,
                  const GradCheckConfig& cfg) {
  if (cfg.epsilon < 1e-7 || cfg.epsilon > 1e-4) {
    throw ContractViolation("grad_check: epsilon outside [1e-7, 1e-4]");
  }
  std::vector<Tensor2D> analytic;
  const double base = fn(params, &analytic);
  const double base2 = fn(params, nullptr);
  if (base != base2) {
    throw OracleInvalidError("grad_check: function is not deterministic");
  }
  if (analytic.size() != params.size()) {
    throw ContractViolation("grad_check: gradient count mismatch");
  }

  Rng rng(cfg.seed);
  double max_rel = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!analytic[p].same_shape(params[p])) {
      throw ContractViolation("grad_check: gradient shape mismatch");
    }
    const std::size_t n = params[p].size();
    if (n == 0) continue;
    // Sample distinct coordinates; take all of them when the tensor is small.
    std::vector<std::size_t> coords;
    if (n <= cfg.max_coords) {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      std::vector<std::size_t> all(n);
      for (std::size_t i = 0; i < n; ++i) all[i] = i;
      shuffle(all, rng);
      coords.assign(all.begin(), all.begin() + cfg.max_coords);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t c : coords) {
      const double saved = params[p].data[c];
      params[p].data[c] = saved + cfg.epsilon;
      const double f_plus = fn(params, nullptr);
      params[p].data[c] = saved - cfg.epsilon;
      const double f_minus = fn(params, nullptr);
      params[p].data[c] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * cfg.epsilon);
      const double a = analytic[p].data[c];
      const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
      max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace hctc
