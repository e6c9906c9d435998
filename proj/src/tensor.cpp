#include "hctc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hctc {

bool all_finite(const Tensor2D& t) {
  for (double v : t.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Tensor2D& t, const char* what) {
  if (!all_finite(t)) {
    throw ContractViolation(std::string(what) + ": non-finite entries");
  }
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols != b.rows) throw ContractViolation("matmul: inner dimensions disagree");
  Tensor2D c(a.rows, b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Tensor2D transpose(const Tensor2D& a) {
  Tensor2D t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw ContractViolation("log_sum_exp: empty input");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  if (std::isinf(m) && m < 0) return m;  // all entries are log-zero
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

std::vector<double> log_softmax(std::span<const double> row) {
  const double lse = log_sum_exp(row);
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] - lse;
  return out;
}

double global_norm(const std::vector<Tensor2D*>& grads) {
  double acc = 0.0;
  for (const Tensor2D* g : grads) {
    for (double v : g->data) acc += v * v;
  }
  return std::sqrt(acc);
}

void clip_global_norm(const std::vector<Tensor2D*>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm <= max_norm || norm == 0.0) return;
  const double s = max_norm / norm;
  for (Tensor2D* g : grads) {
    for (double& v : g->data) v *= s;
  }
}

}  // namespace hctc
