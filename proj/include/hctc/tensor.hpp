#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "hctc/errors.hpp"

namespace hctc {

// Dense row-major matrix of doubles. The only tensor type in the project;
// column vectors are n x 1, scalars 1 x 1.
struct Tensor2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor2D() = default;
  Tensor2D(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Tensor2D from_rows(std::initializer_list<std::initializer_list<double>> rws) {
    Tensor2D t;
    t.rows = rws.size();
    for (const auto& r : rws) {
      if (t.cols == 0) t.cols = r.size();
      if (r.size() != t.cols) throw ContractViolation("from_rows: ragged rows");
      t.data.insert(t.data.end(), r.begin(), r.end());
    }
    return t;
  }

  std::size_t size() const { return data.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }

  double* row_ptr(std::size_t r) { return data.data() + r * cols; }
  const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }

  bool same_shape(const Tensor2D& o) const { return rows == o.rows && cols == o.cols; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

bool all_finite(const Tensor2D& t);
void require_finite(const Tensor2D& t, const char* what);

// c = a * b, (m x k)(k x n). Each output element accumulates its k-terms in
// ascending order, which fixes the summation order for reproducibility.
Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);
Tensor2D transpose(const Tensor2D& a);

// log(sum_i exp(v_i)) with max-shifting; -inf entries are exact log-zeros.
// Returns -inf iff every entry is -inf. Empty input is a contract violation.
double log_sum_exp(std::span<const double> values);

// Row-wise log softmax; exp of the result sums to 1 within 1e-12 and the
// result is invariant under adding a constant to all inputs.
std::vector<double> log_softmax(std::span<const double> row);

// sqrt of the summed squares over a gradient set, and in-place rescaling to
// `max_norm` when the norm exceeds it.
double global_norm(const std::vector<Tensor2D*>& grads);
void clip_global_norm(const std::vector<Tensor2D*>& grads, double max_norm);

}  // namespace hctc
