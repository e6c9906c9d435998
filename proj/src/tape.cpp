#include "hctc/tape.hpp"

#include <cmath>

namespace hctc {

ValueId GradTape::leaf(Tensor2D value) { return alloc(std::move(value)); }

ValueId GradTape::alloc(Tensor2D value) {
  Slot s;
  s.grad = Tensor2D(value.rows, value.cols, 0.0);
  s.value = std::move(value);
  slots_.push_back(std::move(s));
  return ValueId{static_cast<std::uint32_t>(slots_.size() - 1)};
}

void GradTape::record(std::function<void(GradTape&)> backward) {
  ops_.push_back(std::move(backward));
}

void GradTape::backward(ValueId loss) {
  if (ran_backward_) throw ContractViolation("GradTape: backward already ran");
  const Tensor2D& lv = value(loss);
  if (lv.rows != 1 || lv.cols != 1) throw ContractViolation("backward: loss must be 1x1");
  ran_backward_ = true;
  grad_mut(loss)(0, 0) = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)(*this);
}

ValueId GradTape::matmul(ValueId a, ValueId b) {
  ValueId out = alloc(hctc::matmul(value(a), value(b)));
  record([a, b, out](GradTape& t) {
    const Tensor2D& g = t.grad(out);
    const Tensor2D& av = t.value(a);
    const Tensor2D& bv = t.value(b);
    // dA += g * B^T
    Tensor2D& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < av.rows; ++i)
      for (std::size_t k = 0; k < av.cols; ++k) {
        double acc = 0.0;
        const double* grow = g.row_ptr(i);
        const double* brow = bv.row_ptr(k);
        for (std::size_t j = 0; j < bv.cols; ++j) acc += grow[j] * brow[j];
        ga(i, k) += acc;
      }
    // dB += A^T * g
    Tensor2D& gb = t.grad_mut(b);
    for (std::size_t k = 0; k < bv.rows; ++k) {
      double* gbrow = gb.row_ptr(k);
      for (std::size_t i = 0; i < av.rows; ++i) {
        const double av_ik = av(i, k);
        if (av_ik == 0.0) continue;
        const double* grow = g.row_ptr(i);
        for (std::size_t j = 0; j < bv.cols; ++j) gbrow[j] += av_ik * grow[j];
      }
    }
  });
  return out;
}

ValueId GradTape::add(ValueId a, ValueId b) {
  const Tensor2D& av = value(a);
  const Tensor2D& bv = value(b);
  if (!av.same_shape(bv)) throw ContractViolation("add: shape mismatch");
  Tensor2D out(av.rows, av.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] + bv.data[i];
  ValueId o = alloc(std::move(out));
  record([a, b, o](GradTape& t) {
    const Tensor2D& g = t.grad(o);
    Tensor2D& ga = t.grad_mut(a);
    Tensor2D& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] += g.data[i];
    }
  });
  return o;
}

ValueId GradTape::mul(ValueId a, ValueId b) {
  const Tensor2D& av = value(a);
  const Tensor2D& bv = value(b);
  if (!av.same_shape(bv)) throw ContractViolation("mul: shape mismatch");
  Tensor2D out(av.rows, av.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] * bv.data[i];
  ValueId o = alloc(std::move(out));
  record([a, b, o](GradTape& t) {
    const Tensor2D& g = t.grad(o);
    const Tensor2D& av2 = t.value(a);
    const Tensor2D& bv2 = t.value(b);
    Tensor2D& ga = t.grad_mut(a);
    Tensor2D& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i] * bv2.data[i];
      gb.data[i] += g.data[i] * av2.data[i];
    }
  });
  return o;
}

ValueId GradTape::scale(ValueId a, double s) {
  const Tensor2D& av = value(a);
  Tensor2D out(av.rows, av.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] * s;
  ValueId o = alloc(std::move(out));
  record([a, o, s](GradTape& t) {
    const Tensor2D& g = t.grad(o);
    Tensor2D& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * s;
  });
  return o;
}

ValueId GradTape::add_col(ValueId m, ValueId col) {
  const Tensor2D& mv = value(m);
  const Tensor2D& cv = value(col);
  if (cv.cols != 1 || cv.rows != mv.rows) throw ContractViolation("add_col: bad column shape");
  Tensor2D out(mv.rows, mv.cols);
  for (std::size_t i = 0; i < mv.rows; ++i) {
    const double c = cv(i, 0);
    const double* src = mv.row_ptr(i);
    double* dst = out.row_ptr(i);
    for (std::size_t j = 0; j < mv.cols; ++j) dst[j] = src[j] + c;
  }
  ValueId o = alloc(std::move(out));
  record([m, col, o](GradTape& t) {
    const Tensor2D& g = t.grad(o);
    Tensor2D& gm = t.grad_mut(m);
    Tensor2D& gc = t.grad_mut(col);
    for (std::size_t i = 0; i < g.rows; ++i) {
      const double* grow = g.row_ptr(i);
      double* mrow = gm.row_ptr(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < g.cols; ++j) {
        mrow[j] += grow[j];
        acc += grow[j];
      }
      gc(i, 0) += acc;
    }
  });
  return o;
}

ValueId GradTape::sigmoid(ValueId a) {
  const Tensor2D& av = value(a);
  Tensor2D out(av.rows, av.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = 1.0 / (1.0 + std::exp(-av.data[i]));
  ValueId o = alloc(std::move(out));
  record([a, o](GradTape& t) {
    const Tensor2D& g = t.grad(o);
    const Tensor2D& ov = t.value(o);
    Tensor2D& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = ov.data[i];
      ga.data[i] += g.data[i] * s * (1.0 - s);
    }
  });
  return o;
}

ValueId GradTape::tanh(ValueId a) {
  const Tensor2D& av = value(a);
  Tensor2D out(av.rows, av.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::tanh(av.data[i]);
  ValueId o = alloc(std::move(out));
  record([a, o](GradTape& t) {
    const Tensor2D& g = t.grad(o);
    const Tensor2D& ov = t.value(o);
    Tensor2D& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double th = ov.data[i];
      ga.data[i] += g.data[i] * (1.0 - th * th);
    }
  });
  return o;
}

ValueId GradTape::sum_all(ValueId a) {
  const Tensor2D& av = value(a);
  double acc = 0.0;
  for (double v : av.data) acc += v;
  Tensor2D out(1, 1);
  out(0, 0) = acc;
  ValueId o = alloc(std::move(out));
  record([a, o](GradTape& t) {
    const double g = t.grad(o)(0, 0);
    Tensor2D& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += g;
  });
  return o;
}

ValueId GradTape::concat_rows(ValueId top, ValueId bottom) {
  const Tensor2D& tv = value(top);
  const Tensor2D& bv = value(bottom);
  if (tv.cols != bv.cols) throw ContractViolation("concat_rows: column count mismatch");
  Tensor2D out(tv.rows + bv.rows, tv.cols);
  std::copy(tv.data.begin(), tv.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + tv.data.size());
  ValueId o = alloc(std::move(out));
  const std::size_t top_rows = tv.rows;
  record([top, bottom, o, top_rows](GradTape& t) {
    const Tensor2D& g = t.grad(o);
    Tensor2D& gt = t.grad_mut(top);
    Tensor2D& gb = t.grad_mut(bottom);
    const std::size_t split = top_rows * g.cols;
    for (std::size_t i = 0; i < split; ++i) gt.data[i] += g.data[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] += g.data[split + i];
  });
  return o;
}

}  // namespace hctc
