#include "hctc/nn.hpp"

#include <cmath>
#include <memory>

namespace hctc::nn {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void fill_uniform(Tensor2D& t, Rng& rng) {
  for (double& v : t.data) v = uniform_range(rng, -0.05, 0.05);
}

// Shared forward kernel; `cache` (when given) receives post-activation gates
// and cell states per processing step.
Tensor2D lstm_forward_core(const Tensor2D& wx, const Tensor2D& wh, const Tensor2D& b,
                           const Tensor2D& x, bool reverse, LstmCache* cache) {
  const std::size_t four_h = wx.rows;
  const std::size_t hidden = four_h / 4;
  const std::size_t input = wx.cols;
  const std::size_t frames = x.cols;
  if (x.rows != input) throw ContractViolation("lstm_forward: input dimension mismatch");
  if (frames == 0) throw ContractViolation("lstm_forward: empty sequence");

  Tensor2D out(hidden, frames);
  if (cache != nullptr) {
    cache->gates = Tensor2D(four_h, frames);
    cache->cells = Tensor2D(hidden, frames);
  }

  std::vector<double> a(four_h);
  std::vector<double> h(hidden, 0.0), c(hidden, 0.0);
  for (std::size_t j = 0; j < frames; ++j) {
    const std::size_t t = reverse ? frames - 1 - j : j;
    for (std::size_t r = 0; r < four_h; ++r) {
      double acc = b(r, 0);
      const double* wxr = wx.row_ptr(r);
      for (std::size_t k = 0; k < input; ++k) acc += wxr[k] * x(k, t);
      const double* whr = wh.row_ptr(r);
      for (std::size_t k = 0; k < hidden; ++k) acc += whr[k] * h[k];
      a[r] = acc;
    }
    for (std::size_t k = 0; k < hidden; ++k) {
      const double gi = sigmoid(a[k]);
      const double gf = sigmoid(a[hidden + k]);
      const double gg = std::tanh(a[2 * hidden + k]);
      const double go = sigmoid(a[3 * hidden + k]);
      c[k] = gf * c[k] + gi * gg;
      h[k] = go * std::tanh(c[k]);
      out(k, t) = h[k];
      if (cache != nullptr) {
        cache->gates(k, j) = gi;
        cache->gates(hidden + k, j) = gf;
        cache->gates(2 * hidden + k, j) = gg;
        cache->gates(3 * hidden + k, j) = go;
        cache->cells(k, j) = c[k];
      }
    }
  }
  return out;
}

}  // namespace

LstmParams LstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.w_input = Tensor2D(4 * hidden_dim, input_dim);
  p.w_hidden = Tensor2D(4 * hidden_dim, hidden_dim);
  p.bias = Tensor2D(4 * hidden_dim, 1);
  fill_uniform(p.w_input, rng);
  fill_uniform(p.w_hidden, rng);
  fill_uniform(p.bias, rng);
  // Forget gate bias starts at 1.
  for (std::size_t k = 0; k < hidden_dim; ++k) p.bias(hidden_dim + k, 0) = 1.0;
  return p;
}

std::size_t LstmParams::param_count() const {
  return w_input.size() + w_hidden.size() + bias.size();
}

BilstmParams BilstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  BilstmParams p;
  p.fwd = LstmParams::init(input_dim, hidden_dim, rng);
  p.bwd = LstmParams::init(input_dim, hidden_dim, rng);
  return p;
}

LinearParams LinearParams::init(std::size_t input_dim, std::size_t output_dim, Rng& rng) {
  LinearParams p;
  p.input_dim = input_dim;
  p.output_dim = output_dim;
  p.weight = Tensor2D(output_dim, input_dim);
  p.bias = Tensor2D(output_dim, 1);
  fill_uniform(p.weight, rng);
  fill_uniform(p.bias, rng);
  return p;
}

std::size_t LinearParams::param_count() const { return weight.size() + bias.size(); }

void lstm_step(const LstmParams& p, const std::vector<double>& x,
               const std::vector<double>& h_prev, const std::vector<double>& c_prev,
               std::vector<double>& h_out, std::vector<double>& c_out) {
  const std::size_t hidden = p.hidden_dim;
  if (x.size() != p.input_dim || h_prev.size() != hidden || c_prev.size() != hidden) {
    throw ContractViolation("lstm_step: dimension mismatch");
  }
  h_out.resize(hidden);
  c_out.resize(hidden);
  std::vector<double> a(4 * hidden);
  for (std::size_t r = 0; r < 4 * hidden; ++r) {
    double acc = p.bias(r, 0);
    const double* wxr = p.w_input.row_ptr(r);
    for (std::size_t k = 0; k < p.input_dim; ++k) acc += wxr[k] * x[k];
    const double* whr = p.w_hidden.row_ptr(r);
    for (std::size_t k = 0; k < hidden; ++k) acc += whr[k] * h_prev[k];
    a[r] = acc;
  }
  for (std::size_t k = 0; k < hidden; ++k) {
    const double gi = sigmoid(a[k]);
    const double gf = sigmoid(a[hidden + k]);
    const double gg = std::tanh(a[2 * hidden + k]);
    const double go = sigmoid(a[3 * hidden + k]);
    c_out[k] = gf * c_prev[k] + gi * gg;
    h_out[k] = go * std::tanh(c_out[k]);
  }
}

Tensor2D lstm_forward(const LstmParams& p, const Tensor2D& x, bool reverse, LstmCache* cache) {
  return lstm_forward_core(p.w_input, p.w_hidden, p.bias, x, reverse, cache);
}

Tensor2D bilstm_forward(const BilstmParams& p, const Tensor2D& x) {
  const Tensor2D f = lstm_forward(p.fwd, x, /*reverse=*/false);
  const Tensor2D b = lstm_forward(p.bwd, x, /*reverse=*/true);
  Tensor2D out(f.rows + b.rows, f.cols);
  std::copy(f.data.begin(), f.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + f.data.size());
  return out;
}

Tensor2D linear_forward(const LinearParams& p, const Tensor2D& x) {
  if (x.rows != p.input_dim) throw ContractViolation("linear_forward: dimension mismatch");
  Tensor2D out = matmul(p.weight, x);
  for (std::size_t r = 0; r < out.rows; ++r) {
    const double b = p.bias(r, 0);
    double* row = out.row_ptr(r);
    for (std::size_t j = 0; j < out.cols; ++j) row[j] += b;
  }
  return out;
}

LstmIds push_lstm(GradTape& tape, const LstmParams& p) {
  return LstmIds{tape.leaf(p.w_input), tape.leaf(p.w_hidden), tape.leaf(p.bias)};
}

BilstmIds push_bilstm(GradTape& tape, const BilstmParams& p) {
  return BilstmIds{push_lstm(tape, p.fwd), push_lstm(tape, p.bwd)};
}

LinearIds push_linear(GradTape& tape, const LinearParams& p) {
  return LinearIds{tape.leaf(p.weight), tape.leaf(p.bias)};
}

// Fused sequence op: the whole direction is one tape primitive and its
// backward closure runs backpropagation through time over the cached gates.
ValueId tape_lstm(GradTape& tape, const LstmIds& ids, ValueId x, bool reverse) {
  auto cache = std::make_shared<LstmCache>();
  Tensor2D out = lstm_forward_core(tape.value(ids.w_input), tape.value(ids.w_hidden),
                                   tape.value(ids.bias), tape.value(x), reverse, cache.get());
  const ValueId out_id = tape.alloc(std::move(out));

  tape.record([ids, x, out_id, reverse, cache](GradTape& t) {
    const Tensor2D& wx = t.value(ids.w_input);
    const Tensor2D& wh = t.value(ids.w_hidden);
    const Tensor2D& xv = t.value(x);
    const Tensor2D& hv = t.value(out_id);
    const Tensor2D& gout = t.grad(out_id);
    Tensor2D& gwx = t.grad_mut(ids.w_input);
    Tensor2D& gwh = t.grad_mut(ids.w_hidden);
    Tensor2D& gb = t.grad_mut(ids.bias);
    Tensor2D& gx = t.grad_mut(x);

    const std::size_t hidden = hv.rows;
    const std::size_t input = xv.rows;
    const std::size_t frames = xv.cols;
    const Tensor2D& gates = cache->gates;
    const Tensor2D& cells = cache->cells;

    std::vector<double> dh(hidden), dc_next(hidden, 0.0), dh_rec(hidden, 0.0);
    std::vector<double> da(4 * hidden);
    for (std::size_t jj = frames; jj-- > 0;) {
      const std::size_t time = reverse ? frames - 1 - jj : jj;
      for (std::size_t k = 0; k < hidden; ++k) dh[k] = gout(k, time) + dh_rec[k];
      for (std::size_t k = 0; k < hidden; ++k) {
        const double gi = gates(k, jj);
        const double gf = gates(hidden + k, jj);
        const double gg = gates(2 * hidden + k, jj);
        const double go = gates(3 * hidden + k, jj);
        const double tc = std::tanh(cells(k, jj));
        const double c_prev = jj > 0 ? cells(k, jj - 1) : 0.0;
        const double dcell = dh[k] * go * (1.0 - tc * tc) + dc_next[k];
        da[k] = dcell * gg * gi * (1.0 - gi);
        da[hidden + k] = dcell * c_prev * gf * (1.0 - gf);
        da[2 * hidden + k] = dcell * gi * (1.0 - gg * gg);
        da[3 * hidden + k] = dh[k] * tc * go * (1.0 - go);
        dc_next[k] = dcell * gf;
      }
      const std::size_t prev_time = reverse ? time + 1 : time - 1;
      for (std::size_t r = 0; r < 4 * hidden; ++r) {
        const double d = da[r];
        gb(r, 0) += d;
        if (d == 0.0) continue;
        double* gwxr = gwx.row_ptr(r);
        for (std::size_t k = 0; k < input; ++k) gwxr[k] += d * xv(k, time);
        if (jj > 0) {
          double* gwhr = gwh.row_ptr(r);
          for (std::size_t k = 0; k < hidden; ++k) gwhr[k] += d * hv(k, prev_time);
        }
      }
      for (std::size_t k = 0; k < input; ++k) {
        double acc = 0.0;
        for (std::size_t r = 0; r < 4 * hidden; ++r) acc += wx(r, k) * da[r];
        gx(k, time) += acc;
      }
      for (std::size_t k = 0; k < hidden; ++k) {
        double acc = 0.0;
        for (std::size_t r = 0; r < 4 * hidden; ++r) acc += wh(r, k) * da[r];
        dh_rec[k] = acc;
      }
    }
  });
  return out_id;
}

ValueId tape_bilstm(GradTape& tape, const BilstmIds& ids, ValueId x) {
  const ValueId f = tape_lstm(tape, ids.fwd, x, /*reverse=*/false);
  const ValueId b = tape_lstm(tape, ids.bwd, x, /*reverse=*/true);
  return tape.concat_rows(f, b);
}

ValueId tape_linear(GradTape& tape, const LinearIds& ids, ValueId x) {
  return tape.add_col(tape.matmul(ids.weight, x), ids.bias);
}

}  // namespace hctc::nn
