#pragma once

#include <cstddef>
#include <vector>

#include "hctc/rng.hpp"
#include "hctc/tape.hpp"
#include "hctc/tensor.hpp"

namespace hctc::nn {

// One LSTM direction. Gate weights are packed row-wise in the order
// [input; forget; candidate; output], each hidden_dim rows.
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor2D w_input;   // 4H x I
  Tensor2D w_hidden;  // 4H x H
  Tensor2D bias;      // 4H x 1

  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  std::size_t param_count() const;
};

struct BilstmParams {
  LstmParams fwd;
  LstmParams bwd;

  static BilstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  std::size_t param_count() const { return fwd.param_count() + bwd.param_count(); }
  std::size_t hidden_dim() const { return fwd.hidden_dim; }
};

struct LinearParams {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Tensor2D weight;  // out x in
  Tensor2D bias;    // out x 1

  static LinearParams init(std::size_t input_dim, std::size_t output_dim, Rng& rng);
  std::size_t param_count() const;
};

// Single recurrence step: sigmoid gates, tanh candidate and output squash.
// All four vectors have hidden_dim entries; x has input_dim.
void lstm_step(const LstmParams& p, const std::vector<double>& x,
               const std::vector<double>& h_prev, const std::vector<double>& c_prev,
               std::vector<double>& h_out, std::vector<double>& c_out);

// Activations cached by the forward pass for backpropagation through time.
// Columns are indexed by processing step, not by input time.
struct LstmCache {
  Tensor2D gates;  // 4H x T, post-activation
  Tensor2D cells;  // H x T
};

// Runs one direction over the whole sequence (columns of x are frames).
// With reverse=true the sequence is processed back-to-front and outputs are
// written back to their original time columns.
Tensor2D lstm_forward(const LstmParams& p, const Tensor2D& x, bool reverse,
                      LstmCache* cache = nullptr);

// Forward half stacked on top of backward half: (2H) x T.
Tensor2D bilstm_forward(const BilstmParams& p, const Tensor2D& x);

// Affine map applied per time step.
Tensor2D linear_forward(const LinearParams& p, const Tensor2D& x);

// --- tape-recorded counterparts ---

struct LstmIds {
  ValueId w_input, w_hidden, bias;
};
struct BilstmIds {
  LstmIds fwd, bwd;
};
struct LinearIds {
  ValueId weight, bias;
};

LstmIds push_lstm(GradTape& tape, const LstmParams& p);
BilstmIds push_bilstm(GradTape& tape, const BilstmParams& p);
LinearIds push_linear(GradTape& tape, const LinearParams& p);

ValueId tape_lstm(GradTape& tape, const LstmIds& ids, ValueId x, bool reverse);
ValueId tape_bilstm(GradTape& tape, const BilstmIds& ids, ValueId x);
ValueId tape_linear(GradTape& tape, const LinearIds& ids, ValueId x);

}  // namespace hctc::nn
