#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hctc/tensor.hpp"

namespace hctc {

// Handle to a value slot on a GradTape.
struct ValueId {
  std::uint32_t v = 0;
};

// Reverse-mode tape. Forward calls allocate value slots and record one
// backward closure per primitive; backward() replays the closures in exact
// reverse recording order, accumulating gradients additively into
// pre-zeroed slots. A tape describes one computation and is consumed by a
// single backward() call; it is confined to one thread.
class GradTape {
 public:
  // Leaf value (input or parameter). Gradient is readable after backward().
  ValueId leaf(Tensor2D value);

  // Raw slot allocation + closure recording, for fused primitives defined
  // in other modules (LSTM sequence, CTC loss, ...).
  ValueId alloc(Tensor2D value);
  void record(std::function<void(GradTape&)> backward);

  const Tensor2D& value(ValueId id) const { return slots_[id.v].value; }
  const Tensor2D& grad(ValueId id) const { return slots_[id.v].grad; }
  Tensor2D& grad_mut(ValueId id) { return slots_[id.v].grad; }

  // Seeds d(loss)/d(loss) = 1 and replays the tape. `loss` must be 1x1.
  // A tape can be run backward only once.
  void backward(ValueId loss);

  std::size_t num_slots() const { return slots_.size(); }

  // --- primitive operations ---
  ValueId matmul(ValueId a, ValueId b);
  ValueId add(ValueId a, ValueId b);           // elementwise, same shape
  ValueId mul(ValueId a, ValueId b);           // elementwise, same shape
  ValueId scale(ValueId a, double s);
  ValueId add_col(ValueId m, ValueId col);     // broadcast column over cols of m
  ValueId sigmoid(ValueId a);
  ValueId tanh(ValueId a);
  ValueId sum_all(ValueId a);                  // 1x1
  ValueId concat_rows(ValueId top, ValueId bottom);

 private:
  struct Slot {
    Tensor2D value;
    Tensor2D grad;  // same shape, zero-initialized
  };
  std::vector<Slot> slots_;
  std::vector<std::function<void(GradTape&)>> ops_;
  bool ran_backward_ = false;
};

}  // namespace hctc
