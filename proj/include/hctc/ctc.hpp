#pragma once

#include <map>
#include <vector>

#include "hctc/tape.hpp"
#include "hctc/tensor.hpp"

namespace hctc::ctc {

inline constexpr int kBlank = 0;

// Per-frame log-probability distribution over the extended unit set L';
// every column must exponentiate and sum to 1.
struct PosteriorMatrix {
  Tensor2D log_probs;  // |L'| x T

  std::size_t num_units() const { return log_probs.rows; }
  std::size_t num_frames() const { return log_probs.cols; }
  void validate(double tol = 1e-10) const;

  static PosteriorMatrix from_logits(const Tensor2D& logits);
};

// The squash mapping B: collapses consecutive repeats, then removes blanks.
// Repeats separated by a blank survive.
std::vector<int> squash(const std::vector<int>& path, int blank = kBlank);

// Minimal frame count that can realize `target` (label count plus one forced
// blank per adjacent repeat).
std::size_t min_frames(const std::vector<int>& target);

struct CtcResult {
  double loss = 0.0;      // -log P(target | X)
  Tensor2D logit_grad;    // d loss / d pre-softmax logits, |L'| x T
};

// Log-space forward-backward over the blank-augmented target lattice.
// The gradient is with respect to the logits that produced `post` via
// column-wise log-softmax (fused softmax+CTC backward).
CtcResult ctc_loss(const PosteriorMatrix& post, const std::vector<int>& target);

// Exhaustive oracle: sums the probability of every length-T path whose
// squash equals `target`. Refuses instances with more than `max_paths`
// paths.
double brute_force_ctc(const PosteriorMatrix& post, const std::vector<int>& target,
                       std::size_t max_paths = 10'000'000);

// All squash classes with their summed path probabilities; shared by the
// CTC and fusion oracles.
std::map<std::vector<int>, double> enumerate_squash_classes(const PosteriorMatrix& post,
                                                            std::size_t max_paths);

// Tape primitive: logits (|L'| x T) -> scalar CTC loss, backward through the
// fused softmax+lattice gradient.
ValueId tape_ctc_loss(GradTape& tape, ValueId logits, const std::vector<int>& target);

}  // namespace hctc::ctc
