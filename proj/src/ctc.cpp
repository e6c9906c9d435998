#include "hctc/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>

#include "hctc/errors.hpp"

namespace hctc::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logadd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Blank-augmented target: blank z1 blank z2 ... zU blank, length 2U+1.
std::vector<int> augment(const std::vector<int>& target) {
  std::vector<int> aug(2 * target.size() + 1, kBlank);
  for (std::size_t u = 0; u < target.size(); ++u) aug[2 * u + 1] = target[u];
  return aug;
}

void check_labels(const PosteriorMatrix& post, const std::vector<int>& target) {
  for (int z : target) {
    if (z <= 0 || static_cast<std::size_t>(z) >= post.num_units()) {
      throw ContractViolation("ctc: target label out of range (blank not allowed)");
    }
  }
}

}  // namespace

void PosteriorMatrix::validate(double tol) const {
  if (log_probs.rows == 0 || log_probs.cols == 0) {
    throw ContractViolation("PosteriorMatrix: empty");
  }
  std::vector<double> col(log_probs.rows);
  for (std::size_t t = 0; t < log_probs.cols; ++t) {
    for (std::size_t k = 0; k < log_probs.rows; ++k) {
      const double v = log_probs(k, t);
      if (std::isnan(v) || v > tol) {
        throw ContractViolation("PosteriorMatrix: invalid log-probability");
      }
      col[k] = v;
    }
    if (std::fabs(log_sum_exp(col)) > tol) {
      throw ContractViolation("PosteriorMatrix: column does not sum to 1");
    }
  }
}

PosteriorMatrix PosteriorMatrix::from_logits(const Tensor2D& logits) {
  PosteriorMatrix post;
  post.log_probs = Tensor2D(logits.rows, logits.cols);
  std::vector<double> col(logits.rows);
  for (std::size_t t = 0; t < logits.cols; ++t) {
    for (std::size_t k = 0; k < logits.rows; ++k) col[k] = logits(k, t);
    const std::vector<double> ls = log_softmax(col);
    for (std::size_t k = 0; k < logits.rows; ++k) post.log_probs(k, t) = ls[k];
  }
  return post;
}

std::vector<int> squash(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  int prev = blank - 1;  // sentinel different from every label and the blank
  for (int p : path) {
    if (p != prev) {
      if (p != blank) out.push_back(p);
      prev = p;
    }
  }
  return out;
}

std::size_t min_frames(const std::vector<int>& target) {
  std::size_t repeats = 0;
  for (std::size_t u = 1; u < target.size(); ++u) {
    if (target[u] == target[u - 1]) ++repeats;
  }
  return target.size() + repeats;
}

CtcResult ctc_loss(const PosteriorMatrix& post, const std::vector<int>& target) {
  post.validate();
  check_labels(post, target);
  const std::size_t frames = post.num_frames();
  const std::size_t units = post.num_units();
  if (target.size() > frames || min_frames(target) > frames) {
    throw InfeasibleTargetError("ctc_loss: target needs " + std::to_string(min_frames(target)) +
                                " frames but only " + std::to_string(frames) + " are available");
  }

  const std::vector<int> aug = augment(target);
  const std::size_t states = aug.size();
  const Tensor2D& lp = post.log_probs;
  const auto emit = [&](std::size_t s, std::size_t t) {
    return lp(static_cast<std::size_t>(aug[s]), t);
  };
  // A state may also be entered from two states back when its label differs
  // from the label there (blanks never skip).
  const auto can_skip = [&](std::size_t s) {
    return s >= 2 && aug[s] != kBlank && aug[s] != aug[s - 2];
  };

  // alpha[t][s]: log-probability of all partial paths ending in state s at
  // frame t, including the emission at t.
  Tensor2D alpha(frames, states, kNegInf);
  alpha(0, 0) = emit(0, 0);
  if (states > 1) alpha(0, 1) = emit(1, 0);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = logadd(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = logadd(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc == kNegInf ? kNegInf : acc + emit(s, t);
    }
  }
  double log_p = alpha(frames - 1, states - 1);
  if (states > 1) log_p = logadd(log_p, alpha(frames - 1, states - 2));
  if (log_p == kNegInf) {
    // Only reachable when some posterior entries are exact zeros.
    CtcResult res;
    res.loss = std::numeric_limits<double>::infinity();
    res.logit_grad = Tensor2D(units, frames);
    return res;
  }

  // beta[t][s]: log-probability of completing the path from state s at
  // frame t, including the emission at t.
  Tensor2D beta(frames, states, kNegInf);
  beta(frames - 1, states - 1) = emit(states - 1, frames - 1);
  if (states > 1) beta(frames - 1, states - 2) = emit(states - 2, frames - 1);
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = beta(t + 1, s);
      if (s + 1 < states) acc = logadd(acc, beta(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) acc = logadd(acc, beta(t + 1, s + 2));
      beta(t, s) = acc == kNegInf ? kNegInf : acc + emit(s, t);
    }
  }

  // Fused softmax+CTC gradient: d loss / d logit_{k,t}
  //   = softmax_{k,t} - sum_{s: aug[s]=k} alpha[t][s] beta[t][s] / (p_{k,t} P).
  CtcResult res;
  res.loss = -log_p;
  res.logit_grad = Tensor2D(units, frames);
  std::vector<double> occ(units);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(occ.begin(), occ.end(), kNegInf);
    for (std::size_t s = 0; s < states; ++s) {
      const double ab = alpha(t, s) + beta(t, s);
      if (ab == kNegInf) continue;
      const auto k = static_cast<std::size_t>(aug[s]);
      occ[k] = logadd(occ[k], ab - lp(k, t));
    }
    for (std::size_t k = 0; k < units; ++k) {
      const double gamma = occ[k] == kNegInf ? 0.0 : std::exp(occ[k] - log_p);
      res.logit_grad(k, t) = std::exp(lp(k, t)) - gamma;
    }
  }
  return res;
}

std::map<std::vector<int>, double> enumerate_squash_classes(const PosteriorMatrix& post,
                                                            std::size_t max_paths) {
  post.validate();
  const std::size_t frames = post.num_frames();
  const std::size_t units = post.num_units();
  double total = 1.0;
  for (std::size_t t = 0; t < frames; ++t) {
    total *= static_cast<double>(units);
    if (total > static_cast<double>(max_paths)) {
      throw OracleSizeError("enumerate_squash_classes: |L'|^T exceeds " +
                            std::to_string(max_paths) + " paths");
    }
  }

  Tensor2D probs(units, frames);
  for (std::size_t i = 0; i < probs.size(); ++i) probs.data[i] = std::exp(post.log_probs.data[i]);

  std::map<std::vector<int>, double> classes;
  std::vector<int> squashed;
  squashed.reserve(frames);
  // Depth-first over all |L'|^T paths, carrying the running product and the
  // incrementally squashed transcription. Kahan-style accumulation keeps the
  // class sums accurate enough for 1e-10 comparisons.
  struct Acc {
    double sum = 0.0;
    double carry = 0.0;
  };
  std::map<std::vector<int>, Acc> acc;
  const std::function<void(std::size_t, double, int)> walk = [&](std::size_t t, double prod,
                                                                 int prev) {
    if (t == frames) {
      Acc& a = acc[squashed];
      const double y = prod - a.carry;
      const double s = a.sum + y;
      a.carry = (s - a.sum) - y;
      a.sum = s;
      return;
    }
    for (std::size_t k = 0; k < units; ++k) {
      const double p = prod * probs(k, t);
      const bool emits = k != kBlank && static_cast<int>(k) != prev;
      if (emits) squashed.push_back(static_cast<int>(k));
      walk(t + 1, p, static_cast<int>(k));
      if (emits) squashed.pop_back();
    }
  };
  walk(0, 1.0, -1);
  for (const auto& [key, a] : acc) classes[key] = a.sum;
  return classes;
}

double brute_force_ctc(const PosteriorMatrix& post, const std::vector<int>& target,
                       std::size_t max_paths) {
  check_labels(post, target);
  const auto classes = enumerate_squash_classes(post, max_paths);
  const auto it = classes.find(target);
  return it == classes.end() ? 0.0 : it->second;
}

ValueId tape_ctc_loss(GradTape& tape, ValueId logits, const std::vector<int>& target) {
  const PosteriorMatrix post = PosteriorMatrix::from_logits(tape.value(logits));
  CtcResult res = ctc_loss(post, target);
  Tensor2D loss(1, 1);
  loss(0, 0) = res.loss;
  const ValueId out = tape.alloc(std::move(loss));
  auto grad = std::make_shared<Tensor2D>(std::move(res.logit_grad));
  tape.record([logits, out, grad](GradTape& t) {
    const double g = t.grad(out)(0, 0);
    Tensor2D& gl = t.grad_mut(logits);
    for (std::size_t i = 0; i < gl.size(); ++i) gl.data[i] += g * grad->data[i];
  });
  return out;
}

}  // namespace hctc::ctc
