#include "hctc/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace hctc::decode {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logadd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct Hypothesis {
  double blank_score = kNegInf;  // log-sum over merged paths ending in blank
  double label_score = kNegInf;  // log-sum over merged paths ending in the last label
  lm::LmState state;             // LM state after consuming the prefix
  std::vector<double> lm_row;    // w*log P_LM(k|prefix) + log b, lazily filled

  double total() const { return logadd(blank_score, label_score); }
};

}  // namespace

std::vector<int> greedy_decode(const ctc::PosteriorMatrix& post) {
  post.validate();
  std::vector<int> path(post.num_frames());
  for (std::size_t t = 0; t < post.num_frames(); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < post.num_units(); ++k) {
      if (post.log_probs(k, t) > post.log_probs(best, t)) best = k;
    }
    path[t] = static_cast<int>(best);
  }
  return ctc::squash(path);
}

DecodeResult fusion_beam_search(const ctc::PosteriorMatrix& post, const lm::LanguageModel& lm,
                                const FusionConfig& cfg, const units::UnitInventory* inventory,
                                std::vector<BeamSnapshot>* trace) {
  post.validate();
  if (cfg.beam_width == 0) throw ConfigError("fusion: beam width must be at least 1");
  if (cfg.bonus <= 0.0) throw ConfigError("fusion: insertion bonus must be positive");
  if (lm.inventory_size() != post.num_units()) {
    throw ContractViolation("fusion: LM and posterior unit counts differ");
  }
  if (inventory != nullptr && inventory->content_hash() != lm.inventory_hash()) {
    throw ContractViolation("fusion: LM was built for a different inventory");
  }

  const std::size_t units = post.num_units();
  const double log_bonus = std::log(cfg.bonus);
  const auto lm_row_of = [&](const lm::LmState& state) {
    const std::vector<double> dist = lm.next(state);
    std::vector<double> row(units, kNegInf);
    for (std::size_t k = 1; k < units; ++k) {
      row[k] = cfg.lm_weight * std::log(dist[k]) + log_bonus;
    }
    return row;
  };

  std::map<std::vector<int>, Hypothesis> beam;
  {
    Hypothesis root;
    root.blank_score = 0.0;  // empty path
    root.state = lm.start();
    beam.emplace(std::vector<int>{}, std::move(root));
  }

  for (std::size_t t = 0; t < post.num_frames(); ++t) {
    // Accumulate candidate scores; LM states are materialized after pruning.
    std::map<std::vector<int>, std::pair<double, double>> next;  // (blank, label)
    const auto bump_blank = [&next](const std::vector<int>& prefix, double v) {
      if (v == kNegInf) return;  // zero-probability contributions spawn no prefix
      auto& slot = next.try_emplace(prefix, kNegInf, kNegInf).first->second;
      slot.first = logadd(slot.first, v);
    };
    const auto bump_label = [&next](const std::vector<int>& prefix, double v) {
      if (v == kNegInf) return;
      auto& slot = next.try_emplace(prefix, kNegInf, kNegInf).first->second;
      slot.second = logadd(slot.second, v);
    };

    for (auto& [prefix, hyp] : beam) {
      if (hyp.lm_row.empty()) hyp.lm_row = lm_row_of(hyp.state);
      const double total = hyp.total();
      bump_blank(prefix, total + post.log_probs(0, t));
      std::vector<int> ext = prefix;
      ext.push_back(0);
      for (std::size_t k = 1; k < units; ++k) {
        const double y = post.log_probs(k, t);
        ext.back() = static_cast<int>(k);
        if (!prefix.empty() && prefix.back() == static_cast<int>(k)) {
          // Same label again without a blank in between: no new emission.
          bump_label(prefix, hyp.label_score + y);
          bump_label(ext, hyp.blank_score + y + hyp.lm_row[k]);
        } else {
          bump_label(ext, total + y + hyp.lm_row[k]);
        }
      }
    }

    if (trace != nullptr) trace->push_back(next);

    // Keep the top beam_width prefixes; ties prefer the lexicographically
    // smaller prefix (the map iterates in that order, std::sort is stable
    // only with the explicit tiebreak).
    std::vector<std::pair<const std::vector<int>*, const std::pair<double, double>*>> ranked;
    ranked.reserve(next.size());
    for (const auto& [prefix, scores] : next) ranked.emplace_back(&prefix, &scores);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      const double ta = logadd(a.second->first, a.second->second);
      const double tb = logadd(b.second->first, b.second->second);
      if (ta != tb) return ta > tb;
      return *a.first < *b.first;
    });
    if (ranked.size() > cfg.beam_width) ranked.resize(cfg.beam_width);

    std::map<std::vector<int>, Hypothesis> pruned;
    for (const auto& [prefix_ptr, scores] : ranked) {
      Hypothesis hyp;
      hyp.blank_score = scores->first;
      hyp.label_score = scores->second;
      const auto old = beam.find(*prefix_ptr);
      if (old != beam.end()) {
        // Copy, not move: this entry may still serve as the parent of an
        // extended prefix later in the loop.
        hyp.state = old->second.state;
        hyp.lm_row = old->second.lm_row;
      } else {
        // New prefix: its parent (one unit shorter) was in the old beam.
        std::vector<int> parent(*prefix_ptr);
        const int unit = parent.back();
        parent.pop_back();
        const auto pit = beam.find(parent);
        if (pit == beam.end()) throw ContractViolation("fusion: orphan beam hypothesis");
        hyp.state = lm.advance(pit->second.state, unit);
      }
      pruned.emplace(*prefix_ptr, std::move(hyp));
    }
    beam = std::move(pruned);
  }

  const std::vector<int>* best_prefix = nullptr;
  double best_score = kNegInf;
  for (const auto& [prefix, hyp] : beam) {
    const double total = hyp.total();
    if (best_prefix == nullptr || total > best_score ||
        (total == best_score && prefix < *best_prefix)) {
      best_prefix = &prefix;
      best_score = total;
    }
  }
  if (best_prefix == nullptr) throw ContractViolation("fusion: empty beam");
  return DecodeResult{*best_prefix, best_score};
}

DecodeResult exhaustive_fusion_oracle(const ctc::PosteriorMatrix& post,
                                      const lm::LanguageModel& lm, double bonus,
                                      std::size_t max_paths) {
  if (bonus <= 0.0) throw ConfigError("fusion oracle: insertion bonus must be positive");
  if (lm.inventory_size() != post.num_units()) {
    throw ContractViolation("fusion oracle: LM and posterior unit counts differ");
  }
  const auto classes = ctc::enumerate_squash_classes(post, max_paths);
  const double log_bonus = std::log(bonus);

  DecodeResult best;
  bool have = false;
  for (const auto& [transcript, acoustic_sum] : classes) {
    double score = std::log(acoustic_sum);
    lm::LmState state = lm.start();
    for (int unit : transcript) {
      const std::vector<double> dist = lm.next(state);
      score += std::log(dist[static_cast<std::size_t>(unit)]) + log_bonus;
      state = lm.advance(state, unit);
    }
    if (!have || score > best.log_score ||
        (score == best.log_score && transcript < best.units)) {
      best.units = transcript;
      best.log_score = score;
      have = true;
    }
  }
  if (!have) throw ContractViolation("fusion oracle: no squash classes");
  return best;
}

}  // namespace hctc::decode
