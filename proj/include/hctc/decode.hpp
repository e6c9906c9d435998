#pragma once

#include <map>
#include <utility>
#include <vector>

#include "hctc/ctc.hpp"
#include "hctc/lm.hpp"

namespace hctc::decode {

// Per-frame argmax (ties take the lowest index) followed by squash; exactly
// squash(argmax path).
std::vector<int> greedy_decode(const ctc::PosteriorMatrix& post);

struct FusionConfig {
  std::size_t beam_width = 40;
  double bonus = 1.5;      // insertion bonus per emitted (non-blank) unit
  double lm_weight = 1.0;  // exponent on the LM factor; 1 = plain fusion
};

struct DecodeResult {
  std::vector<int> units;
  double log_score = 0.0;
};

// One frame of beam state for the merged-prefix invariant tests.
using BeamSnapshot = std::map<std::vector<int>, std::pair<double, double>>;  // (blank, label)

// Prefix-merging beam search over
//   score(z) = [ sum_{B^-1(z)} prod_t P_AM(p_t) ] * prod_u P_LM(z_u|z_<u)^w * b
// with the LM factor and bonus applied once per emitted unit and the blank
// given LM probability 1. Hypotheses with equal squashed prefixes are merged
// by log-domain addition of their ends-in-blank / ends-in-label components.
// Ties break lexicographically on unit indices.
DecodeResult fusion_beam_search(const ctc::PosteriorMatrix& post, const lm::LanguageModel& lm,
                                const FusionConfig& cfg,
                                const units::UnitInventory* inventory = nullptr,
                                std::vector<BeamSnapshot>* trace = nullptr);

// Test oracle: enumerates every path, groups by squash class, scores exactly
// as above (lm weight 1), and returns the argmax transcript with its log
// score.
DecodeResult exhaustive_fusion_oracle(const ctc::PosteriorMatrix& post,
                                      const lm::LanguageModel& lm, double bonus,
                                      std::size_t max_paths = 1'000'000);

}  // namespace hctc::decode
