#pragma once

#include <string>
#include <vector>

#include "hctc/errors.hpp"

namespace hctc::eval {

struct ErrorBreakdown {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t reference_length = 0;

  std::size_t total_errors() const { return substitutions + insertions + deletions; }
  // (S+I+D)/N; can exceed 1. Zero-length reference with an empty hypothesis
  // scores 0.
  double rate() const;

  ErrorBreakdown& operator+=(const ErrorBreakdown& other);
};

// Minimal-edit alignment with unit costs. When several alignments reach the
// minimum, the backtrace prefers substitution over insertion over deletion,
// which fixes the breakdown without affecting the total.
ErrorBreakdown edit_distance(const std::vector<std::string>& ref,
                             const std::vector<std::string>& hyp);

enum class Granularity { kWord, kChar };

// Tokenizes one utterance text: whitespace words, or characters with all
// spaces stripped (the space-free character convention).
std::vector<std::string> tokenize(const std::string& text, Granularity g);

// Pooled corpus score: sum of errors over sum of reference lengths, never a
// mean of per-utterance rates. Reference and hypothesis files are
// "utt_id<TAB>text"; mismatched utterance id sets are an error listing the
// offending ids.
ErrorBreakdown score_corpus(const std::string& ref_path, const std::string& hyp_path,
                            Granularity g);

// Scores parallel texts keyed by id (in-memory form of score_corpus).
ErrorBreakdown score_pairs(const std::vector<std::pair<std::string, std::string>>& ref,
                           const std::vector<std::pair<std::string, std::string>>& hyp,
                           Granularity g);

// Plain-text report followed by machine-readable key-value lines
// (wer=..., sub=..., ins=..., del=..., ref_len=...).
std::string format_report(const ErrorBreakdown& b, Granularity g);

}  // namespace hctc::eval
