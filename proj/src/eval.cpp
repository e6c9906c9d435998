#include "hctc/eval.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "hctc/units.hpp"

namespace hctc::eval {

double ErrorBreakdown::rate() const {
  if (reference_length == 0) {
    return total_errors() == 0 ? 0.0 : 1.0;
  }
  return static_cast<double>(total_errors()) / static_cast<double>(reference_length);
}

ErrorBreakdown& ErrorBreakdown::operator+=(const ErrorBreakdown& other) {
  substitutions += other.substitutions;
  insertions += other.insertions;
  deletions += other.deletions;
  reference_length += other.reference_length;
  return *this;
}

ErrorBreakdown edit_distance(const std::vector<std::string>& ref,
                             const std::vector<std::string>& hyp) {
  const std::size_t m = ref.size();
  const std::size_t n = hyp.size();
  std::vector<std::vector<std::size_t>> dp(m + 1, std::vector<std::size_t>(n + 1, 0));
  for (std::size_t i = 0; i <= m; ++i) dp[i][0] = i;
  for (std::size_t j = 0; j <= n; ++j) dp[0][j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t diag = dp[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      dp[i][j] = std::min({diag, dp[i][j - 1] + 1, dp[i - 1][j] + 1});
    }
  }

  ErrorBreakdown b;
  b.reference_length = m;
  // Backtrace preferring match/substitution, then insertion, then deletion.
  std::size_t i = m, j = n;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && dp[i][j] == dp[i - 1][j - 1] && ref[i - 1] == hyp[j - 1]) {
      --i;
      --j;
    } else if (i > 0 && j > 0 && dp[i][j] == dp[i - 1][j - 1] + 1) {
      ++b.substitutions;
      --i;
      --j;
    } else if (j > 0 && dp[i][j] == dp[i][j - 1] + 1) {
      ++b.insertions;
      --j;
    } else {
      ++b.deletions;
      --i;
    }
  }
  return b;
}

std::vector<std::string> tokenize(const std::string& text, Granularity g) {
  std::vector<std::string> tokens;
  if (g == Granularity::kWord) {
    std::istringstream ss(text);
    std::string w;
    while (ss >> w) tokens.push_back(w);
  } else {
    for (const auto& c : units::utf8_chars(text)) {
      if (c.size() == 1 && std::isspace(static_cast<unsigned char>(c[0]))) continue;
      tokens.push_back(c);
    }
  }
  return tokens;
}

namespace {

std::vector<std::pair<std::string, std::string>> read_pairs(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& t : units::read_transcripts(path)) pairs.emplace_back(t.utt_id, t.text);
  return pairs;
}

}  // namespace

ErrorBreakdown score_pairs(const std::vector<std::pair<std::string, std::string>>& ref,
                           const std::vector<std::pair<std::string, std::string>>& hyp,
                           Granularity g) {
  std::map<std::string, std::string> hyp_by_id;
  for (const auto& [id, text] : hyp) {
    if (!hyp_by_id.emplace(id, text).second) {
      throw DataError("score: duplicate hypothesis utterance id '" + id + "'");
    }
  }
  std::set<std::string> ref_ids;
  std::string missing, extra;
  for (const auto& [id, text] : ref) {
    if (!ref_ids.insert(id).second) {
      throw DataError("score: duplicate reference utterance id '" + id + "'");
    }
    if (!hyp_by_id.count(id)) missing += " " + id;
  }
  for (const auto& [id, text] : hyp_by_id) {
    if (!ref_ids.count(id)) extra += " " + id;
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "score: utterance id sets differ;";
    if (!missing.empty()) msg += " missing from hypothesis:" + missing + ";";
    if (!extra.empty()) msg += " extra in hypothesis:" + extra + ";";
    throw DataError(msg);
  }

  ErrorBreakdown pooled;
  for (const auto& [id, text] : ref) {
    pooled += edit_distance(tokenize(text, g), tokenize(hyp_by_id[id], g));
  }
  return pooled;
}

ErrorBreakdown score_corpus(const std::string& ref_path, const std::string& hyp_path,
                            Granularity g) {
  return score_pairs(read_pairs(ref_path), read_pairs(hyp_path), g);
}

std::string format_report(const ErrorBreakdown& b, Granularity g) {
  std::ostringstream out;
  const char* label = g == Granularity::kWord ? "WER" : "CER";
  out.precision(2);
  out << '%' << label << ' ' << std::fixed << 100.0 * b.rate() << " [ " << b.total_errors() << " / "
      << b.reference_length << ", " << b.insertions << " ins, " << b.deletions << " del, "
      << b.substitutions << " sub ]\n";
  out.precision(10);
  out << "wer=" << b.rate() << "\nsub=" << b.substitutions << "\nins=" << b.insertions
      << "\ndel=" << b.deletions << "\nref_len=" << b.reference_length << "\n";
  return out.str();
}

}  // namespace hctc::eval
