#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "hctc/eval.hpp"
#include "hctc/rng.hpp"

using namespace hctc;
using namespace hctc::eval;

namespace {

// Plain recursive edit distance, the brute-force oracle.
std::size_t recursive_distance(const std::vector<std::string>& a, std::size_t i,
                               const std::vector<std::string>& b, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  const std::size_t sub = recursive_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  const std::size_t ins = recursive_distance(a, i, b, j + 1) + 1;
  const std::size_t del = recursive_distance(a, i + 1, b, j) + 1;
  return std::min({sub, ins, del});
}

std::vector<std::string> random_tokens(Rng& rng, std::size_t max_len, std::size_t vocab) {
  std::vector<std::string> out(uniform_int(rng, max_len + 1));
  for (auto& t : out) t = std::string(1, static_cast<char>('a' + uniform_int(rng, vocab)));
  return out;
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

}  // namespace

TEST_CASE("edit distance hand cases") {
  const std::vector<std::string> abc{"a", "b", "c"};
  ErrorBreakdown b = edit_distance(abc, abc);
  CHECK(b.total_errors() == 0);
  CHECK(b.rate() == 0.0);

  b = edit_distance(abc, {"a", "x", "c"});
  CHECK(b.substitutions == 1);
  CHECK(b.insertions == 0);
  CHECK(b.deletions == 0);
  CHECK(b.rate() == doctest::Approx(1.0 / 3.0));

  b = edit_distance({"a"}, {});
  CHECK(b.deletions == 1);
  CHECK(b.rate() == 1.0);

  b = edit_distance({}, {"a", "b"});
  CHECK(b.insertions == 2);
  CHECK(b.reference_length == 0);

  // Rate can exceed 1.
  b = edit_distance({"a"}, {"x", "y", "z"});
  CHECK(b.rate() > 1.0);
}

TEST_CASE("breakdown ties prefer substitution over insertion over deletion") {
  // "a b" vs "x": one substitution plus one deletion beats other breakdowns
  // of the same total.
  const ErrorBreakdown b = edit_distance({"a", "b"}, {"x"});
  CHECK(b.total_errors() == 2);
  CHECK(b.substitutions == 1);
  CHECK(b.deletions == 1);
  CHECK(b.insertions == 0);
}

TEST_CASE("total distance matches the recursive oracle on random pairs") {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto ref = random_tokens(rng, 6, 3);
    const auto hyp = random_tokens(rng, 6, 3);
    CHECK(edit_distance(ref, hyp).total_errors() == recursive_distance(ref, 0, hyp, 0));
  }
}

TEST_CASE("edit distance is a metric on token sequences") {
  Rng rng(11);
  for (int trial = 0; trial < 150; ++trial) {
    const auto a = random_tokens(rng, 5, 2);
    const auto b = random_tokens(rng, 5, 2);
    const auto c = random_tokens(rng, 5, 2);
    const std::size_t ab = edit_distance(a, b).total_errors();
    const std::size_t ba = edit_distance(b, a).total_errors();
    const std::size_t ac = edit_distance(a, c).total_errors();
    const std::size_t cb = edit_distance(c, b).total_errors();
    CHECK(ab == ba);                      // symmetry of the total
    CHECK(ab <= ac + cb);                 // triangle inequality
    CHECK((ab == 0) == (a == b));         // identity of indiscernibles
  }
}

TEST_CASE("pooled corpus arithmetic") {
  // 0% on 9 reference words plus 100% on 1 word pools to 10%.
  const std::vector<std::pair<std::string, std::string>> ref{
      {"u1", "a b c d e f g h i"}, {"u2", "x"}};
  const std::vector<std::pair<std::string, std::string>> hyp{
      {"u1", "a b c d e f g h i"}, {"u2", "y"}};
  const ErrorBreakdown pooled = score_pairs(ref, hyp, Granularity::kWord);
  CHECK(pooled.rate() == doctest::Approx(0.10));
  CHECK(pooled.reference_length == 10);

  // Pooling is over counts, not a mean of rates (that would be 50%).
  CHECK(pooled.rate() != doctest::Approx(0.5));
}

TEST_CASE("pooled score equals the sum over any partition") {
  Rng rng(13);
  std::vector<std::pair<std::string, std::string>> ref, hyp;
  for (int i = 0; i < 12; ++i) {
    auto join = [](const std::vector<std::string>& toks) {
      std::string s;
      for (const auto& t : toks) {
        if (!s.empty()) s += ' ';
        s += t;
      }
      return s;
    };
    ref.emplace_back("u" + std::to_string(i), join(random_tokens(rng, 6, 3)));
    hyp.emplace_back("u" + std::to_string(i), join(random_tokens(rng, 6, 3)));
  }
  const ErrorBreakdown whole = score_pairs(ref, hyp, Granularity::kWord);
  ErrorBreakdown parts;
  for (std::size_t split = 0; split < 12; split += 4) {
    parts += score_pairs({ref.begin() + split, ref.begin() + split + 4},
                         {hyp.begin() + split, hyp.begin() + split + 4}, Granularity::kWord);
  }
  CHECK(parts.total_errors() == whole.total_errors());
  CHECK(parts.reference_length == whole.reference_length);
}

TEST_CASE("character granularity strips spaces before comparison") {
  const std::vector<std::pair<std::string, std::string>> ref{{"u1", "ab cd"}};
  const std::vector<std::pair<std::string, std::string>> hyp{{"u1", "abcd"}};
  const ErrorBreakdown b = score_pairs(ref, hyp, Granularity::kChar);
  CHECK(b.total_errors() == 0);
  CHECK(b.reference_length == 4);
}

TEST_CASE("mismatched utterance id sets are reported with the ids") {
  const std::vector<std::pair<std::string, std::string>> ref{{"u1", "a"}, {"u2", "b"}};
  const std::vector<std::pair<std::string, std::string>> hyp{{"u1", "a"}, {"u3", "b"}};
  try {
    score_pairs(ref, hyp, Granularity::kWord);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("u2") != std::string::npos);
    CHECK(msg.find("u3") != std::string::npos);
  }
}

TEST_CASE("scoring files and the report format") {
  const std::string rpath = "tmp_eval_ref.tsv", hpath = "tmp_eval_hyp.tsv";
  spit(rpath, "u1\tcold weather\nu2\tit works\n");
  spit(hpath, "u1\tcold weather\nu2\tit works\n");
  const ErrorBreakdown b = score_corpus(rpath, hpath, Granularity::kWord);
  CHECK(b.rate() == 0.0);
  const std::string report = format_report(b, Granularity::kWord);
  CHECK(report.find("%WER 0.00") != std::string::npos);
  CHECK(report.find("wer=0") != std::string::npos);
  CHECK(report.find("ref_len=4") != std::string::npos);
  std::remove(rpath.c_str());
  std::remove(hpath.c_str());
}
