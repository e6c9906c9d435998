#include "hctc/data.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hctc/binio.hpp"
#include "hctc/rng.hpp"

namespace hctc::data {

namespace {

constexpr char kFeatMagic[4] = {'F', 'E', 'A', 'T'};
constexpr std::uint32_t kFeatVersion = 1;
constexpr std::uint32_t kMaxDim = 1u << 24;

}  // namespace

void write_features(const std::string& path, const FeatureMatrix& feat) {
  if (feat.num_frames() == 0 || feat.num_dims() == 0) {
    throw ContractViolation("write_features: empty matrix");
  }
  require_finite(feat.values, "write_features");
  BinaryWriter w(path);
  w.magic(kFeatMagic);
  w.u32(kFeatVersion);
  w.u32(static_cast<std::uint32_t>(feat.num_frames()));
  w.u32(static_cast<std::uint32_t>(feat.num_dims()));
  for (double v : feat.values.data) w.f32(static_cast<float>(v));
  w.close();
}

FeatureMatrix read_features(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kFeatMagic, "feature");
  const std::uint32_t version = r.u32();
  if (version != kFeatVersion) {
    throw ParseError("unsupported feature file version " + std::to_string(version), r.offset() - 4);
  }
  const std::uint32_t frames = r.u32();
  const std::uint32_t dims = r.u32();
  if (frames == 0 || dims == 0 || frames > kMaxDim || dims > kMaxDim) {
    throw ParseError("feature shape out of range: T=" + std::to_string(frames) +
                         " F=" + std::to_string(dims),
                     r.offset() - 8);
  }
  FeatureMatrix feat;
  feat.values = Tensor2D(frames, dims);
  for (double& v : feat.values.data) v = static_cast<double>(r.f32());
  if (!all_finite(feat.values)) {
    throw DataError("feature file contains non-finite values: " + path);
  }
  return feat;
}

FeatureMatrix read_text_matrix(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!ss.eof()) throw DataError("non-numeric token in text matrix: " + path);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("text matrix is empty: " + path);
  FeatureMatrix feat;
  feat.values = Tensor2D(rows.size(), rows[0].size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != feat.num_dims()) {
      throw DataError("ragged text matrix at row " + std::to_string(t) + ": " + path);
    }
    for (std::size_t k = 0; k < rows[t].size(); ++k) feat.values(t, k) = rows[t][k];
  }
  require_finite(feat.values, "read_text_matrix");
  return feat;
}

void write_text_matrix(const std::string& path, const FeatureMatrix& feat) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f.precision(9);
  for (std::size_t t = 0; t < feat.num_frames(); ++t) {
    for (std::size_t k = 0; k < feat.num_dims(); ++k) {
      if (k > 0) f << ' ';
      f << feat.values(t, k);
    }
    f << '\n';
  }
}

std::vector<std::pair<std::string, std::string>> read_feature_list(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open: " + path);
  std::vector<std::pair<std::string, std::string>> list;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(f, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    while (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("feature list line missing '<TAB>'", line_start);
    list.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return list;
}

void write_posterior_text(const std::string& path, const ctc::PosteriorMatrix& post) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f.precision(9);
  f << post.num_units() << ' ' << post.num_frames() << '\n';
  for (std::size_t k = 0; k < post.num_units(); ++k) {
    for (std::size_t t = 0; t < post.num_frames(); ++t) {
      if (t > 0) f << ' ';
      f << post.log_probs(k, t);
    }
    f << '\n';
  }
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::size_t n_utts,
                                   const std::string& id_prefix) {
  if (spec.alphabet_size == 0 || spec.alphabet_size > 26) {
    throw ConfigError("generate_synthetic: alphabet size must be in [1, 26]");
  }
  if (spec.min_frames_per_symbol == 0 || spec.max_frames_per_symbol < spec.min_frames_per_symbol ||
      spec.min_word_len == 0 || spec.max_word_len < spec.min_word_len || spec.min_words == 0 ||
      spec.max_words < spec.min_words || spec.lexicon_size == 0) {
    throw ConfigError("generate_synthetic: inconsistent ranges");
  }
  Rng rng(spec.seed);

  const auto rand_in = [&rng](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(uniform_int(rng, hi - lo + 1));
  };

  SyntheticCorpus corpus;
  std::set<std::string> seen;
  while (corpus.lexicon.size() < spec.lexicon_size) {
    const std::size_t len = rand_in(spec.min_word_len, spec.max_word_len);
    std::string word;
    for (std::size_t i = 0; i < len; ++i) {
      word += static_cast<char>('a' + uniform_int(rng, spec.alphabet_size));
    }
    if (seen.insert(word).second) corpus.lexicon.push_back(word);
  }

  for (std::size_t n = 0; n < n_utts; ++n) {
    const std::size_t n_words = rand_in(spec.min_words, spec.max_words);
    std::string text;
    std::string symbols;
    for (std::size_t w = 0; w < n_words; ++w) {
      const std::string& word = corpus.lexicon[uniform_int(rng, corpus.lexicon.size())];
      if (w > 0) text += ' ';
      text += word;
      symbols += word;
    }

    std::vector<std::vector<double>> frames;
    for (char sym : symbols) {
      const std::size_t run = rand_in(spec.min_frames_per_symbol, spec.max_frames_per_symbol);
      const auto hot = static_cast<std::size_t>(sym - 'a');
      for (std::size_t i = 0; i < run; ++i) {
        std::vector<double> frame(spec.alphabet_size, 0.0);
        frame[hot] = 1.0;
        for (double& v : frame) v += spec.noise * gaussian(rng);
        frames.push_back(std::move(frame));
      }
    }

    FeatureMatrix feat;
    feat.utt_id = id_prefix + std::to_string(n);
    feat.values = Tensor2D(frames.size(), spec.alphabet_size);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      for (std::size_t k = 0; k < spec.alphabet_size; ++k) feat.values(t, k) = frames[t][k];
    }
    corpus.features.push_back(std::move(feat));
    corpus.transcripts.push_back({id_prefix + std::to_string(n), text});
  }
  return corpus;
}

}  // namespace hctc::data
