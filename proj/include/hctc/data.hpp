#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hctc/ctc.hpp"
#include "hctc/tensor.hpp"
#include "hctc/units.hpp"

namespace hctc::data {

// Time-major acoustic features: frames are rows. Stored as float32 on disk
// and widened to float64 in memory.
struct FeatureMatrix {
  std::string utt_id;
  Tensor2D values;  // T x F

  std::size_t num_frames() const { return values.rows; }
  std::size_t num_dims() const { return values.cols; }

  // Model input convention is F x T.
  Tensor2D as_model_input() const { return transpose(values); }
};

// Binary feature file: little-endian; magic "FEAT", version u32, T u32,
// F u32, then T*F float32 row-major. The utt_id lives in file lists, not in
// the file itself.
void write_features(const std::string& path, const FeatureMatrix& feat);
FeatureMatrix read_features(const std::string& path);

// Plain-text matrix (whitespace-separated floats, one frame per line);
// the documented conversion interface into the binary format.
FeatureMatrix read_text_matrix(const std::string& path);
void write_text_matrix(const std::string& path, const FeatureMatrix& feat);

// Feature list file: "utt_id<TAB>path" per line.
std::vector<std::pair<std::string, std::string>> read_feature_list(const std::string& path);

// Debug dump of a posterior matrix (one row per unit, columns are frames).
void write_posterior_text(const std::string& path, const ctc::PosteriorMatrix& post);

// Synthetic corpus: a fixed lexicon of words over a small alphabet; every
// symbol emits a run of frames around its one-hot template plus Gaussian
// noise. Fully determined by the seed.
struct SyntheticSpec {
  std::size_t alphabet_size = 8;
  std::size_t min_frames_per_symbol = 5;
  std::size_t max_frames_per_symbol = 8;
  double noise = 0.1;
  std::uint64_t seed = 1;
  std::size_t lexicon_size = 20;
  std::size_t min_word_len = 3;
  std::size_t max_word_len = 5;
  std::size_t min_words = 2;
  std::size_t max_words = 4;
};

struct SyntheticCorpus {
  std::vector<FeatureMatrix> features;
  std::vector<units::Transcript> transcripts;
  std::vector<std::string> lexicon;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::size_t n_utts,
                                   const std::string& id_prefix = "utt");

}  // namespace hctc::data
