#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hctc/ctc.hpp"
#include "hctc/data.hpp"
#include "hctc/nn.hpp"
#include "hctc/units.hpp"

namespace hctc::model {

enum class Topology { kStl, kBmtl, kHmtl };

const char* topology_name(Topology t);
Topology topology_from_name(const std::string& name);

struct HeadSpec {
  std::string name;            // head label, e.g. "char", "s300"
  std::string inventory_name;  // key into the inventory map
  std::uint64_t inventory_hash = 0;  // filled at build time
  std::uint32_t num_units = 0;       // |L'|, filled at build time
};

struct TopologyConfig {
  Topology kind = Topology::kStl;
  std::uint32_t encoder_layers = 2;  // shared encoder depth
  std::uint32_t hidden_dim = 320;    // H, per direction
  std::uint32_t proj_dim = 340;      // projection between shared layers; 0 = off
  std::uint32_t head_hidden_dim = 0; // per-head BiLSTM width; 0 = hidden_dim
  // STL parity knobs: projection-free trunk layers standing in for the
  // missing head BiLSTMs, and a widened final projection (an extra affine
  // of this width before the output projection).
  std::uint32_t parity_extra_layers = 0;
  std::uint32_t parity_bottleneck = 0;
  std::uint32_t feature_dim = 0;
  bool subsample = false;  // 3-fold frame-rate reduction frontend
  std::vector<HeadSpec> heads;
  std::vector<double> head_weights;  // empty = all ones
  std::uint64_t seed = 1;
  double learning_rate = 0.05;
  double grad_clip = 5.0;

  std::size_t head_width() const { return head_hidden_dim == 0 ? hidden_dim : head_hidden_dim; }
  double weight(std::size_t head) const {
    return head_weights.empty() ? 1.0 : head_weights[head];
  }
};

struct HeadModule {
  nn::BilstmParams rnn;
  nn::LinearParams proj;
};

// Shared encoder + optional cascade + per-head modules, wired per the
// configured topology. HMTL taps: head k reads trunk state e_k, where e_0 is
// the shared-encoder output and e_k the k-th cascade layer output.
class ModelGraph {
 public:
  TopologyConfig cfg;
  std::vector<nn::BilstmParams> encoder;
  std::vector<nn::LinearParams> encoder_proj;  // between shared layers
  std::vector<nn::BilstmParams> cascade;       // HMTL: heads-1; STL: parity extras
  std::optional<nn::LinearParams> bottleneck;  // STL parity widening
  std::vector<HeadModule> heads;

  std::size_t param_count() const;

  // Fixed, documented parameter order; also the checkpoint tensor order and
  // the gradient accumulation order.
  std::vector<std::pair<std::string, Tensor2D*>> parameter_registry();
  std::vector<std::pair<std::string, const Tensor2D*>> parameter_registry() const;
};

// Validates the config, resolves head inventories, and initializes all
// parameters from cfg.seed.
ModelGraph build_model(const TopologyConfig& cfg,
                       const std::map<std::string, units::UnitInventory>& inventories);

// Inference-mode forward: one posterior per head, keyed by head name.
std::map<std::string, ctc::PosteriorMatrix> forward_all_heads(const ModelGraph& model,
                                                              const Tensor2D& features);

// Training-mode forward on a tape.
struct TapeForward {
  std::vector<ValueId> param_ids;    // registry order
  std::vector<ValueId> head_logits;  // per head, |L'_h| x T
};
TapeForward tape_forward(GradTape& tape, const ModelGraph& model, const Tensor2D& features);

struct TrainUtterance {
  std::string utt_id;
  Tensor2D features;                           // F x T (model input layout)
  std::vector<std::vector<int>> head_targets;  // one per head
};

struct MultitaskLoss {
  std::vector<double> head_losses;  // mean per used utterance
  double combined = 0.0;            // weighted sum of head means
  std::size_t used = 0;
  std::size_t skipped = 0;  // infeasible for at least one head
};

// One optimizer update from a batch: per-utterance forward/backward with
// gradient accumulation in batch order, global-norm clipping, plain SGD.
// Utterances infeasible for any head are skipped and counted; a batch with
// no usable utterance is an error.
MultitaskLoss train_step(ModelGraph& model, const std::vector<TrainUtterance>& batch);

struct TrainRunConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
};

struct TrainHistory {
  std::vector<MultitaskLoss> steps;
  std::size_t total_skipped = 0;
};

// Epoch loop: seeded shuffle, batches of batch_size sorted by frame count
// within each batch.
TrainHistory train_model(ModelGraph& model, const std::vector<TrainUtterance>& dataset,
                         const TrainRunConfig& run);

// 3-fold subsampling augmentation: for phase p in {0,1,2}, consecutive frame
// triples starting at offset p are concatenated [left|middle|right] into one
// frame; incomplete triples at the edges repeat the boundary frame.
std::array<data::FeatureMatrix, 3> subsample_augment(const data::FeatureMatrix& feat);

// What a head needs to encode transcripts: its inventory and, for subword
// heads, the merge table.
struct HeadResources {
  std::string name;
  units::UnitInventory inventory;
  std::optional<units::MergeTable> merges;  // nullopt = character-level
};

std::map<std::string, units::UnitInventory> inventory_map(const std::vector<HeadResources>& heads);

// Pairs features with transcripts by utterance id and encodes one target per
// head. With subsample=true each utterance becomes its three phase variants
// (the training list triples, frame dimension also triples).
std::vector<TrainUtterance> prepare_training_set(const std::vector<data::FeatureMatrix>& features,
                                                 const std::vector<units::Transcript>& transcripts,
                                                 const std::vector<HeadResources>& heads,
                                                 bool subsample);

// Parameter count from the config alone (heads must carry num_units).
std::size_t count_params(const TopologyConfig& cfg);

struct ParityReport {
  std::size_t mtl_params = 0;
  std::size_t stl_params = 0;
  long long delta = 0;  // stl - mtl
  std::uint32_t extra_layers = 0;
  std::uint32_t bottleneck = 0;
};

// Builds the STL configuration matched in parameter count to `mtl_cfg`:
// trunk depth grows to shared + cascade + (heads-1) extra layers, and the
// final projection is widened through a bottleneck affine solved to absorb
// the non-final heads' projections. Exact whenever the solve divides evenly
// (in particular when the non-final inventory sizes sum to 2H); otherwise
// the nearest width is chosen and the report carries the residual delta.
TopologyConfig make_stl_parity(const TopologyConfig& mtl_cfg,
                               const std::map<std::string, units::UnitInventory>& inventories,
                               ParityReport* report = nullptr);

// Versioned binary checkpoint; round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelGraph& model);
ModelGraph load_checkpoint(const std::string& path);

}  // namespace hctc::model
