#include "hctc/model.hpp"

#include <algorithm>
#include <cmath>

#include "hctc/binio.hpp"
#include "hctc/rng.hpp"

namespace hctc::model {

namespace {

constexpr char kCkptMagic[4] = {'H', 'C', 'T', 'C'};
constexpr std::uint32_t kCkptVersion = 1;

std::size_t bilstm_params(std::size_t input, std::size_t hidden) {
  return 2 * 4 * (hidden * (input + hidden) + hidden);
}

std::size_t linear_params(std::size_t input, std::size_t output) {
  return output * input + output;
}

void validate_config(const TopologyConfig& cfg) {
  if (cfg.heads.empty()) throw ConfigError("model: at least one head is required");
  if (cfg.kind == Topology::kStl && cfg.heads.size() != 1) {
    throw ConfigError("model: STL has exactly one head");
  }
  if (cfg.kind != Topology::kStl && (cfg.parity_extra_layers > 0 || cfg.parity_bottleneck > 0)) {
    throw ConfigError("model: parity fields apply to STL only");
  }
  if (cfg.encoder_layers == 0) throw ConfigError("model: encoder needs at least one layer");
  if (cfg.hidden_dim == 0) throw ConfigError("model: hidden_dim must be positive");
  if (cfg.feature_dim == 0) throw ConfigError("model: feature_dim must be set");
  if (!cfg.head_weights.empty() && cfg.head_weights.size() != cfg.heads.size()) {
    throw ConfigError("model: head_weights count must match heads");
  }
}

}  // namespace

const char* topology_name(Topology t) {
  switch (t) {
    case Topology::kStl: return "stl";
    case Topology::kBmtl: return "bmtl";
    case Topology::kHmtl: return "hmtl";
  }
  return "?";
}

Topology topology_from_name(const std::string& name) {
  if (name == "stl") return Topology::kStl;
  if (name == "bmtl") return Topology::kBmtl;
  if (name == "hmtl") return Topology::kHmtl;
  throw ConfigError("unknown topology '" + name + "' (expected stl|bmtl|hmtl)");
}

std::size_t ModelGraph::param_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameter_registry()) n += t->size();
  return n;
}

// Canonical parameter order. tape_forward() pushes leaves in exactly this
// order; checkpoints store tensors in exactly this order.
std::vector<std::pair<std::string, Tensor2D*>> ModelGraph::parameter_registry() {
  std::vector<std::pair<std::string, Tensor2D*>> reg;
  const auto add_lstm = [&reg](const std::string& prefix, nn::LstmParams& p) {
    reg.emplace_back(prefix + ".w_input", &p.w_input);
    reg.emplace_back(prefix + ".w_hidden", &p.w_hidden);
    reg.emplace_back(prefix + ".bias", &p.bias);
  };
  const auto add_bilstm = [&](const std::string& prefix, nn::BilstmParams& p) {
    add_lstm(prefix + ".fwd", p.fwd);
    add_lstm(prefix + ".bwd", p.bwd);
  };
  const auto add_linear = [&reg](const std::string& prefix, nn::LinearParams& p) {
    reg.emplace_back(prefix + ".weight", &p.weight);
    reg.emplace_back(prefix + ".bias", &p.bias);
  };

  for (std::size_t j = 0; j < encoder.size(); ++j) {
    add_bilstm("encoder." + std::to_string(j), encoder[j]);
    if (j < encoder_proj.size()) add_linear("encoder_proj." + std::to_string(j), encoder_proj[j]);
  }
  for (std::size_t c = 0; c < cascade.size(); ++c) {
    add_bilstm("cascade." + std::to_string(c), cascade[c]);
  }
  for (std::size_t k = 0; k < heads.size(); ++k) {
    add_bilstm("head." + std::to_string(k) + ".rnn", heads[k].rnn);
    if (k == 0 && bottleneck.has_value()) add_linear("bottleneck", *bottleneck);
    add_linear("head." + std::to_string(k) + ".proj", heads[k].proj);
  }
  return reg;
}

std::vector<std::pair<std::string, const Tensor2D*>> ModelGraph::parameter_registry() const {
  auto mut = const_cast<ModelGraph*>(this)->parameter_registry();
  std::vector<std::pair<std::string, const Tensor2D*>> reg;
  reg.reserve(mut.size());
  for (auto& [name, t] : mut) reg.emplace_back(std::move(name), t);
  return reg;
}

ModelGraph build_model(const TopologyConfig& cfg,
                       const std::map<std::string, units::UnitInventory>& inventories) {
  ModelGraph m;
  m.cfg = cfg;

  // Resolve head inventories when given; checkpoints arrive pre-resolved.
  int prev_rank = -1;
  for (auto& head : m.cfg.heads) {
    const auto it = inventories.find(head.inventory_name);
    if (it != inventories.end()) {
      head.inventory_hash = it->second.content_hash();
      head.num_units = static_cast<std::uint32_t>(it->second.size());
      if (m.cfg.kind == Topology::kHmtl) {
        // Heads must run fine-to-coarse: characters first, then increasing
        // merge counts.
        const int rank = it->second.character_level() ? -1 : static_cast<int>(it->second.bpe_ops());
        if (rank < prev_rank) {
          throw ConfigError("model: HMTL heads must be ordered fine-to-coarse");
        }
        prev_rank = rank;
      }
    } else if (head.num_units == 0) {
      throw ConfigError("model: no inventory named '" + head.inventory_name + "'");
    }
    if (head.num_units < 2) throw ConfigError("model: head inventory too small");
  }
  validate_config(m.cfg);

  const std::size_t hidden = m.cfg.hidden_dim;
  const std::size_t width2 = 2 * hidden;
  const std::size_t head_h = m.cfg.head_width();
  const std::size_t cascade_layers = m.cfg.kind == Topology::kHmtl ? m.cfg.heads.size() - 1
                                     : m.cfg.kind == Topology::kStl ? m.cfg.parity_extra_layers
                                                                    : 0;

  Rng rng(m.cfg.seed);
  for (std::size_t j = 0; j < m.cfg.encoder_layers; ++j) {
    const std::size_t input = j == 0 ? m.cfg.feature_dim
                              : m.cfg.proj_dim > 0 ? m.cfg.proj_dim
                                                   : width2;
    m.encoder.push_back(nn::BilstmParams::init(input, hidden, rng));
    if (m.cfg.proj_dim > 0 && j + 1 < m.cfg.encoder_layers) {
      m.encoder_proj.push_back(nn::LinearParams::init(width2, m.cfg.proj_dim, rng));
    }
  }
  for (std::size_t c = 0; c < cascade_layers; ++c) {
    m.cascade.push_back(nn::BilstmParams::init(width2, hidden, rng));
  }
  for (std::size_t k = 0; k < m.cfg.heads.size(); ++k) {
    HeadModule head;
    head.rnn = nn::BilstmParams::init(width2, head_h, rng);
    std::size_t proj_in = 2 * head_h;
    if (k == 0 && m.cfg.kind == Topology::kStl && m.cfg.parity_bottleneck > 0) {
      m.bottleneck = nn::LinearParams::init(proj_in, m.cfg.parity_bottleneck, rng);
      proj_in = m.cfg.parity_bottleneck;
    }
    head.proj = nn::LinearParams::init(proj_in, m.cfg.heads[k].num_units, rng);
    m.heads.push_back(std::move(head));
  }
  return m;
}

std::map<std::string, ctc::PosteriorMatrix> forward_all_heads(const ModelGraph& model,
                                                              const Tensor2D& features) {
  if (features.cols == 0) throw ContractViolation("forward: empty feature sequence");
  if (features.rows != model.cfg.feature_dim) {
    throw ContractViolation("forward: feature dimension mismatch");
  }
  Tensor2D cur = features;
  for (std::size_t j = 0; j < model.encoder.size(); ++j) {
    cur = nn::bilstm_forward(model.encoder[j], cur);
    if (j < model.encoder_proj.size()) cur = nn::linear_forward(model.encoder_proj[j], cur);
  }
  std::vector<Tensor2D> taps;
  taps.push_back(std::move(cur));
  for (const auto& layer : model.cascade) {
    taps.push_back(nn::bilstm_forward(layer, taps.back()));
  }

  std::map<std::string, ctc::PosteriorMatrix> out;
  for (std::size_t k = 0; k < model.heads.size(); ++k) {
    const Tensor2D& input = model.cfg.kind == Topology::kHmtl ? taps[k]
                            : model.cfg.kind == Topology::kStl ? taps.back()
                                                               : taps[0];
    Tensor2D h = nn::bilstm_forward(model.heads[k].rnn, input);
    if (k == 0 && model.bottleneck.has_value()) h = nn::linear_forward(*model.bottleneck, h);
    const Tensor2D logits = nn::linear_forward(model.heads[k].proj, h);
    out.emplace(model.cfg.heads[k].name, ctc::PosteriorMatrix::from_logits(logits));
  }
  return out;
}

TapeForward tape_forward(GradTape& tape, const ModelGraph& model, const Tensor2D& features) {
  if (features.cols == 0) throw ContractViolation("forward: empty feature sequence");
  if (features.rows != model.cfg.feature_dim) {
    throw ContractViolation("forward: feature dimension mismatch");
  }
  TapeForward tf;
  const auto push_lstm = [&](const nn::LstmParams& p) {
    nn::LstmIds ids{tape.leaf(p.w_input), tape.leaf(p.w_hidden), tape.leaf(p.bias)};
    tf.param_ids.push_back(ids.w_input);
    tf.param_ids.push_back(ids.w_hidden);
    tf.param_ids.push_back(ids.bias);
    return ids;
  };
  const auto push_bilstm = [&](const nn::BilstmParams& p) {
    nn::BilstmIds ids;
    ids.fwd = push_lstm(p.fwd);
    ids.bwd = push_lstm(p.bwd);
    return ids;
  };
  const auto push_linear = [&](const nn::LinearParams& p) {
    nn::LinearIds ids{tape.leaf(p.weight), tape.leaf(p.bias)};
    tf.param_ids.push_back(ids.weight);
    tf.param_ids.push_back(ids.bias);
    return ids;
  };

  // Parameters are pushed in registry order; the wiring mirrors
  // forward_all_heads exactly.
  std::vector<nn::BilstmIds> enc_ids;
  std::vector<nn::LinearIds> enc_proj_ids;
  for (std::size_t j = 0; j < model.encoder.size(); ++j) {
    enc_ids.push_back(push_bilstm(model.encoder[j]));
    if (j < model.encoder_proj.size()) enc_proj_ids.push_back(push_linear(model.encoder_proj[j]));
  }
  std::vector<nn::BilstmIds> cascade_ids;
  for (const auto& layer : model.cascade) cascade_ids.push_back(push_bilstm(layer));
  std::vector<nn::BilstmIds> head_rnn_ids;
  std::vector<nn::LinearIds> head_proj_ids;
  std::optional<nn::LinearIds> bottleneck_ids;
  for (std::size_t k = 0; k < model.heads.size(); ++k) {
    head_rnn_ids.push_back(push_bilstm(model.heads[k].rnn));
    if (k == 0 && model.bottleneck.has_value()) bottleneck_ids = push_linear(*model.bottleneck);
    head_proj_ids.push_back(push_linear(model.heads[k].proj));
  }

  ValueId cur = tape.leaf(features);
  for (std::size_t j = 0; j < enc_ids.size(); ++j) {
    cur = nn::tape_bilstm(tape, enc_ids[j], cur);
    if (j < enc_proj_ids.size()) cur = nn::tape_linear(tape, enc_proj_ids[j], cur);
  }
  std::vector<ValueId> taps{cur};
  for (const auto& ids : cascade_ids) {
    taps.push_back(nn::tape_bilstm(tape, ids, taps.back()));
  }
  for (std::size_t k = 0; k < model.heads.size(); ++k) {
    const ValueId input = model.cfg.kind == Topology::kHmtl ? taps[k]
                          : model.cfg.kind == Topology::kStl ? taps.back()
                                                             : taps[0];
    ValueId h = nn::tape_bilstm(tape, head_rnn_ids[k], input);
    if (k == 0 && bottleneck_ids.has_value()) h = nn::tape_linear(tape, *bottleneck_ids, h);
    tf.head_logits.push_back(nn::tape_linear(tape, head_proj_ids[k], h));
  }
  return tf;
}

MultitaskLoss train_step(ModelGraph& model, const std::vector<TrainUtterance>& batch) {
  const std::size_t n_heads = model.heads.size();
  auto registry = model.parameter_registry();
  std::vector<Tensor2D> acc;
  acc.reserve(registry.size());
  for (const auto& [name, t] : registry) acc.emplace_back(t->rows, t->cols, 0.0);

  MultitaskLoss result;
  result.head_losses.assign(n_heads, 0.0);

  for (const auto& utt : batch) {
    if (utt.head_targets.size() != n_heads) {
      throw ContractViolation("train_step: target count does not match heads");
    }
    bool feasible = true;
    for (std::size_t h = 0; h < n_heads; ++h) {
      if (ctc::min_frames(utt.head_targets[h]) > utt.features.cols) {
        feasible = false;
        break;
      }
    }
    if (!feasible) {
      ++result.skipped;
      continue;
    }

    GradTape tape;
    const TapeForward tf = tape_forward(tape, model, utt.features);
    ValueId combined{};
    for (std::size_t h = 0; h < n_heads; ++h) {
      const ValueId loss = ctc::tape_ctc_loss(tape, tf.head_logits[h], utt.head_targets[h]);
      result.head_losses[h] += tape.value(loss)(0, 0);
      const ValueId weighted = tape.scale(loss, model.cfg.weight(h));
      combined = h == 0 ? weighted : tape.add(combined, weighted);
    }
    tape.backward(combined);
    for (std::size_t i = 0; i < registry.size(); ++i) {
      const Tensor2D& g = tape.grad(tf.param_ids[i]);
      for (std::size_t v = 0; v < g.size(); ++v) acc[i].data[v] += g.data[v];
    }
    ++result.used;
  }

  if (result.used == 0) {
    throw EmptyBatchError("train_step: every utterance in the batch was infeasible");
  }

  const double inv_n = 1.0 / static_cast<double>(result.used);
  std::vector<Tensor2D*> acc_ptrs;
  acc_ptrs.reserve(acc.size());
  for (auto& g : acc) {
    for (double& v : g.data) v *= inv_n;
    acc_ptrs.push_back(&g);
  }
  clip_global_norm(acc_ptrs, model.cfg.grad_clip);
  for (std::size_t i = 0; i < registry.size(); ++i) {
    Tensor2D* p = registry[i].second;
    for (std::size_t v = 0; v < p->size(); ++v) p->data[v] -= model.cfg.learning_rate * acc[i].data[v];
    require_finite(*p, "train_step: parameter update");
  }

  for (std::size_t h = 0; h < n_heads; ++h) {
    result.head_losses[h] *= inv_n;
    result.combined += model.cfg.weight(h) * result.head_losses[h];
  }
  return result;
}

TrainHistory train_model(ModelGraph& model, const std::vector<TrainUtterance>& dataset,
                         const TrainRunConfig& run) {
  if (dataset.empty()) throw DataError("train_model: empty dataset");
  if (run.batch_size == 0) throw ConfigError("train_model: batch_size must be positive");
  TrainHistory history;
  Rng shuffle_rng(model.cfg.seed * 0x9E3779B97F4A7C15ull + 0x1234567ull);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < run.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += run.batch_size) {
      const std::size_t end = std::min(order.size(), start + run.batch_size);
      std::vector<std::size_t> batch_idx(order.begin() + start, order.begin() + end);
      // Short utterances first within the batch.
      std::sort(batch_idx.begin(), batch_idx.end(), [&](std::size_t a, std::size_t b) {
        if (dataset[a].features.cols != dataset[b].features.cols) {
          return dataset[a].features.cols < dataset[b].features.cols;
        }
        return a < b;
      });
      std::vector<TrainUtterance> batch;
      batch.reserve(batch_idx.size());
      for (std::size_t i : batch_idx) batch.push_back(dataset[i]);
      try {
        history.steps.push_back(train_step(model, batch));
        history.total_skipped += history.steps.back().skipped;
      } catch (const EmptyBatchError&) {
        history.total_skipped += batch.size();
      }
    }
  }
  return history;
}

std::array<data::FeatureMatrix, 3> subsample_augment(const data::FeatureMatrix& feat) {
  const std::size_t frames = feat.num_frames();
  const std::size_t dims = feat.num_dims();
  if (frames == 0) throw ContractViolation("subsample_augment: empty sequence");
  std::array<data::FeatureMatrix, 3> out;
  for (std::size_t phase = 0; phase < 3; ++phase) {
    const std::size_t remaining = frames > phase ? frames - phase : 0;
    const std::size_t n_out = std::max<std::size_t>(1, (remaining + 2) / 3);
    data::FeatureMatrix& dst = out[phase];
    dst.utt_id = feat.utt_id + "#p" + std::to_string(phase);
    dst.values = Tensor2D(n_out, 3 * dims);
    for (std::size_t j = 0; j < n_out; ++j) {
      for (std::size_t part = 0; part < 3; ++part) {
        std::size_t src = phase + 3 * j + part;
        if (src >= frames) src = frames - 1;  // repeat the boundary frame
        for (std::size_t k = 0; k < dims; ++k) {
          dst.values(j, part * dims + k) = feat.values(src, k);
        }
      }
    }
  }
  return out;
}

std::map<std::string, units::UnitInventory> inventory_map(const std::vector<HeadResources>& heads) {
  std::map<std::string, units::UnitInventory> map;
  for (const auto& h : heads) map.emplace(h.name, h.inventory);
  return map;
}

std::vector<TrainUtterance> prepare_training_set(const std::vector<data::FeatureMatrix>& features,
                                                 const std::vector<units::Transcript>& transcripts,
                                                 const std::vector<HeadResources>& heads,
                                                 bool subsample) {
  std::map<std::string, const units::Transcript*> by_id;
  for (const auto& t : transcripts) by_id.emplace(t.utt_id, &t);

  std::vector<TrainUtterance> out;
  for (const auto& feat : features) {
    const auto it = by_id.find(feat.utt_id);
    if (it == by_id.end()) {
      throw DataError("prepare_training_set: no transcript for utterance '" + feat.utt_id + "'");
    }
    std::vector<std::vector<int>> targets;
    targets.reserve(heads.size());
    for (const auto& head : heads) {
      const units::MergeTable* merges = head.merges.has_value() ? &*head.merges : nullptr;
      targets.push_back(units::encode_units(it->second->text, head.inventory, merges).units);
    }
    if (subsample) {
      for (const auto& phase : subsample_augment(feat)) {
        TrainUtterance utt;
        utt.utt_id = phase.utt_id;
        utt.features = phase.as_model_input();
        utt.head_targets = targets;
        out.push_back(std::move(utt));
      }
    } else {
      TrainUtterance utt;
      utt.utt_id = feat.utt_id;
      utt.features = feat.as_model_input();
      utt.head_targets = std::move(targets);
      out.push_back(std::move(utt));
    }
  }
  return out;
}

std::size_t count_params(const TopologyConfig& cfg) {
  validate_config(cfg);
  for (const auto& head : cfg.heads) {
    if (head.num_units == 0) throw ContractViolation("count_params: head sizes unresolved");
  }
  const std::size_t hidden = cfg.hidden_dim;
  const std::size_t width2 = 2 * hidden;
  const std::size_t head_h = cfg.head_width();
  std::size_t n = 0;
  for (std::size_t j = 0; j < cfg.encoder_layers; ++j) {
    const std::size_t input = j == 0 ? cfg.feature_dim : cfg.proj_dim > 0 ? cfg.proj_dim : width2;
    n += bilstm_params(input, hidden);
    if (cfg.proj_dim > 0 && j + 1 < cfg.encoder_layers) n += linear_params(width2, cfg.proj_dim);
  }
  const std::size_t cascade_layers = cfg.kind == Topology::kHmtl ? cfg.heads.size() - 1
                                     : cfg.kind == Topology::kStl ? cfg.parity_extra_layers
                                                                  : 0;
  n += cascade_layers * bilstm_params(width2, hidden);
  for (std::size_t k = 0; k < cfg.heads.size(); ++k) {
    n += bilstm_params(width2, head_h);
    std::size_t proj_in = 2 * head_h;
    if (k == 0 && cfg.kind == Topology::kStl && cfg.parity_bottleneck > 0) {
      n += linear_params(proj_in, cfg.parity_bottleneck);
      proj_in = cfg.parity_bottleneck;
    }
    n += linear_params(proj_in, cfg.heads[k].num_units);
  }
  return n;
}

TopologyConfig make_stl_parity(const TopologyConfig& mtl_cfg,
                               const std::map<std::string, units::UnitInventory>& inventories,
                               ParityReport* report) {
  TopologyConfig mtl = mtl_cfg;
  for (auto& head : mtl.heads) {
    const auto it = inventories.find(head.inventory_name);
    if (it != inventories.end()) {
      head.inventory_hash = it->second.content_hash();
      head.num_units = static_cast<std::uint32_t>(it->second.size());
    }
    if (head.num_units == 0) {
      throw ConfigError("make_stl_parity: no inventory named '" + head.inventory_name + "'");
    }
  }
  if (mtl.kind == Topology::kStl) throw ConfigError("make_stl_parity: source must be BMTL or HMTL");
  const std::size_t mtl_params = count_params(mtl);
  const std::size_t n_heads = mtl.heads.size();

  TopologyConfig stl = mtl;
  stl.kind = Topology::kStl;
  stl.heads = {mtl.heads.back()};
  stl.head_weights.clear();
  // Trunk matches the MTL path to its final head; one extra layer per
  // missing head BiLSTM (exact absorption at equal widths).
  const std::size_t mtl_cascade = mtl.kind == Topology::kHmtl ? n_heads - 1 : 0;
  stl.parity_extra_layers = static_cast<std::uint32_t>(mtl_cascade + (n_heads - 1));

  // Solve the bottleneck width that absorbs the missing head projections:
  //   M*(2Hh+1+B) - 2Hh*B = sum_{k != final} |L'_k| * (2Hh+1).
  const double two_hh = 2.0 * static_cast<double>(stl.head_width());
  double a_sum = 0.0;
  for (std::size_t k = 0; k + 1 < n_heads; ++k) a_sum += mtl.heads[k].num_units;
  const double b = mtl.heads.back().num_units;
  std::uint32_t best_m = 0;
  long long best_delta = 0;
  if (n_heads > 1) {
    const double m0 = (a_sum * (two_hh + 1.0) + two_hh * b) / (two_hh + 1.0 + b);
    const auto center = static_cast<long long>(std::llround(m0));
    bool have = false;
    for (long long m = std::max<long long>(1, center - 3); m <= center + 3; ++m) {
      stl.parity_bottleneck = static_cast<std::uint32_t>(m);
      const long long delta =
          static_cast<long long>(count_params(stl)) - static_cast<long long>(mtl_params);
      if (!have || std::llabs(delta) < std::llabs(best_delta)) {
        have = true;
        best_delta = delta;
        best_m = static_cast<std::uint32_t>(m);
      }
    }
  }
  stl.parity_bottleneck = best_m;
  const std::size_t stl_params = count_params(stl);

  if (report != nullptr) {
    report->mtl_params = mtl_params;
    report->stl_params = stl_params;
    report->delta = static_cast<long long>(stl_params) - static_cast<long long>(mtl_params);
    report->extra_layers = stl.parity_extra_layers;
    report->bottleneck = stl.parity_bottleneck;
  }
  return stl;
}

void save_checkpoint(const std::string& path, const ModelGraph& model) {
  BinaryWriter w(path);
  w.magic(kCkptMagic);
  w.u32(kCkptVersion);
  const TopologyConfig& cfg = model.cfg;
  w.str(topology_name(cfg.kind));
  w.u32(cfg.encoder_layers);
  w.u32(cfg.hidden_dim);
  w.u32(cfg.proj_dim);
  w.u32(cfg.head_hidden_dim);
  w.u32(cfg.parity_extra_layers);
  w.u32(cfg.parity_bottleneck);
  w.u32(cfg.feature_dim);
  w.u32(cfg.subsample ? 1 : 0);
  w.u64(cfg.seed);
  w.f64(cfg.learning_rate);
  w.f64(cfg.grad_clip);
  w.u32(static_cast<std::uint32_t>(cfg.heads.size()));
  for (std::size_t k = 0; k < cfg.heads.size(); ++k) {
    w.str(cfg.heads[k].name);
    w.str(cfg.heads[k].inventory_name);
    w.u64(cfg.heads[k].inventory_hash);
    w.u32(cfg.heads[k].num_units);
    w.f64(cfg.weight(k));
  }
  const auto registry = model.parameter_registry();
  w.u32(static_cast<std::uint32_t>(registry.size()));
  for (const auto& [name, t] : registry) {
    w.str(name);
    w.u64(t->rows);
    w.u64(t->cols);
    w.bytes(t->data.data(), t->data.size() * sizeof(double));
  }
  w.close();
}

ModelGraph load_checkpoint(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kCkptMagic, "checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCkptVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), r.offset());
  }
  TopologyConfig cfg;
  cfg.kind = topology_from_name(r.str());
  cfg.encoder_layers = r.u32();
  cfg.hidden_dim = r.u32();
  cfg.proj_dim = r.u32();
  cfg.head_hidden_dim = r.u32();
  cfg.parity_extra_layers = r.u32();
  cfg.parity_bottleneck = r.u32();
  cfg.feature_dim = r.u32();
  cfg.subsample = r.u32() != 0;
  cfg.seed = r.u64();
  cfg.learning_rate = r.f64();
  cfg.grad_clip = r.f64();
  const std::uint32_t n_heads = r.u32();
  for (std::uint32_t k = 0; k < n_heads; ++k) {
    HeadSpec head;
    head.name = r.str();
    head.inventory_name = r.str();
    head.inventory_hash = r.u64();
    head.num_units = r.u32();
    cfg.heads.push_back(std::move(head));
    cfg.head_weights.push_back(r.f64());
  }

  ModelGraph model = build_model(cfg, {});
  auto registry = model.parameter_registry();
  const std::uint32_t n_tensors = r.u32();
  if (n_tensors != registry.size()) {
    throw ParseError("checkpoint tensor count mismatch", r.offset());
  }
  for (auto& [name, t] : registry) {
    const std::string got = r.str();
    if (got != name) {
      throw ParseError("checkpoint tensor '" + got + "' does not match expected '" + name + "'",
                       r.offset());
    }
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows != t->rows || cols != t->cols) {
      throw ParseError("checkpoint tensor '" + name + "' has unexpected shape", r.offset());
    }
    r.bytes(t->data.data(), t->data.size() * sizeof(double));
  }
  return model;
}

}  // namespace hctc::model
