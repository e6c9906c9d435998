// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Every tolerance is pinned in code. Run directly or via
// ctest (test name "acceptance"). `--only N` runs a single criterion.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "hctc/ctc.hpp"
#include "hctc/data.hpp"
#include "hctc/decode.hpp"
#include "hctc/eval.hpp"
#include "hctc/gradcheck.hpp"
#include "hctc/lm.hpp"
#include "hctc/model.hpp"
#include "hctc/rng.hpp"
#include "hctc/units.hpp"

using namespace hctc;

namespace {

ctc::PosteriorMatrix random_posterior(std::size_t units, std::size_t frames, Rng& rng) {
  Tensor2D logits(units, frames);
  for (double& v : logits.data) v = uniform_range(rng, -2.0, 2.0);
  return ctc::PosteriorMatrix::from_logits(logits);
}

// ---------------------------------------------------------------- criterion 1
bool ctc_oracle_equivalence(std::string& detail) {
  Rng rng(1001);
  std::size_t checked = 0;
  double worst = 0.0;
  while (checked < 500) {
    const std::size_t units = 2 + uniform_int(rng, 3);   // |L'| in 2..4
    const std::size_t frames = 1 + uniform_int(rng, 8);  // T in 1..8
    std::vector<int> target(uniform_int(rng, 4));        // U in 0..3
    for (auto& z : target) z = 1 + static_cast<int>(uniform_int(rng, units - 1));
    if (ctc::min_frames(target) > frames) continue;
    const ctc::PosteriorMatrix post = random_posterior(units, frames, rng);
    const double p_fb = std::exp(-ctc::ctc_loss(post, target).loss);
    const double p_bf = ctc::brute_force_ctc(post, target);
    const double rel = std::fabs(p_fb - p_bf) / std::max(p_bf, 1e-300);
    worst = std::max(worst, rel);
    if (rel > 1e-10) {
      detail = "relative error " + std::to_string(rel) + " at instance " + std::to_string(checked);
      return false;
    }
    ++checked;
  }
  std::ostringstream os;
  os << checked << " instances, worst relative error " << worst;
  detail = os.str();
  return true;
}

// ---------------------------------------------------------------- criterion 2
bool gradient_fidelity(std::string& detail) {
  std::size_t coords = 0;
  double worst = 0.0;

  // CTC through softmax on a batch of random instances: all coordinates.
  Rng rng(2002);
  for (int inst = 0; inst < 8; ++inst) {
    const std::size_t units = 3 + uniform_int(rng, 2);
    const std::size_t frames = 4 + uniform_int(rng, 3);
    std::vector<int> target{1, 2};
    if (ctc::min_frames(target) > frames) continue;
    Tensor2D logits(units, frames);
    for (double& v : logits.data) v = uniform_range(rng, -1.5, 1.5);
    const DifferentiableFn fn = [&target](const std::vector<Tensor2D>& params,
                                          std::vector<Tensor2D>* grads) {
      GradTape tape;
      const ValueId id = tape.leaf(params[0]);
      const ValueId loss = ctc::tape_ctc_loss(tape, id, target);
      if (grads != nullptr) {
        tape.backward(loss);
        grads->assign(1, tape.grad(id));
      }
      return tape.value(loss)(0, 0);
    };
    GradCheckConfig cfg;
    cfg.max_coords = 64;
    worst = std::max(worst, grad_check(fn, {logits}, cfg));
    coords += std::min<std::size_t>(64, logits.size());
  }

  // Full HMTL toy graph: char + two BPE heads, every parameter tensor.
  data::SyntheticSpec spec;
  spec.alphabet_size = 4;
  spec.lexicon_size = 6;
  spec.min_word_len = 2;
  spec.max_word_len = 3;
  spec.min_words = 1;
  spec.max_words = 2;
  spec.min_frames_per_symbol = 3;
  spec.max_frames_per_symbol = 4;
  spec.noise = 0.1;
  spec.seed = 2003;
  const data::SyntheticCorpus synth = data::generate_synthetic(spec, 4);

  std::vector<model::HeadResources> heads;
  heads.push_back({"char", units::build_char_inventory(synth.transcripts), std::nullopt});
  const units::MergeTable m4 = units::learn_bpe(synth.transcripts, 4);
  heads.push_back({"bpe4", units::build_bpe_inventory(synth.transcripts, m4), m4});
  const units::MergeTable m8 = units::learn_bpe(synth.transcripts, 8);
  heads.push_back({"bpe8", units::build_bpe_inventory(synth.transcripts, m8), m8});

  model::TopologyConfig cfg;
  cfg.kind = model::Topology::kHmtl;
  cfg.encoder_layers = 2;
  cfg.hidden_dim = 3;
  cfg.proj_dim = 4;
  cfg.feature_dim = 4;
  cfg.seed = 7;
  for (const auto& h : heads) cfg.heads.push_back({h.name, h.name});
  model::ModelGraph graph = model::build_model(cfg, model::inventory_map(heads));

  const auto dataset =
      model::prepare_training_set(synth.features, synth.transcripts, heads, false);
  const model::TrainUtterance* utt = nullptr;
  for (const auto& u : dataset) {
    bool ok = true;
    for (std::size_t h = 0; h < u.head_targets.size(); ++h) {
      ok = ok && ctc::min_frames(u.head_targets[h]) <= u.features.cols;
    }
    if (ok) {
      utt = &u;
      break;
    }
  }
  if (utt == nullptr) {
    detail = "no feasible toy utterance";
    return false;
  }

  std::vector<Tensor2D> values;
  for (const auto& [name, t] : graph.parameter_registry()) values.push_back(*t);
  const DifferentiableFn hmtl_fn = [&graph, utt](const std::vector<Tensor2D>& vals,
                                                 std::vector<Tensor2D>* grads) {
    auto registry = graph.parameter_registry();
    for (std::size_t i = 0; i < registry.size(); ++i) *registry[i].second = vals[i];
    GradTape tape;
    const model::TapeForward tf = model::tape_forward(tape, graph, utt->features);
    ValueId combined{};
    for (std::size_t h = 0; h < tf.head_logits.size(); ++h) {
      const ValueId l = ctc::tape_ctc_loss(tape, tf.head_logits[h], utt->head_targets[h]);
      combined = h == 0 ? l : tape.add(combined, l);
    }
    if (grads != nullptr) {
      tape.backward(combined);
      grads->clear();
      for (const ValueId id : tf.param_ids) grads->push_back(tape.grad(id));
    }
    return tape.value(combined)(0, 0);
  };
  GradCheckConfig hcfg;
  hcfg.max_coords = 6;
  hcfg.epsilon = 1e-5;
  worst = std::max(worst, grad_check(hmtl_fn, values, hcfg));
  for (const auto& v : values) coords += std::min<std::size_t>(6, v.size());

  std::ostringstream os;
  os << coords << " coordinates sampled, max relative error " << worst;
  detail = os.str();
  return coords >= 200 && worst < 1e-5;
}

// ---------------------------------------------------------------- criterion 3
bool decoder_oracle_equivalence(std::string& detail) {
  Rng rng(3003);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t labels = 1 + uniform_int(rng, 3);
    const std::size_t frames = 1 + uniform_int(rng, 5);
    std::vector<std::string> strings{"<blank>"};
    for (std::size_t i = 0; i < labels; ++i) strings.emplace_back(1, char('a' + i));
    const units::UnitInventory inv(strings, true, 0);

    std::vector<units::UnitSequence> corpus;
    for (int s = 0; s < 6; ++s) {
      units::UnitSequence seq;
      seq.utt_id = std::to_string(s);
      const std::size_t len = 1 + uniform_int(rng, 4);
      for (std::size_t j = 0; j < len; ++j) {
        seq.units.push_back(1 + static_cast<int>(uniform_int(rng, labels)));
      }
      corpus.push_back(std::move(seq));
    }
    const lm::NgramLm ngram = lm::NgramLm::train(corpus, inv, 3, 0.2);
    const ctc::PosteriorMatrix post = random_posterior(labels + 1, frames, rng);

    decode::FusionConfig cfg;
    cfg.beam_width = 1 << 20;  // full beam at these sizes
    cfg.bonus = 0.5 + uniform_unit(rng) * 2.0;
    const decode::DecodeResult beam = decode::fusion_beam_search(post, ngram, cfg);
    const decode::DecodeResult oracle = decode::exhaustive_fusion_oracle(post, ngram, cfg.bonus);
    const double err = std::fabs(beam.log_score - oracle.log_score);
    worst = std::max(worst, err);
    if (beam.units != oracle.units || err > 1e-9) {
      detail = "disagreement at instance " + std::to_string(inst) + ", score gap " +
               std::to_string(err);
      return false;
    }
  }
  std::ostringstream os;
  os << "50 instances, worst |log score gap| " << worst;
  detail = os.str();
  return true;
}

// ---------------------------------------------------------------- criterion 4
bool bpe_properties(std::string& detail) {
  // 10k-word toy corpus from a fixed lexicon over twelve characters.
  Rng rng(4004);
  std::vector<std::string> lexicon;
  while (lexicon.size() < 300) {
    std::string w;
    const std::size_t len = 2 + uniform_int(rng, 5);
    for (std::size_t i = 0; i < len; ++i) w += char('a' + uniform_int(rng, 12));
    lexicon.push_back(std::move(w));
  }
  std::vector<units::Transcript> corpus;
  std::size_t total_words = 0;
  while (total_words < 10000) {
    std::string text;
    const std::size_t n = 4 + uniform_int(rng, 5);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) text += ' ';
      text += lexicon[uniform_int(rng, lexicon.size())];
      ++total_words;
    }
    corpus.push_back({"utt" + std::to_string(corpus.size()), std::move(text)});
  }

  const units::MergeTable all = units::learn_bpe(corpus, 300);
  if (all.size() < 300) {
    detail = "corpus too small for 300 merges (" + std::to_string(all.size()) + ")";
    return false;
  }
  const std::size_t base = units::build_bpe_inventory(corpus, units::MergeTable{}).size() - 1;

  std::set<std::string> distinct_words;
  for (const auto& t : corpus) {
    std::istringstream ss(t.text);
    std::string w;
    while (ss >> w) distinct_words.insert(w);
  }

  double prev_mean = 1e18;
  for (const std::size_t ops : {std::size_t{0}, std::size_t{50}, std::size_t{300}}) {
    units::MergeTable table;
    table.ops.assign(all.ops.begin(), all.ops.begin() + ops);
    const units::UnitInventory inv = units::build_bpe_inventory(corpus, table);
    if (inv.size() != base + ops + 1) {
      detail = "inventory size " + std::to_string(inv.size()) + " != base+ops+1 at ops " +
               std::to_string(ops);
      return false;
    }
    std::size_t pieces = 0;
    for (const auto& word : distinct_words) {
      const units::UnitSequence seq = units::encode_subwords(word, table, inv);
      if (units::decode_units(seq, inv) != word) {
        detail = "round trip failed for '" + word + "' at ops " + std::to_string(ops);
        return false;
      }
      pieces += seq.units.size();
    }
    const double mean = double(pieces) / double(distinct_words.size());
    if (mean > prev_mean + 1e-12) {
      detail = "mean units per word increased at ops " + std::to_string(ops);
      return false;
    }
    prev_mean = mean;
  }
  std::ostringstream os;
  os << distinct_words.size() << " distinct words (" << total_words
     << " tokens), base " << base << ", final mean units/word " << prev_mean;
  detail = os.str();
  return true;
}

// ---------------------------------------------------------------- criterion 5
bool squash_and_greedy(std::string& detail) {
  const int A = 1, B = 2, blank = 0;
  if (ctc::squash({A, A, blank, A, A, A, B, B}) != std::vector<int>{A, A, B}) {
    detail = "squash worked example failed";
    return false;
  }
  Rng rng(5005);
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t units = 2 + uniform_int(rng, 5);
    const std::size_t frames = 1 + uniform_int(rng, 11);
    const ctc::PosteriorMatrix post = random_posterior(units, frames, rng);
    std::vector<int> path;
    for (std::size_t t = 0; t < frames; ++t) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < units; ++k) {
        if (post.log_probs(k, t) > post.log_probs(best, t)) best = k;
      }
      path.push_back(static_cast<int>(best));
    }
    if (decode::greedy_decode(post) != ctc::squash(path)) {
      detail = "greedy != squash(argmax) at instance " + std::to_string(inst);
      return false;
    }
  }
  detail = "worked example and 1000 random posteriors";
  return true;
}

// ---------------------------------------------------------------- criterion 6
bool topology_structure(std::string& detail) {
  // Four-head HMTL tap locality.
  std::vector<units::Transcript> corpus{
      {"p0", "abc def ghi jkl mno abc def ab cd"},
      {"p1", "ghi jkl mno abc abc def def men on"},
      {"p2", "abcdef ghijkl mno mno abc klm no"},
  };
  std::vector<model::HeadResources> heads;
  heads.push_back({"char", units::build_char_inventory(corpus), std::nullopt});
  for (const std::size_t ops : {std::size_t{4}, std::size_t{8}, std::size_t{12}}) {
    const units::MergeTable m = units::learn_bpe(corpus, ops);
    heads.push_back(
        {"bpe" + std::to_string(ops), units::build_bpe_inventory(corpus, m), m});
  }
  model::TopologyConfig cfg;
  cfg.kind = model::Topology::kHmtl;
  cfg.encoder_layers = 2;
  cfg.hidden_dim = 4;
  cfg.proj_dim = 5;
  cfg.feature_dim = 6;
  cfg.seed = 66;
  for (const auto& h : heads) cfg.heads.push_back({h.name, h.name});
  const model::ModelGraph base = model::build_model(cfg, model::inventory_map(heads));
  if (base.cascade.size() != 3 || base.heads.size() != 4) {
    detail = "unexpected four-head structure";
    return false;
  }

  Rng rng(6006);
  Tensor2D x(6, 9);
  for (double& v : x.data) v = uniform_range(rng, -1.0, 1.0);
  const auto ref = model::forward_all_heads(base, x);
  for (std::size_t layer = 0; layer < base.cascade.size(); ++layer) {
    model::ModelGraph perturbed = base;
    perturbed.cascade[layer].bwd.w_hidden(1, 2) += 0.5;
    const auto posts = model::forward_all_heads(perturbed, x);
    for (std::size_t k = 0; k < base.heads.size(); ++k) {
      const std::string& name = cfg.heads[k].name;
      const bool identical = posts.at(name).log_probs.data == ref.at(name).log_probs.data;
      if (k <= layer && !identical) {
        detail = "head " + name + " changed by a perturbation above its tap";
        return false;
      }
      if (k > layer && identical) {
        detail = "head " + name + " ignored a perturbation below its tap";
        return false;
      }
    }
  }

  // Exact parameter parity for the char+subword pairing (|L'_char| = 2H).
  std::vector<model::HeadResources> pair_heads;
  pair_heads.push_back({"char", heads[0].inventory, std::nullopt});
  const units::MergeTable m300 = units::learn_bpe(corpus, 300);
  pair_heads.push_back({"s300", units::build_bpe_inventory(corpus, m300), m300});
  const std::size_t char_units = pair_heads[0].inventory.size();
  if (char_units % 2 != 0) {
    detail = "char inventory size " + std::to_string(char_units) + " is not even";
    return false;
  }
  model::TopologyConfig mtl;
  mtl.kind = model::Topology::kHmtl;
  mtl.encoder_layers = 2;
  mtl.hidden_dim = static_cast<std::uint32_t>(char_units / 2);
  mtl.proj_dim = 10;
  mtl.feature_dim = 6;
  mtl.heads = {{"char", "char"}, {"s300", "s300"}};
  model::ParityReport report;
  const model::TopologyConfig stl =
      model::make_stl_parity(mtl, model::inventory_map(pair_heads), &report);
  const model::ModelGraph stl_model = model::build_model(stl, model::inventory_map(pair_heads));
  const model::ModelGraph mtl_model = model::build_model(mtl, model::inventory_map(pair_heads));
  if (report.delta != 0 || stl_model.param_count() != mtl_model.param_count()) {
    detail = "parity delta " + std::to_string(report.delta);
    return false;
  }
  std::ostringstream os;
  os << "tap locality over 3 cascade layers; parity exact at " << mtl_model.param_count()
     << " parameters (bottleneck " << report.bottleneck << ")";
  detail = os.str();
  return true;
}

// ---------------------------------------------------------------- criterion 7
struct EndToEnd {
  enum class Split { kDev, kTest };

  data::SyntheticCorpus train, dev, test;
  std::vector<model::HeadResources> heads;
  std::vector<model::TrainUtterance> train_set;

  EndToEnd(std::uint64_t seed, std::size_t n_train, std::size_t n_test, std::size_t bpe_small,
           std::size_t bpe_large) {
    data::SyntheticSpec spec;
    spec.alphabet_size = 8;
    spec.lexicon_size = 20;
    spec.min_word_len = 3;
    spec.max_word_len = 5;
    spec.min_words = 2;
    spec.max_words = 4;
    spec.min_frames_per_symbol = 5;
    spec.max_frames_per_symbol = 8;
    spec.noise = 0.1;
    spec.seed = seed;
    // One generation call so all splits share the lexicon; the dev slice
    // (held out from training) exists to tune decoding hyperparameters.
    const std::size_t n_dev = 25;
    const data::SyntheticCorpus joint =
        data::generate_synthetic(spec, n_train + n_dev + n_test, "utt_");
    const auto slice = [&joint](std::size_t lo, std::size_t hi) {
      data::SyntheticCorpus part;
      part.features.assign(joint.features.begin() + lo, joint.features.begin() + hi);
      part.transcripts.assign(joint.transcripts.begin() + lo, joint.transcripts.begin() + hi);
      part.lexicon = joint.lexicon;
      return part;
    };
    train = slice(0, n_train);
    dev = slice(n_train, n_train + n_dev);
    test = slice(n_train + n_dev, n_train + n_dev + n_test);

    heads.push_back({"char", units::build_char_inventory(train.transcripts), std::nullopt});
    const units::MergeTable ms = units::learn_bpe(train.transcripts, bpe_small);
    heads.push_back({"bpe20", units::build_bpe_inventory(train.transcripts, ms), ms});
    const units::MergeTable ml = units::learn_bpe(train.transcripts, bpe_large);
    heads.push_back({"bpe60", units::build_bpe_inventory(train.transcripts, ml), ml});

    train_set = model::prepare_training_set(train.features, train.transcripts, heads, true);
  }

  model::TopologyConfig config(std::uint64_t seed) const {
    model::TopologyConfig cfg;
    cfg.kind = model::Topology::kHmtl;
    cfg.encoder_layers = 2;
    cfg.hidden_dim = 16;
    cfg.proj_dim = 0;
    cfg.feature_dim = 24;  // 3 x 8 after subsampling
    cfg.subsample = true;
    cfg.seed = seed;
    cfg.learning_rate = 0.15;
    cfg.grad_clip = 5.0;
    for (const auto& h : heads) cfg.heads.push_back({h.name, h.name});
    return cfg;
  }

  double wer(const model::ModelGraph& graph, const std::string& head_name,
             const lm::LanguageModel* fused, const decode::FusionConfig* fcfg,
             Split split = Split::kTest) const {
    const model::HeadResources* res = nullptr;
    for (const auto& h : heads) {
      if (h.name == head_name) res = &h;
    }
    const data::SyntheticCorpus& part = split == Split::kDev ? dev : test;
    std::vector<std::pair<std::string, std::string>> refs, hyps;
    for (std::size_t i = 0; i < part.features.size(); ++i) {
      const data::FeatureMatrix phase0 = model::subsample_augment(part.features[i])[0];
      const auto posts = model::forward_all_heads(graph, phase0.as_model_input());
      const ctc::PosteriorMatrix& post = posts.at(head_name);
      units::UnitSequence seq;
      seq.units = fused == nullptr
                      ? decode::greedy_decode(post)
                      : decode::fusion_beam_search(post, *fused, *fcfg, &res->inventory).units;
      refs.emplace_back(part.transcripts[i].utt_id, part.transcripts[i].text);
      hyps.emplace_back(part.transcripts[i].utt_id, units::decode_units(seq, res->inventory));
    }
    return eval::score_pairs(refs, hyps, eval::Granularity::kWord).rate();
  }

  // Decoding-time hyperparameter: the insertion bonus is picked on the
  // held-out dev slice, never on the test set. Near-word units want a bonus
  // around the corpus per-word entropy; the grid spans that range. Ties
  // prefer the smaller bonus.
  decode::FusionConfig tune_bonus(const model::ModelGraph& graph, const std::string& head_name,
                                  const lm::LanguageModel& fused) const {
    decode::FusionConfig cfg;
    cfg.beam_width = 40;
    double best_wer = 1e18;
    double best_bonus = 1.5;
    for (const double b : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
      cfg.bonus = b;
      const double w = wer(graph, head_name, &fused, &cfg, Split::kDev);
      if (w < best_wer - 1e-12) {
        best_wer = w;
        best_bonus = b;
      }
    }
    cfg.bonus = best_bonus;
    return cfg;
  }
};

bool synthetic_end_to_end(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  EndToEnd e2e(/*seed=*/7007, /*n_train=*/300, /*n_test=*/50, /*bpe_small=*/20, /*bpe_large=*/60);

  model::ModelGraph graph = model::build_model(e2e.config(1), model::inventory_map(e2e.heads));
  model::TrainRunConfig run;
  run.epochs = 12;
  run.batch_size = 4;
  model::train_model(graph, e2e.train_set, run);

  const double greedy_wer = e2e.wer(graph, "bpe60", nullptr, nullptr);
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  if (minutes >= 15.0) {
    detail = "training exceeded 15 minutes";
    return false;
  }
  if (greedy_wer > 0.05) {
    detail = "greedy WER " + std::to_string(100.0 * greedy_wer) + "% > 5%";
    return false;
  }

  // Matched n-gram LM fusion must not hurt.
  std::vector<units::UnitSequence> lm_corpus;
  for (const auto& t : e2e.train.transcripts) {
    units::UnitSequence seq =
        units::encode_units(t.text, e2e.heads[2].inventory, &*e2e.heads[2].merges);
    seq.utt_id = t.utt_id;
    lm_corpus.push_back(std::move(seq));
  }
  const lm::NgramLm ngram = lm::NgramLm::train(lm_corpus, e2e.heads[2].inventory, 3, 0.1);
  const decode::FusionConfig fcfg = e2e.tune_bonus(graph, "bpe60", ngram);
  const double fused_wer = e2e.wer(graph, "bpe60", &ngram, &fcfg);
  if (fused_wer > greedy_wer) {
    detail = "fusion WER " + std::to_string(100.0 * fused_wer) + "% (bonus " +
             std::to_string(fcfg.bonus) + ") exceeds greedy " + std::to_string(100.0 * greedy_wer) +
             "%";
    return false;
  }

  // Directional claim at matched parameters over four seeds on a smaller
  // training budget (undertrained on purpose, so the architectures separate).
  std::size_t hmtl_wins = 0;
  bool separated = false;  // at least one seed where the two models differ
  std::ostringstream seed_log;
  for (const std::uint64_t seed : {11ull, 22ull, 33ull, 44ull}) {
    EndToEnd small(/*seed=*/9000 + seed, /*n_train=*/150, /*n_test=*/40, 20, 60);
    model::TopologyConfig hmtl_cfg = small.config(seed);
    model::ModelGraph hmtl_model =
        model::build_model(hmtl_cfg, model::inventory_map(small.heads));
    model::ParityReport parity;
    model::TopologyConfig stl_cfg =
        model::make_stl_parity(hmtl_cfg, model::inventory_map(small.heads), &parity);
    stl_cfg.seed = seed;
    model::ModelGraph stl_model = model::build_model(stl_cfg, model::inventory_map(small.heads));

    std::vector<model::TrainUtterance> stl_set = small.train_set;
    for (auto& utt : stl_set) utt.head_targets = {utt.head_targets.back()};

    model::TrainRunConfig small_run;
    small_run.epochs = 14;
    small_run.batch_size = 4;
    model::train_model(hmtl_model, small.train_set, small_run);
    model::train_model(stl_model, stl_set, small_run);

    const double hmtl_wer = small.wer(hmtl_model, "bpe60", nullptr, nullptr);
    const double stl_wer = small.wer(stl_model, "bpe60", nullptr, nullptr);
    if (hmtl_wer <= stl_wer) ++hmtl_wins;
    if (hmtl_wer != stl_wer) separated = true;
    seed_log << " seed" << seed << ": hmtl " << 100.0 * hmtl_wer << "% vs stl "
             << 100.0 * stl_wer << "% (parity delta " << parity.delta << ");";
  }
  if (hmtl_wins < 3 || !separated) {
    detail = (separated ? "HMTL beat STL on only " + std::to_string(hmtl_wins) + "/4 seeds:"
                        : "architectures never separated:") +
             seed_log.str();
    return false;
  }

  std::ostringstream os;
  os << "greedy WER " << 100.0 * greedy_wer << "%, fused WER " << 100.0 * fused_wer << "% (bonus " << fcfg.bonus << "), "
     << hmtl_wins << "/4 seeds HMTL <= STL;" << seed_log.str();
  detail = os.str();
  return true;
}

// ---------------------------------------------------------------- criterion 8
bool augmentation_shape(std::string& detail) {
  data::FeatureMatrix feat;
  feat.utt_id = "u";
  feat.values = Tensor2D(9, 43);
  Rng rng(8008);
  for (double& v : feat.values.data) v = uniform_range(rng, -1.0, 1.0);
  const auto phases = model::subsample_augment(feat);
  for (const auto& p : phases) {
    if (p.num_frames() != 3 || p.num_dims() != 129) {
      detail = "phase shape " + std::to_string(p.num_frames()) + "x" + std::to_string(p.num_dims());
      return false;
    }
  }

  data::SyntheticSpec spec;
  spec.seed = 8008;
  const data::SyntheticCorpus corpus = data::generate_synthetic(spec, 25);
  std::vector<model::HeadResources> heads;
  heads.push_back({"char", units::build_char_inventory(corpus.transcripts), std::nullopt});
  const auto plain = model::prepare_training_set(corpus.features, corpus.transcripts, heads, false);
  const auto augmented =
      model::prepare_training_set(corpus.features, corpus.transcripts, heads, true);
  if (augmented.size() != 3 * plain.size()) {
    detail = "augmented list is " + std::to_string(augmented.size()) + ", expected 3x" +
             std::to_string(plain.size());
    return false;
  }
  detail = "three 3x129 phases; training list tripled (" + std::to_string(plain.size()) + " -> " +
           std::to_string(augmented.size()) + ")";
  return true;
}

// ---------------------------------------------------------------- criterion 9
std::size_t recursive_distance(const std::vector<std::string>& a, std::size_t i,
                               const std::vector<std::string>& b, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  const std::size_t sub = recursive_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  const std::size_t ins = recursive_distance(a, i, b, j + 1) + 1;
  const std::size_t del = recursive_distance(a, i + 1, b, j) + 1;
  return std::min(std::min(sub, ins), del);
}

bool wer_scorer(std::string& detail) {
  Rng rng(9009);
  for (int inst = 0; inst < 1000; ++inst) {
    const auto draw = [&rng]() {
      std::vector<std::string> toks(uniform_int(rng, 7));
      for (auto& t : toks) t = std::string(1, char('a' + uniform_int(rng, 3)));
      return toks;
    };
    const auto ref = draw();
    const auto hyp = draw();
    const eval::ErrorBreakdown b = eval::edit_distance(ref, hyp);
    if (b.total_errors() != recursive_distance(ref, 0, hyp, 0)) {
      detail = "distance mismatch at instance " + std::to_string(inst);
      return false;
    }
    if (b.substitutions + b.deletions > ref.size() || b.reference_length != ref.size()) {
      detail = "inconsistent breakdown at instance " + std::to_string(inst);
      return false;
    }
  }
  // Pooled arithmetic spot checks.
  const eval::ErrorBreakdown pooled = eval::score_pairs(
      {{"u1", "a b c d e f g h i"}, {"u2", "x"}}, {{"u1", "a b c d e f g h i"}, {"u2", "y"}},
      eval::Granularity::kWord);
  if (std::fabs(pooled.rate() - 0.10) > 1e-12) {
    detail = "pooled rate " + std::to_string(pooled.rate()) + " != 0.10";
    return false;
  }
  const eval::ErrorBreakdown chars =
      eval::score_pairs({{"u", "ab cd"}}, {{"u", "abcd"}}, eval::Granularity::kChar);
  if (chars.total_errors() != 0 || chars.reference_length != 4) {
    detail = "character granularity did not strip spaces";
    return false;
  }
  detail = "1000 random pairs against the recursive oracle; pooled arithmetic exact";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0) only = std::atoi(argv[i + 1]);
  }

  struct Criterion {
    int id;
    const char* name;
    std::function<bool(std::string&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "CTC oracle equivalence", ctc_oracle_equivalence},
      {2, "gradient fidelity", gradient_fidelity},
      {3, "decoder oracle equivalence", decoder_oracle_equivalence},
      {4, "BPE properties", bpe_properties},
      {5, "squash and greedy", squash_and_greedy},
      {6, "topology structure", topology_structure},
      {7, "synthetic end-to-end", synthetic_end_to_end},
      {8, "augmentation shape", augmentation_shape},
      {9, "WER scorer", wer_scorer},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %s (%.1fs) %s\n", ok ? "PASS" : "FAIL", c.id, c.name, secs,
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
