// hctc: hierarchical multitask CTC toolkit.
//
// Subcommands cover the whole pipeline: synthetic data generation, feature
// conversion, BPE unit construction, multitask CTC training, greedy /
// shallow-fusion decoding, and WER scoring. Every artifact-producing run
// writes a .manifest.json recording resolved arguments, seeds, and input
// hashes; reruns from the same manifest reproduce outputs bit-exactly.
// Exit codes: 0 success, 1 usage error, 2 data/contract error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "hctc/data.hpp"
#include "hctc/decode.hpp"
#include "hctc/errors.hpp"
#include "hctc/eval.hpp"
#include "hctc/lm.hpp"
#include "hctc/model.hpp"
#include "hctc/units.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hctc;

namespace {

constexpr const char* kToolVersion = "1.0.0";

std::uint64_t hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return units::fnv1a64(bytes);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Run manifest: resolved arguments, input hashes, output paths.
class Manifest {
 public:
  explicit Manifest(std::string subcommand) {
    doc_["tool"] = "hctc";
    doc_["version"] = kToolVersion;
    doc_["subcommand"] = std::move(subcommand);
    doc_["arguments"] = json::object();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
  }
  template <typename T>
  void arg(const std::string& key, const T& value) {
    doc_["arguments"][key] = value;
  }
  void input(const std::string& path) {
    doc_["inputs"].push_back({{"path", path}, {"fnv64", hex64(hash_file(path))}});
  }
  void output(const std::string& path) { doc_["outputs"].push_back(path); }
  void write(const std::string& primary_output) const {
    std::ofstream f(primary_output + ".manifest.json");
    if (!f) throw DataError("cannot write manifest next to " + primary_output);
    f << doc_.dump(2) << '\n';
  }

 private:
  json doc_;
};

// Key-value config file: "key = value" lines, '#' comments. Command-line
// flags that were given explicitly win over config values.
std::map<std::string, std::string> read_kv_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

// "name=inventory.txt[,merges.txt]"
model::HeadResources parse_head_spec(const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("head spec must be name=inventory[,merges]: '" + spec + "'");
  }
  model::HeadResources head;
  head.name = spec.substr(0, eq);
  std::string rest = spec.substr(eq + 1);
  const std::size_t comma = rest.find(',');
  const std::string inv_path = comma == std::string::npos ? rest : rest.substr(0, comma);
  head.inventory = units::read_inventory(inv_path);
  if (comma != std::string::npos) {
    head.merges = units::read_merge_table(rest.substr(comma + 1));
  } else if (!head.inventory.character_level()) {
    throw ConfigError("head '" + head.name + "': subword inventory needs a merge table");
  }
  return head;
}

std::vector<data::FeatureMatrix> load_scp(const std::string& scp_path) {
  std::vector<data::FeatureMatrix> feats;
  for (const auto& [utt_id, path] : data::read_feature_list(scp_path)) {
    data::FeatureMatrix f = data::read_features(path);
    f.utt_id = utt_id;
    feats.push_back(std::move(f));
  }
  return feats;
}

// --- bpe ---

int run_bpe_learn(const std::string& transcripts, std::size_t ops, const std::string& merges_out,
                  const std::string& inventory_out, const std::string& char_inventory_out) {
  const auto corpus = units::read_transcripts(transcripts);
  Manifest man("bpe learn");
  man.arg("transcripts", transcripts);
  man.arg("ops", ops);
  man.input(transcripts);

  const units::MergeTable table = units::learn_bpe(corpus, ops);
  units::write_merge_table(merges_out, table);
  man.output(merges_out);
  std::cout << "learned " << table.size() << " merges";
  if (table.size() < ops) std::cout << " (stopped early: no pair repeats)";
  std::cout << "\n";

  if (!inventory_out.empty()) {
    const units::UnitInventory inv = units::build_bpe_inventory(corpus, table);
    units::write_inventory(inventory_out, inv);
    man.output(inventory_out);
    std::cout << "inventory " << inventory_out << ": " << inv.size() << " units\n";
  }
  if (!char_inventory_out.empty()) {
    const units::UnitInventory inv = units::build_char_inventory(corpus);
    units::write_inventory(char_inventory_out, inv);
    man.output(char_inventory_out);
    std::cout << "character inventory " << char_inventory_out << ": " << inv.size() << " units\n";
  }
  man.write(merges_out);
  return 0;
}

int run_bpe_apply(const std::string& transcripts, const std::string& merges_path,
                  const std::string& inventory_path, const std::string& output) {
  const auto corpus = units::read_transcripts(transcripts);
  const units::MergeTable table = units::read_merge_table(merges_path);
  const units::UnitInventory inv = units::read_inventory(inventory_path);
  std::ofstream out(output);
  if (!out) throw DataError("cannot open for writing: " + output);
  for (const auto& t : corpus) {
    const units::UnitSequence seq = units::encode_units(t.text, inv, &table);
    out << t.utt_id << '\t';
    for (std::size_t i = 0; i < seq.units.size(); ++i) {
      if (i > 0) out << ' ';
      out << inv.unit(static_cast<std::size_t>(seq.units[i]));
    }
    out << '\n';
  }
  Manifest man("bpe apply");
  man.arg("transcripts", transcripts);
  man.arg("merges", merges_path);
  man.arg("inventory", inventory_path);
  man.input(transcripts);
  man.input(merges_path);
  man.input(inventory_path);
  man.output(output);
  man.write(output);
  return 0;
}

int run_bpe_invert(const std::string& pieces_path, const std::string& output, bool char_level) {
  const auto lines = units::read_transcripts(pieces_path);
  std::ofstream out(output);
  if (!out) throw DataError("cannot open for writing: " + output);
  for (const auto& line : lines) {
    std::istringstream ss(line.text);
    std::string piece, text;
    while (ss >> piece) {
      if (char_level) {
        text += piece;
      } else if (piece.back() == units::kMarker) {
        text += piece.substr(0, piece.size() - 1);
      } else {
        text += piece;
        text += ' ';
      }
    }
    if (!text.empty() && text.back() == ' ') text.pop_back();
    out << line.utt_id << '\t' << text << '\n';
  }
  return 0;
}

// --- features ---

int run_features_convert(const std::string& input, const std::string& output, bool to_text) {
  if (to_text) {
    data::write_text_matrix(output, data::read_features(input));
  } else {
    data::write_features(output, data::read_text_matrix(input));
  }
  return 0;
}

// --- synth ---

int run_synth_generate(const data::SyntheticSpec& spec, std::size_t n_train, std::size_t n_test,
                       const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "train");
  fs::create_directories(fs::path(out_dir) / "test");

  Manifest man("synth generate");
  man.arg("alphabet", spec.alphabet_size);
  man.arg("lexicon", spec.lexicon_size);
  man.arg("noise", spec.noise);
  man.arg("seed", spec.seed);
  man.arg("train", n_train);
  man.arg("test", n_test);

  // One generation stream so both splits share the lexicon; the split is a
  // prefix/suffix cut.
  const data::SyntheticCorpus joint = data::generate_synthetic(spec, n_train + n_test, "utt_");
  const auto emit = [&](const std::string& split, std::size_t lo, std::size_t hi) {
    std::ofstream scp(out_dir + "/" + split + ".scp");
    std::vector<units::Transcript> refs;
    for (std::size_t i = lo; i < hi; ++i) {
      const data::FeatureMatrix& feat = joint.features[i];
      const std::string path = out_dir + "/" + split + "/" + feat.utt_id + ".feat";
      data::write_features(path, feat);
      scp << feat.utt_id << '\t' << path << '\n';
      refs.push_back(joint.transcripts[i]);
    }
    units::write_transcripts(out_dir + "/" + split + ".ref", refs);
    man.output(out_dir + "/" + split + ".scp");
    man.output(out_dir + "/" + split + ".ref");
  };
  emit("train", 0, n_train);
  emit("test", n_train, n_train + n_test);
  man.write(out_dir + "/synth");
  std::cout << "wrote " << n_train << " train / " << n_test << " test utterances under " << out_dir
            << "\n";
  return 0;
}

// --- train ---

struct TrainArgs {
  std::string topology = "hmtl";
  std::vector<std::string> head_specs;
  std::string train_scp;
  std::string transcripts;
  std::string output;
  std::string config_path;
  std::uint32_t encoder_layers = 2;
  std::uint32_t hidden_dim = 320;
  std::uint32_t proj_dim = 340;
  std::uint32_t head_hidden_dim = 0;
  std::uint64_t seed = 1;
  double learning_rate = 0.05;
  double grad_clip = 5.0;
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
  bool subsample = false;
  std::string weights_csv;
};

int run_train(const TrainArgs& args) {
  std::vector<model::HeadResources> heads;
  for (const auto& spec : args.head_specs) heads.push_back(parse_head_spec(spec));
  if (heads.empty()) throw ConfigError("train: at least one --head is required");

  const auto corpus = units::read_transcripts(args.transcripts);
  const auto features = load_scp(args.train_scp);
  if (features.empty()) throw DataError("train: feature list is empty");

  model::TopologyConfig cfg;
  cfg.kind = model::topology_from_name(args.topology);
  cfg.encoder_layers = args.encoder_layers;
  cfg.hidden_dim = args.hidden_dim;
  cfg.proj_dim = args.proj_dim;
  cfg.head_hidden_dim = args.head_hidden_dim;
  cfg.seed = args.seed;
  cfg.learning_rate = args.learning_rate;
  cfg.grad_clip = args.grad_clip;
  cfg.subsample = args.subsample;
  const std::size_t raw_dim = features[0].num_dims();
  cfg.feature_dim = static_cast<std::uint32_t>(args.subsample ? 3 * raw_dim : raw_dim);
  for (const auto& h : heads) cfg.heads.push_back({h.name, h.name});
  if (!args.weights_csv.empty()) {
    std::istringstream ss(args.weights_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) cfg.head_weights.push_back(std::stod(tok));
  }

  model::ModelGraph graph = model::build_model(cfg, model::inventory_map(heads));
  std::cout << "topology " << model::topology_name(cfg.kind) << ", " << graph.param_count()
            << " parameters\n";

  const auto dataset = model::prepare_training_set(features, corpus, heads, args.subsample);
  std::cout << "training on " << dataset.size() << " sequences ("
            << (args.subsample ? "3-fold subsampled" : "no augmentation") << ")\n";

  model::TrainRunConfig run;
  run.epochs = args.epochs;
  run.batch_size = args.batch_size;

  const std::size_t steps_per_epoch = (dataset.size() + run.batch_size - 1) / run.batch_size;
  const model::TrainHistory history = model::train_model(graph, dataset, run);
  for (std::size_t epoch = 0; epoch < run.epochs; ++epoch) {
    double mean = 0.0;
    std::size_t count = 0;
    for (std::size_t s = epoch * steps_per_epoch;
         s < std::min(history.steps.size(), (epoch + 1) * steps_per_epoch); ++s) {
      mean += history.steps[s].combined;
      ++count;
    }
    if (count > 0) {
      std::cout << "epoch " << (epoch + 1) << ": mean combined loss " << (mean / double(count))
                << "\n";
    }
  }
  if (history.total_skipped > 0) {
    std::cout << "skipped " << history.total_skipped << " infeasible utterance visits\n";
  }

  model::save_checkpoint(args.output, graph);
  Manifest man("train");
  man.arg("topology", args.topology);
  man.arg("heads", args.head_specs);
  man.arg("encoder_layers", cfg.encoder_layers);
  man.arg("hidden_dim", cfg.hidden_dim);
  man.arg("proj_dim", cfg.proj_dim);
  man.arg("head_hidden_dim", cfg.head_hidden_dim);
  man.arg("seed", cfg.seed);
  man.arg("learning_rate", cfg.learning_rate);
  man.arg("grad_clip", cfg.grad_clip);
  man.arg("epochs", args.epochs);
  man.arg("batch_size", args.batch_size);
  man.arg("subsample", cfg.subsample);
  man.input(args.train_scp);
  man.input(args.transcripts);
  man.output(args.output);
  man.write(args.output);
  std::cout << "checkpoint written to " << args.output << "\n";
  return 0;
}

// --- lm train ---

int run_lm_train(const std::string& backend, const std::string& transcripts,
                 const std::string& inventory_path, const std::string& merges_path,
                 const std::string& output, std::size_t order, double alpha, std::size_t hidden,
                 std::size_t steps, double lr, std::uint64_t seed) {
  const units::UnitInventory inv = units::read_inventory(inventory_path);
  std::optional<units::MergeTable> merges;
  if (!merges_path.empty()) merges = units::read_merge_table(merges_path);
  if (!inv.character_level() && !merges.has_value()) {
    throw ConfigError("lm train: subword inventory needs --merges");
  }

  std::vector<units::UnitSequence> corpus;
  for (const auto& t : units::read_transcripts(transcripts)) {
    units::UnitSequence seq =
        units::encode_units(t.text, inv, merges.has_value() ? &*merges : nullptr);
    seq.utt_id = t.utt_id;
    corpus.push_back(std::move(seq));
  }

  if (backend == "ngram") {
    lm::NgramLm::train(corpus, inv, order, alpha).save(output);
  } else if (backend == "recurrent") {
    lm::RecurrentLmConfig cfg;
    cfg.hidden_dim = hidden;
    cfg.steps = steps;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    lm::LmTrainStats stats;
    const lm::RecurrentLm m = lm::RecurrentLm::train(corpus, inv, cfg, &stats);
    if (!stats.step_losses.empty()) {
      std::cout << "first step NLL " << stats.step_losses.front() << ", last step NLL "
                << stats.step_losses.back() << "\n";
    }
    m.save(output);
  } else {
    throw ConfigError("lm train: backend must be ngram or recurrent");
  }

  Manifest man("lm train");
  man.arg("backend", backend);
  man.arg("inventory", inventory_path);
  man.arg("order", order);
  man.arg("alpha", alpha);
  man.arg("hidden", hidden);
  man.arg("steps", steps);
  man.arg("seed", seed);
  man.input(transcripts);
  man.input(inventory_path);
  if (!merges_path.empty()) man.input(merges_path);
  man.output(output);
  man.write(output);
  std::cout << "LM (" << backend << ") written to " << output << "\n";
  return 0;
}

// --- decode ---

int run_decode(const std::string& model_path, const std::string& scp, const std::string& head,
               const std::string& inventory_path, const std::string& mode,
               const std::string& lm_path, std::size_t beam, double bonus, double lm_weight,
               const std::string& output, std::size_t jobs, const std::string& dump_dir) {
  const model::ModelGraph graph = model::load_checkpoint(model_path);
  const units::UnitInventory inv = units::read_inventory(inventory_path);

  std::size_t head_index = graph.cfg.heads.size();
  for (std::size_t k = 0; k < graph.cfg.heads.size(); ++k) {
    if (graph.cfg.heads[k].name == head) head_index = k;
  }
  if (head == "" && !graph.cfg.heads.empty()) head_index = graph.cfg.heads.size() - 1;
  if (head_index >= graph.cfg.heads.size()) {
    throw ConfigError("decode: checkpoint has no head named '" + head + "'");
  }
  const std::string head_name = graph.cfg.heads[head_index].name;
  if (inv.content_hash() != graph.cfg.heads[head_index].inventory_hash) {
    throw ContractViolation("decode: inventory does not match the checkpoint head '" + head_name +
                            "'");
  }

  std::unique_ptr<lm::LanguageModel> language_model;
  decode::FusionConfig fusion;
  fusion.beam_width = beam;
  fusion.bonus = bonus;
  fusion.lm_weight = lm_weight;
  if (mode == "fusion") {
    if (lm_path.empty()) throw ConfigError("decode: fusion mode needs --lm");
    language_model = lm::load_lm(lm_path);
  } else if (mode != "greedy") {
    throw ConfigError("decode: mode must be greedy or fusion");
  }

  const auto features = load_scp(scp);
  std::vector<std::string> texts(features.size());
  const auto decode_one = [&](std::size_t i) {
    const data::FeatureMatrix* feat = &features[i];
    data::FeatureMatrix phase0;
    if (graph.cfg.subsample) {
      phase0 = model::subsample_augment(*feat)[0];
      feat = &phase0;
    }
    const auto posts = model::forward_all_heads(graph, feat->as_model_input());
    const ctc::PosteriorMatrix& post = posts.at(head_name);
    if (!dump_dir.empty()) {
      data::write_posterior_text(dump_dir + "/" + features[i].utt_id + ".post", post);
    }
    units::UnitSequence seq;
    seq.utt_id = features[i].utt_id;
    seq.units = mode == "greedy"
                    ? decode::greedy_decode(post)
                    : decode::fusion_beam_search(post, *language_model, fusion, &inv).units;
    texts[i] = units::decode_units(seq, inv);
  };

  if (!dump_dir.empty()) fs::create_directories(dump_dir);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < features.size(); ++i) decode_one(i);
  } else {
    // Utterances are independent; results land in input order regardless of
    // scheduling.
    std::vector<std::thread> workers;
    std::atomic<std::size_t> cursor{0};
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&]() {
        for (std::size_t i = cursor.fetch_add(1); i < features.size(); i = cursor.fetch_add(1)) {
          decode_one(i);
        }
      });
    }
    for (auto& t : workers) t.join();
  }

  std::ofstream out(output);
  if (!out) throw DataError("cannot open for writing: " + output);
  for (std::size_t i = 0; i < features.size(); ++i) {
    out << features[i].utt_id << '\t' << texts[i] << '\n';
  }

  Manifest man("decode");
  man.arg("model", model_path);
  man.arg("head", head_name);
  man.arg("mode", mode);
  man.arg("beam", beam);
  man.arg("bonus", bonus);
  man.arg("lm_weight", lm_weight);
  man.arg("jobs", jobs);
  man.input(model_path);
  man.input(inventory_path);
  man.input(scp);
  if (!lm_path.empty()) man.input(lm_path);
  man.output(output);
  man.write(output);
  return 0;
}

// --- inspect ---

int run_inspect_checkpoint(const std::string& path) {
  const model::ModelGraph graph = model::load_checkpoint(path);
  const auto& cfg = graph.cfg;
  std::cout << "topology: " << model::topology_name(cfg.kind) << "\n"
            << "encoder_layers: " << cfg.encoder_layers << "\n"
            << "hidden_dim: " << cfg.hidden_dim << "\n"
            << "proj_dim: " << cfg.proj_dim << "\n"
            << "head_hidden_dim: " << cfg.head_width() << "\n"
            << "feature_dim: " << cfg.feature_dim << "\n"
            << "subsample: " << (cfg.subsample ? "yes" : "no") << "\n"
            << "seed: " << cfg.seed << "\n"
            << "learning_rate: " << cfg.learning_rate << "\n"
            << "grad_clip: " << cfg.grad_clip << "\n"
            << "parity_extra_layers: " << cfg.parity_extra_layers << "\n"
            << "parity_bottleneck: " << cfg.parity_bottleneck << "\n"
            << "parameters: " << graph.param_count() << "\n"
            << "heads:\n";
  for (std::size_t k = 0; k < cfg.heads.size(); ++k) {
    std::cout << "  - " << cfg.heads[k].name << ": units=" << cfg.heads[k].num_units
              << " weight=" << cfg.weight(k) << " inventory_hash=" << hex64(cfg.heads[k].inventory_hash)
              << "\n";
  }
  for (const auto& [name, t] : graph.parameter_registry()) {
    std::cout << "  " << name << " [" << t->rows << "x" << t->cols << "]\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical multitask CTC: units, training, decoding, scoring"};
  app.require_subcommand(1);

  // bpe
  auto* bpe = app.add_subcommand("bpe", "subword unit construction");
  bpe->require_subcommand(1);
  std::string bpe_transcripts, bpe_merges, bpe_inventory, bpe_char_inventory, bpe_output;
  std::size_t bpe_ops = 300;
  bool bpe_char = false;

  auto* bpe_learn = bpe->add_subcommand("learn", "learn merge operations from transcripts");
  bpe_learn->add_option("--transcripts", bpe_transcripts, "utt<TAB>text file")->required();
  bpe_learn->add_option("--ops", bpe_ops, "number of merge operations (default 300)")
      ->capture_default_str();
  bpe_learn->add_option("--merges", bpe_merges, "output merge table")->required();
  bpe_learn->add_option("--inventory", bpe_inventory, "also write the subword inventory");
  bpe_learn->add_option("--char-inventory", bpe_char_inventory,
                        "also write the space-free character inventory");

  auto* bpe_apply = bpe->add_subcommand("apply", "segment transcripts into subword pieces");
  bpe_apply->add_option("--transcripts", bpe_transcripts, "utt<TAB>text file")->required();
  bpe_apply->add_option("--merges", bpe_merges, "merge table")->required();
  bpe_apply->add_option("--inventory", bpe_inventory, "unit inventory")->required();
  bpe_apply->add_option("--output", bpe_output, "utt<TAB>pieces output")->required();

  auto* bpe_invert = bpe->add_subcommand("invert", "reconstruct text from subword pieces");
  bpe_invert->add_option("--pieces", bpe_transcripts, "utt<TAB>pieces file")->required();
  bpe_invert->add_option("--output", bpe_output, "utt<TAB>text output")->required();
  bpe_invert->add_flag("--char", bpe_char, "pieces are characters: concatenate without spaces");

  // features
  auto* features = app.add_subcommand("features", "feature file conversion");
  features->require_subcommand(1);
  std::string feat_in, feat_out;
  bool feat_to_text = false;
  auto* feat_convert = features->add_subcommand("convert", "text matrix <-> binary FEAT file");
  feat_convert->add_option("--input", feat_in, "input file")->required();
  feat_convert->add_option("--output", feat_out, "output file")->required();
  feat_convert->add_flag("--to-text", feat_to_text, "convert binary to text (default: text to binary)");

  // synth
  auto* synth = app.add_subcommand("synth", "synthetic corpus generation");
  synth->require_subcommand(1);
  data::SyntheticSpec synth_spec;
  std::size_t synth_train = 300, synth_test = 50;
  std::string synth_dir;
  auto* synth_gen = synth->add_subcommand("generate", "generate a seeded synthetic corpus");
  synth_gen->add_option("--out-dir", synth_dir, "output directory")->required();
  synth_gen->add_option("--train", synth_train, "training utterances")->capture_default_str();
  synth_gen->add_option("--test", synth_test, "test utterances")->capture_default_str();
  synth_gen->add_option("--alphabet", synth_spec.alphabet_size, "alphabet size")
      ->capture_default_str();
  synth_gen->add_option("--lexicon", synth_spec.lexicon_size, "lexicon size")
      ->capture_default_str();
  synth_gen->add_option("--noise", synth_spec.noise, "feature noise stddev")->capture_default_str();
  synth_gen->add_option("--seed", synth_spec.seed, "generation seed")->capture_default_str();
  synth_gen->add_option("--frames-min", synth_spec.min_frames_per_symbol, "min frames per symbol")
      ->capture_default_str();
  synth_gen->add_option("--frames-max", synth_spec.max_frames_per_symbol, "max frames per symbol")
      ->capture_default_str();
  synth_gen->add_option("--word-min", synth_spec.min_word_len, "min word length")
      ->capture_default_str();
  synth_gen->add_option("--word-max", synth_spec.max_word_len, "max word length")
      ->capture_default_str();
  synth_gen->add_option("--words-min", synth_spec.min_words, "min words per utterance")
      ->capture_default_str();
  synth_gen->add_option("--words-max", synth_spec.max_words, "max words per utterance")
      ->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "multitask CTC training");
  TrainArgs targs;
  train->add_option("--topology", targs.topology, "stl | bmtl | hmtl")->capture_default_str();
  train->add_option("--head", targs.head_specs,
                    "head spec name=inventory[,merges]; repeat fine-to-coarse")
      ->required();
  train->add_option("--train-scp", targs.train_scp, "utt<TAB>feature-path list")->required();
  train->add_option("--transcripts", targs.transcripts, "utt<TAB>text training transcripts")
      ->required();
  train->add_option("--output", targs.output, "checkpoint output path")->required();
  train->add_option("--config", targs.config_path,
                    "key=value config file (flags given explicitly win)");
  train->add_option("--encoder-layers", targs.encoder_layers, "shared encoder depth")
      ->capture_default_str();
  train->add_option("--hidden", targs.hidden_dim, "BiLSTM cells per direction")
      ->capture_default_str();
  train->add_option("--proj", targs.proj_dim, "projection between shared layers, 0 disables")
      ->capture_default_str();
  train->add_option("--head-hidden", targs.head_hidden_dim, "head BiLSTM width, 0 = --hidden")
      ->capture_default_str();
  train->add_option("--seed", targs.seed, "initialization and shuffle seed")->capture_default_str();
  train->add_option("--lr", targs.learning_rate, "SGD step size")->capture_default_str();
  train->add_option("--clip", targs.grad_clip, "global gradient norm cap")->capture_default_str();
  train->add_option("--epochs", targs.epochs, "training epochs")->capture_default_str();
  train->add_option("--batch", targs.batch_size, "utterances per update")->capture_default_str();
  train->add_flag("--subsample", targs.subsample,
                  "3-fold frame-rate reduction augmentation (triples the training list)");
  train->add_option("--weights", targs.weights_csv, "comma-separated per-head loss weights");

  // lm
  auto* lm_cmd = app.add_subcommand("lm", "unit language models");
  lm_cmd->require_subcommand(1);
  std::string lm_backend = "ngram", lm_transcripts, lm_inventory, lm_merges, lm_output;
  std::size_t lm_order = 3, lm_hidden = 256, lm_steps = 200;
  double lm_alpha = 0.1, lm_lr = 0.1;
  std::uint64_t lm_seed = 1;
  auto* lm_train = lm_cmd->add_subcommand("train", "train a unit LM for shallow fusion");
  lm_train->add_option("--backend", lm_backend, "ngram | recurrent")->capture_default_str();
  lm_train->add_option("--transcripts", lm_transcripts, "utt<TAB>text LM corpus")->required();
  lm_train->add_option("--inventory", lm_inventory, "unit inventory")->required();
  lm_train->add_option("--merges", lm_merges, "merge table (subword inventories)");
  lm_train->add_option("--output", lm_output, "LM checkpoint output")->required();
  lm_train->add_option("--order", lm_order, "n-gram order")->capture_default_str();
  lm_train->add_option("--alpha", lm_alpha, "add-alpha smoothing")->capture_default_str();
  lm_train->add_option("--hidden", lm_hidden, "recurrent hidden size")->capture_default_str();
  lm_train->add_option("--steps", lm_steps, "recurrent training steps")->capture_default_str();
  lm_train->add_option("--lr", lm_lr, "recurrent step size")->capture_default_str();
  lm_train->add_option("--seed", lm_seed, "recurrent init seed")->capture_default_str();

  // decode
  auto* dec = app.add_subcommand("decode", "greedy or shallow-fusion decoding");
  std::string dec_model, dec_scp, dec_head, dec_inventory, dec_mode = "greedy", dec_lm, dec_output,
              dec_dump;
  std::size_t dec_beam = 40, dec_jobs = 1;
  double dec_bonus = 1.5, dec_lm_weight = 1.0;
  dec->add_option("--model", dec_model, "model checkpoint")->required();
  dec->add_option("--scp", dec_scp, "utt<TAB>feature-path list")->required();
  dec->add_option("--head", dec_head, "head name (default: last head)");
  dec->add_option("--inventory", dec_inventory, "inventory of the decoded head")->required();
  dec->add_option("--mode", dec_mode, "greedy | fusion")->capture_default_str();
  dec->add_option("--lm", dec_lm, "LM checkpoint (fusion)");
  dec->add_option("--beam", dec_beam, "beam width (fusion)")->capture_default_str();
  dec->add_option("--bonus", dec_bonus, "insertion bonus per emitted unit (fusion)")
      ->capture_default_str();
  dec->add_option("--lm-weight", dec_lm_weight, "LM weight exponent, 1 = plain fusion")
      ->capture_default_str();
  dec->add_option("--output", dec_output, "utt<TAB>text hypotheses")->required();
  dec->add_option("--jobs", dec_jobs, "parallel utterances (default 1 for bit-exact runs)")
      ->capture_default_str();
  dec->add_option("--dump-posteriors", dec_dump, "directory for posterior debug dumps");

  // score
  auto* score = app.add_subcommand("score", "pooled corpus error rate");
  std::string score_ref, score_hyp;
  bool score_char = false;
  score->add_option("--ref", score_ref, "reference utt<TAB>text")->required();
  score->add_option("--hyp", score_hyp, "hypothesis utt<TAB>text")->required();
  score->add_flag("--char", score_char, "character granularity (spaces stripped)");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "artifact inspection");
  inspect->require_subcommand(1);
  std::string inspect_path;
  auto* inspect_ckpt = inspect->add_subcommand("checkpoint", "print checkpoint summary");
  inspect_ckpt->add_option("--path", inspect_path, "checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (bpe_learn->parsed()) {
      return run_bpe_learn(bpe_transcripts, bpe_ops, bpe_merges, bpe_inventory,
                           bpe_char_inventory);
    }
    if (bpe_apply->parsed()) {
      return run_bpe_apply(bpe_transcripts, bpe_merges, bpe_inventory, bpe_output);
    }
    if (bpe_invert->parsed()) return run_bpe_invert(bpe_transcripts, bpe_output, bpe_char);
    if (feat_convert->parsed()) return run_features_convert(feat_in, feat_out, feat_to_text);
    if (synth_gen->parsed()) {
      return run_synth_generate(synth_spec, synth_train, synth_test, synth_dir);
    }
    if (train->parsed()) {
      if (!targs.config_path.empty()) {
        const auto kv = read_kv_config(targs.config_path);
        const auto use = [&](const char* flag, const char* key, auto& slot) {
          const auto it = kv.find(key);
          if (it == kv.end() || train->count(flag) > 0) return;
          std::istringstream ss(it->second);
          ss >> slot;
        };
        use("--topology", "topology", targs.topology);
        use("--encoder-layers", "encoder_layers", targs.encoder_layers);
        use("--hidden", "hidden_dim", targs.hidden_dim);
        use("--proj", "proj_dim", targs.proj_dim);
        use("--head-hidden", "head_hidden_dim", targs.head_hidden_dim);
        use("--seed", "seed", targs.seed);
        use("--lr", "learning_rate", targs.learning_rate);
        use("--clip", "grad_clip", targs.grad_clip);
        use("--epochs", "epochs", targs.epochs);
        use("--batch", "batch_size", targs.batch_size);
        use("--weights", "head_weights", targs.weights_csv);
        if (kv.count("subsample") && train->count("--subsample") == 0) {
          targs.subsample = kv.at("subsample") == "1" || kv.at("subsample") == "true";
        }
      }
      return run_train(targs);
    }
    if (lm_train->parsed()) {
      return run_lm_train(lm_backend, lm_transcripts, lm_inventory, lm_merges, lm_output, lm_order,
                          lm_alpha, lm_hidden, lm_steps, lm_lr, lm_seed);
    }
    if (dec->parsed()) {
      return run_decode(dec_model, dec_scp, dec_head, dec_inventory, dec_mode, dec_lm, dec_beam,
                        dec_bonus, dec_lm_weight, dec_output, dec_jobs, dec_dump);
    }
    if (score->parsed()) {
      const auto breakdown = eval::score_corpus(
          score_ref, score_hyp, score_char ? eval::Granularity::kChar : eval::Granularity::kWord);
      std::cout << eval::format_report(
          breakdown, score_char ? eval::Granularity::kChar : eval::Granularity::kWord);
      return 0;
    }
    if (inspect_ckpt->parsed()) return run_inspect_checkpoint(inspect_path);
    std::cerr << "error: usage: no subcommand selected\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 2;
  }
}
