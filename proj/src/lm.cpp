#include "hctc/lm.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace hctc::lm {

namespace {

constexpr char kLmMagic[4] = {'H', 'L', 'M', '1'};
constexpr std::uint32_t kLmVersion = 1;
constexpr int kBos = -1;

void check_units(const std::vector<units::UnitSequence>& corpus, std::size_t num_units) {
  for (const auto& seq : corpus) {
    for (int u : seq.units) {
      if (u <= 0 || static_cast<std::size_t>(u) >= num_units) {
        throw ContractViolation("lm: unit index out of range (blank not allowed)");
      }
    }
  }
}

// loss = mean over columns of -log softmax(logits[:, u])[target_u]; the
// backward closure is the usual softmax-minus-one-hot.
ValueId tape_nll(GradTape& tape, ValueId logits, const std::vector<int>& target_rows) {
  const Tensor2D& lv = tape.value(logits);
  if (target_rows.size() != lv.cols) throw ContractViolation("tape_nll: target length mismatch");
  const std::size_t rows = lv.rows;
  auto soft = std::make_shared<Tensor2D>(rows, lv.cols);
  double acc = 0.0;
  std::vector<double> col(rows);
  for (std::size_t t = 0; t < lv.cols; ++t) {
    for (std::size_t k = 0; k < rows; ++k) col[k] = lv(k, t);
    const std::vector<double> ls = log_softmax(col);
    for (std::size_t k = 0; k < rows; ++k) (*soft)(k, t) = std::exp(ls[k]);
    acc -= ls[static_cast<std::size_t>(target_rows[t])];
  }
  const double inv_n = 1.0 / static_cast<double>(lv.cols);
  Tensor2D loss(1, 1);
  loss(0, 0) = acc * inv_n;
  const ValueId out = tape.alloc(std::move(loss));
  auto targets = std::make_shared<std::vector<int>>(target_rows);
  tape.record([logits, out, soft, targets, inv_n](GradTape& t) {
    const double g = t.grad(out)(0, 0) * inv_n;
    Tensor2D& gl = t.grad_mut(logits);
    for (std::size_t tt = 0; tt < gl.cols; ++tt) {
      for (std::size_t k = 0; k < gl.rows; ++k) gl(k, tt) += g * (*soft)(k, tt);
      gl(static_cast<std::size_t>((*targets)[tt]), tt) -= g;
    }
  });
  return out;
}

}  // namespace

std::uint64_t LanguageModel::owner_tag() const {
  std::uint64_t h = units::fnv1a64(backend(), inventory_hash());
  h = units::fnv1a64(std::to_string(inventory_size()), h);
  return h;
}

void LanguageModel::check_state(const LmState& state) const {
  if (state.owner != owner_tag()) {
    throw ContractViolation("lm: state belongs to a different model");
  }
}

// --- n-gram backend ---

NgramLm NgramLm::train(const std::vector<units::UnitSequence>& corpus,
                       const units::UnitInventory& inv, std::size_t order, double alpha) {
  if (corpus.empty()) throw DataError("lm_train: empty corpus");
  if (order == 0) throw ConfigError("lm_train: order must be >= 1");
  if (alpha <= 0.0) throw ConfigError("lm_train: alpha must be positive");
  check_units(corpus, inv.size());
  NgramLm m;
  m.order_ = order;
  m.alpha_ = alpha;
  m.num_units_ = inv.size();
  m.inv_hash_ = inv.content_hash();
  for (const auto& seq : corpus) {
    std::vector<int> ctx(order - 1, kBos);
    for (int u : seq.units) {
      auto& row = m.counts_[ctx];
      if (row.empty()) row.assign(m.num_units_, 0.0);
      row[static_cast<std::size_t>(u)] += 1.0;
      if (!ctx.empty()) {
        ctx.erase(ctx.begin());
        ctx.push_back(u);
      }
    }
  }
  return m;
}

NgramLm NgramLm::uniform(const units::UnitInventory& inv) {
  NgramLm m;
  m.order_ = 1;
  m.alpha_ = 1.0;
  m.num_units_ = inv.size();
  m.inv_hash_ = inv.content_hash();
  return m;
}

LmState NgramLm::start() const {
  LmState s;
  s.owner = owner_tag();
  s.context.assign(order_ - 1, kBos);
  return s;
}

std::vector<double> NgramLm::next(const LmState& state) const {
  check_state(state);
  std::vector<double> dist(num_units_, 0.0);
  const double vocab = static_cast<double>(num_units_ - 1);
  const auto it = counts_.find(state.context);
  double total = 0.0;
  if (it != counts_.end()) {
    for (std::size_t k = 1; k < num_units_; ++k) total += it->second[k];
  }
  const double denom = total + alpha_ * vocab;
  for (std::size_t k = 1; k < num_units_; ++k) {
    const double c = it != counts_.end() ? it->second[k] : 0.0;
    dist[k] = (c + alpha_) / denom;
  }
  return dist;
}

LmState NgramLm::advance(const LmState& state, int unit) const {
  check_state(state);
  if (unit <= 0 || static_cast<std::size_t>(unit) >= num_units_) {
    throw ContractViolation("lm advance: unit index out of range");
  }
  LmState s = state;
  if (!s.context.empty()) {
    s.context.erase(s.context.begin());
    s.context.push_back(unit);
  }
  return s;
}

void NgramLm::save(const std::string& path) const {
  BinaryWriter w(path);
  w.magic(kLmMagic);
  w.u32(kLmVersion);
  w.str(backend());
  w.u64(inv_hash_);
  w.u32(static_cast<std::uint32_t>(num_units_));
  w.u32(static_cast<std::uint32_t>(order_));
  w.f64(alpha_);
  w.u64(counts_.size());
  for (const auto& [ctx, row] : counts_) {
    for (int c : ctx) w.u32(static_cast<std::uint32_t>(c + 1));  // BOS stored as 0
    std::uint32_t nonzero = 0;
    for (std::size_t k = 1; k < num_units_; ++k) {
      if (row[k] != 0.0) ++nonzero;
    }
    w.u32(nonzero);
    for (std::size_t k = 1; k < num_units_; ++k) {
      if (row[k] != 0.0) {
        w.u32(static_cast<std::uint32_t>(k));
        w.f64(row[k]);
      }
    }
  }
  w.close();
}

NgramLm NgramLm::load(BinaryReader& r, std::uint64_t inv_hash, std::size_t num_units) {
  NgramLm m;
  m.inv_hash_ = inv_hash;
  m.num_units_ = num_units;
  m.order_ = r.u32();
  m.alpha_ = r.f64();
  const std::uint64_t n_ctx = r.u64();
  for (std::uint64_t i = 0; i < n_ctx; ++i) {
    std::vector<int> ctx(m.order_ - 1);
    for (auto& c : ctx) c = static_cast<int>(r.u32()) - 1;
    std::vector<double> row(num_units, 0.0);
    const std::uint32_t nonzero = r.u32();
    for (std::uint32_t j = 0; j < nonzero; ++j) {
      const std::uint32_t k = r.u32();
      if (k == 0 || k >= num_units) throw ParseError("lm counts: unit out of range", r.offset());
      row[k] = r.f64();
    }
    m.counts_.emplace(std::move(ctx), std::move(row));
  }
  return m;
}

// --- recurrent backend ---

RecurrentLm RecurrentLm::train(const std::vector<units::UnitSequence>& corpus,
                               const units::UnitInventory& inv, const RecurrentLmConfig& cfg,
                               LmTrainStats* stats) {
  if (corpus.empty()) throw DataError("lm_train: empty corpus");
  check_units(corpus, inv.size());
  RecurrentLm m;
  m.num_units_ = inv.size();
  m.hidden_dim_ = cfg.hidden_dim;
  m.inv_hash_ = inv.content_hash();
  Rng rng(cfg.seed);
  m.layer1_ = nn::LstmParams::init(m.num_units_, cfg.hidden_dim, rng);
  m.layer2_ = nn::LstmParams::init(cfg.hidden_dim, cfg.hidden_dim, rng);
  m.proj_ = nn::LinearParams::init(cfg.hidden_dim, m.num_units_ - 1, rng);

  std::size_t pick = 0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto& seq = corpus[pick % corpus.size()].units;
    ++pick;
    if (seq.empty()) continue;
    std::vector<Tensor2D> grads;
    const double loss = m.sequence_nll(seq, &grads);
    std::vector<Tensor2D*> grad_ptrs;
    grad_ptrs.reserve(grads.size());
    for (auto& g : grads) grad_ptrs.push_back(&g);
    clip_global_norm(grad_ptrs, cfg.grad_clip);
    const std::vector<Tensor2D*> params = m.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (std::size_t i = 0; i < params[p]->size(); ++i) {
        params[p]->data[i] -= cfg.learning_rate * grads[p].data[i];
      }
    }
    if (stats != nullptr) stats->step_losses.push_back(loss);
  }
  return m;
}

std::vector<Tensor2D*> RecurrentLm::parameters() {
  return {&layer1_.w_input, &layer1_.w_hidden, &layer1_.bias,
          &layer2_.w_input, &layer2_.w_hidden, &layer2_.bias,
          &proj_.weight,    &proj_.bias};
}

double RecurrentLm::sequence_nll(const std::vector<int>& seq, std::vector<Tensor2D>* grads) const {
  if (seq.empty()) throw ContractViolation("sequence_nll: empty sequence");
  const std::size_t len = seq.size();
  // Input columns: BOS (slot 0), z_1 ... z_{U-1}; targets: z_1 ... z_U.
  Tensor2D x(num_units_, len, 0.0);
  x(0, 0) = 1.0;
  std::vector<int> target_rows(len);
  for (std::size_t u = 0; u < len; ++u) {
    if (u + 1 < len) x(static_cast<std::size_t>(seq[u]), u + 1) = 1.0;
    target_rows[u] = seq[u] - 1;  // projection rows cover L only
  }

  GradTape tape;
  const nn::LstmIds l1{tape.leaf(layer1_.w_input), tape.leaf(layer1_.w_hidden),
                       tape.leaf(layer1_.bias)};
  const nn::LstmIds l2{tape.leaf(layer2_.w_input), tape.leaf(layer2_.w_hidden),
                       tape.leaf(layer2_.bias)};
  const nn::LinearIds pr{tape.leaf(proj_.weight), tape.leaf(proj_.bias)};
  const ValueId x_id = tape.leaf(std::move(x));
  const ValueId h1 = nn::tape_lstm(tape, l1, x_id, /*reverse=*/false);
  const ValueId h2 = nn::tape_lstm(tape, l2, h1, /*reverse=*/false);
  const ValueId logits = nn::tape_linear(tape, pr, h2);
  const ValueId loss = tape_nll(tape, logits, target_rows);
  const double loss_value = tape.value(loss)(0, 0);
  if (grads != nullptr) {
    tape.backward(loss);
    grads->clear();
    for (ValueId id : {l1.w_input, l1.w_hidden, l1.bias, l2.w_input, l2.w_hidden, l2.bias,
                       pr.weight, pr.bias}) {
      grads->push_back(tape.grad(id));
    }
  }
  return loss_value;
}

namespace {

// state.recur layout: [h1 | c1 | h2 | c2], hidden entries each.
void feed_one_hot(const nn::LstmParams& layer1, const nn::LstmParams& layer2,
                  std::size_t hidden, std::size_t input_dim, std::size_t hot, LmState& state) {
  std::vector<double> input(input_dim, 0.0);
  input[hot] = 1.0;
  const auto& r = state.recur;
  std::vector<double> h1(r.begin(), r.begin() + hidden);
  std::vector<double> c1(r.begin() + hidden, r.begin() + 2 * hidden);
  std::vector<double> h2(r.begin() + 2 * hidden, r.begin() + 3 * hidden);
  std::vector<double> c2(r.begin() + 3 * hidden, r.end());
  std::vector<double> h1n, c1n, h2n, c2n;
  nn::lstm_step(layer1, input, h1, c1, h1n, c1n);
  nn::lstm_step(layer2, h1n, h2, c2, h2n, c2n);
  auto out = state.recur.begin();
  out = std::copy(h1n.begin(), h1n.end(), out);
  out = std::copy(c1n.begin(), c1n.end(), out);
  out = std::copy(h2n.begin(), h2n.end(), out);
  std::copy(c2n.begin(), c2n.end(), out);
}

}  // namespace

LmState RecurrentLm::start() const {
  LmState s;
  s.owner = owner_tag();
  s.recur.assign(4 * hidden_dim_, 0.0);
  feed_one_hot(layer1_, layer2_, hidden_dim_, num_units_, 0, s);  // consume BOS
  return s;
}

std::vector<double> RecurrentLm::next(const LmState& state) const {
  check_state(state);
  std::vector<double> logits(num_units_ - 1);
  for (std::size_t r = 0; r < logits.size(); ++r) {
    double acc = proj_.bias(r, 0);
    const double* wr = proj_.weight.row_ptr(r);
    const double* h2 = state.recur.data() + 2 * hidden_dim_;
    for (std::size_t k = 0; k < hidden_dim_; ++k) acc += wr[k] * h2[k];
    logits[r] = acc;
  }
  const std::vector<double> ls = log_softmax(logits);
  std::vector<double> dist(num_units_, 0.0);
  for (std::size_t r = 0; r < ls.size(); ++r) dist[r + 1] = std::exp(ls[r]);
  return dist;
}

LmState RecurrentLm::advance(const LmState& state, int unit) const {
  check_state(state);
  if (unit <= 0 || static_cast<std::size_t>(unit) >= num_units_) {
    throw ContractViolation("lm advance: unit index out of range");
  }
  LmState out = state;
  feed_one_hot(layer1_, layer2_, hidden_dim_, num_units_, static_cast<std::size_t>(unit), out);
  return out;
}

namespace {

void write_tensor(BinaryWriter& w, const Tensor2D& t) {
  w.u64(t.rows);
  w.u64(t.cols);
  w.bytes(t.data.data(), t.data.size() * sizeof(double));
}

Tensor2D read_tensor(BinaryReader& r) {
  Tensor2D t;
  t.rows = r.u64();
  t.cols = r.u64();
  if (t.rows > (1u << 24) || t.cols > (1u << 24)) {
    throw ParseError("tensor shape overflow", r.offset());
  }
  t.data.resize(t.rows * t.cols);
  r.bytes(t.data.data(), t.data.size() * sizeof(double));
  return t;
}

}  // namespace

void RecurrentLm::save(const std::string& path) const {
  BinaryWriter w(path);
  w.magic(kLmMagic);
  w.u32(kLmVersion);
  w.str(backend());
  w.u64(inv_hash_);
  w.u32(static_cast<std::uint32_t>(num_units_));
  w.u32(static_cast<std::uint32_t>(hidden_dim_));
  for (const auto* t : {&layer1_.w_input, &layer1_.w_hidden, &layer1_.bias, &layer2_.w_input,
                        &layer2_.w_hidden, &layer2_.bias, &proj_.weight, &proj_.bias}) {
    write_tensor(w, *t);
  }
  w.close();
}

RecurrentLm RecurrentLm::load(BinaryReader& r, std::uint64_t inv_hash, std::size_t num_units) {
  RecurrentLm m;
  m.inv_hash_ = inv_hash;
  m.num_units_ = num_units;
  m.hidden_dim_ = r.u32();
  m.layer1_.input_dim = num_units;
  m.layer1_.hidden_dim = m.hidden_dim_;
  m.layer1_.w_input = read_tensor(r);
  m.layer1_.w_hidden = read_tensor(r);
  m.layer1_.bias = read_tensor(r);
  m.layer2_.input_dim = m.hidden_dim_;
  m.layer2_.hidden_dim = m.hidden_dim_;
  m.layer2_.w_input = read_tensor(r);
  m.layer2_.w_hidden = read_tensor(r);
  m.layer2_.bias = read_tensor(r);
  m.proj_.input_dim = m.hidden_dim_;
  m.proj_.output_dim = num_units - 1;
  m.proj_.weight = read_tensor(r);
  m.proj_.bias = read_tensor(r);
  return m;
}

double perplexity(const LanguageModel& model, const std::vector<units::UnitSequence>& corpus) {
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& seq : corpus) {
    LmState state = model.start();
    for (int u : seq.units) {
      const std::vector<double> dist = model.next(state);
      nll -= std::log(dist[static_cast<std::size_t>(u)]);
      state = model.advance(state, u);
      ++tokens;
    }
  }
  if (tokens == 0) throw DataError("perplexity: empty corpus");
  return std::exp(nll / static_cast<double>(tokens));
}

std::unique_ptr<LanguageModel> load_lm(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kLmMagic, "LM checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kLmVersion) {
    throw ParseError("unsupported LM checkpoint version " + std::to_string(version), r.offset());
  }
  const std::string backend = r.str();
  const std::uint64_t inv_hash = r.u64();
  const std::uint32_t num_units = r.u32();
  if (backend == "ngram") {
    return std::make_unique<NgramLm>(NgramLm::load(r, inv_hash, num_units));
  }
  if (backend == "recurrent") {
    return std::make_unique<RecurrentLm>(RecurrentLm::load(r, inv_hash, num_units));
  }
  throw ParseError("unknown LM backend '" + backend + "'", r.offset());
}

}  // namespace hctc::lm
