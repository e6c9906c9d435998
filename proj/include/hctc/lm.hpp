#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hctc/binio.hpp"
#include "hctc/nn.hpp"
#include "hctc/units.hpp"

namespace hctc::lm {

// Opaque prefix state. `owner` ties a state to the model that produced it;
// advancing a foreign state is a contract violation.
struct LmState {
  std::uint64_t owner = 0;
  std::vector<int> context;    // n-gram backend: last order-1 units, -1 = BOS
  std::vector<double> recur;   // recurrent backend: h and c per layer
};

// Unit-specific language model over L (the blank is never in the support;
// the fusion layer substitutes probability 1 for it).
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual LmState start() const = 0;

  // Distribution over the inventory for the next unit. The returned vector
  // has |L'| entries; entry 0 (blank) is 0 and the rest sum to 1.
  virtual std::vector<double> next(const LmState& state) const = 0;

  virtual LmState advance(const LmState& state, int unit) const = 0;

  virtual std::uint64_t inventory_hash() const = 0;
  virtual std::size_t inventory_size() const = 0;  // |L'|
  virtual const char* backend() const = 0;
  virtual void save(const std::string& path) const = 0;

 protected:
  void check_state(const LmState& state) const;
  std::uint64_t owner_tag() const;
};

// Count-based n-gram model with add-alpha smoothing; no backoff. Exact and
// closed-form, which makes it the oracle backend for decoder tests.
class NgramLm : public LanguageModel {
 public:
  static NgramLm train(const std::vector<units::UnitSequence>& corpus,
                       const units::UnitInventory& inv, std::size_t order, double alpha);
  // All-zero counts: the smoothed distribution is uniform over L.
  static NgramLm uniform(const units::UnitInventory& inv);

  LmState start() const override;
  std::vector<double> next(const LmState& state) const override;
  LmState advance(const LmState& state, int unit) const override;
  std::uint64_t inventory_hash() const override { return inv_hash_; }
  std::size_t inventory_size() const override { return num_units_; }
  const char* backend() const override { return "ngram"; }
  void save(const std::string& path) const override;

  std::size_t order() const { return order_; }
  double alpha() const { return alpha_; }

  static NgramLm load(BinaryReader& r, std::uint64_t inv_hash, std::size_t num_units);

 private:
  friend class LanguageModel;
  std::size_t order_ = 3;
  double alpha_ = 0.1;
  std::size_t num_units_ = 0;  // |L'|
  std::uint64_t inv_hash_ = 0;
  // context (length order-1, -1 = BOS) -> per-unit counts over L.
  std::map<std::vector<int>, std::vector<double>> counts_;
};

struct RecurrentLmConfig {
  std::size_t hidden_dim = 256;  // per layer; two unidirectional layers
  std::size_t steps = 200;
  double learning_rate = 0.1;
  double grad_clip = 5.0;
  std::uint64_t seed = 1;
};

struct LmTrainStats {
  std::vector<double> step_losses;  // mean next-unit NLL per step
};

// Two-layer unidirectional LSTM over one-hot unit inputs with a learned
// start symbol, trained by gradient descent on next-unit prediction.
class RecurrentLm : public LanguageModel {
 public:
  static RecurrentLm train(const std::vector<units::UnitSequence>& corpus,
                           const units::UnitInventory& inv, const RecurrentLmConfig& cfg,
                           LmTrainStats* stats = nullptr);

  LmState start() const override;
  std::vector<double> next(const LmState& state) const override;
  LmState advance(const LmState& state, int unit) const override;
  std::uint64_t inventory_hash() const override { return inv_hash_; }
  std::size_t inventory_size() const override { return num_units_; }
  const char* backend() const override { return "recurrent"; }
  void save(const std::string& path) const override;

  static RecurrentLm load(BinaryReader& r, std::uint64_t inv_hash, std::size_t num_units);

  // Scalar NLL of one sequence with analytic parameter gradients; exposed
  // for the gradient-check tests.
  double sequence_nll(const std::vector<int>& seq, std::vector<Tensor2D>* grads) const;

  std::vector<Tensor2D*> parameters();

 private:
  friend class LanguageModel;
  std::size_t num_units_ = 0;   // |L'|
  std::size_t hidden_dim_ = 0;
  std::uint64_t inv_hash_ = 0;
  nn::LstmParams layer1_;       // input: one-hot over L plus BOS (|L'| slots, 0 = BOS)
  nn::LstmParams layer2_;
  nn::LinearParams proj_;       // hidden -> |L| (no blank row)
};

// Per-unit perplexity of a corpus under the model.
double perplexity(const LanguageModel& model, const std::vector<units::UnitSequence>& corpus);

std::unique_ptr<LanguageModel> load_lm(const std::string& path);

}  // namespace hctc::lm
