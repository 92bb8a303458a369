#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncamul/model.hpp"
#include "ncamul/rule.hpp"
#include "ncamul/train.hpp"

namespace ncamul {

/// Widest operand seen in training; sets the split and generalization factor.
inline constexpr int kTrainMaxBits = 6;

/// Any procedure that iterates a grid to its fixed point.
using Solver = std::function<Evolution(const Grid&, int max_steps)>;

Solver symbolic_solver();
/// The returned solver owns a CompiledRule and is safe to share across threads.
Solver model_solver(const RuleNet& net);

struct LengthRecord {
  int bits = 0;
  std::string split;  // "train" or "OOD"
  int samples = 0;
  int exact = 0;
  int divergences = 0;
  double exact_match_rate = 0.0;
  double mean_steps = 0.0;  // over samples that reached a fixed point
  int max_steps = 0;
  int step_cap = 0;
  std::size_t decimal_digits = 0;  // largest product seen
  double generalization_factor = 0.0;
};

struct EvalReport {
  std::string model_id;
  std::uint64_t seed = 0;
  bool exhaustive = false;
  std::vector<LengthRecord> records;

  bool all_at_least(double threshold) const;
  nlohmann::json to_json() const;
  /// bits,split,samples,accuracy,mean_steps,max_steps,decimal_digits,gen_factor
  std::string to_csv() const;
};

/// 200 pairs for n <= 16, 50 up to 256 bits, 10 beyond.
int default_samples(int bits);

struct EvalOptions {
  std::vector<int> lengths = {8, 16, 32, 64, 128, 256};
  /// Pairs per length; 0 selects default_samples(n).
  int samples = 0;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Random pairs with the top bit set, iterated to a fixed point (cap 4n+64)
/// and compared with multiply_oracle. Pair k at width n is drawn from
/// derive_seed(seed, {n, k}). Divergence and wrong fixed points are misses.
EvalReport evaluate_solver(const Solver& solver, const std::string& id, const EvalOptions& opt);
EvalReport evaluate_lengths(const RuleNet& net, const EvalOptions& opt);

/// Pointwise control; same procedure, rejects non-mlp models.
EvalReport evaluate_mlp_control(const RuleNet& mlp, const EvalOptions& opt);

/// Every pair a, b < 2^n (not only top-bit-set ones).
LengthRecord evaluate_exhaustive(const Solver& solver, int bits, int threads = 1);

/// 100% on 50 random 64-bit pairs and on 200 random 16-bit pairs.
bool generalization_success(const RuleNet& net, std::uint64_t seed = 0, int threads = 1);

struct SweepRecord {
  int hidden = 0;
  std::uint64_t seed = 0;
  std::size_t params = 0;
  bool trained_ok = false;  // reached 100% single-step accuracy
  std::optional<int> first_exact_step;
  double final_acc = 0.0;
  bool generalization_success = false;
  std::string error;  // non-empty if training threw
};

struct SweepReport {
  std::vector<SweepRecord> records;

  int successes(int hidden) const;
  int runs(int hidden) const;
  std::vector<int> hiddens() const;
  /// hidden,params,seed,trained_ok,first_exact_step,final_acc,generalization_success,error
  std::string to_csv() const;
  /// Hidden | Params | Success | Rate
  std::string summary() const;
};

/// Receives each record and its training result (null if training threw).
using SweepCallback = std::function<void(const SweepRecord&, const TrainResult*)>;

/// One training per (hidden, seed) with seeds base.seed .. base.seed+S-1;
/// everything else in `base` is shared. Training exceptions are recorded.
SweepReport run_sweep(const std::vector<int>& hidden_list, int seeds_per_hidden,
                      const TrainConfig& base, const SweepCallback& on_record = {});

}  // namespace ncamul
