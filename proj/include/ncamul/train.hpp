#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncamul/model.hpp"
#include "ncamul/rng.hpp"
#include "ncamul/rule.hpp"

namespace ncamul {

/// Defaults reproduce the reference protocol: 30k steps, batch 256,
/// Adam at 1e-3 with cosine annealing to zero, operand widths 2..6.
struct TrainConfig {
  NetKind kind = NetKind::nca;
  int hidden = 16;
  int total_steps = 30000;
  int batch_size = 256;
  double lr0 = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::vector<int> n_range = {2, 3, 4, 5, 6};
  std::uint64_t seed = 0;
  int eval_every = 500;
  int eval_samples = 1024;
  /// End the run at the first evaluation that reaches 100% single-step
  /// accuracy. Off by default.
  bool stop_at_exact = false;
  int threads = 1;

  /// Throws std::invalid_argument describing the first violated bound.
  void validate() const;
  /// Everything except `threads`, which never affects results.
  nlohmann::json to_json() const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
RuleNet init_weights(NetKind kind, int hidden, Rng& rng);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grads;  // same layout as RuleNet::params()
};

/// Squared error of (G^t + f(G^t)) against G^(t+1), averaged over the
/// cells of each sample and then over the batch, with its exact gradient.
/// Rounding is not part of this path. Samples may have different widths.
LossAndGrad loss_and_gradients(const RuleNet& net, std::span<const ChaosSample> batch,
                               int threads = 1);

/// 0.5 * lr0 * (1 + cos(pi * step / total_steps)).
double cosine_lr(double lr0, int step, int total_steps);

struct TrainState {
  RuleNet model;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  int step = 0;
  double single_step_acc = 0.0;
  std::vector<double> loss_history;

  explicit TrainState(RuleNet net);
};

/// One bias-corrected Adam update at state.step + 1. Throws
/// std::runtime_error (naming the parameter) on a non-finite gradient.
void adam_update(TrainState& state, std::span<const double> grads, const TrainConfig& cfg);

/// Fraction of samples whose projected step matches G^(t+1) on every cell.
double single_step_accuracy(const RuleNet& net, std::span<const ChaosSample> samples,
                            int threads = 1);

/// Batch of chaos samples for a training step (or evaluation round); one
/// independently seeded generator per sample.
std::vector<ChaosSample> draw_chaos_batch(const TrainConfig& cfg, std::uint64_t stream,
                                          int step, int count);

struct MetricRow {
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;  // mean training loss since the previous row
  double single_step_acc = 0.0;
};

struct TrainResult {
  RuleNet model;
  std::vector<MetricRow> metrics;
  std::vector<double> loss_history;
  std::optional<int> first_exact_step;
  int steps_run = 0;
  double final_acc = 0.0;

  bool reached_exact() const { return first_exact_step.has_value(); }
};

/// Chaos training. Calls on_eval (if set) after each evaluation.
TrainResult train(const TrainConfig& cfg,
                  const std::function<void(const MetricRow&)>& on_eval = {});

/// step,lr,loss,single_step_acc
std::string metrics_csv(std::span<const MetricRow> rows);

}  // namespace ncamul
