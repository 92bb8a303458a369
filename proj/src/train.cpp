#include "ncamul/train.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ncamul/parallel.hpp"

namespace ncamul {

namespace {

// Seed streams, so training batches and evaluation rounds never overlap.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kBatchStream = 1;
constexpr std::uint64_t kEvalStream = 2;

// Accumulates d(loss_s)/d(params) into grad and returns loss_s, the mean
// squared residual over the sample's cells.
double sample_loss_grad(const RuleNet& net, const ChaosSample& s, double* grad) {
  const Grid& g = s.state;
  const EncodedGrid x = parity_encode(g);
  const int k = net.kernel();
  const int off = (3 - k) / 2;
  const int hidden = net.hidden();
  const int ps = net.patch_size();
  const double* w2 = net.w2().data();
  const std::size_t cells = static_cast<std::size_t>(g.rows()) * g.cols();
  const double scale = 2.0 / static_cast<double>(cells);

  double* g_w1 = grad;
  double* g_b1 = grad + net.w1_size();
  double* g_w2 = g_b1 + hidden;
  double* g_b2 = g_w2 + hidden;

  std::vector<double> patch(ps);
  std::vector<double> z(hidden);
  double loss = 0.0;
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      std::size_t p = 0;
      for (int c = 0; c < EncodedGrid::kChannels; ++c)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) patch[p++] = x.at(c, i + off + ky, j + off + kx);
      const double out = respond(net, patch.data(), z.data());
      const double r = static_cast<double>(g.at(i, j)) + out - static_cast<double>(s.next.at(i, j));
      loss += r * r;
      const double d = scale * r;
      *g_b2 += d;
      for (int h = 0; h < hidden; ++h) {
        if (z[h] <= 0.0) continue;
        g_w2[h] += d * z[h];
        const double dz = d * w2[h];
        g_b1[h] += dz;
        double* gw = g_w1 + static_cast<std::size_t>(h) * ps;
        for (int q = 0; q < ps; ++q) gw[q] += dz * patch[q];
      }
    }
  }
  return loss / static_cast<double>(cells);
}

}  // namespace

void TrainConfig::validate() const {
  if (hidden < 1) throw std::invalid_argument("hidden must be >= 1");
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (n_range.empty()) throw std::invalid_argument("n_range must be non-empty");
  for (int n : n_range)
    if (n < 1) throw std::invalid_argument("n_range entries must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (eval_samples < 1) throw std::invalid_argument("eval_samples must be >= 1");
  if (!(lr0 >= 0.0)) throw std::invalid_argument("lr0 must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"kind", to_string(kind)},
          {"hidden", hidden},
          {"total_steps", total_steps},
          {"batch_size", batch_size},
          {"lr0", lr0},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"adam_eps", adam_eps},
          {"n_range", n_range},
          {"seed", seed},
          {"eval_every", eval_every},
          {"eval_samples", eval_samples},
          {"stop_at_exact", stop_at_exact}};
}

RuleNet init_weights(NetKind kind, int hidden, Rng& rng) {
  RuleNet net(kind, hidden);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(net.patch_size()));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& w : net.w1()) w = rng.uniform_open(-bound1, bound1);
  for (double& w : net.w2()) w = rng.uniform_open(-bound2, bound2);
  return net;
}

LossAndGrad loss_and_gradients(const RuleNet& net, std::span<const ChaosSample> batch,
                               int threads) {
  if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
  const std::size_t np = net.param_count();
  std::vector<double> per_grad(batch.size() * np, 0.0);
  std::vector<double> per_loss(batch.size(), 0.0);
  parallel_for(batch.size(), threads, [&](std::size_t s) {
    per_loss[s] = sample_loss_grad(net, batch[s], per_grad.data() + s * np);
  });
  LossAndGrad out;
  out.grads.assign(np, 0.0);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    out.loss += per_loss[s];
    const double* gs = per_grad.data() + s * np;
    for (std::size_t p = 0; p < np; ++p) out.grads[p] += gs[p];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (double& gp : out.grads) gp *= inv;
  return out;
}

double cosine_lr(double lr0, int step, int total_steps) {
  if (step >= total_steps) return 0.0;
  return 0.5 * lr0 * (1.0 + std::cos(M_PI * static_cast<double>(step) / total_steps));
}

TrainState::TrainState(RuleNet net)
    : model(std::move(net)), adam_m(model.param_count(), 0.0), adam_v(model.param_count(), 0.0) {}

void adam_update(TrainState& state, std::span<const double> grads, const TrainConfig& cfg) {
  auto params = state.model.params();
  if (grads.size() != params.size()) throw std::invalid_argument("adam_update: gradient size mismatch");
  for (std::size_t p = 0; p < grads.size(); ++p) {
    if (!std::isfinite(grads[p])) {
      std::ostringstream os;
      os << "adam_update: non-finite gradient at parameter " << p << " (value " << grads[p]
         << ") on step " << state.step + 1;
      throw std::runtime_error(os.str());
    }
  }
  const int step = ++state.step;
  const double lr = cosine_lr(cfg.lr0, step, cfg.total_steps);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, step);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, step);
  for (std::size_t p = 0; p < params.size(); ++p) {
    double& m = state.adam_m[p];
    double& v = state.adam_v[p];
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grads[p];
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grads[p] * grads[p];
    params[p] -= lr * (m / c1) / (std::sqrt(v / c2) + cfg.adam_eps);
  }
}

double single_step_accuracy(const RuleNet& net, std::span<const ChaosSample> samples, int threads) {
  if (samples.empty()) return 0.0;
  std::vector<std::uint8_t> ok(samples.size(), 0);
  parallel_for(samples.size(), threads, [&](std::size_t s) {
    ok[s] = nca_step(net, samples[s].state) == samples[s].next ? 1 : 0;
  });
  std::size_t hits = 0;
  for (auto v : ok) hits += v;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::vector<ChaosSample> draw_chaos_batch(const TrainConfig& cfg, std::uint64_t stream, int step,
                                          int count) {
  std::vector<ChaosSample> batch(static_cast<std::size_t>(count));
  parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
    Rng rng(derive_seed(cfg.seed, {stream, static_cast<std::uint64_t>(step), i}));
    const int n = cfg.n_range[rng.below(cfg.n_range.size())];
    batch[i] = sample_chaos_state(n, rng);
  });
  return batch;
}

TrainResult train(const TrainConfig& cfg, const std::function<void(const MetricRow&)>& on_eval) {
  cfg.validate();
  Rng init_rng(derive_seed(cfg.seed, {kInitStream}));
  TrainState state(init_weights(cfg.kind, cfg.hidden, init_rng));
  TrainResult result{state.model, {}, {}, std::nullopt, 0, 0.0};
  result.loss_history.reserve(static_cast<std::size_t>(cfg.total_steps));

  double interval_loss = 0.0;
  int interval_count = 0;
  for (int step = 1; step <= cfg.total_steps; ++step) {
    const auto batch = draw_chaos_batch(cfg, kBatchStream, step, cfg.batch_size);
    const LossAndGrad lg = loss_and_gradients(state.model, batch, cfg.threads);
    adam_update(state, lg.grads, cfg);
    result.loss_history.push_back(lg.loss);
    interval_loss += lg.loss;
    ++interval_count;

    if (step % cfg.eval_every == 0 || step == cfg.total_steps) {
      const auto probe = draw_chaos_batch(cfg, kEvalStream, step, cfg.eval_samples);
      state.single_step_acc = single_step_accuracy(state.model, probe, cfg.threads);
      MetricRow row{step, cosine_lr(cfg.lr0, step, cfg.total_steps), interval_loss / interval_count,
                    state.single_step_acc};
      result.metrics.push_back(row);
      interval_loss = 0.0;
      interval_count = 0;
      if (on_eval) on_eval(row);
      if (state.single_step_acc == 1.0 && !result.first_exact_step) result.first_exact_step = step;
      if (cfg.stop_at_exact && result.first_exact_step) {
        result.steps_run = step;
        break;
      }
    }
    result.steps_run = step;
  }
  result.model = state.model;
  result.final_acc = state.single_step_acc;
  return result;
}

std::string metrics_csv(std::span<const MetricRow> rows) {
  std::ostringstream os;
  os.precision(17);
  os << "step,lr,loss,single_step_acc\n";
  for (const auto& r : rows) os << r.step << ',' << r.lr << ',' << r.loss << ',' << r.single_step_acc << '\n';
  return os.str();
}

}  // namespace ncamul
