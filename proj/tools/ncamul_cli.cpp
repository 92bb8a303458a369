// ncamul: train, evaluate, trace and sweep the multiplication automaton.
//
// Exit codes: 0 success, 1 threshold/assertion failure, 2 usage error,
// 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ncamul/eval.hpp"
#include "ncamul/model.hpp"
#include "ncamul/parallel.hpp"
#include "ncamul/rule.hpp"
#include "ncamul/train.hpp"

using namespace ncamul;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_or_throw(const std::string& path, const std::string& text) {
  try {
    write_file_atomic(path, text);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
}

// Fails early if a long run could not write its outputs at the end.
void check_writable(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    throw IoError("output directory '" + parent.string() + "' does not exist");
}

std::string sibling(const std::string& path, const std::string& ext) {
  return std::filesystem::path(path).replace_extension(ext).string();
}

struct Shared {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
};

void add_shared(CLI::App* app, Shared& s, const std::string& out_default) {
  s.out = out_default;
  app->add_option("--seed", s.seed, "Master seed")->capture_default_str();
  app->add_option("--threads", s.threads, "Worker threads (0 = auto)")->capture_default_str();
  app->add_option("--out", s.out, "Output path")->capture_default_str();
}

void add_train_flags(CLI::App* app, TrainConfig& cfg, bool with_hidden) {
  if (with_hidden) app->add_option("--hidden", cfg.hidden, "Hidden width H")->capture_default_str();
  app->add_option("--steps", cfg.total_steps, "Training steps")->capture_default_str();
  app->add_option("--batch", cfg.batch_size, "Batch size")->capture_default_str();
  app->add_option("--lr", cfg.lr0, "Initial learning rate (cosine-annealed to 0)")->capture_default_str();
  app->add_option("--n-range", cfg.n_range, "Training operand widths")
      ->delimiter(',')
      ->capture_default_str();
  app->add_option("--eval-every", cfg.eval_every, "Steps between single-step evaluations")
      ->capture_default_str();
  app->add_option("--eval-samples", cfg.eval_samples, "Fresh chaos samples per evaluation")
      ->capture_default_str();
  app->add_flag("--stop-at-exact", cfg.stop_at_exact,
                "Stop at the first evaluation with 100% single-step accuracy");
}

RuleNet load_model(const std::string& path) {
  try {
    return load_checkpoint(path).net;
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
}

int cmd_train(TrainConfig cfg, const Shared& sh, const std::string& kind, const std::string& metrics_path,
              bool quiet) {
  cfg.kind = net_kind_from_string(kind);
  cfg.seed = sh.seed;
  cfg.threads = resolve_threads(sh.threads);
  cfg.validate();
  const std::string metrics = metrics_path.empty() ? sibling(sh.out, ".metrics.csv") : metrics_path;
  check_writable(sh.out);
  check_writable(metrics);

  const TrainResult result = train(cfg, [&](const MetricRow& row) {
    if (!quiet)
      std::printf("step %6d  lr %.3e  loss %.4e  single-step acc %.4f\n", row.step, row.lr, row.loss,
                  row.single_step_acc);
    std::fflush(stdout);
  });
  write_or_throw(sh.out, checkpoint_to_string({result.model, cfg.seed, cfg.to_json()}));
  write_or_throw(metrics, metrics_csv(result.metrics));
  std::printf("params: %zu\n", result.model.param_count());
  std::printf("final single-step accuracy: %.4f\n", result.final_acc);
  if (result.first_exact_step) std::printf("first 100%% at step: %d\n", *result.first_exact_step);
  std::printf("checkpoint: %s\nmetrics: %s\n", sh.out.c_str(), metrics.c_str());
  return kExitOk;
}

int cmd_eval(const Shared& sh, const std::string& model_path, bool symbolic, std::vector<int> bits,
             int samples, bool exhaustive, bool long_run, double threshold) {
  if (symbolic == !model_path.empty()) {
    std::cerr << "eval: exactly one of --model or --symbolic is required\n";
    return kExitUsage;
  }
  const int threads = resolve_threads(sh.threads);
  Solver solver;
  std::string id = "symbolic";
  if (symbolic) {
    solver = symbolic_solver();
  } else {
    const RuleNet net = load_model(model_path);
    solver = model_solver(net);
    id = model_id(net);
  }
  if (bits.empty()) {
    bits = exhaustive ? std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8}
                      : std::vector<int>{8, 16, 32, 64, 128, 256, 512, 1024};
    if (long_run && !exhaustive) {
      bits.push_back(2048);
      bits.push_back(4096);
    }
  }
  check_writable(sh.out);

  EvalReport report;
  if (exhaustive) {
    report.model_id = id;
    report.seed = sh.seed;
    report.exhaustive = true;
    for (int b : bits) report.records.push_back(evaluate_exhaustive(solver, b, threads));
  } else {
    report = evaluate_solver(solver, id, {bits, samples, sh.seed, threads});
  }
  write_or_throw(sh.out, report.to_json().dump(2) + "\n");
  write_or_throw(sibling(sh.out, ".csv"), report.to_csv());
  std::cout << report.to_csv();
  for (const auto& r : report.records)
    if (r.divergences) std::cerr << "bits " << r.bits << ": " << r.divergences << " divergent runs\n";
  return report.all_at_least(threshold) ? kExitOk : kExitFailure;
}

int cmd_trace(const Shared& sh, const std::string& model_path, bool symbolic, const std::string& a_dec,
              const std::string& b_dec, int n, const std::string& format, int max_steps) {
  if (symbolic == !model_path.empty()) {
    std::cerr << "trace: exactly one of --model or --symbolic is required\n";
    return kExitUsage;
  }
  if (format != "ascii" && format != "json") {
    std::cerr << "trace: --format must be ascii or json\n";
    return kExitUsage;
  }
  BitVec a, b;
  try {
    a = BitVec::from_decimal(a_dec);
    b = BitVec::from_decimal(b_dec);
  } catch (const std::exception& e) {
    std::cerr << "trace: " << e.what() << "\n";
    return kExitUsage;
  }
  if (n == 0) n = static_cast<int>(std::max(a.size(), b.size()));
  if (a.size() > static_cast<std::size_t>(n) || b.size() > static_cast<std::size_t>(n)) {
    std::cerr << "trace: operands do not fit in " << n << " bits\n";
    return kExitUsage;
  }
  const Grid g0 = outer_product_encode(a, b, n);
  const int cap = max_steps > 0 ? max_steps : default_step_cap(n);

  std::vector<Grid> frames;
  bool diverged = false;
  int steps = 0;
  try {
    if (symbolic) {
      Trajectory tr = trajectory(g0, cap);
      frames = std::move(tr.states);
      steps = tr.converged_at;
    } else {
      const CompiledRule rule(load_model(model_path));
      steps = rule.run(g0, cap, &frames).steps;
      frames.push_back(frames.back());  // the confirming application
    }
  } catch (const DivergenceError&) {
    diverged = true;
    if (symbolic) {
      // Re-run frame by frame to report the partial trajectory.
      frames = {g0};
      for (int t = 0; t < cap; ++t) frames.push_back(ground_truth_step(frames.back()));
    }
  }

  if (format == "ascii") {
    std::string text;
    for (std::size_t t = 0; t < frames.size(); ++t)
      text += "t=" + std::to_string(t) + "\n" + grid_to_ascii(frames[t]) + "\n";
    if (sh.out.empty()) {
      std::cout << text;
    } else {
      write_or_throw(sh.out, text);
    }
  } else {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : frames) arr.push_back(grid_to_json(f));
    if (sh.out.empty()) {
      std::cout << arr.dump() << "\n";
    } else {
      write_or_throw(sh.out, arr.dump() + "\n");
    }
  }

  if (diverged) {
    std::cout << "product: diverged  steps: >" << cap << "\n";
    return kExitFailure;
  }
  const Grid& last = frames.back();
  if (!is_fixed_point(last)) {
    std::cout << "product: invalid fixed point  steps: " << steps << "\n";
    return kExitFailure;
  }
  const BitVec product = decode_product(last);
  std::cout << "product: " << product.to_decimal() << "  steps: " << steps << "\n";
  return product == multiply_oracle(a, b) ? kExitOk : kExitFailure;
}

int cmd_sweep(TrainConfig cfg, const Shared& sh, const std::vector<int>& hidden, int seeds) {
  cfg.seed = sh.seed;
  cfg.threads = resolve_threads(sh.threads);
  cfg.validate();
  check_writable(sh.out);
  const SweepReport report = run_sweep(hidden, seeds, cfg, [](const SweepRecord& r, const TrainResult*) {
    std::printf("hidden %3d seed %3llu  single-step %s  generalization %s%s%s\n", r.hidden,
                static_cast<unsigned long long>(r.seed), r.trained_ok ? "ok  " : "FAIL",
                r.generalization_success ? "ok" : "FAIL", r.error.empty() ? "" : "  error: ",
                r.error.c_str());
    std::fflush(stdout);
  });
  write_or_throw(sh.out, report.to_csv());
  std::cout << "\n" << report.summary();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural cellular automaton for binary multiplication on an outer-product grid"};
  app.require_subcommand(1);

  // train
  TrainConfig train_cfg;
  Shared train_sh;
  std::string train_kind = "nca";
  std::string train_metrics;
  bool train_quiet = false;
  auto* train_cmd = app.add_subcommand("train", "Chaos-train a rule network and write a checkpoint");
  add_shared(train_cmd, train_sh, "nca.json");
  add_train_flags(train_cmd, train_cfg, true);
  train_cmd->add_option("--kind", train_kind, "Network: nca (3x3) or mlp (pointwise)")
      ->check(CLI::IsMember({"nca", "mlp"}))
      ->capture_default_str();
  train_cmd->add_option("--metrics", train_metrics, "Metrics CSV (default: <out stem>.metrics.csv)");
  train_cmd->add_flag("--quiet", train_quiet, "Do not print per-evaluation progress");

  // eval
  Shared eval_sh;
  std::string eval_model;
  bool eval_symbolic = false;
  std::vector<int> eval_bits;
  int eval_samples = 0;
  bool eval_exhaustive = false;
  bool eval_long = false;
  double eval_threshold = 1.0;
  auto* eval_cmd = app.add_subcommand("eval", "Length-generalization report (JSON + CSV)");
  add_shared(eval_cmd, eval_sh, "report.json");
  eval_cmd->add_option("--model", eval_model, "Checkpoint to evaluate");
  eval_cmd->add_flag("--symbolic", eval_symbolic, "Evaluate the hand-written rule instead of a model");
  eval_cmd->add_option("--bits", eval_bits,
                       "Operand widths (default 8,16,32,64,128,256,512,1024; 1..8 with --exhaustive)")
      ->delimiter(',');
  eval_cmd->add_option("--samples", eval_samples,
                       "Pairs per width (0 = 200 for n<=16, 50 up to 256, 10 beyond)")
      ->capture_default_str();
  eval_cmd->add_flag("--exhaustive", eval_exhaustive, "Every operand pair at each width (n <= 12)");
  eval_cmd->add_flag("--long", eval_long, "Also evaluate 2048 and 4096 bits (hours on one core)");
  eval_cmd->add_option("--threshold", eval_threshold, "Required exact-match rate at every width")
      ->capture_default_str();

  // trace
  Shared trace_sh;
  std::string trace_model;
  bool trace_symbolic = false;
  std::string trace_a = "5";
  std::string trace_b = "7";
  int trace_n = 0;
  std::string trace_format = "ascii";
  int trace_max_steps = 0;
  auto* trace_cmd = app.add_subcommand("trace", "Print every frame of one multiplication");
  add_shared(trace_cmd, trace_sh, "");
  trace_cmd->add_option("--model", trace_model, "Checkpoint to run");
  trace_cmd->add_flag("--symbolic", trace_symbolic, "Use the hand-written rule");
  trace_cmd->add_option("--a", trace_a, "First operand (decimal)")->capture_default_str();
  trace_cmd->add_option("--b", trace_b, "Second operand (decimal)")->capture_default_str();
  trace_cmd->add_option("--n", trace_n, "Operand width (0 = widest operand)")->capture_default_str();
  trace_cmd->add_option("--format", trace_format, "ascii or json")->capture_default_str();
  trace_cmd->add_option("--max-steps", trace_max_steps, "Step cap (0 = 4n+64)")->capture_default_str();

  // sweep
  TrainConfig sweep_cfg;
  Shared sweep_sh;
  std::vector<int> sweep_hidden = {4, 8, 16, 32};
  int sweep_seeds = 10;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train (hidden x seed) grid and count generalization successes");
  add_shared(sweep_cmd, sweep_sh, "sweep.csv");
  add_train_flags(sweep_cmd, sweep_cfg, false);
  sweep_cmd->add_option("--hidden", sweep_hidden, "Hidden widths")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--seeds", sweep_seeds, "Seeds per width (seed .. seed+S-1)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_cfg, train_sh, train_kind, train_metrics, train_quiet);
    if (*eval_cmd)
      return cmd_eval(eval_sh, eval_model, eval_symbolic, eval_bits, eval_samples, eval_exhaustive,
                      eval_long, eval_threshold);
    if (*trace_cmd)
      return cmd_trace(trace_sh, trace_model, trace_symbolic, trace_a, trace_b, trace_n, trace_format,
                       trace_max_steps);
    if (*sweep_cmd) return cmd_sweep(sweep_cfg, sweep_sh, sweep_hidden, sweep_seeds);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
