#include "ncamul/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ncamul/parallel.hpp"

namespace ncamul {

namespace {

struct SampleOutcome {
  bool converged = false;
  bool exact = false;
  int steps = 0;
  std::size_t digits = 0;
};

SampleOutcome run_pair(const Solver& solver, const BitVec& a, const BitVec& b, int bits) {
  SampleOutcome out;
  const BitVec expected = multiply_oracle(a, b);
  out.digits = decimal_digit_count(expected);
  try {
    const Evolution ev = solver(outer_product_encode(a, b, bits), default_step_cap(bits));
    out.converged = true;
    out.steps = ev.steps;
    // A network can settle on a state the rule would still change.
    out.exact = is_fixed_point(ev.grid) && decode_product(ev.grid) == expected;
  } catch (const DivergenceError&) {
  }
  return out;
}

LengthRecord summarize(int bits, const std::vector<SampleOutcome>& outcomes) {
  LengthRecord r;
  r.bits = bits;
  r.split = bits <= kTrainMaxBits ? "train" : "OOD";
  r.samples = static_cast<int>(outcomes.size());
  r.step_cap = default_step_cap(bits);
  r.generalization_factor = static_cast<double>(bits) / kTrainMaxBits;
  long total_steps = 0;
  int converged = 0;
  for (const auto& o : outcomes) {
    r.decimal_digits = std::max(r.decimal_digits, o.digits);
    if (o.exact) ++r.exact;
    if (!o.converged) {
      ++r.divergences;
      continue;
    }
    ++converged;
    total_steps += o.steps;
    r.max_steps = std::max(r.max_steps, o.steps);
  }
  r.exact_match_rate = r.samples ? static_cast<double>(r.exact) / r.samples : 0.0;
  r.mean_steps = converged ? static_cast<double>(total_steps) / converged : 0.0;
  return r;
}

std::string fmt(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

Solver symbolic_solver() {
  return [](const Grid& g, int cap) { return evolve_to_fixed_point(g, cap); };
}

Solver model_solver(const RuleNet& net) {
  auto rule = std::make_shared<const CompiledRule>(net);
  return [rule](const Grid& g, int cap) { return rule->run(g, cap); };
}

int default_samples(int bits) {
  if (bits <= 16) return 200;
  if (bits <= 256) return 50;
  return 10;
}

bool EvalReport::all_at_least(double threshold) const {
  return std::all_of(records.begin(), records.end(),
                     [&](const LengthRecord& r) { return r.exact_match_rate >= threshold; });
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : records) {
    recs.push_back({{"bits", r.bits},
                    {"split", r.split},
                    {"samples", r.samples},
                    {"exact", r.exact},
                    {"divergences", r.divergences},
                    {"exact_match_rate", r.exact_match_rate},
                    {"mean_steps", r.mean_steps},
                    {"max_steps", r.max_steps},
                    {"step_cap", r.step_cap},
                    {"decimal_digits", r.decimal_digits},
                    {"generalization_factor", r.generalization_factor}});
  }
  return {{"model_id", model_id}, {"seed", seed}, {"exhaustive", exhaustive}, {"records", recs}};
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "bits,split,samples,accuracy,mean_steps,max_steps,decimal_digits,gen_factor\n";
  for (const auto& r : records) {
    os << r.bits << ',' << r.split << ',' << r.samples << ',' << fmt(r.exact_match_rate, "%.4f")
       << ',' << fmt(r.mean_steps, "%.2f") << ',' << r.max_steps << ',' << r.decimal_digits << ','
       << fmt(r.generalization_factor, "%.1f") << '\n';
  }
  return os.str();
}

EvalReport evaluate_solver(const Solver& solver, const std::string& id, const EvalOptions& opt) {
  EvalReport report;
  report.model_id = id;
  report.seed = opt.seed;
  for (int bits : opt.lengths) {
    if (bits < 1) throw std::invalid_argument("evaluate: bit length must be >= 1");
    const int count = opt.samples > 0 ? opt.samples : default_samples(bits);
    std::vector<SampleOutcome> outcomes(static_cast<std::size_t>(count));
    parallel_for(outcomes.size(), opt.threads, [&](std::size_t k) {
      Rng rng(derive_seed(opt.seed, {static_cast<std::uint64_t>(bits), k}));
      const BitVec a = random_nbit(static_cast<std::size_t>(bits), true, rng);
      const BitVec b = random_nbit(static_cast<std::size_t>(bits), true, rng);
      outcomes[k] = run_pair(solver, a, b, bits);
    });
    report.records.push_back(summarize(bits, outcomes));
  }
  return report;
}

EvalReport evaluate_lengths(const RuleNet& net, const EvalOptions& opt) {
  return evaluate_solver(model_solver(net), model_id(net), opt);
}

EvalReport evaluate_mlp_control(const RuleNet& mlp, const EvalOptions& opt) {
  if (mlp.kind() != NetKind::mlp) throw std::invalid_argument("evaluate_mlp_control: model is not an mlp");
  return evaluate_lengths(mlp, opt);
}

LengthRecord evaluate_exhaustive(const Solver& solver, int bits, int threads) {
  if (bits < 1 || bits > 12) throw std::invalid_argument("evaluate_exhaustive: bits must be in 1..12");
  const std::uint64_t side = std::uint64_t{1} << bits;
  std::vector<SampleOutcome> outcomes(side * side);
  parallel_for(outcomes.size(), threads, [&](std::size_t k) {
    outcomes[k] = run_pair(solver, BitVec::from_u64(k / side), BitVec::from_u64(k % side), bits);
  });
  return summarize(bits, outcomes);
}

bool generalization_success(const RuleNet& net, std::uint64_t seed, int threads) {
  const Solver solver = model_solver(net);
  const std::string id = model_id(net);
  const EvalReport wide = evaluate_solver(solver, id, {{64}, 50, seed, threads});
  if (!wide.all_at_least(1.0)) return false;
  return evaluate_solver(solver, id, {{16}, 200, seed, threads}).all_at_least(1.0);
}

int SweepReport::successes(int hidden) const {
  return static_cast<int>(std::count_if(records.begin(), records.end(), [&](const SweepRecord& r) {
    return r.hidden == hidden && r.generalization_success;
  }));
}

int SweepReport::runs(int hidden) const {
  return static_cast<int>(std::count_if(records.begin(), records.end(),
                                        [&](const SweepRecord& r) { return r.hidden == hidden; }));
}

std::vector<int> SweepReport::hiddens() const {
  std::vector<int> out;
  for (const auto& r : records)
    if (std::find(out.begin(), out.end(), r.hidden) == out.end()) out.push_back(r.hidden);
  return out;
}

std::string SweepReport::to_csv() const {
  std::ostringstream os;
  os << "hidden,params,seed,trained_ok,first_exact_step,final_acc,generalization_success,error\n";
  for (const auto& r : records) {
    os << r.hidden << ',' << r.params << ',' << r.seed << ',' << (r.trained_ok ? 1 : 0) << ','
       << (r.first_exact_step ? std::to_string(*r.first_exact_step) : "") << ','
       << fmt(r.final_acc, "%.4f") << ',' << (r.generalization_success ? 1 : 0) << ',' << '"'
       << r.error << '"' << '\n';
  }
  return os.str();
}

std::string SweepReport::summary() const {
  std::ostringstream os;
  os << "Hidden  Params  Success      Rate\n";
  for (int h : hiddens()) {
    const int s = successes(h);
    const int n = runs(h);
    char line[96];
    std::snprintf(line, sizeof line, "%6d  %6zu  %3d / %-3d  %5.0f%%\n", h,
                  RuleNet::param_count(NetKind::nca, h), s, n, n ? 100.0 * s / n : 0.0);
    os << line;
  }
  return os.str();
}

SweepReport run_sweep(const std::vector<int>& hidden_list, int seeds_per_hidden,
                      const TrainConfig& base, const SweepCallback& on_record) {
  if (seeds_per_hidden < 1) throw std::invalid_argument("run_sweep: seeds_per_hidden must be >= 1");
  SweepReport report;
  for (int hidden : hidden_list) {
    for (int s = 0; s < seeds_per_hidden; ++s) {
      TrainConfig cfg = base;
      cfg.hidden = hidden;
      cfg.seed = base.seed + static_cast<std::uint64_t>(s);
      SweepRecord rec;
      std::optional<TrainResult> result;
      rec.hidden = hidden;
      rec.seed = cfg.seed;
      rec.params = RuleNet::param_count(cfg.kind, hidden);
      try {
        result = train(cfg);
        rec.trained_ok = result->reached_exact();
        rec.first_exact_step = result->first_exact_step;
        rec.final_acc = result->final_acc;
        rec.generalization_success = generalization_success(result->model, cfg.seed, cfg.threads);
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
      if (on_record) on_record(rec, result ? &*result : nullptr);
      report.records.push_back(std::move(rec));
    }
  }
  return report;
}

}  // namespace ncamul
