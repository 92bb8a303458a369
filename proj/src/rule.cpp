#include "ncamul/rule.hpp"

#include <string>

namespace ncamul {

Grid ground_truth_step(const Grid& g) {
  const int rows = g.rows();
  const int cols = g.cols();
  Grid next(g.n());
  for (int i = 0; i < rows; ++i) {
    for (int j = 1; j < cols; ++j) {
      const Cell v = g.at(i, j);
      if (v == 0) continue;
      if (v < 0) throw std::logic_error("ground_truth_step: negative cell");
      if (i + 1 >= rows) throw std::logic_error("ground_truth_step: flow leaves the bottom edge");
      next.at(i + 1, j - 1) += v;
    }
    const Cell v = g.at(i, 0);
    if (v < 0) throw std::logic_error("ground_truth_step: negative cell");
    const auto split = CarrySplit::of(v);
    next.at(i, 0) += split.remainder;
    if (split.carry != 0) {
      if (i + 1 >= rows) throw std::logic_error("ground_truth_step: carry leaves the bottom edge");
      next.at(i + 1, 0) += split.carry;
    }
  }
  return next;
}

bool is_fixed_point(const Grid& g) {
  for (int i = 0; i < g.rows(); ++i) {
    const Cell c0 = g.at(i, 0);
    if (c0 != 0 && c0 != 1) return false;
    for (int j = 1; j < g.cols(); ++j)
      if (g.at(i, j) != 0) return false;
  }
  return true;
}

Evolution evolve_to_fixed_point(const Grid& g, int max_steps) {
  if (max_steps < 1) throw std::invalid_argument("evolve_to_fixed_point: max_steps must be >= 1");
  Grid cur = g;
  for (int t = 1; t <= max_steps; ++t) {
    Grid next = ground_truth_step(cur);
    if (next == cur) return {std::move(cur), t};
    cur = std::move(next);
  }
  throw DivergenceError("no fixed point within " + std::to_string(max_steps) + " steps",
                        max_steps);
}

Evolution evolve_to_fixed_point(const Grid& g) {
  return evolve_to_fixed_point(g, default_step_cap(g.n()));
}

Trajectory trajectory(const Grid& g0, int max_steps) {
  if (max_steps < 1) throw std::invalid_argument("trajectory: max_steps must be >= 1");
  Trajectory tr;
  tr.states.push_back(g0);
  for (int t = 1; t <= max_steps; ++t) {
    tr.states.push_back(ground_truth_step(tr.states.back()));
    if (tr.states[t] == tr.states[t - 1]) {
      tr.converged_at = t;
      return tr;
    }
  }
  throw DivergenceError("no fixed point within " + std::to_string(max_steps) + " steps",
                        max_steps);
}

ChaosSample sample_chaos_state(int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_chaos_state: n must be >= 1");
  const BitVec a = random_nbit(static_cast<std::size_t>(n), false, rng);
  const BitVec b = random_nbit(static_cast<std::size_t>(n), false, rng);
  const int k = static_cast<int>(rng.uniform_int(0, 4 * n));
  Grid state = outer_product_encode(a, b, n);
  for (int t = 0; t < k; ++t) {
    Grid next = ground_truth_step(state);
    if (next == state) break;  // later states repeat the fixed point
    state = std::move(next);
  }
  Grid next = ground_truth_step(state);
  return {std::move(state), std::move(next), k};
}

}  // namespace ncamul
