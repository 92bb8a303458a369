#pragma once

// Hand-written long-multiplication rule on the outer-product grid.
//
// One synchronous step reads only G^t:
//   * flow:  every cell with j > 0 moves to (i+1, j-1);
//   * carry: each column-0 cell splits into v mod 2 (stays) and v div 2
//            (moves to (i+1, 0)); the flow arriving from (i-1, 1) is added.
// Every dependency is inside the 3x3 neighbourhood of the target cell.

#include <stdexcept>
#include <utility>
#include <vector>

#include "ncamul/grid.hpp"
#include "ncamul/rng.hpp"

namespace ncamul {

struct CarrySplit {
  Cell remainder;
  Cell carry;

  static constexpr CarrySplit of(Cell v) { return {v % 2, v / 2}; }
};

/// Thrown when iteration hits its step cap without reaching a fixed point.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int steps) : std::runtime_error(what), steps_(steps) {}
  int steps() const { return steps_; }

 private:
  int steps_;
};

/// Default iteration cap for operand width n.
constexpr int default_step_cap(int n) { return 4 * n + 64; }

/// Throws std::logic_error if mass would leave the grid through the bottom
/// edge (impossible from a valid initial state) or a cell is negative.
Grid ground_truth_step(const Grid& g);

/// Equivalent to ground_truth_step(g) == g, evaluated directly: every column
/// j > 0 is zero and column 0 is binary.
bool is_fixed_point(const Grid& g);

struct Evolution {
  Grid grid;
  /// Rule applications performed up to and including the first one that
  /// returned an unchanged grid. 5 x 7 at n = 3 gives 6.
  int steps = 0;
};

/// Iterates the rule until a fixed point is confirmed. Throws
/// DivergenceError after max_steps applications without one.
Evolution evolve_to_fixed_point(const Grid& g, int max_steps);
Evolution evolve_to_fixed_point(const Grid& g);

/// Frames G^0 .. G^T; the last two frames are equal and T = converged_at.
struct Trajectory {
  std::vector<Grid> states;
  int converged_at = 0;
};

Trajectory trajectory(const Grid& g0, int max_steps);

struct ChaosSample {
  Grid state;  // G^k
  Grid next;   // G^(k+1)
  int k = 0;
};

/// Draws a, b with random_nbit(n, false), k uniform on {0, ..., 4n}, and
/// returns the k-th state and its successor. Throws for n < 1.
ChaosSample sample_chaos_state(int n, Rng& rng);

}  // namespace ncamul
