#include <gtest/gtest.h>

#include <fstream>
#include <numeric>

#include "ncamul/rule.hpp"

using namespace ncamul;

namespace {

std::vector<Cell> column(const Grid& g, int j) {
  std::vector<Cell> c;
  for (int i = 0; i < g.rows(); ++i) c.push_back(g.at(i, j));
  return c;
}

Grid encode(std::uint64_t a, std::uint64_t b, int n) {
  return outer_product_encode(BitVec::from_u64(a), BitVec::from_u64(b), n);
}

// Random state that cannot push mass off the bottom edge.
Grid random_state(int n, Rng& rng) {
  Grid g(n);
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j) {
      const bool last = i == g.rows() - 1;
      if (j == 0) g.at(i, j) = static_cast<Cell>(rng.below(last ? 2 : 4));
      else g.at(i, j) = last ? 0 : static_cast<Cell>(rng.below(2));
    }
  return g;
}

}  // namespace

TEST(CarrySplit, Decomposes) {
  for (Cell v = 0; v < 10; ++v) {
    const auto s = CarrySplit::of(v);
    EXPECT_EQ(2 * s.carry + s.remainder, v);
    EXPECT_EQ(s.remainder, v % 2);
  }
}

TEST(GroundTruthStep, ThreeTimesThreeWorkedTrajectory) {
  Grid g = encode(3, 3, 2);
  EXPECT_EQ(column(g, 0), (std::vector<Cell>{1, 1, 0, 0}));
  EXPECT_EQ(column(g, 1), (std::vector<Cell>{1, 1, 0, 0}));
  g = ground_truth_step(g);
  EXPECT_EQ(column(g, 0), (std::vector<Cell>{1, 2, 1, 0}));
  EXPECT_EQ(column(g, 1), (std::vector<Cell>{0, 0, 0, 0}));
  g = ground_truth_step(g);
  EXPECT_EQ(column(g, 0), (std::vector<Cell>{1, 0, 2, 0}));
  g = ground_truth_step(g);
  EXPECT_EQ(column(g, 0), (std::vector<Cell>{1, 0, 0, 1}));
  EXPECT_TRUE(is_fixed_point(g));
  EXPECT_EQ(decode_product(g).to_u64(), 9u);
  EXPECT_EQ(evolve_to_fixed_point(encode(3, 3, 2)).steps, 4);
}

TEST(GroundTruthStep, ZeroGridIsFixed) {
  const Grid z(7);
  EXPECT_EQ(ground_truth_step(z), z);
}

TEST(GroundTruthStep, RejectsMassLeavingTheGrid) {
  Grid g(2);
  g.at(3, 1) = 1;
  EXPECT_THROW(ground_truth_step(g), std::logic_error);
  Grid h(2);
  h.at(3, 0) = 2;
  EXPECT_THROW(ground_truth_step(h), std::logic_error);
  Grid neg(2);
  neg.at(0, 0) = -1;
  EXPECT_THROW(ground_truth_step(neg), std::logic_error);
}

TEST(EvolveToFixedPoint, FiveBySevenTakesSixSteps) {
  const Evolution ev = evolve_to_fixed_point(encode(5, 7, 3));
  EXPECT_EQ(ev.steps, 6);
  EXPECT_EQ(decode_product(ev.grid).to_u64(), 35u);
}

TEST(EvolveToFixedPoint, ZeroTimesZero) {
  const Evolution ev = evolve_to_fixed_point(encode(0, 0, 1));
  EXPECT_EQ(ev.steps, 1);
  EXPECT_TRUE(decode_product(ev.grid).is_zero());
}

TEST(EvolveToFixedPoint, CapAndValidation) {
  EXPECT_THROW(evolve_to_fixed_point(encode(5, 7, 3), 0), std::invalid_argument);
  try {
    evolve_to_fixed_point(encode(5, 7, 3), 5);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.steps(), 5);
  }
  EXPECT_EQ(evolve_to_fixed_point(encode(5, 7, 3), 6).steps, 6);
}

TEST(EvolveToFixedPoint, SixteenBitMeanSteps) {
  Rng rng(16);
  double total = 0;
  for (int t = 0; t < 200; ++t) {
    const BitVec a = random_nbit(16, true, rng);
    const BitVec b = random_nbit(16, true, rng);
    total += evolve_to_fixed_point(outer_product_encode(a, b, 16)).steps;
  }
  EXPECT_NEAR(total / 200, 18.0, 18.0 * 0.15);
}

TEST(IsFixedPoint, Examples) {
  EXPECT_TRUE(is_fixed_point(evolve_to_fixed_point(encode(5, 7, 3)).grid));
  EXPECT_FALSE(is_fixed_point(encode(3, 3, 2)));
  Grid g(3);
  g.at(0, 0) = 2;
  EXPECT_FALSE(is_fixed_point(g));
}

TEST(IsFixedPoint, CharacterisationMatchesStep) {
  Rng rng(99);
  int fixed = 0;
  for (int t = 0; t < 20000; ++t) {
    const int n = 1 + static_cast<int>(rng.below(3));
    Grid g = random_state(n, rng);
    // Bias towards sparse states so both outcomes occur.
    if (t % 2) {
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 1; j < g.cols(); ++j) g.at(i, j) = 0;
      for (int i = 0; i < g.rows(); ++i) g.at(i, 0) = std::min<Cell>(g.at(i, 0), t % 4 == 1 ? 1 : 3);
    }
    const bool direct = is_fixed_point(g);
    ASSERT_EQ(direct, ground_truth_step(g) == g);
    fixed += direct;
  }
  EXPECT_GT(fixed, 1000);
  EXPECT_LT(fixed, 19000);
}

TEST(RuleInvariants, ConservationAndColumnEmptying) {
  Rng rng(7);
  for (int t = 0; t < 300; ++t) {
    const int n = 1 + static_cast<int>(rng.below(24));
    const BitVec a = random_nbit(n, false, rng);
    const BitVec b = random_nbit(n, false, rng);
    const BitVec product = multiply_oracle(a, b);
    const Trajectory tr = trajectory(outer_product_encode(a, b, n), default_step_cap(n));
    for (std::size_t s = 0; s < tr.states.size(); ++s) {
      const Grid& g = tr.states[s];
      ASSERT_EQ(weighted_sum(g), product);
      if (static_cast<int>(s) <= n)
        for (int i = 0; i < g.rows(); ++i)
          for (int j = std::max(1, n - static_cast<int>(s)); j < n; ++j) ASSERT_EQ(g.at(i, j), 0);
    }
  }
}

TEST(RuleInvariants, BoundednessExhaustiveUpTo6Bits) {
  for (int n = 1; n <= 6; ++n) {
    const std::uint64_t side = std::uint64_t{1} << n;
    for (std::uint64_t a = 0; a < side; ++a) {
      for (std::uint64_t b = 0; b < side; ++b) {
        const Trajectory tr = trajectory(encode(a, b, n), default_step_cap(n));
        for (const Grid& g : tr.states) {
          for (int i = 0; i < g.rows(); ++i) {
            ASSERT_LE(g.at(i, 0), 3);
            for (int j = 1; j < g.cols(); ++j) ASSERT_LE(g.at(i, j), 1);
          }
        }
        ASSERT_EQ(decode_product(tr.states.back()).to_u64(), a * b);
      }
    }
  }
}

TEST(RuleInvariants, StepGrowthIsLinear) {
  // Mean steps over a few top-bit-set pairs per width; least squares slope.
  std::vector<double> xs, ys;
  Rng rng(1024);
  for (int n : {64, 128, 256, 512, 1024}) {
    const int reps = n >= 512 ? 2 : 5;
    double total = 0;
    for (int r = 0; r < reps; ++r) {
      const BitVec a = random_nbit(n, true, rng);
      const BitVec b = random_nbit(n, true, rng);
      const int steps = evolve_to_fixed_point(outer_product_encode(a, b, n)).steps;
      EXPECT_LE(steps, 4 * n + 16);
      total += steps;
    }
    xs.push_back(n);
    ys.push_back(total / reps);
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  EXPECT_GE(sxy / sxx, 0.95);
  EXPECT_LE(sxy / sxx, 1.10);
}

TEST(Trajectory, FramesEndWithRepeat) {
  const Trajectory tr = trajectory(encode(5, 7, 3), 100);
  EXPECT_EQ(tr.converged_at, 6);
  ASSERT_EQ(tr.states.size(), 7u);
  EXPECT_EQ(tr.states[6], tr.states[5]);
  for (std::size_t s = 1; s + 1 < tr.states.size(); ++s) {
    EXPECT_EQ(tr.states[s], ground_truth_step(tr.states[s - 1]));
    EXPECT_NE(tr.states[s], tr.states[s - 1]);
  }
}

TEST(SampleChaosState, PairIsOneRuleStep) {
  Rng rng(31);
  int at_fixed = 0;
  for (int t = 0; t < 2000; ++t) {
    const int n = 1 + static_cast<int>(rng.below(6));
    const ChaosSample s = sample_chaos_state(n, rng);
    ASSERT_GE(s.k, 0);
    ASSERT_LE(s.k, 4 * n);
    ASSERT_EQ(s.next, ground_truth_step(s.state));
    if (s.k == 0) {
      // The initial outer-product grid has nothing below row n.
      for (int i = n; i < s.state.rows(); ++i)
        for (int j = 0; j < n; ++j) ASSERT_EQ(s.state.at(i, j), 0);
    }
    if (s.state == s.next) ++at_fixed;
  }
  // k ranges up to 4n, well past convergence for many samples.
  EXPECT_GT(at_fixed, 200);
  EXPECT_THROW(sample_chaos_state(0, rng), std::invalid_argument);
}

TEST(SampleChaosState, MatchesGoldenCapture) {
  std::ifstream in(std::string(NCAMUL_GOLDEN_DIR) + "/chaos_n4.json");
  ASSERT_TRUE(in) << "missing golden file";
  const nlohmann::json golden = nlohmann::json::parse(in);
  Rng rng(golden.at("seed").get<std::uint64_t>());
  for (const auto& entry : golden.at("samples")) {
    const ChaosSample s = sample_chaos_state(4, rng);
    EXPECT_EQ(s.k, entry.at("k").get<int>());
    EXPECT_EQ(s.state, grid_from_json(entry.at("state")));
    EXPECT_EQ(s.next, grid_from_json(entry.at("next")));
  }
}
