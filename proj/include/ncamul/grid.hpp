#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncamul/oracle.hpp"

namespace ncamul {

using Cell = std::int32_t;

/// The 2n x n multiplication lattice. Cell (i, j) carries weight 2^(i+j);
/// storage is row-major.
class Grid {
 public:
  Grid() = default;
  /// All-zero grid for operand width n (n >= 1).
  explicit Grid(int n);

  int n() const { return n_; }
  int rows() const { return 2 * n_; }
  int cols() const { return n_; }

  Cell at(int i, int j) const { return cells_[static_cast<std::size_t>(i) * n_ + j]; }
  Cell& at(int i, int j) { return cells_[static_cast<std::size_t>(i) * n_ + j]; }

  std::span<const Cell> cells() const { return cells_; }
  std::span<Cell> cells() { return cells_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int n_ = 0;
  std::vector<Cell> cells_;
};

/// Network input: channel 0 holds v, channel 1 holds cos(pi v), plus a
/// one-cell halo of -1 in both channels. Layout is [channel][row][col].
struct EncodedGrid {
  int height = 0;  // rows + 2
  int width = 0;   // cols + 2
  std::vector<double> values;

  static constexpr int kChannels = 2;
  static constexpr double kHalo = -1.0;

  double at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

/// G[i][j] = a_i * b_j for i, j < n; rows n..2n-1 are zero.
/// Throws std::invalid_argument if either operand is wider than n.
Grid outer_product_encode(const BitVec& a, const BitVec& b, int n);

/// Reads column 0 as the LSB-first product. Throws std::logic_error if the
/// grid is not a fixed point of the rule.
BitVec decode_product(const Grid& g);

/// cos(pi v), exact (+1/-1) for integers.
double parity(double v);

EncodedGrid parity_encode(const Grid& g);

/// Sum of cell(i,j) * 2^(i+j) as an exact binary integer.
BitVec weighted_sum(const Grid& g);

/// Trace frame: {"n", "rows", "cols", "cells"} with cells row-major.
nlohmann::json grid_to_json(const Grid& g);
Grid grid_from_json(const nlohmann::json& j);
/// One row per line, cells separated by single spaces.
std::string grid_to_ascii(const Grid& g);

}  // namespace ncamul
