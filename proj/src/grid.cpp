#include "ncamul/grid.hpp"

#include <cmath>
#include <stdexcept>

#include "ncamul/rule.hpp"

namespace ncamul {

Grid::Grid(int n) : n_(n), cells_(static_cast<std::size_t>(2 * n) * n, 0) {
  if (n < 1) throw std::invalid_argument("Grid: n must be >= 1");
}

Grid outer_product_encode(const BitVec& a, const BitVec& b, int n) {
  if (n < 1) throw std::invalid_argument("outer_product_encode: n must be >= 1");
  if (a.size() > static_cast<std::size_t>(n) || b.size() > static_cast<std::size_t>(n))
    throw std::invalid_argument("outer_product_encode: operand wider than n bits");
  Grid g(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g.at(i, j) = a.bit(i) * b.bit(j);
  return g;
}

BitVec decode_product(const Grid& g) {
  if (!is_fixed_point(g)) throw std::logic_error("decode_product: grid is not a fixed point");
  std::vector<std::uint8_t> bits(g.rows());
  for (int i = 0; i < g.rows(); ++i) bits[i] = static_cast<std::uint8_t>(g.at(i, 0));
  return BitVec(std::move(bits));
}

double parity(double v) {
  if (v == std::floor(v) && std::abs(v) < 0x1.0p52) {
    return std::fmod(std::abs(v), 2.0) == 0.0 ? 1.0 : -1.0;
  }
  return std::cos(M_PI * v);
}

EncodedGrid parity_encode(const Grid& g) {
  EncodedGrid e;
  e.height = g.rows() + 2;
  e.width = g.cols() + 2;
  e.values.assign(static_cast<std::size_t>(EncodedGrid::kChannels) * e.height * e.width,
                  EncodedGrid::kHalo);
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      const double v = g.at(i, j);
      e.at(0, i + 1, j + 1) = v;
      e.at(1, i + 1, j + 1) = parity(v);
    }
  }
  return e;
}

BitVec weighted_sum(const Grid& g) {
  // Accumulate per bit position with an unbounded small-integer carry.
  std::vector<std::int64_t> digit(static_cast<std::size_t>(g.rows() + g.cols()) + 64, 0);
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j) digit[i + j] += g.at(i, j);
  std::vector<std::uint8_t> bits(digit.size());
  std::int64_t carry = 0;
  for (std::size_t k = 0; k < digit.size(); ++k) {
    const std::int64_t s = digit[k] + carry;
    bits[k] = static_cast<std::uint8_t>(s & 1);
    carry = s >> 1;
  }
  if (carry != 0) throw std::overflow_error("weighted_sum: carry overflow");
  return BitVec(std::move(bits));
}

nlohmann::json grid_to_json(const Grid& g) {
  nlohmann::json cells = nlohmann::json::array();
  for (int i = 0; i < g.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < g.cols(); ++j) row.push_back(g.at(i, j));
    cells.push_back(std::move(row));
  }
  return {{"n", g.n()}, {"rows", g.rows()}, {"cols", g.cols()}, {"cells", std::move(cells)}};
}

Grid grid_from_json(const nlohmann::json& j) {
  Grid g(j.at("n").get<int>());
  if (j.at("rows").get<int>() != g.rows() || j.at("cols").get<int>() != g.cols())
    throw std::invalid_argument("grid_from_json: rows/cols inconsistent with n");
  const auto& cells = j.at("cells");
  if (cells.size() != static_cast<std::size_t>(g.rows()))
    throw std::invalid_argument("grid_from_json: wrong row count");
  for (int i = 0; i < g.rows(); ++i) {
    if (cells[i].size() != static_cast<std::size_t>(g.cols()))
      throw std::invalid_argument("grid_from_json: wrong column count");
    for (int c = 0; c < g.cols(); ++c) {
      const Cell v = cells[i][c].get<Cell>();
      if (v < 0) throw std::invalid_argument("grid_from_json: negative cell");
      g.at(i, c) = v;
    }
  }
  return g;
}

std::string grid_to_ascii(const Grid& g) {
  std::string out;
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      if (j) out.push_back(' ');
      out += std::to_string(g.at(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace ncamul
