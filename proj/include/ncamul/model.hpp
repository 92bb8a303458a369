#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncamul/grid.hpp"
#include "ncamul/rule.hpp"

namespace ncamul {

/// nca: Conv(2->H, 3x3) + ReLU + Conv(H->1, 1x1).
/// mlp: the same with a 1x1 first layer (pointwise control).
enum class NetKind { nca, mlp };

std::string to_string(NetKind kind);
NetKind net_kind_from_string(const std::string& s);

/// Two-layer rule network. All parameters live in one contiguous buffer,
/// laid out as w1 [H][2][k][k], b1 [H], w2 [H], b2.
class RuleNet {
 public:
  RuleNet(NetKind kind, int hidden);

  NetKind kind() const { return kind_; }
  int hidden() const { return hidden_; }
  int kernel() const { return kind_ == NetKind::nca ? 3 : 1; }
  /// Inputs seen by one hidden unit: 2 channels x k x k.
  int patch_size() const { return 2 * kernel() * kernel(); }

  static std::size_t param_count(NetKind kind, int hidden);
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::span<double> w1() { return params().subspan(0, w1_size()); }
  std::span<const double> w1() const { return params().subspan(0, w1_size()); }
  std::span<double> b1() { return params().subspan(w1_size(), hidden_); }
  std::span<const double> b1() const { return params().subspan(w1_size(), hidden_); }
  std::span<double> w2() { return params().subspan(w1_size() + hidden_, hidden_); }
  std::span<const double> w2() const { return params().subspan(w1_size() + hidden_, hidden_); }
  double& b2() { return params_.back(); }
  double b2() const { return params_.back(); }

  std::size_t w1_size() const { return static_cast<std::size_t>(hidden_) * patch_size(); }

  bool all_finite() const;

  friend bool operator==(const RuleNet&, const RuleNet&) = default;

 private:
  NetKind kind_;
  int hidden_;
  std::vector<double> params_;
};

/// Per-cell output of the network for one input patch ordered
/// [channel][ky][kx]. If pre_activation is given it receives the H
/// first-layer sums (before ReLU). Accumulation order is fixed.
double respond(const RuleNet& net, const double* patch, double* pre_activation = nullptr);

/// Real-valued map with the interior shape of an encoded grid.
struct Field {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * cols + j]; }
};

/// Valid-mode cross-correlation over the haloed input. Throws
/// std::invalid_argument on malformed input or a missing -1 halo.
Field forward(const RuleNet& net, const EncodedGrid& x);

/// Largest value a projected cell may take.
inline constexpr Cell kMaxCell = Cell{1} << 30;

/// Round half away from zero, then clamp to [0, kMaxCell]. NaN maps to 0.
Cell project(double v);
/// Field shape must be 2n x n.
Grid project(const Field& f);

/// project(g + forward(net, parity_encode(g))), computed directly.
Grid nca_step(const RuleNet& net, const Grid& g);

/// Iterated nca_step with two exact shortcuts: a cell whose neighbourhood
/// did not change in the last step keeps its value, and the update for
/// neighbourhoods with all cells in {0..3} (or halo) is memoised. Results
/// are identical to repeated nca_step.
class CompiledRule {
 public:
  explicit CompiledRule(const RuleNet& net);

  /// Same step convention as evolve_to_fixed_point. With frames, every
  /// state G^0..G^steps is appended. Throws DivergenceError at the cap.
  Evolution run(const Grid& g0, int max_steps, std::vector<Grid>* frames = nullptr) const;

  const RuleNet& net() const { return net_; }

 private:
  Cell lookup(std::uint32_t key) const;
  Cell compute_direct(const Cell* window, std::size_t stride) const;

  RuleNet net_;
  int kernel_;
  mutable std::vector<Cell> table_;  // -1 marks "not yet computed"
};

/// Iterates nca_step until a fixed point is confirmed (see Evolution).
Evolution infer(const RuleNet& net, const Grid& g0, int max_steps);

/// Hex FNV-1a digest of kind, width and parameter bytes.
std::string model_id(const RuleNet& net);

struct Checkpoint {
  RuleNet net;
  std::uint64_t train_seed = 0;
  nlohmann::json train_config = nlohmann::json::object();
};

inline constexpr int kCheckpointFormatVersion = 1;

/// Checkpoint JSON with weights printed at 17 significant digits.
std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

/// Written to a temporary file and renamed into place. Throws
/// std::runtime_error on I/O failure.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Writes text to path via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& text);
std::string read_file(const std::string& path);

}  // namespace ncamul
