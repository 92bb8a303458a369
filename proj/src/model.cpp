#include "ncamul/model.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ncamul {

std::string to_string(NetKind kind) { return kind == NetKind::nca ? "nca" : "mlp"; }

NetKind net_kind_from_string(const std::string& s) {
  if (s == "nca") return NetKind::nca;
  if (s == "mlp") return NetKind::mlp;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

RuleNet::RuleNet(NetKind kind, int hidden)
    : kind_(kind), hidden_(hidden), params_(param_count(kind, hidden), 0.0) {
  if (hidden < 1) throw std::invalid_argument("RuleNet: hidden width must be >= 1");
}

std::size_t RuleNet::param_count(NetKind kind, int hidden) {
  const std::size_t k = kind == NetKind::nca ? 3 : 1;
  const std::size_t h = static_cast<std::size_t>(hidden);
  return h * 2 * k * k + h + h + 1;
}

bool RuleNet::all_finite() const {
  for (double p : params_)
    if (!std::isfinite(p)) return false;
  return true;
}

double respond(const RuleNet& net, const double* patch, double* pre_activation) {
  const int hidden = net.hidden();
  const int ps = net.patch_size();
  const double* w1 = net.w1().data();
  const double* b1 = net.b1().data();
  const double* w2 = net.w2().data();
  double out = 0.0;
  for (int h = 0; h < hidden; ++h) {
    const double* w = w1 + static_cast<std::size_t>(h) * ps;
    double z = 0.0;
    for (int p = 0; p < ps; ++p) z += w[p] * patch[p];
    z += b1[h];
    if (pre_activation) pre_activation[h] = z;
    if (z > 0.0) out += w2[h] * z;
  }
  return out + net.b2();
}

Field forward(const RuleNet& net, const EncodedGrid& x) {
  if (x.height < 3 || x.width < 3 ||
      x.values.size() != static_cast<std::size_t>(EncodedGrid::kChannels) * x.height * x.width)
    throw std::invalid_argument("forward: malformed encoded grid");
  for (int c = 0; c < EncodedGrid::kChannels; ++c) {
    for (int y = 0; y < x.height; ++y) {
      if (x.at(c, y, 0) != EncodedGrid::kHalo || x.at(c, y, x.width - 1) != EncodedGrid::kHalo)
        throw std::invalid_argument("forward: halo missing");
    }
    for (int xx = 0; xx < x.width; ++xx) {
      if (x.at(c, 0, xx) != EncodedGrid::kHalo || x.at(c, x.height - 1, xx) != EncodedGrid::kHalo)
        throw std::invalid_argument("forward: halo missing");
    }
  }
  const int k = net.kernel();
  const int off = (3 - k) / 2;
  Field f{x.height - 2, x.width - 2, {}};
  f.values.resize(static_cast<std::size_t>(f.rows) * f.cols);
  std::vector<double> patch(net.patch_size());
  for (int i = 0; i < f.rows; ++i) {
    for (int j = 0; j < f.cols; ++j) {
      std::size_t p = 0;
      for (int c = 0; c < EncodedGrid::kChannels; ++c)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) patch[p++] = x.at(c, i + off + ky, j + off + kx);
      f.values[static_cast<std::size_t>(i) * f.cols + j] = respond(net, patch.data());
    }
  }
  return f;
}

Cell project(double v) {
  if (std::isnan(v)) return 0;
  const double r = std::round(v);
  if (r <= 0.0) return 0;
  if (r >= static_cast<double>(kMaxCell)) return kMaxCell;
  return static_cast<Cell>(r);
}

Grid project(const Field& f) {
  if (f.rows != 2 * f.cols || f.cols < 1) throw std::invalid_argument("project: field is not 2n x n");
  Grid g(f.cols);
  auto cells = g.cells();
  for (std::size_t k = 0; k < cells.size(); ++k) cells[k] = project(f.values[k]);
  return g;
}

Grid nca_step(const RuleNet& net, const Grid& g) {
  const Field delta = forward(net, parity_encode(g));
  Grid next(g.n());
  auto out = next.cells();
  auto in = g.cells();
  for (std::size_t k = 0; k < in.size(); ++k)
    out[k] = project(static_cast<double>(in[k]) + delta.values[k]);
  return next;
}

// --- CompiledRule ----------------------------------------------------------

namespace {

// Neighbourhood cell codes: halo -> 0, value v in {0..3} -> v + 1.
constexpr std::uint32_t kCodes = 5;
constexpr Cell kPaddedHalo = -1;

std::size_t table_size(int kernel) {
  std::size_t s = 1;
  for (int p = 0; p < kernel * kernel; ++p) s *= kCodes;
  return s;
}

struct RowSpan {
  int lo = 1;
  int hi = 0;  // empty when lo > hi
  bool empty() const { return lo > hi; }
  void add(int j) {
    if (empty()) {
      lo = hi = j;
    } else {
      lo = std::min(lo, j);
      hi = std::max(hi, j);
    }
  }
  void merge(const RowSpan& o) {
    if (o.empty()) return;
    add(o.lo);
    add(o.hi);
  }
};

}  // namespace

CompiledRule::CompiledRule(const RuleNet& net)
    : net_(net), kernel_(net.kernel()), table_(table_size(net.kernel()), -1) {}

Cell CompiledRule::compute_direct(const Cell* window, std::size_t stride) const {
  // window points at the top-left of the k x k neighbourhood in the padded grid.
  const int k = kernel_;
  const int kk = k * k;
  double patch[18];
  for (int ky = 0; ky < k; ++ky) {
    for (int kx = 0; kx < k; ++kx) {
      const Cell v = window[ky * stride + kx];
      const int p = ky * k + kx;
      if (v == kPaddedHalo) {
        patch[p] = EncodedGrid::kHalo;
        patch[kk + p] = EncodedGrid::kHalo;
      } else {
        patch[p] = static_cast<double>(v);
        patch[kk + p] = parity(static_cast<double>(v));
      }
    }
  }
  const Cell center = window[(k / 2) * stride + k / 2];
  return project(static_cast<double>(center) + respond(net_, patch));
}

Cell CompiledRule::lookup(std::uint32_t key) const {
  std::atomic_ref<Cell> slot(table_[key]);
  Cell v = slot.load(std::memory_order_relaxed);
  if (v >= 0) return v;
  const int k = kernel_;
  Cell window[9];
  std::uint32_t rest = key;
  for (int p = 0; p < k * k; ++p) {
    window[p] = static_cast<Cell>(rest % kCodes) - 1;
    rest /= kCodes;
  }
  v = compute_direct(window, static_cast<std::size_t>(k));
  slot.store(v, std::memory_order_relaxed);
  return v;
}

Evolution CompiledRule::run(const Grid& g0, int max_steps, std::vector<Grid>* frames) const {
  if (max_steps < 1) throw std::invalid_argument("infer: max_steps must be >= 1");
  const int rows = g0.rows();
  const int cols = g0.cols();
  const std::size_t stride = static_cast<std::size_t>(cols) + 2;
  const int k = kernel_;
  const int reach = k / 2;

  std::vector<Cell> cur((static_cast<std::size_t>(rows) + 2) * stride, kPaddedHalo);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) cur[(i + 1) * stride + j + 1] = g0.at(i, j);
  std::vector<Cell> next = cur;

  auto to_grid = [&](const std::vector<Cell>& buf) {
    Grid g(g0.n());
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) g.at(i, j) = buf[(i + 1) * stride + j + 1];
    return g;
  };

  if (frames) frames->push_back(g0);
  std::vector<RowSpan> dirty(rows, RowSpan{0, cols - 1});
  std::vector<RowSpan> changed(rows);

  for (int t = 1; t <= max_steps; ++t) {
    bool any_change = false;
    for (int i = 0; i < rows; ++i) {
      RowSpan span;
      for (int r = std::max(0, i - reach); r <= std::min(rows - 1, i + reach); ++r)
        span.merge(dirty[r]);
      changed[i] = RowSpan{};
      if (span.empty()) continue;
      const int lo = std::max(0, span.lo - reach);
      const int hi = std::min(cols - 1, span.hi + reach);
      for (int j = lo; j <= hi; ++j) {
        // Top-left of the neighbourhood in padded coordinates.
        const Cell* window = &cur[(i + 1 - reach) * stride + (j + 1 - reach)];
        std::uint32_t key = 0;
        std::uint32_t scale = 1;
        bool in_table = true;
        for (int ky = 0; ky < k && in_table; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const auto code = static_cast<std::uint32_t>(window[ky * stride + kx] + 1);
            if (code >= kCodes) {
              in_table = false;
              break;
            }
            key += code * scale;
            scale *= kCodes;
          }
        }
        const Cell v = in_table ? lookup(key) : compute_direct(window, stride);
        const std::size_t at = (i + 1) * stride + j + 1;
        next[at] = v;
        if (v != cur[at]) {
          changed[i].add(j);
          any_change = true;
        }
      }
    }
    if (!any_change) return {to_grid(cur), t};
    std::swap(cur, next);
    std::swap(dirty, changed);
    if (frames) frames->push_back(to_grid(cur));
  }
  throw DivergenceError("no fixed point within " + std::to_string(max_steps) + " steps",
                        max_steps);
}

Evolution infer(const RuleNet& net, const Grid& g0, int max_steps) {
  return CompiledRule(net).run(g0, max_steps);
}

std::string model_id(const RuleNet& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const int kind = net.kind() == NetKind::nca ? 0 : 1;
  const int hidden = net.hidden();
  mix(&kind, sizeof kind);
  mix(&hidden, sizeof hidden);
  mix(net.params().data(), net.params().size_bytes());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- checkpoints -----------------------------------------------------------

namespace {

std::string fmt17(double v) {
  if (!std::isfinite(v)) throw std::runtime_error("checkpoint: non-finite weight");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string array17(std::span<const double> xs) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ", ";
    s += fmt17(xs[i]);
  }
  return s + "]";
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  const RuleNet& net = ckpt.net;
  const int k = net.kernel();
  const std::size_t per_channel = static_cast<std::size_t>(k) * k;
  std::ostringstream os;
  os << "{\n";
  os << "  \"format_version\": " << kCheckpointFormatVersion << ",\n";
  os << "  \"kind\": \"" << to_string(net.kind()) << "\",\n";
  os << "  \"hidden\": " << net.hidden() << ",\n";
  os << "  \"params\": " << net.param_count() << ",\n";
  os << "  \"w1\": [";
  for (int h = 0; h < net.hidden(); ++h) {
    os << (h ? ",\n    [" : "\n    [");
    for (int c = 0; c < 2; ++c) {
      os << (c ? ", [" : "[");
      for (int ky = 0; ky < k; ++ky) {
        const std::size_t base = (static_cast<std::size_t>(h) * 2 + c) * per_channel + ky * k;
        os << (ky ? ", " : "") << array17(net.w1().subspan(base, k));
      }
      os << "]";
    }
    os << "]";
  }
  os << "\n  ],\n";
  os << "  \"b1\": " << array17(net.b1()) << ",\n";
  os << "  \"w2\": " << array17(net.w2()) << ",\n";
  os << "  \"b2\": " << fmt17(net.b2()) << ",\n";
  os << "  \"train_seed\": " << ckpt.train_seed << ",\n";
  os << "  \"train_config\": " << ckpt.train_config.dump() << "\n";
  os << "}\n";
  return os.str();
}

Checkpoint checkpoint_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: parse error: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw std::runtime_error("checkpoint: unsupported format_version");
    RuleNet net(net_kind_from_string(j.at("kind").get<std::string>()), j.at("hidden").get<int>());
    const int k = net.kernel();
    const auto& w1 = j.at("w1");
    if (w1.size() != static_cast<std::size_t>(net.hidden()))
      throw std::runtime_error("checkpoint: w1 has wrong shape");
    std::size_t p = 0;
    for (const auto& unit : w1) {
      if (unit.size() != 2) throw std::runtime_error("checkpoint: w1 has wrong shape");
      for (const auto& chan : unit) {
        if (chan.size() != static_cast<std::size_t>(k)) throw std::runtime_error("checkpoint: w1 has wrong shape");
        for (const auto& row : chan) {
          if (row.size() != static_cast<std::size_t>(k)) throw std::runtime_error("checkpoint: w1 has wrong shape");
          for (const auto& v : row) net.w1()[p++] = v.get<double>();
        }
      }
    }
    auto read_vec = [&](const char* key, std::span<double> dst) {
      const auto& a = j.at(key);
      if (a.size() != dst.size()) throw std::runtime_error(std::string("checkpoint: ") + key + " has wrong shape");
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a[i].get<double>();
    };
    read_vec("b1", net.b1());
    read_vec("w2", net.w2());
    net.b2() = j.at("b2").get<double>();
    if (!net.all_finite()) throw std::runtime_error("checkpoint: non-finite weight");
    Checkpoint ckpt{std::move(net), j.value("train_seed", std::uint64_t{0}),
                    j.value("train_config", nlohmann::json::object())};
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
}

void write_file_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, checkpoint_to_string(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_string(read_file(path)); }

}  // namespace ncamul
