#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "hicrec/binary_io.hpp"
#include "hicrec/dense.hpp"
#include "hicrec/errors.hpp"

namespace hicrec {

/// A learnable tensor with its gradient accumulator and Adam moments.
struct ParamTensor {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  ParamTensor(std::string n, Matrix v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(value.rows(), value.cols()),
        adam_m(value.rows(), value.cols()),
        adam_v(value.rows(), value.cols()) {}
};

/// Parameters in insertion order, addressable by name.
class ParamStore {
 public:
  ParamTensor& add(std::string name, Matrix value) {
    if (index_.contains(name)) throw ContractViolation("duplicate parameter '" + name + "'");
    index_.emplace(name, tensors_.size());
    tensors_.emplace_back(std::move(name), std::move(value));
    return tensors_.back();
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  ParamTensor& at(const std::string& name) { return tensors_[lookup(name)]; }
  const ParamTensor& at(const std::string& name) const { return tensors_[lookup(name)]; }

  const Matrix& value(const std::string& name) const { return at(name).value; }

  std::size_t size() const noexcept { return tensors_.size(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& t : tensors_) t.grad.fill(0.0);
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& t : tensors_) {
      for (double v : t.value.values()) s += v * v;
    }
    return s;
  }

  /// Adds the gradient of lambda·‖θ‖² to every tensor.
  void add_l2_grad(double lambda) {
    for (auto& t : tensors_) {
      auto g = t.grad.values();
      auto v = t.value.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * lambda * v[i];
    }
  }

  bool values_equal(const ParamStore& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      if (tensors_[i].name != other.tensors_[i].name || tensors_[i].value != other.tensors_[i].value) {
        return false;
      }
    }
    return true;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractViolation("unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<ParamTensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over every tensor; t is the 1-based step.
inline void adam_step(ParamStore& store, const AdamConfig& cfg, std::uint64_t t) {
  if (t == 0) throw ContractViolation("adam_step: step index must be >= 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& p : store) {
    auto g = p.grad.values();
    auto m = p.adam_m.values();
    auto v = p.adam_v.values();
    auto x = p.value.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      x[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// Checkpoint layout: "HICREC01", u32 version, u64 tensor count, then per
// tensor: u32 name length, UTF-8 name, u32 ndim (2), u64 dims, f64 values.
inline constexpr char kCheckpointMagic[8] = {'H', 'I', 'C', 'R', 'E', 'C', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const ParamStore& store, std::ostream& out) {
  out.write(kCheckpointMagic, 8);
  io::write_u32(out, kCheckpointVersion);
  io::write_u64(out, store.size());
  for (const auto& p : store) {
    io::write_string(out, p.name);
    io::write_u32(out, 2);
    io::write_u64(out, p.value.rows());
    io::write_u64(out, p.value.cols());
    for (double v : p.value.values()) io::write_f64(out, v);
  }
}

inline void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  save_checkpoint(store, out);
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

inline ParamStore load_checkpoint(std::istream& in) {
  char magic[8];
  io::read_exact(in, magic, 8);
  if (!std::equal(magic, magic + 8, kCheckpointMagic)) throw DataError("not a checkpoint (bad magic)");
  const std::uint32_t version = io::read_u32(in);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t count = io::read_u64(in);
  ParamStore store;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = io::read_string(in);
    const std::uint32_t ndim = io::read_u32(in);
    if (ndim != 2) throw DataError("tensor '" + name + "' has unsupported rank");
    const auto rows = static_cast<std::size_t>(io::read_u64(in));
    const auto cols = static_cast<std::size_t>(io::read_u64(in));
    if (rows != 0 && cols > (std::size_t{1} << 34) / rows) throw DataError("tensor '" + name + "' too large");
    Matrix m(rows, cols);
    for (double& v : m.values()) v = io::read_f64(in);
    store.add(std::move(name), std::move(m));
  }
  return store;
}

inline ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace hicrec
