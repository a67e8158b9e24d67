#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "groundlab/neural/tensor.hpp"
#include "groundlab/random.hpp"

namespace groundlab::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

enum class Init { FanIn, Zeros };

/// Named parameters with matching gradient buffers. Parameter addresses stay
/// valid for the lifetime of the store.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  /// Matrices draw from uniform(-a, a) with a = 1/sqrt(fan_in), where fan_in
  /// is the last dimension; Init::Zeros is used for biases.
  Param& add(const std::string& name, std::vector<std::size_t> shape, Init init = Init::FanIn);

  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<std::unique_ptr<Param>>& params() { return params_; }
  const std::vector<std::unique_ptr<Param>>& params() const { return params_; }

  void zero_grad();
  double grad_norm() const;
  /// Rescales all gradients so their global L2 norm is at most `max_norm`.
  void clip_grad_norm(double max_norm);
  std::size_t parameter_count() const;
  std::uint64_t seed() const { return seed_; }

  /// Copies values (not gradients) from a store with identical layout.
  void copy_values_from(const ParamStore& other);

  /// Binary checkpoint: magic "GLPARAMS", version, then per parameter its
  /// name, shape and row-major little-endian doubles.
  void save(const std::filesystem::path& path) const;
  static ParamStore load(const std::filesystem::path& path);
  std::string serialize() const;
  static ParamStore deserialize(const std::string& bytes);

  bool same_values(const ParamStore& other) const;

 private:
  std::uint64_t seed_;
  Rng rng_;
  std::vector<std::unique_ptr<Param>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace groundlab::nn
