#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stlforge/tape.hpp"

namespace stlforge::policy {

enum class SquashKind { tanh, sigmoid };

// Fixed output stage u = offset + gain * act(pre_scale * a). Maps the real
// line into (offset - |gain|, offset + |gain|) for tanh and between offset
// and offset + gain for sigmoid.
struct Squash {
  SquashKind kind = SquashKind::tanh;
  double pre_scale = 1.0;
  double gain = 1.0;
  double offset = 0.0;

  double lower() const;
  double upper() const;
};

// Fully connected tanh network followed by a non-trainable squash per output.
// The network input is the state with the normalized time t / horizon
// appended. Parameters are stored flat, layer by layer, each layer as its
// row-major weight matrix (out x in) followed by its bias vector.
class Policy {
 public:
  Policy() = default;
  Policy(std::vector<int> layer_dims, std::vector<Squash> squash, int horizon);

  const std::vector<int>& layer_dims() const noexcept { return dims_; }
  const std::vector<Squash>& squash() const noexcept { return squash_; }
  int horizon() const noexcept { return horizon_; }
  int input_dim() const noexcept { return dims_.front(); }
  int output_dim() const noexcept { return dims_.back(); }
  std::size_t num_layers() const noexcept { return dims_.size() - 1; }

  std::size_t num_params() const noexcept { return params_.size(); }
  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }
  void set_params(std::span<const double> values);

  // Offsets of layer `i`'s weights and biases within params().
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

  template <class T>
  std::vector<T> forward(std::span<const T> params, std::span<const T> state, int t) const;

  std::vector<double> forward(std::span<const double> state, int t) const {
    return forward<double>(params_, state, t);
  }

 private:
  std::vector<int> dims_;
  std::vector<Squash> squash_;
  int horizon_ = 1;
  std::vector<double> params_;
};

std::size_t param_count(std::span<const int> dims);

// Glorot-uniform weights, zero biases; deterministic per seed.
Policy init_params(std::vector<int> layer_dims, std::vector<Squash> squash, int horizon,
                   std::uint64_t seed);

extern template std::vector<double> Policy::forward<double>(std::span<const double>,
                                                            std::span<const double>, int) const;
extern template std::vector<ad::Scalar> Policy::forward<ad::Scalar>(
    std::span<const ad::Scalar>, std::span<const ad::Scalar>, int) const;

std::string to_string(SquashKind kind);
SquashKind squash_kind_from_string(const std::string& name);

}  // namespace stlforge::policy
