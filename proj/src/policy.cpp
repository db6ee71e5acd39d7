#include "stlforge/policy.hpp"

#include <algorithm>
#include <cmath>

#include "stlforge/error.hpp"
#include "stlforge/random.hpp"

namespace stlforge::policy {

double Squash::lower() const {
  if (kind == SquashKind::tanh) return offset - std::abs(gain);
  return std::min(offset, offset + gain);
}

double Squash::upper() const {
  if (kind == SquashKind::tanh) return offset + std::abs(gain);
  return std::max(offset, offset + gain);
}

std::size_t param_count(std::span<const int> dims) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    n += static_cast<std::size_t>(dims[i] + 1) * static_cast<std::size_t>(dims[i + 1]);
  }
  return n;
}

Policy::Policy(std::vector<int> layer_dims, std::vector<Squash> squash, int horizon)
    : dims_(std::move(layer_dims)), squash_(std::move(squash)), horizon_(horizon) {
  if (dims_.size() < 2) throw ValidationError("a policy needs at least two layer dimensions");
  for (int d : dims_) {
    if (d < 1) throw ValidationError("layer dimensions must be positive");
  }
  if (static_cast<int>(squash_.size()) != dims_.back()) {
    throw ValidationError("policy has " + std::to_string(dims_.back()) + " outputs but " +
                          std::to_string(squash_.size()) + " squash descriptors");
  }
  if (horizon_ < 1) throw ValidationError("policy horizon must be at least 1");
  params_.assign(param_count(dims_), 0.0);
}

void Policy::set_params(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw ValidationError("expected " + std::to_string(params_.size()) + " policy parameters, got " +
                          std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
}

std::size_t Policy::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < layer; ++i) {
    off += static_cast<std::size_t>(dims_[i] + 1) * static_cast<std::size_t>(dims_[i + 1]);
  }
  return off;
}

std::size_t Policy::bias_offset(std::size_t layer) const {
  return weight_offset(layer) +
         static_cast<std::size_t>(dims_[layer]) * static_cast<std::size_t>(dims_[layer + 1]);
}

template <class T>
std::vector<T> Policy::forward(std::span<const T> params, std::span<const T> state, int t) const {
  if (state.size() + 1 != static_cast<std::size_t>(input_dim())) {
    throw ValidationError("policy expects " + std::to_string(input_dim() - 1) +
                          " state components, got " + std::to_string(state.size()));
  }
  if (params.size() != params_.size()) throw ValidationError("policy parameter count mismatch");

  std::vector<T> activation(state.begin(), state.end());
  activation.push_back(T(static_cast<double>(t) / static_cast<double>(horizon_)));

  std::vector<T> out;
  std::size_t off = 0;
  for (std::size_t layer = 0; layer < num_layers(); ++layer) {
    const auto in = static_cast<std::size_t>(dims_[layer]);
    const auto n_out = static_cast<std::size_t>(dims_[layer + 1]);
    const std::size_t bias_off = off + in * n_out;
    out.clear();
    out.reserve(n_out);
    const bool hidden = layer + 1 < num_layers();
    for (std::size_t r = 0; r < n_out; ++r) {
      T z = ad::dot(params.subspan(off + r * in, in), std::span<const T>(activation),
                    params[bias_off + r]);
      out.push_back(hidden ? ad::tanh(z) : z);
    }
    off = bias_off + n_out;
    activation.swap(out);
  }

  for (std::size_t i = 0; i < activation.size(); ++i) {
    const Squash& s = squash_[i];
    const T pre = activation[i] * T(s.pre_scale);
    const T act = s.kind == SquashKind::tanh ? ad::tanh(pre) : ad::sigmoid(pre);
    activation[i] = T(s.offset) + T(s.gain) * act;
  }
  return activation;
}

template std::vector<double> Policy::forward<double>(std::span<const double>,
                                                     std::span<const double>, int) const;
template std::vector<ad::Scalar> Policy::forward<ad::Scalar>(std::span<const ad::Scalar>,
                                                             std::span<const ad::Scalar>,
                                                             int) const;

Policy init_params(std::vector<int> layer_dims, std::vector<Squash> squash, int horizon,
                   std::uint64_t seed) {
  Policy p(std::move(layer_dims), std::move(squash), horizon);
  Rng rng(seed);
  auto params = p.params();
  for (std::size_t layer = 0; layer < p.num_layers(); ++layer) {
    const int fan_in = p.layer_dims()[layer];
    const int fan_out = p.layer_dims()[layer + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    const std::size_t w0 = p.weight_offset(layer);
    const std::size_t b0 = p.bias_offset(layer);
    for (std::size_t k = w0; k < b0; ++k) params[k] = rng.uniform(-limit, limit);
  }
  return p;
}

std::string to_string(SquashKind kind) { return kind == SquashKind::tanh ? "tanh" : "sigmoid"; }

SquashKind squash_kind_from_string(const std::string& name) {
  if (name == "tanh") return SquashKind::tanh;
  if (name == "sigmoid") return SquashKind::sigmoid;
  throw ValidationError("unknown squash kind '" + name + "'");
}

}  // namespace stlforge::policy
