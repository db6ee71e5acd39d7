#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "stlforge/stl.hpp"
#include "stlforge/tape.hpp"

namespace stlforge::semantics {

// Row-major sequence of states x_0 .. x_K, each of dimension `dim`.
template <class T>
struct StateSeq {
  std::span<const T> data;
  int dim = 0;

  int length() const noexcept { return dim == 0 ? 0 : static_cast<int>(data.size()) / dim; }
  std::span<const T> at(int k) const {
    return data.subspan(static_cast<std::size_t>(k) * dim, static_cast<std::size_t>(dim));
  }
};

enum class WeightForm { squared, softmax };

// Trainable parameters of the smooth semantics: lambda sets the softmin
// sharpness eta = lambda^2 + 1, and each disjunctive node owns a weight
// vector.
struct SmoothParams {
  double lambda = 1.0;
  std::map<int, std::vector<double>> betas;
  WeightForm form = WeightForm::squared;

  double eta() const noexcept { return lambda * lambda + 1.0; }
  std::size_t size() const;

  // Layout: lambda first, then each beta vector by ascending node id.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  // Throws ValidationError unless betas match the formula's disjunctive nodes.
  void check_bound(const stl::Formula& phi) const;
};

// Uniform weights (all 1 for the squared form, all 0 for softmax) and
// lambda = 1. A positive jitter adds seeded uniform noise in [-jitter, jitter]
// to every beta.
SmoothParams init_smooth_params(const stl::Formula& phi, WeightForm form, std::uint64_t seed = 0,
                                double jitter = 0.0);

// -(1/eta) ln sum_i exp(-eta v_i), evaluated with a max shift.
template <class T>
T softmin(std::span<const T> values, const T& eta);

template <class T>
T weighted_average(std::span<const T> values, std::span<const T> betas, WeightForm form);

bool bool_sat(const stl::Formula& phi, const StateSeq<double>& traj, int t = 0);

double hard_robustness(const stl::Formula& phi, const StateSeq<double>& traj, int t = 0);

// Smooth robustness over a (possibly recorded) trajectory. `zeta` is laid out
// as SmoothParams::flatten(). The result never exceeds hard_robustness.
template <class T>
T stl2cbf(const stl::Formula& phi, const StateSeq<T>& traj, std::span<const T> zeta,
          WeightForm form, int t = 0);

extern template double softmin<double>(std::span<const double>, const double&);
extern template ad::Scalar softmin<ad::Scalar>(std::span<const ad::Scalar>, const ad::Scalar&);
extern template double weighted_average<double>(std::span<const double>, std::span<const double>,
                                                WeightForm);
extern template ad::Scalar weighted_average<ad::Scalar>(std::span<const ad::Scalar>,
                                                        std::span<const ad::Scalar>, WeightForm);
extern template double stl2cbf<double>(const stl::Formula&, const StateSeq<double>&,
                                       std::span<const double>, WeightForm, int);
extern template ad::Scalar stl2cbf<ad::Scalar>(const stl::Formula&, const StateSeq<ad::Scalar>&,
                                               std::span<const ad::Scalar>, WeightForm, int);

}  // namespace stlforge::semantics
