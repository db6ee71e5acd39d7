#include "stlforge/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stlforge/random.hpp"

namespace stlforge::semantics {

namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

using stl::FormulaNode;

void check_length(const stl::Formula& phi, int length, int t) {
  if (t < 0 || t + phi.reach() >= length) {
    throw ValidationError("formula needs states up to index " + std::to_string(t + phi.reach()) +
                          " but the trajectory has " + std::to_string(length));
  }
}

}  // namespace

std::size_t SmoothParams::size() const {
  std::size_t n = 1;
  for (const auto& [id, b] : betas) n += b.size();
  return n;
}

std::vector<double> SmoothParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  flat.push_back(lambda);
  for (const auto& [id, b] : betas) flat.insert(flat.end(), b.begin(), b.end());
  return flat;
}

void SmoothParams::assign(std::span<const double> flat) {
  if (flat.size() != size()) throw ValidationError("smooth parameter vector has wrong length");
  lambda = flat[0];
  std::size_t k = 1;
  for (auto& [id, b] : betas) {
    for (double& v : b) v = flat[k++];
  }
}

void SmoothParams::check_bound(const stl::Formula& phi) const {
  const auto& slots = phi.disjunctions();
  if (slots.size() != betas.size()) {
    throw ValidationError("smooth parameters have " + std::to_string(betas.size()) +
                          " weight vectors but the formula has " + std::to_string(slots.size()) +
                          " disjunctive nodes");
  }
  for (const auto& slot : slots) {
    auto it = betas.find(slot.node_id);
    if (it == betas.end()) {
      throw ValidationError("no weights for disjunctive node " + std::to_string(slot.node_id));
    }
    if (static_cast<int>(it->second.size()) != slot.weight_count) {
      throw ValidationError("node " + std::to_string(slot.node_id) + " expects " +
                            std::to_string(slot.weight_count) + " weights, got " +
                            std::to_string(it->second.size()));
    }
  }
}

SmoothParams init_smooth_params(const stl::Formula& phi, WeightForm form, std::uint64_t seed,
                                double jitter) {
  SmoothParams params;
  params.form = form;
  params.lambda = 1.0;
  Rng rng(seed);
  const double base = form == WeightForm::squared ? 1.0 : 0.0;
  for (const auto& slot : phi.disjunctions()) {
    std::vector<double> b(static_cast<std::size_t>(slot.weight_count), base);
    if (jitter > 0.0) {
      for (double& v : b) v += rng.uniform(-jitter, jitter);
    }
    params.betas.emplace(slot.node_id, std::move(b));
  }
  return params;
}

template <class T>
T softmin(std::span<const T> values, const T& eta) {
  if (values.empty()) throw ValidationError("softmin of an empty list");
  const double e = ad::value_of(eta);
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& v : values) lo = std::min(lo, ad::value_of(v));

  thread_local std::vector<double> w;
  w.resize(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    w[i] = std::exp(-e * (ad::value_of(values[i]) - lo));
    sum += w[i];
  }
  const double result = lo - std::log(sum) / e;
  if constexpr (std::is_same_v<T, double>) {
    return result;
  } else {
    // d/dv_i = w_i / sum; d/deta = (sum_i p_i v_i - result) / eta.
    thread_local std::vector<ad::Operand> ops;
    ops.clear();
    double mean = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double p = w[i] / sum;
      mean += p * values[i].value();
      ops.push_back({values[i], p});
    }
    ops.push_back({eta, (mean - result) / e});
    return ad::Tape::apply(result, ops);
  }
}

template <class T>
T weighted_average(std::span<const T> values, std::span<const T> betas, WeightForm form) {
  if (values.empty() || values.size() != betas.size()) {
    throw ValidationError("weighted average needs equal, nonempty value and weight lists");
  }
  const std::size_t k = values.size();
  thread_local std::vector<double> w;
  w.resize(k);
  double total = 0.0;
  if (form == WeightForm::squared) {
    for (std::size_t i = 0; i < k; ++i) {
      const double b = ad::value_of(betas[i]);
      w[i] = b * b;
      total += w[i];
    }
    if (!(total > 0.0)) throw DomainError("degenerate weights: all betas are zero");
  } else {
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& b : betas) hi = std::max(hi, ad::value_of(b));
    for (std::size_t i = 0; i < k; ++i) {
      w[i] = std::exp(ad::value_of(betas[i]) - hi);
      total += w[i];
    }
  }
  double result = 0.0;
  for (std::size_t i = 0; i < k; ++i) result += (w[i] / total) * ad::value_of(values[i]);

  if constexpr (std::is_same_v<T, double>) {
    return result;
  } else {
    thread_local std::vector<ad::Operand> ops;
    ops.clear();
    for (std::size_t i = 0; i < k; ++i) {
      const double p = w[i] / total;
      const double spread = values[i].value() - result;
      ops.push_back({values[i], p});
      if (form == WeightForm::squared) {
        ops.push_back({betas[i], 2.0 * betas[i].value() * spread / total});
      } else {
        ops.push_back({betas[i], p * spread});
      }
    }
    return ad::Tape::apply(result, ops);
  }
}

namespace {

bool sat_at(const FormulaNode& node, const StateSeq<double>& traj, int t) {
  return std::visit(
      overloaded{
          [&](const stl::Predicate& p) {
            return lang::evaluate<double>(p.h, traj.at(t), static_cast<double>(t)) >= 0.0;
          },
          [&](const stl::And& n) { return sat_at(*n.lhs, traj, t) && sat_at(*n.rhs, traj, t); },
          [&](const stl::Or& n) { return sat_at(*n.lhs, traj, t) || sat_at(*n.rhs, traj, t); },
          [&](const stl::Always& n) {
            for (int k = n.window.lo; k <= n.window.hi; ++k) {
              if (!sat_at(*n.child, traj, t + k)) return false;
            }
            return true;
          },
          [&](const stl::Eventually& n) {
            for (int k = n.window.lo; k <= n.window.hi; ++k) {
              if (sat_at(*n.child, traj, t + k)) return true;
            }
            return false;
          },
          [&](const stl::Until& n) {
            for (int k = n.window.lo; k <= n.window.hi; ++k) {
              if (!sat_at(*n.rhs, traj, t + k)) continue;
              bool held = true;
              for (int j = 0; j < k && held; ++j) held = sat_at(*n.lhs, traj, t + j);
              if (held) return true;
            }
            return false;
          },
      },
      node.v);
}

double rob_at(const FormulaNode& node, const StateSeq<double>& traj, int t) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(
      overloaded{
          [&](const stl::Predicate& p) {
            return lang::evaluate<double>(p.h, traj.at(t), static_cast<double>(t));
          },
          [&](const stl::And& n) {
            return std::min(rob_at(*n.lhs, traj, t), rob_at(*n.rhs, traj, t));
          },
          [&](const stl::Or& n) {
            return std::max(rob_at(*n.lhs, traj, t), rob_at(*n.rhs, traj, t));
          },
          [&](const stl::Always& n) {
            double r = inf;
            for (int k = n.window.lo; k <= n.window.hi; ++k) {
              r = std::min(r, rob_at(*n.child, traj, t + k));
            }
            return r;
          },
          [&](const stl::Eventually& n) {
            double r = -inf;
            for (int k = n.window.lo; k <= n.window.hi; ++k) {
              r = std::max(r, rob_at(*n.child, traj, t + k));
            }
            return r;
          },
          [&](const stl::Until& n) {
            // Running minimum of the left operand over [t, t + k).
            double prefix = inf;
            double r = -inf;
            for (int k = 0; k <= n.window.hi; ++k) {
              if (k >= n.window.lo) r = std::max(r, std::min(rob_at(*n.rhs, traj, t + k), prefix));
              prefix = std::min(prefix, rob_at(*n.lhs, traj, t + k));
            }
            return r;
          },
      },
      node.v);
}

template <class T>
struct SmoothEvaluator {
  const StateSeq<T>& traj;
  std::span<const T> zeta;
  std::vector<std::size_t> offsets;  // by node id
  std::vector<std::size_t> lengths;
  WeightForm form;
  T eta;

  std::span<const T> betas(int node_id) const {
    const auto id = static_cast<std::size_t>(node_id);
    return zeta.subspan(offsets[id], lengths[id]);
  }

  T eval(const FormulaNode& node, int t) const {
    return std::visit(
        overloaded{
            [&](const stl::Predicate& p) -> T {
              return lang::evaluate<T>(p.h, traj.at(t), T(static_cast<double>(t)));
            },
            [&](const stl::And& n) -> T {
              const T v[2] = {eval(*n.lhs, t), eval(*n.rhs, t)};
              return softmin<T>(v, eta);
            },
            [&](const stl::Or& n) -> T {
              const T v[2] = {eval(*n.lhs, t), eval(*n.rhs, t)};
              return weighted_average<T>(v, betas(n.node_id), form);
            },
            [&](const stl::Always& n) -> T {
              std::vector<T> v;
              v.reserve(static_cast<std::size_t>(n.window.length()));
              for (int k = n.window.lo; k <= n.window.hi; ++k) v.push_back(eval(*n.child, t + k));
              return softmin<T>(v, eta);
            },
            [&](const stl::Eventually& n) -> T {
              std::vector<T> v;
              v.reserve(static_cast<std::size_t>(n.window.length()));
              for (int k = n.window.lo; k <= n.window.hi; ++k) v.push_back(eval(*n.child, t + k));
              return weighted_average<T>(v, betas(n.node_id), form);
            },
            [&](const stl::Until& n) -> T {
              // softmin(a, softmin(B)) == softmin(a, B...), so each term is a
              // single softmin over the right operand at k and the left operand
              // on [0, k).
              std::vector<T> left;
              for (int j = 0; j < n.window.hi; ++j) left.push_back(eval(*n.lhs, t + j));
              std::vector<T> terms;
              std::vector<T> group;
              for (int k = n.window.lo; k <= n.window.hi; ++k) {
                group.clear();
                group.push_back(eval(*n.rhs, t + k));
                group.insert(group.end(), left.begin(), left.begin() + k);
                terms.push_back(softmin<T>(group, eta));
              }
              return weighted_average<T>(terms, betas(n.node_id), form);
            },
        },
        node.v);
  }
};

}  // namespace

bool bool_sat(const stl::Formula& phi, const StateSeq<double>& traj, int t) {
  check_length(phi, traj.length(), t);
  return sat_at(phi.root(), traj, t);
}

double hard_robustness(const stl::Formula& phi, const StateSeq<double>& traj, int t) {
  check_length(phi, traj.length(), t);
  return rob_at(phi.root(), traj, t);
}

template <class T>
T stl2cbf(const stl::Formula& phi, const StateSeq<T>& traj, std::span<const T> zeta,
          WeightForm form, int t) {
  check_length(phi, traj.length(), t);
  SmoothEvaluator<T> ev{traj, zeta, {}, {}, form, T()};
  std::size_t offset = 1;
  for (const auto& slot : phi.disjunctions()) {
    ev.offsets.push_back(offset);
    ev.lengths.push_back(static_cast<std::size_t>(slot.weight_count));
    offset += static_cast<std::size_t>(slot.weight_count);
  }
  if (zeta.size() != offset) {
    throw ValidationError("smooth parameter vector has " + std::to_string(zeta.size()) +
                          " entries, formula needs " + std::to_string(offset));
  }
  ev.eta = zeta[0] * zeta[0] + T(1.0);
  return ev.eval(phi.root(), t);
}

template double softmin<double>(std::span<const double>, const double&);
template ad::Scalar softmin<ad::Scalar>(std::span<const ad::Scalar>, const ad::Scalar&);
template double weighted_average<double>(std::span<const double>, std::span<const double>,
                                         WeightForm);
template ad::Scalar weighted_average<ad::Scalar>(std::span<const ad::Scalar>,
                                                 std::span<const ad::Scalar>, WeightForm);
template double stl2cbf<double>(const stl::Formula&, const StateSeq<double>&,
                                std::span<const double>, WeightForm, int);
template ad::Scalar stl2cbf<ad::Scalar>(const stl::Formula&, const StateSeq<ad::Scalar>&,
                                        std::span<const ad::Scalar>, WeightForm, int);

}  // namespace stlforge::semantics
