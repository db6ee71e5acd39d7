#pragma once

// Reverse-mode scalar automatic differentiation.
//
// A Tape records every operation as a node holding its value and the local
// partial derivatives with respect to its operands. Nodes are appended in
// evaluation order, so the node list is already topologically sorted and a
// single reverse sweep propagates adjoints.
//
// A Scalar with no tape is a plain constant. Mixing a constant with a taped
// Scalar records nothing for the constant; mixing Scalars from two different
// tapes throws.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "stlforge/error.hpp"

namespace stlforge::ad {

class Tape;

class Scalar {
 public:
  Scalar() = default;
  // Implicit on purpose: lets generic numeric code write `T(2.0)` or mix
  // literals with Scalars.
  Scalar(double value) : value_(value) {}  // NOLINT(google-explicit-constructor)

  double value() const noexcept { return value_; }
  Tape* tape() const noexcept { return tape_; }
  std::uint32_t index() const noexcept { return index_; }
  bool is_constant() const noexcept { return tape_ == nullptr; }

 private:
  friend class Tape;
  Scalar(Tape* tape, std::uint32_t index, double value)
      : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
  double value_ = 0.0;
};

// One operand of a recorded node together with d(result)/d(operand).
struct Operand {
  Scalar arg;
  double partial;
};

class MixedTapeError : public std::logic_error {
 public:
  MixedTapeError() : std::logic_error("operands belong to different tapes") {}
};

class Tape {
 public:
  explicit Tape(std::size_t reserve_nodes = 0);

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf whose adjoint is reported by backward(), in creation order.
  Scalar input(double value);
  // Recorded leaf with no reported adjoint.
  Scalar constant(double value);

  // Records a node with an eagerly computed value. Constant operands are
  // dropped; if every operand is constant the result is a constant too.
  static Scalar apply(double value, std::span<const Operand> operands);

  // d(root)/d(input_i) for every input, in creation order.
  std::vector<double> backward(const Scalar& root) const;

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t num_inputs() const noexcept { return inputs_.size(); }
  std::size_t num_edges() const noexcept { return edge_arg_.size(); }

 private:
  Scalar push(double value, std::span<const Operand> operands);

  std::vector<double> values_;
  std::vector<std::uint32_t> edge_begin_;
  std::vector<std::uint32_t> edge_arg_;
  std::vector<double> edge_partial_;
  std::vector<std::uint32_t> inputs_;
};

// Elementary operations. The double overloads apply the same domain checks so
// numeric and recorded evaluation fail identically.

Scalar operator+(const Scalar& a, const Scalar& b);
Scalar operator-(const Scalar& a, const Scalar& b);
Scalar operator*(const Scalar& a, const Scalar& b);
Scalar operator/(const Scalar& a, const Scalar& b);
Scalar operator-(const Scalar& a);

inline Scalar& operator+=(Scalar& a, const Scalar& b) { return a = a + b; }
inline Scalar& operator-=(Scalar& a, const Scalar& b) { return a = a - b; }
inline Scalar& operator*=(Scalar& a, const Scalar& b) { return a = a * b; }
inline Scalar& operator/=(Scalar& a, const Scalar& b) { return a = a / b; }

Scalar exp(const Scalar& x);
Scalar ln(const Scalar& x);
Scalar sqrt(const Scalar& x);
Scalar sin(const Scalar& x);
Scalar cos(const Scalar& x);
Scalar tan(const Scalar& x);
Scalar tanh(const Scalar& x);
Scalar sigmoid(const Scalar& x);
Scalar pow(const Scalar& x, double exponent);

double divide(double a, double b);
double exp(double x);
double ln(double x);
double sqrt(double x);
double sin(double x);
double cos(double x);
double tan(double x);
double tanh(double x);
double sigmoid(double x);
double pow(double x, double exponent);

inline double value_of(double x) noexcept { return x; }
inline double value_of(const Scalar& x) noexcept { return x.value(); }

// bias + sum_i a_i * b_i as a single node.
double dot(std::span<const double> a, std::span<const double> b, double bias);
Scalar dot(std::span<const Scalar> a, std::span<const Scalar> b, const Scalar& bias);

// sum_i coeffs_i * x_i as a single node.
double linear_combination(std::span<const double> x, std::span<const double> coeffs);
Scalar linear_combination(std::span<const Scalar> x, std::span<const double> coeffs);

// Largest relative error between backward() and central differences
// (f(x + h e_i) - f(x - h e_i)) / 2h over all coordinates. The relative error
// of coordinate i is |analytic - numeric| / max(1, |analytic|).
using GraphBuilder = std::function<Scalar(std::span<const Scalar>)>;
double check_gradient(const GraphBuilder& builder, std::span<const double> at, double h);

}  // namespace stlforge::ad
