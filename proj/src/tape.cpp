#include "stlforge/tape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace stlforge::ad {

Tape::Tape(std::size_t reserve_nodes) {
  values_.reserve(reserve_nodes);
  edge_begin_.reserve(reserve_nodes + 1);
  edge_arg_.reserve(2 * reserve_nodes);
  edge_partial_.reserve(2 * reserve_nodes);
  edge_begin_.push_back(0);
}

Scalar Tape::push(double value, std::span<const Operand> operands) {
  for (const auto& op : operands) {
    if (op.arg.tape_ == nullptr) continue;
    edge_arg_.push_back(op.arg.index_);
    edge_partial_.push_back(op.partial);
  }
  const auto index = static_cast<std::uint32_t>(values_.size());
  values_.push_back(value);
  edge_begin_.push_back(static_cast<std::uint32_t>(edge_arg_.size()));
  return Scalar(this, index, value);
}

Scalar Tape::input(double value) {
  Scalar s = push(value, {});
  inputs_.push_back(s.index_);
  return s;
}

Scalar Tape::constant(double value) { return push(value, {}); }

Scalar Tape::apply(double value, std::span<const Operand> operands) {
  Tape* tape = nullptr;
  for (const auto& op : operands) {
    if (op.arg.tape_ == nullptr) continue;
    if (tape == nullptr) {
      tape = op.arg.tape_;
    } else if (tape != op.arg.tape_) {
      throw MixedTapeError();
    }
  }
  if (tape == nullptr) return Scalar(value);
  return tape->push(value, operands);
}

std::vector<double> Tape::backward(const Scalar& root) const {
  std::vector<double> grad(inputs_.size(), 0.0);
  if (root.tape_ == nullptr) return grad;
  if (root.tape_ != this) throw MixedTapeError();

  std::vector<double> adjoint(root.index_ + 1, 0.0);
  adjoint[root.index_] = 1.0;
  for (std::size_t i = root.index_ + 1; i-- > 0;) {
    const double a = adjoint[i];
    if (a == 0.0) continue;
    for (std::uint32_t e = edge_begin_[i]; e < edge_begin_[i + 1]; ++e) {
      adjoint[edge_arg_[e]] += a * edge_partial_[e];
    }
  }
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    if (inputs_[k] <= root.index_) grad[k] = adjoint[inputs_[k]];
  }
  return grad;
}

namespace {

Scalar unary(double value, const Scalar& x, double partial) {
  const std::array<Operand, 1> ops{{{x, partial}}};
  return Tape::apply(value, ops);
}

Scalar binary(double value, const Scalar& a, double pa, const Scalar& b, double pb) {
  const std::array<Operand, 2> ops{{{a, pa}, {b, pb}}};
  return Tape::apply(value, ops);
}

[[noreturn]] void domain(const char* op, double x) {
  throw DomainError(std::string(op) + " undefined at " + std::to_string(x));
}

}  // namespace

double divide(double a, double b) {
  if (b == 0.0) throw DomainError("division by zero");
  return a / b;
}

double exp(double x) { return std::exp(x); }

double ln(double x) {
  if (!(x > 0.0)) domain("ln", x);
  return std::log(x);
}

double sqrt(double x) {
  if (x < 0.0 || std::isnan(x)) domain("sqrt", x);
  return std::sqrt(x);
}

double sin(double x) { return std::sin(x); }
double cos(double x) { return std::cos(x); }
double tan(double x) { return std::tan(x); }
double tanh(double x) { return std::tanh(x); }

double sigmoid(double x) {
  // Split on sign so neither branch overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double pow(double x, double exponent) {
  if (x == 0.0 && exponent < 0.0) throw DomainError("division by zero in pow");
  const double r = std::pow(x, exponent);
  if (std::isnan(r) && !std::isnan(x)) domain("pow", x);
  return r;
}

Scalar operator+(const Scalar& a, const Scalar& b) {
  return binary(a.value() + b.value(), a, 1.0, b, 1.0);
}

Scalar operator-(const Scalar& a, const Scalar& b) {
  return binary(a.value() - b.value(), a, 1.0, b, -1.0);
}

Scalar operator*(const Scalar& a, const Scalar& b) {
  return binary(a.value() * b.value(), a, b.value(), b, a.value());
}

Scalar operator/(const Scalar& a, const Scalar& b) {
  const double q = divide(a.value(), b.value());
  return binary(q, a, 1.0 / b.value(), b, -q / b.value());
}

Scalar operator-(const Scalar& a) { return unary(-a.value(), a, -1.0); }

Scalar exp(const Scalar& x) {
  const double v = std::exp(x.value());
  return unary(v, x, v);
}

Scalar ln(const Scalar& x) { return unary(ln(x.value()), x, 1.0 / x.value()); }

Scalar sqrt(const Scalar& x) {
  const double v = sqrt(x.value());
  return unary(v, x, 0.5 / v);
}

Scalar sin(const Scalar& x) { return unary(std::sin(x.value()), x, std::cos(x.value())); }
Scalar cos(const Scalar& x) { return unary(std::cos(x.value()), x, -std::sin(x.value())); }

Scalar tan(const Scalar& x) {
  const double v = std::tan(x.value());
  return unary(v, x, 1.0 + v * v);
}

Scalar tanh(const Scalar& x) {
  const double v = std::tanh(x.value());
  return unary(v, x, 1.0 - v * v);
}

Scalar sigmoid(const Scalar& x) {
  const double v = sigmoid(x.value());
  return unary(v, x, v * (1.0 - v));
}

Scalar pow(const Scalar& x, double exponent) {
  const double v = pow(x.value(), exponent);
  double partial = 0.0;
  if (exponent != 0.0) partial = exponent * pow(x.value(), exponent - 1.0);
  return unary(v, x, partial);
}

double dot(std::span<const double> a, std::span<const double> b, double bias) {
  double s = bias;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Scalar dot(std::span<const Scalar> a, std::span<const Scalar> b, const Scalar& bias) {
  thread_local std::vector<Operand> ops;
  ops.clear();
  double s = bias.value();
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i].value() * b[i].value();
    ops.push_back({a[i], b[i].value()});
    ops.push_back({b[i], a[i].value()});
  }
  ops.push_back({bias, 1.0});
  return Tape::apply(s, ops);
}

double linear_combination(std::span<const double> x, std::span<const double> coeffs) {
  return dot(x, coeffs, 0.0);
}

Scalar linear_combination(std::span<const Scalar> x, std::span<const double> coeffs) {
  thread_local std::vector<Operand> ops;
  ops.clear();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += coeffs[i] * x[i].value();
    ops.push_back({x[i], coeffs[i]});
  }
  return Tape::apply(s, ops);
}

double check_gradient(const GraphBuilder& builder, std::span<const double> at, double h) {
  Tape tape;
  std::vector<Scalar> inputs;
  inputs.reserve(at.size());
  for (double v : at) inputs.push_back(tape.input(v));
  const Scalar root = builder(inputs);
  const std::vector<double> analytic = tape.backward(root);

  auto evaluate = [&](std::span<const double> point) {
    std::vector<Scalar> constants(point.begin(), point.end());
    return builder(constants).value();
  };

  double worst = 0.0;
  std::vector<double> probe(at.begin(), at.end());
  for (std::size_t i = 0; i < at.size(); ++i) {
    probe[i] = at[i] + h;
    const double up = evaluate(probe);
    probe[i] = at[i] - h;
    const double down = evaluate(probe);
    probe[i] = at[i];
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace stlforge::ad
