#pragma once

#include "sigmaforge/activations.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace sigmaforge::ad {

enum class Op : std::uint8_t {
  Const,
  Param,
  Input,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Square,
  Sqrt,
  Exp,
  Log,
  Tanh,
  Sigmoid,
  Relu,
  AdjSoftplus,  // aux = beta
  FloorAt,      // aux = floor
};

std::string_view op_name(Op op) noexcept;

/// One recorded operation. Operands always precede the node (topological
/// order). For Param/Input nodes `a` holds the slot number; for Const `aux`
/// holds the value.
struct Node {
  Op op;
  std::int32_t a = -1;
  std::int32_t b = -1;
  double aux = 0.0;
};

class Tape;

/// Scalar that records onto a Tape. A Var without a tape is a plain constant,
/// so expressions that never touch a parameter or input fold away.
struct Var {
  double val = 0.0;
  std::int32_t idx = -1;
  Tape* tape = nullptr;

  Var() = default;
  Var(double v) : val(v) {}  // NOLINT: implicit for mixed arithmetic
  Var(int v) : val(static_cast<double>(v)) {}  // NOLINT
  Var(double v, std::int32_t i, Tape* t) : val(v), idx(i), tape(t) {}

  bool is_constant() const noexcept { return tape == nullptr; }
  double value() const noexcept { return val; }

  Var& operator+=(const Var& o);
  Var& operator-=(const Var& o);
  Var& operator*=(const Var& o);
  Var& operator/=(const Var& o);
};

/// Reverse-mode record of a scalar program. Built once by running templated
/// code on Var, then replayed with new parameter/input values any number of
/// times via `forward` and differentiated via `backward`.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  void reserve(std::size_t n) {
    nodes_.reserve(n);
    values_.reserve(n);
  }

  /// Leaf bound to parameter slot `slot` (slots must be registered densely).
  Var param(std::size_t slot, double value);
  /// Leaf bound to a data slot whose value can change between replays.
  Var input(std::size_t slot, double value);
  Var constant(double value);

  Var record(Op op, const Var& a, double value, double aux = 0.0);
  Var record(Op op, const Var& a, const Var& b, double value);

  void set_output(const Var& v);
  std::int32_t output() const noexcept { return output_; }

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t num_params() const noexcept { return param_nodes_.size(); }
  std::size_t num_inputs() const noexcept { return input_nodes_.size(); }
  std::span<const Node> nodes() const noexcept { return nodes_; }
  std::span<const double> values() const noexcept { return values_; }

  void set_inputs(std::span<const double> inputs);

  /// Recomputes every node for `params`; throws NonFinite naming the first
  /// node whose value is NaN/Inf. Returns the output value.
  double forward(std::span<const double> params);

  /// Reverse sweep over the values left by the last forward/record pass.
  /// `grads` must have num_params() entries; it is overwritten.
  void backward(std::span<double> grads) const;

 private:
  std::int32_t push(const Node& node, double value);
  std::int32_t node_of(const Var& v);

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<std::int32_t> param_nodes_;
  std::vector<std::int32_t> input_nodes_;
  std::int32_t output_ = -1;
  mutable std::vector<double> adjoint_;
};

/// Loss value and exact reverse-mode gradient of `program` at `params`.
std::pair<double, Eigen::VectorXd> evaluate_with_gradients(Tape& program,
                                                           std::span<const double> params);

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var operator+(const Var& a) { return a; }

inline bool operator<(const Var& a, const Var& b) { return a.val < b.val; }
inline bool operator>(const Var& a, const Var& b) { return a.val > b.val; }
inline bool operator<=(const Var& a, const Var& b) { return a.val <= b.val; }
inline bool operator>=(const Var& a, const Var& b) { return a.val >= b.val; }
inline bool operator==(const Var& a, const Var& b) { return a.val == b.val && a.idx == b.idx; }
inline bool operator!=(const Var& a, const Var& b) { return !(a == b); }

Var square(const Var& x);
Var sqrt(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var adjusted_softplus(const Var& x, double beta = 1.0);
Var floor_at(const Var& x, double lo);

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.val; }

}  // namespace sigmaforge::ad

namespace Eigen {

template <>
struct NumTraits<sigmaforge::ad::Var> : NumTraits<double> {
  using Real = sigmaforge::ad::Var;
  using NonInteger = sigmaforge::ad::Var;
  using Nested = sigmaforge::ad::Var;
  using Literal = sigmaforge::ad::Var;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3,
  };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<sigmaforge::ad::Var, double, BinaryOp> {
  using ReturnType = sigmaforge::ad::Var;
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, sigmaforge::ad::Var, BinaryOp> {
  using ReturnType = sigmaforge::ad::Var;
};

}  // namespace Eigen
