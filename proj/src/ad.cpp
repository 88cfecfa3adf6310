#include "sigmaforge/ad.hpp"

#include "sigmaforge/error.hpp"

#include <cmath>
#include <string>

namespace sigmaforge::ad {

std::string_view op_name(Op op) noexcept {
  switch (op) {
    case Op::Const: return "const";
    case Op::Param: return "param";
    case Op::Input: return "input";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Relu: return "relu";
    case Op::AdjSoftplus: return "adjusted_softplus";
    case Op::FloorAt: return "floor_at";
  }
  return "?";
}

namespace {

double apply(Op op, double a, double b, double aux) {
  switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    case Op::Neg: return -a;
    case Op::Square: return a * a;
    case Op::Sqrt: return std::sqrt(a);
    case Op::Exp: return std::exp(a);
    case Op::Log: return std::log(a);
    case Op::Tanh: return std::tanh(a);
    case Op::Sigmoid: return sigmaforge::sigmoid(a);
    case Op::Relu: return sigmaforge::relu(a);
    case Op::AdjSoftplus: return sigmaforge::adjusted_softplus(a, aux);
    case Op::FloorAt: return sigmaforge::floor_at(a, aux);
    case Op::Const:
    case Op::Param:
    case Op::Input: break;
  }
  return aux;
}

}  // namespace

std::int32_t Tape::push(const Node& node, double value) {
  nodes_.push_back(node);
  values_.push_back(value);
  return static_cast<std::int32_t>(nodes_.size() - 1);
}

std::int32_t Tape::node_of(const Var& v) {
  if (v.tape == this) return v.idx;
  return push(Node{Op::Const, -1, -1, v.val}, v.val);
}

Var Tape::param(std::size_t slot, double value) {
  if (slot != param_nodes_.size()) fail(ErrorKind::InvalidInput, "parameter slots must be registered in order");
  const auto i = push(Node{Op::Param, static_cast<std::int32_t>(slot), -1, 0.0}, value);
  param_nodes_.push_back(i);
  return Var(value, i, this);
}

Var Tape::input(std::size_t slot, double value) {
  if (slot != input_nodes_.size()) fail(ErrorKind::InvalidInput, "input slots must be registered in order");
  const auto i = push(Node{Op::Input, static_cast<std::int32_t>(slot), -1, 0.0}, value);
  input_nodes_.push_back(i);
  return Var(value, i, this);
}

Var Tape::constant(double value) { return Var(value, push(Node{Op::Const, -1, -1, value}, value), this); }

Var Tape::record(Op op, const Var& a, double value, double aux) {
  const auto ia = node_of(a);
  return Var(value, push(Node{op, ia, -1, aux}, value), this);
}

Var Tape::record(Op op, const Var& a, const Var& b, double value) {
  const auto ia = node_of(a);
  const auto ib = node_of(b);
  return Var(value, push(Node{op, ia, ib, 0.0}, value), this);
}

void Tape::set_output(const Var& v) {
  if (v.tape != this) fail(ErrorKind::InvalidInput, "output does not depend on this tape");
  output_ = v.idx;
}

void Tape::set_inputs(std::span<const double> inputs) {
  if (inputs.size() != input_nodes_.size()) fail(ErrorKind::Shape, "input count does not match tape");
  for (std::size_t k = 0; k < inputs.size(); ++k) values_[static_cast<std::size_t>(input_nodes_[k])] = inputs[k];
}

double Tape::forward(std::span<const double> params) {
  if (params.size() != param_nodes_.size()) fail(ErrorKind::Shape, "parameter count does not match tape");
  if (output_ < 0) fail(ErrorKind::InvalidInput, "tape has no output");
  const std::size_t n = nodes_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Node& nd = nodes_[i];
    double v;
    switch (nd.op) {
      case Op::Const:
      case Op::Input: continue;
      case Op::Param: v = params[static_cast<std::size_t>(nd.a)]; break;
      default:
        v = apply(nd.op, values_[static_cast<std::size_t>(nd.a)],
                  nd.b >= 0 ? values_[static_cast<std::size_t>(nd.b)] : 0.0, nd.aux);
    }
    if (!std::isfinite(v)) {
      fail(ErrorKind::NonFinite, "node " + std::to_string(i) + " (" + std::string(op_name(nd.op)) +
                                     ") evaluated to " + std::to_string(v));
    }
    values_[i] = v;
  }
  return values_[static_cast<std::size_t>(output_)];
}

void Tape::backward(std::span<double> grads) const {
  if (grads.size() != param_nodes_.size()) fail(ErrorKind::Shape, "gradient buffer has wrong length");
  if (output_ < 0) fail(ErrorKind::InvalidInput, "tape has no output");
  adjoint_.assign(static_cast<std::size_t>(output_) + 1, 0.0);
  adjoint_[static_cast<std::size_t>(output_)] = 1.0;
  for (std::size_t i = static_cast<std::size_t>(output_) + 1; i-- > 0;) {
    const double g = adjoint_[i];
    if (g == 0.0) continue;
    const Node& nd = nodes_[i];
    if (nd.a < 0 || nd.op == Op::Param || nd.op == Op::Input) continue;
    const auto ia = static_cast<std::size_t>(nd.a);
    const double a = values_[ia];
    const double out = values_[i];
    switch (nd.op) {
      case Op::Add:
        adjoint_[ia] += g;
        adjoint_[static_cast<std::size_t>(nd.b)] += g;
        break;
      case Op::Sub:
        adjoint_[ia] += g;
        adjoint_[static_cast<std::size_t>(nd.b)] -= g;
        break;
      case Op::Mul: {
        const auto ib = static_cast<std::size_t>(nd.b);
        adjoint_[ia] += g * values_[ib];
        adjoint_[ib] += g * a;
        break;
      }
      case Op::Div: {
        const auto ib = static_cast<std::size_t>(nd.b);
        const double b = values_[ib];
        adjoint_[ia] += g / b;
        adjoint_[ib] -= g * out / b;
        break;
      }
      case Op::Neg: adjoint_[ia] -= g; break;
      case Op::Square: adjoint_[ia] += 2.0 * g * a; break;
      case Op::Sqrt: adjoint_[ia] += out > 0.0 ? 0.5 * g / out : 0.0; break;
      case Op::Exp: adjoint_[ia] += g * out; break;
      case Op::Log: adjoint_[ia] += g / a; break;
      case Op::Tanh: adjoint_[ia] += g * (1.0 - out * out); break;
      case Op::Sigmoid: adjoint_[ia] += g * out * (1.0 - out); break;
      case Op::Relu: adjoint_[ia] += a > 0.0 ? g : 0.0; break;
      case Op::AdjSoftplus: adjoint_[ia] += g * sigmaforge::adjusted_softplus_grad(a, nd.aux); break;
      case Op::FloorAt: adjoint_[ia] += a > nd.aux ? g : 0.0; break;
      case Op::Const:
      case Op::Param:
      case Op::Input: break;
    }
  }
  for (std::size_t k = 0; k < param_nodes_.size(); ++k) {
    const auto node = static_cast<std::size_t>(param_nodes_[k]);
    grads[k] = node < adjoint_.size() ? adjoint_[node] : 0.0;
  }
}

std::pair<double, Eigen::VectorXd> evaluate_with_gradients(Tape& program, std::span<const double> params) {
  const double loss = program.forward(params);
  Eigen::VectorXd grads(static_cast<Eigen::Index>(program.num_params()));
  program.backward(std::span<double>(grads.data(), static_cast<std::size_t>(grads.size())));
  return {loss, std::move(grads)};
}

// ---------------------------------------------------------------------------
// Var arithmetic

namespace {

Tape* tape_of(const Var& a, const Var& b) { return a.tape ? a.tape : b.tape; }

bool is_const(const Var& v, double c) { return v.tape == nullptr && v.val == c; }

}  // namespace

Var operator+(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  if (!t) return Var(a.val + b.val);
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  return t->record(Op::Add, a, b, a.val + b.val);
}

Var operator-(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  if (!t) return Var(a.val - b.val);
  if (is_const(b, 0.0)) return a;
  return t->record(Op::Sub, a, b, a.val - b.val);
}

Var operator*(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  if (!t) return Var(a.val * b.val);
  if (is_const(a, 0.0) || is_const(b, 0.0)) return Var(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  return t->record(Op::Mul, a, b, a.val * b.val);
}

Var operator/(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  if (!t) return Var(a.val / b.val);
  if (is_const(b, 1.0)) return a;
  return t->record(Op::Div, a, b, a.val / b.val);
}

Var operator-(const Var& a) {
  if (!a.tape) return Var(-a.val);
  return a.tape->record(Op::Neg, a, -a.val);
}

Var& Var::operator+=(const Var& o) { return *this = *this + o; }
Var& Var::operator-=(const Var& o) { return *this = *this - o; }
Var& Var::operator*=(const Var& o) { return *this = *this * o; }
Var& Var::operator/=(const Var& o) { return *this = *this / o; }

namespace {

template <class F>
Var unary(Op op, const Var& x, F&& f, double aux = 0.0) {
  const double v = f(x.val);
  if (!x.tape) return Var(v);
  return x.tape->record(op, x, v, aux);
}

}  // namespace

Var square(const Var& x) { return unary(Op::Square, x, [](double v) { return v * v; }); }
Var sqrt(const Var& x) { return unary(Op::Sqrt, x, [](double v) { return std::sqrt(v); }); }
Var exp(const Var& x) { return unary(Op::Exp, x, [](double v) { return std::exp(v); }); }
Var log(const Var& x) { return unary(Op::Log, x, [](double v) { return std::log(v); }); }
Var tanh(const Var& x) { return unary(Op::Tanh, x, [](double v) { return std::tanh(v); }); }
Var sigmoid(const Var& x) { return unary(Op::Sigmoid, x, [](double v) { return sigmaforge::sigmoid(v); }); }
Var relu(const Var& x) { return unary(Op::Relu, x, [](double v) { return sigmaforge::relu(v); }); }

Var adjusted_softplus(const Var& x, double beta) {
  return unary(Op::AdjSoftplus, x, [beta](double v) { return sigmaforge::adjusted_softplus(v, beta); }, beta);
}

Var floor_at(const Var& x, double lo) {
  return unary(Op::FloorAt, x, [lo](double v) { return sigmaforge::floor_at(v, lo); }, lo);
}

}  // namespace sigmaforge::ad
