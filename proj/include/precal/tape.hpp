#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "precal/errors.hpp"
#include "precal/scalar.hpp"

// Reverse-mode autodiff on an explicit tape.  Each node stores its forward
// value plus the local partials toward its parents, so the backward pass is a
// single reverse sweep with no op dispatch.  Ops are deliberately few: the
// mixture density, the hypernetwork and the smoothed-PIT objectives compose
// entirely from what is below.

namespace precal {

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kNeg,
  kMul,
  kDiv,
  kExp,
  kLog,
  kTanh,
  kRelu,
  kSigmoid,
  kSqrt,
  kSoftplus,
  kAbs,
  kPowConst,
  kAffine,   // constant-coefficient linear combination
  kSum,
  kDot,
  kLogSumExp,
  kOpCount_,
};

class Tape;

struct Var {
  Var() : tape_(nullptr), index_(-1) {}
  Var(Tape* tape, std::int32_t index) : tape_(tape), index_(index) {}

  Tape* tape() const { return tape_; }
  std::int32_t index() const { return index_; }
  inline double value() const;

 private:
  Tape* tape_;
  std::int32_t index_;
};

class Tape {
 public:
  struct Edge {
    std::uint32_t parent;
    double partial;
  };

  Tape() = default;

  void reserve(std::size_t nodes, std::size_t edges) {
    values_.reserve(nodes);
    ops_.reserve(nodes);
    edge_begin_.reserve(nodes + 1);
    edges_.reserve(edges);
  }

  std::size_t size() const { return values_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  double value(std::int32_t index) const { return values_[index]; }
  Op op(std::int32_t index) const { return ops_[index]; }

  void clear() {
    values_.clear();
    ops_.clear();
    edge_begin_.clear();
    edges_.clear();
  }

  Var leaf(double v) { return push(Op::kLeaf, v, {}); }
  Var constant(double v) { return push(Op::kConst, v, {}); }

  std::vector<Var> leaves(std::span<const double> values) {
    std::vector<Var> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(leaf(v));
    return out;
  }

  // Public so extensions can register composite nodes; validate() rejects
  // tags outside the known set.
  Var push(Op op, double value, std::initializer_list<Edge> edges) {
    return push_impl(op, value, edges.begin(), edges.size());
  }
  Var push(Op op, double value, std::span<const Edge> edges) {
    return push_impl(op, value, edges.data(), edges.size());
  }

  // Structural check: every edge points backward, every op tag is known.
  void validate() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (static_cast<std::uint8_t>(ops_[i]) >= static_cast<std::uint8_t>(Op::kOpCount_))
        throw UnregisteredPrimitive("tape: unknown op tag");
      for (std::size_t e = edge_begin_[i]; e < edge_begin_[i + 1]; ++e)
        if (edges_[e].parent >= i) throw NumericError("tape: edge does not point backward");
    }
  }

  // Reverse sweep.  Returns one adjoint per node; seeds assign initial
  // adjoints to output nodes (typically {loss, 1.0}).
  std::vector<double> backward(std::span<const std::pair<Var, double>> seeds) const {
    std::vector<double> adjoint(values_.size(), 0.0);
    for (const auto& [var, weight] : seeds) adjoint[var.index()] += weight;
    for (std::size_t i = values_.size(); i-- > 0;) {
      const double a = adjoint[i];
      if (a == 0.0) continue;
      for (std::size_t e = edge_begin_[i]; e < edge_begin_[i + 1]; ++e)
        adjoint[edges_[e].parent] += a * edges_[e].partial;
    }
    return adjoint;
  }

  std::vector<double> gradient(Var output) const {
    const std::pair<Var, double> seed[] = {{output, 1.0}};
    return backward(seed);
  }

 private:
  Var push_impl(Op op, double value, const Edge* edges, std::size_t n) {
    if (!std::isfinite(value)) throw NonFiniteValue("tape: non-finite forward value");
    if (edge_begin_.empty()) edge_begin_.push_back(0);
    const std::int32_t index = static_cast<std::int32_t>(values_.size());
    values_.push_back(value);
    ops_.push_back(op);
    edges_.insert(edges_.end(), edges, edges + n);
    edge_begin_.push_back(static_cast<std::uint32_t>(edges_.size()));
    return Var(this, index);
  }

  std::vector<double> values_;
  std::vector<Op> ops_;
  std::vector<std::uint32_t> edge_begin_;  // size() + 1 entries once non-empty
  std::vector<Edge> edges_;
};

inline double Var::value() const { return tape_->value(index_); }
inline double value_of(Var v) { return v.value(); }

namespace detail {
inline std::uint32_t uidx(Var v) { return static_cast<std::uint32_t>(v.index()); }
}  // namespace detail

// ---- binary arithmetic ----------------------------------------------------

inline Var operator+(Var a, Var b) {
  return a.tape()->push(Op::kAdd, a.value() + b.value(),
                        {{detail::uidx(a), 1.0}, {detail::uidx(b), 1.0}});
}
inline Var operator+(Var a, double b) {
  return a.tape()->push(Op::kAdd, a.value() + b, {{detail::uidx(a), 1.0}});
}
inline Var operator+(double a, Var b) { return b + a; }

inline Var operator-(Var a, Var b) {
  return a.tape()->push(Op::kSub, a.value() - b.value(),
                        {{detail::uidx(a), 1.0}, {detail::uidx(b), -1.0}});
}
inline Var operator-(Var a, double b) {
  return a.tape()->push(Op::kSub, a.value() - b, {{detail::uidx(a), 1.0}});
}
inline Var operator-(double a, Var b) {
  return b.tape()->push(Op::kSub, a - b.value(), {{detail::uidx(b), -1.0}});
}
inline Var operator-(Var a) {
  return a.tape()->push(Op::kNeg, -a.value(), {{detail::uidx(a), -1.0}});
}

inline Var operator*(Var a, Var b) {
  return a.tape()->push(Op::kMul, a.value() * b.value(),
                        {{detail::uidx(a), b.value()}, {detail::uidx(b), a.value()}});
}
inline Var operator*(Var a, double b) {
  return a.tape()->push(Op::kMul, a.value() * b, {{detail::uidx(a), b}});
}
inline Var operator*(double a, Var b) { return b * a; }

inline Var operator/(Var a, Var b) {
  const double bv = b.value();
  const double v = a.value() / bv;
  return a.tape()->push(Op::kDiv, v, {{detail::uidx(a), 1.0 / bv}, {detail::uidx(b), -v / bv}});
}
inline Var operator/(Var a, double b) {
  return a.tape()->push(Op::kDiv, a.value() / b, {{detail::uidx(a), 1.0 / b}});
}
inline Var operator/(double a, Var b) {
  const double bv = b.value();
  const double v = a / bv;
  return b.tape()->push(Op::kDiv, v, {{detail::uidx(b), -v / bv}});
}

inline Var& operator+=(Var& a, Var b) { return a = a + b; }
inline Var& operator+=(Var& a, double b) { return a = a + b; }

// ---- unary primitives ------------------------------------------------------

inline Var exp(Var a) {
  const double v = std::exp(a.value());
  return a.tape()->push(Op::kExp, v, {{detail::uidx(a), v}});
}

inline Var log(Var a) {
  return a.tape()->push(Op::kLog, std::log(a.value()), {{detail::uidx(a), 1.0 / a.value()}});
}

inline Var tanh(Var a) {
  const double t = std::tanh(a.value());
  return a.tape()->push(Op::kTanh, t, {{detail::uidx(a), 1.0 - t * t}});
}

inline Var relu(Var a) {
  const double x = a.value();
  return a.tape()->push(Op::kRelu, relu(x), {{detail::uidx(a), x > 0.0 ? 1.0 : 0.0}});
}

inline Var sigmoid(Var a) {
  const double s = sigmoid(a.value());
  return a.tape()->push(Op::kSigmoid, s, {{detail::uidx(a), s * (1.0 - s)}});
}

inline Var sqrt(Var a) {
  const double r = std::sqrt(a.value());
  return a.tape()->push(Op::kSqrt, r, {{detail::uidx(a), 0.5 / r}});
}

inline Var softplus(Var a) {
  return a.tape()->push(Op::kSoftplus, softplus(a.value()),
                        {{detail::uidx(a), sigmoid(a.value())}});
}

inline Var abs(Var a) {
  const double x = a.value();
  const double sign = (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  return a.tape()->push(Op::kAbs, std::fabs(x), {{detail::uidx(a), sign}});
}

inline Var pow_const(Var a, double p) {
  const double x = a.value();
  return a.tape()->push(Op::kPowConst, std::pow(x, p), {{detail::uidx(a), p * std::pow(x, p - 1.0)}});
}

// ---- reductions ------------------------------------------------------------

inline Var sum(std::span<const Var> v) {
  if (v.empty()) throw EmptySampleSet("sum: empty span");
  Tape* tape = v.front().tape();
  std::vector<double> vals(v.size());
  std::vector<Tape::Edge> edges(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    vals[i] = v[i].value();
    edges[i] = {detail::uidx(v[i]), 1.0};
  }
  return tape->push(Op::kSum, detail::sum_values(vals.data(), vals.size()), edges);
}

inline Var mean(std::span<const Var> v) {
  return sum(v) / static_cast<double>(v.size());
}

inline Var dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size() || a.empty()) throw DimensionMismatch("dot: size mismatch");
  Tape* tape = a.front().tape();
  std::vector<double> av(a.size()), bv(a.size());
  std::vector<Tape::Edge> edges(2 * a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    av[i] = a[i].value();
    bv[i] = b[i].value();
    edges[i] = {detail::uidx(a[i]), bv[i]};
    edges[a.size() + i] = {detail::uidx(b[i]), av[i]};
  }
  return tape->push(Op::kDot, detail::dot_values(av.data(), bv.data(), a.size()), edges);
}

// Linear combination with constant coefficients: sum_i a_i * w_i.
inline Var dot(std::span<const Var> a, std::span<const double> w) {
  if (a.size() != w.size() || a.empty()) throw DimensionMismatch("dot: size mismatch");
  Tape* tape = a.front().tape();
  std::vector<double> av(a.size());
  std::vector<Tape::Edge> edges(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    av[i] = a[i].value();
    edges[i] = {detail::uidx(a[i]), w[i]};
  }
  return tape->push(Op::kAffine, detail::dot_values(av.data(), w.data(), a.size()), edges);
}
inline Var dot(std::span<const double> w, std::span<const Var> a) { return dot(a, w); }

inline Var logsumexp(std::span<const Var> v) {
  if (v.empty()) throw EmptySampleSet("logsumexp: empty span");
  Tape* tape = v.front().tape();
  std::vector<double> vals(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) vals[i] = v[i].value();
  const double lse = detail::logsumexp_values(vals.data(), vals.size());
  // Partials are the softmax weights; this node doubles as the
  // softmax/log-sum-exp primitive.
  std::vector<Tape::Edge> edges(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    edges[i] = {detail::uidx(v[i]), std::exp(vals[i] - lse)};
  return tape->push(Op::kLogSumExp, lse, edges);
}

}  // namespace precal
