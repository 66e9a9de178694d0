#include "precal/param_vector.hpp"

#include <cmath>

namespace precal {

std::vector<double> grad(const LossFn& f, const ParamVector& at, double* value_out) {
  Tape tape;
  std::vector<Var> leaves = tape.leaves(at.values());
  Var out = f(tape, leaves);
  tape.validate();
  if (value_out) *value_out = out.value();
  std::vector<double> adjoint = tape.gradient(out);
  std::vector<double> g(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) g[i] = adjoint[leaves[i].index()];
  return g;
}

GradCheckResult check_gradient(const std::function<double(const ParamVector&)>& value_fn,
                               std::span<const double> analytic, const ParamVector& at,
                               double h) {
  if (analytic.size() != at.size())
    throw DimensionMismatch("check_gradient: gradient size mismatch");
  GradCheckResult result;
  ParamVector probe = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + h;
    const double up = value_fn(probe);
    probe[i] = original - h;
    const double down = value_fn(probe);
    probe[i] = original;
    const double fd = (up - down) / (2.0 * h);
    const double rel = std::fabs(analytic[i] - fd) / (std::fabs(analytic[i]) + 1e-8);
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = i;
      result.analytic_at_worst = analytic[i];
      result.numeric_at_worst = fd;
    }
  }
  return result;
}

GradCheckResult check_gradient(const LossFn& f, const ParamVector& at, double h) {
  std::vector<double> analytic = grad(f, at);
  auto value_fn = [&](const ParamVector& p) {
    Tape tape;
    std::vector<Var> leaves = tape.leaves(p.values());
    return f(tape, leaves).value();
  };
  return check_gradient(value_fn, analytic, at, h);
}

}  // namespace precal
