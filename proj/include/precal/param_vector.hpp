#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "precal/errors.hpp"
#include "precal/tape.hpp"

namespace precal {

struct ParamSegment {
  std::string name;
  std::size_t offset;
  std::size_t size;
};

// Flat parameter storage with named segments.  Segments partition the vector
// exactly; gradients are returned in the same layout.
class ParamVector {
 public:
  ParamVector() = default;

  std::size_t add_segment(const std::string& name, std::size_t size, double fill = 0.0) {
    segments_.push_back({name, values_.size(), size});
    values_.resize(values_.size() + size, fill);
    return segments_.size() - 1;
  }

  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<ParamSegment>& segments() const { return segments_; }

  std::span<double> segment(const std::string& name) {
    for (const auto& s : segments_)
      if (s.name == name) return std::span<double>(values_.data() + s.offset, s.size);
    throw IndexOutOfRange("ParamVector: no segment named " + name);
  }
  std::span<const double> segment(const std::string& name) const {
    for (const auto& s : segments_)
      if (s.name == name) return std::span<const double>(values_.data() + s.offset, s.size);
    throw IndexOutOfRange("ParamVector: no segment named " + name);
  }

  // Same segment layout, zero values.  Used for gradient accumulators.
  ParamVector zeros_like() const {
    ParamVector z;
    z.segments_ = segments_;
    z.values_.assign(values_.size(), 0.0);
    return z;
  }

 private:
  std::vector<double> values_;
  std::vector<ParamSegment> segments_;
};

// A differentiable scalar function of the parameters, expressed on a tape.
using LossFn = std::function<Var(Tape&, std::span<const Var>)>;

// Evaluate `f` with parameters as leaves and return d f / d theta.
std::vector<double> grad(const LossFn& f, const ParamVector& at, double* value_out = nullptr);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Central-difference check of an externally supplied gradient:
//   rel_err_i = |analytic_i - fd_i| / (|analytic_i| + 1e-8).
GradCheckResult check_gradient(const std::function<double(const ParamVector&)>& value_fn,
                               std::span<const double> analytic, const ParamVector& at,
                               double h = 1e-5);

// Convenience overload for tape-expressed losses: the analytic gradient comes
// from the reverse sweep, the reference from central differences of the
// forward value.
GradCheckResult check_gradient(const LossFn& f, const ParamVector& at, double h = 1e-5);

}  // namespace precal
