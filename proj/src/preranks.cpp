#include "precal/preranks.hpp"

#include <charconv>
#include <cmath>

namespace precal::preranks {

double hdr(const DensityFn& density, std::span<const double> y) {
  if (!density) throw DensityUnavailable("hdr: no density evaluator in context");
  const double f = density(y);
  if (!std::isfinite(f)) throw NonFiniteValue("hdr: density evaluated non-finite");
  return f;
}

double copula_hard(std::span<const double> y, const SampleSet& pool) {
  if (pool.empty()) throw NoSamples("copula: empty sample pool");
  std::size_t count = 0;
  for (const Vector& s : pool) {
    if (s.size() != y.size()) throw DimensionMismatch("copula: pool dimension mismatch");
    bool dominated = true;
    for (std::size_t d = 0; d < y.size(); ++d) {
      if (!(s[d] <= y[d])) {
        dominated = false;
        break;
      }
    }
    count += dominated;
  }
  return static_cast<double>(count) / static_cast<double>(pool.size());
}

double copula_smooth(std::span<const double> y, const SampleSet& pool, double tau) {
  return copula_smooth_of<double, double>(y, pool, tau);
}

PcaResult pca(std::span<const double> y, const SampleSet& samples, std::size_t k) {
  if (samples.empty()) throw NoSamples("pca: empty sample set");
  if (samples.size() < 2) throw TooFewSamples("pca: need at least 2 samples");
  const std::size_t dim = samples.front().size();
  if (y.size() != dim) throw DimensionMismatch("pca: observation dimension mismatch");
  if (k < 1 || k > dim) throw IndexOutOfRange("pca: component index out of range");
  if (k > samples.size() - 1)
    throw TooFewSamples("pca: component index exceeds sample rank");

  const Matrix cov = sample_covariance(samples);
  const EigenDecomposition eig = sym_eigen(cov);

  PcaResult result;
  if (k < dim && (eig.values[k - 1] - eig.values[k]) < 1e-10) result.degenerate_spectrum = true;
  double acc = 0.0;
  for (std::size_t i = 0; i < dim; ++i) acc += eig.vectors(i, k - 1) * y[i];
  result.value = acc;
  return result;
}

namespace {

std::size_t parse_index(const std::string& text, std::size_t colon, const char* what) {
  const std::string tail = text.substr(colon + 1);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), value);
  if (ec != std::errc() || ptr != tail.data() + tail.size() || value == 0)
    throw ConfigError(std::string("pre-rank: bad ") + what + " in '" + text + "'");
  return value;
}

}  // namespace

PreRank PreRank::parse(const std::string& text) {
  if (text == "loc") return {Kind::kLocation, 0};
  if (text == "scale") return {Kind::kScale, 0};
  if (text == "hdr") return {Kind::kHdr, 0};
  if (text == "copula") return {Kind::kCopula, 0};
  if (text == "marg") return {Kind::kMarginal, 0};  // pooled over all coordinates
  const std::size_t colon = text.find(':');
  if (colon != std::string::npos) {
    const std::string head = text.substr(0, colon);
    if (head == "marg") return {Kind::kMarginal, parse_index(text, colon, "coordinate")};
    if (head == "dep") return {Kind::kDependency, parse_index(text, colon, "lag")};
    if (head == "pca") return {Kind::kPca, parse_index(text, colon, "component")};
  }
  throw ConfigError("pre-rank: unknown spec '" + text + "'");
}

std::string PreRank::name() const {
  switch (kind) {
    case Kind::kLocation:
      return "loc";
    case Kind::kScale:
      return "scale";
    case Kind::kHdr:
      return "hdr";
    case Kind::kCopula:
      return "copula";
    case Kind::kMarginal:
      return index == 0 ? "marg" : "marg:" + std::to_string(index);
    case Kind::kDependency:
      return "dep:" + std::to_string(index);
    case Kind::kPca:
      return "pca:" + std::to_string(index);
  }
  throw ConfigError("pre-rank: invalid kind");
}

double evaluate(const PreRank& prerank, std::span<const double> y, const PreRankContext& ctx) {
  switch (prerank.kind) {
    case Kind::kMarginal:
      if (prerank.index == 0)
        throw ConfigError("pre-rank: pooled marginal is not a pointwise projection");
      return marginal(y, prerank.index);
    case Kind::kLocation:
      return location(y);
    case Kind::kScale:
      return scale(y);
    case Kind::kDependency:
      return dependency(y, prerank.index);
    case Kind::kHdr:
      return hdr(ctx.density, y);
    case Kind::kCopula: {
      if (!ctx.samples) throw NoSamples("copula: no sample pool in context");
      return ctx.smooth_copula ? copula_smooth(y, *ctx.samples, ctx.tau_cop)
                               : copula_hard(y, *ctx.samples);
    }
    case Kind::kPca: {
      if (!ctx.samples) throw NoSamples("pca: no sample set in context");
      return pca(y, *ctx.samples, prerank.index).value;
    }
  }
  throw ConfigError("pre-rank: invalid kind");
}

}  // namespace precal::preranks
