#include "emos/verification.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "emos/error.hpp"
#include "emos/similarity.hpp"

namespace emos {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

} // namespace

double pit(const TnParams& p, double obs) {
  p.validate();
  if (obs < 0.0) throw DomainError("observation must be non-negative");
  if (obs == 0.0) return 0.0;
  return tn_cdf(p, obs);
}

std::size_t verification_rank(std::span<const double> members, double obs, std::uint64_t tie_seed) {
  if (members.empty()) throw DomainError("rank needs at least one member");
  std::size_t below = 0;
  std::size_t ties = 0;
  for (double m : members) {
    if (m < obs)
      ++below;
    else if (m == obs)
      ++ties;
  }
  if (ties == 0) return below + 1;
  std::mt19937_64 rng(tie_seed);
  std::uniform_int_distribution<std::size_t> pick(0, ties);
  return below + 1 + pick(rng);
}

Interval central_interval(const TnParams& p, double alpha) {
  check_alpha(alpha);
  return {tn_quantile(p, alpha / 2.0), tn_quantile(p, 1.0 - alpha / 2.0)};
}

std::size_t RankHistogram::total() const { return std::accumulate(bins.begin(), bins.end(), std::size_t{0}); }

std::vector<std::size_t> uniform_histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw DomainError("histogram needs at least one bin");
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("histogram value outside [0, 1]");
    const auto b = std::min(bins - 1, static_cast<std::size_t>(v * static_cast<double>(bins)));
    ++counts[b];
  }
  return counts;
}

VerificationReport report(std::span<const TnParams> predictions, std::span<const double> observations, double alpha,
                          std::size_t pit_bins) {
  if (predictions.empty()) throw DomainError("report over an empty case list");
  if (predictions.size() != observations.size()) throw DomainError("predictions and observations are misaligned");
  check_alpha(alpha);
  VerificationReport r;
  r.alpha = alpha;
  r.case_count = predictions.size();
  std::vector<double> pits;
  pits.reserve(r.case_count);
  std::size_t covered = 0;
  for (std::size_t i = 0; i < r.case_count; ++i) {
    const auto& p = predictions[i];
    const double y = observations[i];
    r.mean_crps += tn_crps(p, y);
    r.mae += std::abs(tn_quantile(p, 0.5) - y);
    const auto ci = central_interval(p, alpha);
    if (ci.contains(y)) ++covered;
    r.mean_width += ci.width();
    pits.push_back(pit(p, y));
  }
  const double n = static_cast<double>(r.case_count);
  r.mean_crps /= n;
  r.mae /= n;
  r.mean_width /= n;
  r.coverage = 100.0 * static_cast<double>(covered) / n;
  r.pit_bins = uniform_histogram(pits, pit_bins);
  return r;
}

EnsembleReport ensemble_report(std::span<const ForecastCase* const> cases, std::optional<double> alpha,
                               std::uint64_t tie_seed) {
  if (cases.empty()) throw DomainError("report over an empty case list");
  const std::size_t m = cases.front()->members.size();
  if (m == 0) throw DomainError("ensemble without members");
  const double a = alpha.value_or(2.0 / static_cast<double>(m + 1));
  check_alpha(a);

  EnsembleReport out;
  auto& r = out.scores;
  r.alpha = a;
  r.case_count = cases.size();
  out.ranks.bins.assign(m + 1, 0);
  std::size_t covered = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = *cases[i];
    if (c.members.size() != m) throw DomainError("cases disagree on the ensemble size");
    r.mean_crps += ensemble_crps(c.members, c.observation);
    r.mae += std::abs(median_of(c.members) - c.observation);
    const EmpiricalCdf ecdf(c.members);
    const Interval ci{ecdf.quantile(a / 2.0), ecdf.quantile(1.0 - a / 2.0)};
    if (ci.contains(c.observation)) ++covered;
    r.mean_width += ci.width();
    const auto rank = verification_rank(c.members, c.observation, splitmix64(tie_seed ^ splitmix64(i)));
    ++out.ranks.bins[rank - 1];
  }
  const double n = static_cast<double>(r.case_count);
  r.mean_crps /= n;
  r.mae /= n;
  r.mean_width /= n;
  r.coverage = 100.0 * static_cast<double>(covered) / n;
  r.pit_bins = out.ranks.bins;
  return out;
}

double ks_uniform_pvalue(std::span<const double> sample) {
  if (sample.empty()) throw DomainError("KS test on an empty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = std::clamp(x[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u, u - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

double chi_square_uniform_pvalue(std::span<const std::size_t> counts) {
  if (counts.size() < 2) throw DomainError("chi-square test needs at least two bins");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (total == 0.0) throw DomainError("chi-square test on empty counts");
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) stat += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

} // namespace emos
