#include "emos/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "emos/error.hpp"

namespace emos {

namespace {

using ld = long double;

constexpr ld kSqrt2 = 1.41421356237309504880168872420969808L;
constexpr ld kLogSqrt2Pi = 0.918938533204672741780329736405617640L;
constexpr ld kInvSqrtPi = 0.564189583547756286948079451560772586L;

// Below this standardised location the truncated normal is, to long double
// accuracy, an exponential distribution with rate -location/scale^2, and the
// normal tail probabilities underflow even in extended precision.
constexpr ld kExponentialRegime = -100.0L;

ld phi_l(ld z) { return std::exp(-0.5L * z * z - kLogSqrt2Pi); }
ld cdf_l(ld z) { return 0.5L * std::erfc(-z / kSqrt2); }
ld upper_l(ld z) { return 0.5L * std::erfc(z / kSqrt2); }

ld quantile_l(ld prob) { return -kSqrt2 * boost::math::erfc_inv(2.0L * prob); }

// Asymptotic Mills ratio Q(x)/phi(x) for large positive x.
ld mills_asymptotic(ld x) {
  const ld x2 = x * x;
  return (1.0L / x) * (1.0L - 1.0L / x2 + 3.0L / (x2 * x2) - 15.0L / (x2 * x2 * x2));
}

ld log_cdf_l(ld s) {
  if (s > -35.0L) return std::log(cdf_l(s));
  const ld tail = upper_l(-s);
  if (tail > 0.0L && std::isnormal(tail)) return std::log(tail);
  return -0.5L * s * s - kLogSqrt2Pi + std::log(mills_asymptotic(-s));
}

// Q(z) / Q(a) for z >= a.
ld upper_tail_ratio(ld z, ld a) {
  const ld qa = upper_l(a);
  if (std::isnormal(qa)) return upper_l(z) / qa;
  return std::exp(-0.5L * (z - a) * (z + a)) * mills_asymptotic(z) / mills_asymptotic(a);
}

void check_obs(double obs) {
  if (!std::isfinite(obs)) throw DomainError("observation must be finite");
  if (obs < 0.0) throw DomainError("observation must be non-negative for a distribution supported on [0, inf)");
}

} // namespace

void TnParams::validate() const {
  if (!std::isfinite(location)) throw DomainError("truncated normal location must be finite");
  if (!std::isfinite(scale) || !(scale > 0.0)) throw DomainError("truncated normal scale must be finite and positive");
}

double normal_pdf(double z) { return static_cast<double>(phi_l(z)); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw DomainError("normal quantile level must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * prob);
}

double tn_pdf(const TnParams& p, double x) {
  p.validate();
  if (!std::isfinite(x)) throw DomainError("tn_pdf argument must be finite");
  if (x < 0.0) return 0.0;
  const ld z = (static_cast<ld>(x) - p.location) / p.scale;
  const ld s = static_cast<ld>(p.location) / p.scale;
  return static_cast<double>(std::exp(-0.5L * z * z - kLogSqrt2Pi - std::log(static_cast<ld>(p.scale)) - log_cdf_l(s)));
}

double tn_cdf(const TnParams& p, double x) {
  p.validate();
  if (std::isnan(x)) throw DomainError("tn_cdf argument must not be NaN");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const ld z = (static_cast<ld>(x) - p.location) / p.scale;
  const ld a = -static_cast<ld>(p.location) / p.scale;
  ld value;
  if (z <= 0.0L)
    value = (cdf_l(z) - cdf_l(a)) / upper_l(a);
  else
    value = 1.0L - upper_tail_ratio(z, a);
  return static_cast<double>(std::clamp(value, 0.0L, 1.0L));
}

double tn_quantile(const TnParams& p, double tau) {
  p.validate();
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
  const ld mu = p.location;
  const ld sigma = p.scale;
  const ld a = -mu / sigma;
  const ld qa = upper_l(a);
  double x;
  if (!std::isnormal(qa)) {
    const ld rate = -mu / (sigma * sigma);
    x = static_cast<double>(-std::log1p(-static_cast<ld>(tau)) / rate);
  } else {
    // Solve either Phi(z) = Phi(a) + tau Q(a) or Q(z) = (1 - tau) Q(a),
    // whichever target is the smaller probability.
    const ld lower_target = cdf_l(a) + tau * qa;
    const ld upper_target = (1.0L - tau) * qa;
    const ld z = lower_target < upper_target ? quantile_l(lower_target) : -quantile_l(upper_target);
    x = static_cast<double>(std::max(0.0L, mu + sigma * z));
  }
  if (std::isfinite(x) && std::abs(tn_cdf(p, x) - tau) <= 1e-12) return x;

  // Bisection fallback.
  double lo = 0.0;
  double hi = std::max(1.0, p.location + 10.0 * p.scale);
  while (tn_cdf(p, hi) < tau) hi *= 2.0;
  for (int it = 0; it < 400 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (tn_cdf(p, mid) < tau ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ScoreWithGradient tn_crps_gradient(const TnParams& p, double obs) {
  p.validate();
  check_obs(obs);
  const ld mu = p.location;
  const ld sigma = p.scale;
  const ld y = obs;
  const ld s = mu / sigma;

  if (s < kExponentialRegime) {
    const ld rate = -mu / (sigma * sigma);
    const ld e = std::exp(-rate * y);
    const ld value = y + 2.0L * e / rate - 1.5L / rate;
    const ld d_rate = -2.0L * y * e / rate - 2.0L * e / (rate * rate) + 1.5L / (rate * rate);
    return {static_cast<double>(std::max(0.0L, value)), static_cast<double>(d_rate * (-1.0L / (sigma * sigma))),
            static_cast<double>(d_rate * (-2.0L * rate / sigma))};
  }

  const ld z = (y - mu) / sigma;
  const ld prob = cdf_l(s);
  const ld upper_z = upper_l(z);
  const ld phi_z = phi_l(z);
  const ld phi_s = phi_l(s);
  const ld pair_term = cdf_l(kSqrt2 * s) * kInvSqrtPi / (prob * prob);

  const ld h = z * (prob - 2.0L * upper_z) / prob + 2.0L * phi_z / prob - pair_term;
  const ld h_z = 1.0L - 2.0L * upper_z / prob;
  const ld h_s = -(phi_s / prob) * ((2.0L * phi_z + 2.0L * phi_s - 2.0L * z * upper_z) / prob - 2.0L * pair_term);

  ScoreWithGradient out;
  out.value = static_cast<double>(std::max(0.0L, sigma * h));
  out.d_location = static_cast<double>(h_s - h_z);
  out.d_scale = static_cast<double>(h - s * h_s - z * h_z);
  return out;
}

double tn_crps(const TnParams& p, double obs) { return tn_crps_gradient(p, obs).value; }

double tn_crps_quadrature(const TnParams& p, double obs) {
  p.validate();
  check_obs(obs);
  const double mu = p.location;
  const double sigma = p.scale;
  const double upper = std::max(mu, obs) + 40.0 * sigma;

  // Breakpoints where the integrand has a kink or changes on a short scale.
  std::vector<double> cuts{0.0, obs, upper};
  for (double k : {-5.0, -1.0, 0.0, 1.0, 5.0}) cuts.push_back(mu + k * sigma);
  const double s = mu / sigma;
  const double near_zero = s < -1.0 ? sigma / -s : sigma;
  for (double k : {0.05, 0.25, 1.0, 5.0, 20.0}) cuts.push_back(k * near_zero);
  std::erase_if(cuts, [&](double c) { return !(c >= 0.0 && c <= upper); });
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const auto integrand = [&](double y) {
    const double f = tn_cdf(p, y);
    const double step = y >= obs ? 1.0 : 0.0;
    return (f - step) * (f - step);
  };
  // Fixed composite rule: the integrand is smooth between breakpoints, and an
  // adaptive relative tolerance never settles on the vanishing tail pieces.
  constexpr int pieces = 32;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double h = (cuts[i + 1] - cuts[i]) / pieces;
    for (int j = 0; j < pieces; ++j) {
      const double a = cuts[i] + j * h;
      total += boost::math::quadrature::gauss<double, 30>::integrate(integrand, a, a + h);
    }
  }
  return total;
}

double tn_log_score(const TnParams& p, double obs, OutOfSupport policy) {
  p.validate();
  if (!std::isfinite(obs)) throw DomainError("observation must be finite");
  if (obs < 0.0) {
    if (policy == OutOfSupport::error) throw DomainError("observation outside the support [0, inf)");
    return std::numeric_limits<double>::infinity();
  }
  return tn_log_score_gradient(p, obs).value;
}

ScoreWithGradient tn_log_score_gradient(const TnParams& p, double obs) {
  p.validate();
  check_obs(obs);
  const ld sigma = p.scale;
  const ld z = (static_cast<ld>(obs) - p.location) / sigma;
  const ld s = static_cast<ld>(p.location) / sigma;
  const ld log_prob = log_cdf_l(s);
  const ld mills = std::exp(-0.5L * s * s - kLogSqrt2Pi - log_prob);
  ScoreWithGradient out;
  out.value = static_cast<double>(std::log(sigma) + 0.5L * z * z + kLogSqrt2Pi + log_prob);
  out.d_location = static_cast<double>((mills - z) / sigma);
  out.d_scale = static_cast<double>((1.0L - z * z - s * mills) / sigma);
  return out;
}

double ensemble_crps(std::span<const double> members, double obs) {
  if (members.empty()) throw DomainError("ensemble must contain at least one member");
  if (!std::isfinite(obs)) throw DomainError("observation must be finite");
  std::vector<double> sorted(members.begin(), members.end());
  for (double v : sorted)
    if (!std::isfinite(v)) throw DomainError("ensemble members must be finite");
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  double abs_err = 0.0;
  double spread = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    abs_err += std::abs(sorted[i] - obs);
    spread += (2.0 * static_cast<double>(i + 1) - m - 1.0) * sorted[i];
  }
  // sum_{i,j} |x_i - x_j| = 2 sum_i (2i - m - 1) x_(i)
  return abs_err / m - spread / (m * m);
}

} // namespace emos
