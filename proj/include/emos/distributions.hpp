#pragma once

#include <span>

namespace emos {

// Truncated normal N_0(location, scale^2) with cut-off at zero: the normal
// N(location, scale^2) restricted to [0, inf) and renormalised. Units m/s.
struct TnParams {
  double location = 0.0;
  double scale = 1.0;

  // Throws DomainError unless location is finite and scale is finite and > 0.
  void validate() const;
  friend bool operator==(const TnParams&, const TnParams&) = default;
};

// Standard normal primitives, double precision to about 1e-15 relative.
double normal_pdf(double z);
double normal_cdf(double z);
// Inverse of normal_cdf; throws DomainError outside (0, 1).
double normal_quantile(double prob);

double tn_pdf(const TnParams& p, double x);
double tn_cdf(const TnParams& p, double x);
// Root of tn_cdf(p, x) = tau; throws DomainError unless 0 < tau < 1.
double tn_quantile(const TnParams& p, double tau);

// Closed-form CRPS of the truncated normal. Throws DomainError for a
// negative or non-finite observation.
double tn_crps(const TnParams& p, double obs);

// Reference value of the CRPS by adaptive Gauss-Kronrod integration of
// (F(y) - 1{y >= obs})^2 over [0, max(location, obs) + 40 scale]. Slow;
// used to certify tn_crps.
double tn_crps_quadrature(const TnParams& p, double obs);

// Score value together with its partial derivatives in location and scale.
struct ScoreWithGradient {
  double value = 0.0;
  double d_location = 0.0;
  double d_scale = 0.0;
};

ScoreWithGradient tn_crps_gradient(const TnParams& p, double obs);

enum class OutOfSupport {
  infinity, // score is +inf
  error     // throw DomainError
};

// Negative log predictive density at obs.
double tn_log_score(const TnParams& p, double obs, OutOfSupport policy = OutOfSupport::infinity);
ScoreWithGradient tn_log_score_gradient(const TnParams& p, double obs);

// CRPS of the empirical distribution of an ensemble:
// E|X - obs| - E|X - X'|/2 with X uniform on the members.
double ensemble_crps(std::span<const double> members, double obs);

} // namespace emos
