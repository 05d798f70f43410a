#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "emos/dataset.hpp"
#include "emos/distributions.hpp"

namespace emos {

// Nominal coverage 51/53 for a 52-member ensemble.
inline constexpr double default_alpha = 2.0 / 53.0;
inline constexpr std::size_t default_pit_bins = 18;

// Predictive CDF at the observation. An observation of exactly zero gives 0.
double pit(const TnParams& p, double obs);

// Rank of obs in {members, obs}, from 1 to M + 1. Ties with members are
// broken uniformly at random, reproducibly for a given seed.
std::size_t verification_rank(std::span<const double> members, double obs, std::uint64_t tie_seed);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
  bool contains(double x) const { return lower <= x && x <= upper; }
};

// Quantiles at alpha/2 and 1 - alpha/2.
Interval central_interval(const TnParams& p, double alpha = default_alpha);

struct VerificationReport {
  double mean_crps = 0.0;
  double mae = 0.0;
  double coverage = 0.0; // percent
  double mean_width = 0.0;
  std::size_t case_count = 0;
  std::vector<std::size_t> pit_bins;
  double alpha = default_alpha;
};

struct RankHistogram {
  std::vector<std::size_t> bins; // M + 1
  std::size_t total() const;
};

// Counts of values in [0, 1] over equal-width bins; 1 falls in the last bin.
std::vector<std::size_t> uniform_histogram(std::span<const double> values, std::size_t bins);

// Scores predictive distributions against aligned observations. Throws
// DomainError on empty or misaligned input.
VerificationReport report(std::span<const TnParams> predictions, std::span<const double> observations,
                          double alpha = default_alpha, std::size_t pit_bins = default_pit_bins);

struct EnsembleReport {
  VerificationReport scores; // pit_bins holds the rank histogram
  RankHistogram ranks;
};

// Raw-ensemble scores: ensemble CRPS, MAE of the member median, coverage of
// the empirical member quantiles. alpha defaults to 2 / (M + 1).
// Case i breaks rank ties with a seed derived from (tie_seed, i).
EnsembleReport ensemble_report(std::span<const ForecastCase* const> cases, std::optional<double> alpha,
                               std::uint64_t tie_seed);

// Kolmogorov-Smirnov test against U(0, 1), asymptotic p-value.
double ks_uniform_pvalue(std::span<const double> sample);
// Pearson chi-square test of equal bin probabilities.
double chi_square_uniform_pvalue(std::span<const std::size_t> counts);

} // namespace emos
