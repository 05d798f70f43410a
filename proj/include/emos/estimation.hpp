#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emos/model.hpp"
#include "emos/training_sets.hpp"

namespace emos {

enum class Objective { crps, log_score };

Objective parse_objective(const std::string& name);
std::string to_string(Objective objective);

struct FitConfig {
  Objective objective = Objective::crps;
  double tolerance = 1e-8;          // on the per-iteration objective improvement
  std::size_t max_iterations = 5000;
  std::optional<EmosCoefficients> warm_start;
  // Starting point when no warm start is given or it is worse; defaults to
  // mean_reproducing_coefficients.
  std::optional<EmosCoefficients> default_init;
  // Coefficients reused when the fit fails. When unset and
  // fallback_to_warm_start is true, the warm start is used.
  std::optional<EmosCoefficients> fallback;
  bool fallback_to_warm_start = true;
  bool nonneg_location = false;     // constrain group coefficients to be >= 0
  double scale2_floor = 1e-6;       // lower bound on b0 + b1 S^2 inside the objective
};

enum class FitStatus { converged, fallback_used, failed };
std::string to_string(FitStatus status);

struct FitDiagnostics {
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  double floored_fraction = 0.0; // share of cases whose variance hit the floor
  std::size_t training_size = 0;
  std::string message;
};

struct FitResult {
  EmosCoefficients coefficients;
  double objective = 0.0;
  FitStatus status = FitStatus::failed;
  FitDiagnostics diagnostics;
};

// Mean score of the predictive distributions over a training set; +inf when
// any case has a non-positive predictive variance. Throws DomainError on an
// empty training set.
double mean_objective(const ModelFormulation& formulation, const EmosCoefficients& coeffs, const TrainingSet& training,
                      Objective objective = Objective::crps);

// Value and gradient of the fitting objective in the optimiser
// parameterisation (a0, group weights, c0, c1) with b0 = c0^2, b1 = c1^2.
// Group weights multiply group means. Exposed for gradient checks.
class ObjectiveFunction {
public:
  ObjectiveFunction(const ModelFormulation& formulation, const TrainingSet& training, const FitConfig& config);

  std::size_t dimension() const { return groups_ + 3; }
  double evaluate(std::span<const double> theta, std::span<double> gradient) const;
  double floored_fraction(std::span<const double> theta) const;

  std::vector<double> to_theta(const EmosCoefficients& coeffs) const;
  EmosCoefficients to_coefficients(std::span<const double> theta) const;

private:
  std::size_t groups_;
  std::vector<double> group_sizes_;
  bool uses_mean_;
  Objective objective_;
  bool nonneg_;
  double floor_;
  std::vector<double> group_means_; // cases x groups
  std::vector<double> variance_;
  std::vector<double> obs_;
};

// Minimises the mean score over the training set with BFGS on the square-root
// scale parameterisation. Training sets smaller than the parameter count,
// non-finite optima, optima with the variance floor active on more than half
// of the cases, and non-convergence are failures, answered with the fallback
// coefficients (status fallback_used) or status failed.
FitResult fit(const ModelFormulation& formulation, const TrainingSet& training, const FitConfig& config);

// Per-station outcome on one verification date.
struct StationFit {
  FitStatus status = FitStatus::failed;
  bool has_coefficients = false;
  EmosCoefficients coefficients;
  std::size_t pool_fit = 0; // index into FitSequence::pool_fits
};

struct PoolFit {
  Date date{};
  Pool pool;
  FitResult result;
};

struct SequenceOptions {
  std::size_t window = 80;  // n
  std::size_t workers = 1;
  KMeansOptions kmeans;     // cluster regime only
  const DistanceMatrix* distances = nullptr;
};

struct FitSequence {
  std::vector<Date> dates;
  std::size_t station_count = 0;
  std::vector<PoolFit> pool_fits;
  std::vector<StationFit> station_fits; // dates x stations, row-major
  std::vector<Clustering> clusterings;  // per date, cluster regime only

  const StationFit& at(std::size_t date_index, std::size_t station) const {
    return station_fits[date_index * station_count + station];
  }
  // Number of optimiser runs actually performed.
  std::size_t fits_performed() const;
  // Shares of (station, date) pairs with a forecast case in the dataset whose
  // coefficients came from a fallback or are missing.
  double fallback_rate(const Dataset& ds) const;
  std::size_t failed_count(const Dataset& ds) const;
};

// Runs the regime over ordered verification dates. Each pool warm-starts
// from the previous date's coefficients of its lowest-index target station;
// a station whose pool fit fails reuses its last successful coefficients.
FitSequence fit_sequence(const Regime& regime, const ModelFormulation& formulation, const Dataset& ds,
                         std::span<const Date> dates, const FitConfig& config, const SequenceOptions& options);

// `date,pool_id,status,a0,a1..am,b0,b1,objective`
void write_fit_sequence(const FitSequence& seq, const ModelFormulation& formulation, const std::filesystem::path& path);

} // namespace emos
