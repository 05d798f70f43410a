#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "emos/dataset.hpp"

namespace emos {

// Right-continuous empirical CDF F(x) = #{v <= x} / count.
class EmpiricalCdf {
public:
  // Throws DomainError on empty input or non-finite values.
  explicit EmpiricalCdf(std::vector<double> values);

  double operator()(double x) const;
  // Left-continuous inverse: the smallest sample value v with F(v) >= tau,
  // for tau in (0, 1].
  double quantile(double tau) const;
  std::size_t size() const { return sorted_.size(); }

private:
  std::vector<double> sorted_;
};

enum class DistanceKind {
  location,         // d1: Euclidean distance of station coordinates
  climatology,      // d2: mean |F_i - F_j| of observation CDFs over grid S
  forecast_error,   // d3: mean |G_i - G_j| of ensemble-mean error CDFs over grid S'
  combined,         // d4: d2 + d3
  ensemble_stats    // d5: sum over common dates of the distance of (mean, sd)
};

DistanceKind parse_distance_kind(const std::string& name);
std::string to_string(DistanceKind kind);

// Evenly spaced grid lo, lo + step, ..., hi (inclusive up to rounding).
std::vector<double> make_grid(double lo, double hi, double step);

struct DistanceSpec {
  DistanceKind kind = DistanceKind::combined;
  std::vector<double> grid_s = make_grid(0.0, 15.0, 0.5);
  std::vector<double> grid_s_prime = make_grid(-10.0, 10.0, 0.5);
  std::vector<Date> reference_dates; // ascending; required for d2..d5

  // Throws DomainError unless grids are nonempty and strictly increasing and
  // reference dates are present when the kind needs them.
  void validate() const;
};

// Dataset dates within [first, last].
std::vector<Date> dates_between(const Dataset& ds, Date first, Date last);

// Observation climatology of a station over the reference dates.
EmpiricalCdf observation_cdf(const Dataset& ds, std::size_t station, std::span<const Date> dates);
// CDF of ensemble-mean errors mean_t - obs_t over the given dates.
EmpiricalCdf forecast_error_cdf(const Dataset& ds, std::size_t station, std::span<const Date> dates);

double distance(const DistanceSpec& spec, const Dataset& ds, std::size_t i, std::size_t j);

// Symmetric station distance matrix with zero diagonal.
class DistanceMatrix {
public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::vector<std::string> station_ids);

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& station_ids() const { return ids_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * ids_.size() + j]; }
  void set(std::size_t i, std::size_t j, double d);

  std::string kind_label;
  std::vector<std::string> metadata; // free-form `key=value` lines kept in exports

private:
  std::vector<std::string> ids_;
  std::vector<double> values_;
};

// Fills all pairs (i < j); result independent of worker count.
DistanceMatrix distance_matrix(const DistanceSpec& spec, const Dataset& ds, std::size_t workers = 1);

// The L stations closest to `station`, the station itself first, remaining
// ties broken by ascending station id. Throws DomainError unless
// 1 <= L <= size.
std::vector<std::size_t> nearest_stations(const DistanceMatrix& matrix, std::size_t station, std::size_t count);

// CSV with `#` metadata lines, a `station_id,<ids...>` header, and the
// strict lower triangle one row per station.
void write_distance_matrix(const DistanceMatrix& matrix, const std::filesystem::path& path);
DistanceMatrix read_distance_matrix(const std::filesystem::path& path);

} // namespace emos
