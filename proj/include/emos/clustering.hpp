#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emos/dataset.hpp"

namespace emos {

enum class FeatureKind {
  climatology,     // quantiles of the windowed observation CDF
  forecast_errors, // quantiles of the windowed ensemble-mean error CDF
  combined         // ceil(N/2) climatology quantiles followed by the rest as error quantiles
};

FeatureKind parse_feature_kind(const std::string& name);
std::string to_string(FeatureKind kind);

struct FeatureSpec {
  FeatureKind kind = FeatureKind::forecast_errors;
  std::size_t count = 24; // N

  std::size_t climatology_count() const; // N1
  std::size_t error_count() const;       // N2
  void validate() const;
};

// Per-station feature vectors; stations without any case in their window are
// listed in `excluded` and carry no row.
struct FeatureMatrix {
  std::vector<std::size_t> stations;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> excluded;
};

// Quantiles at levels 1/(N+1), ..., N/(N+1) of each station's n most recent
// cases before the target date.
FeatureMatrix extract_features(const FeatureSpec& spec, const Dataset& ds, Date target, std::size_t n);

struct KMeansOptions {
  std::uint64_t seed = 0;
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  std::size_t workers = 1;
};

// Result of k-means on a point set; labels are canonical: cluster c is the
// one whose lowest-index member is the c-th smallest such index.
struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<std::vector<double>> centroids;
  double objective = 0.0;            // within-cluster sum of squares
  std::vector<double> trace;         // objective after every iteration of the winning restart
  double initial_objective = 0.0;    // objective of the winning restart's seeded assignment
  std::size_t winning_restart = 0;
};

// Lloyd's algorithm with k-means++ seeding, best of `restarts`. An empty
// cluster is re-seeded with the point farthest from its centroid. Throws
// DomainError when k is zero or exceeds the number of points.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, const KMeansOptions& options);

struct Clustering {
  std::size_t k = 0;
  Date target_date{};
  std::vector<std::size_t> stations;   // clustered stations (dataset indices)
  std::vector<std::size_t> assignment; // cluster of stations[i]
  std::vector<std::vector<double>> centroids;
  double objective = 0.0;
  std::vector<std::size_t> excluded;   // stations without history

  // Dataset indices of the stations in cluster c, ascending.
  std::vector<std::size_t> members(std::size_t c) const;
};

Clustering cluster_per_window(const FeatureSpec& spec, const Dataset& ds, Date target, std::size_t n, std::size_t k,
                              const KMeansOptions& options);

// `station_id,cluster_id`; excluded stations are omitted.
void write_clustering(const Clustering& clustering, const Dataset& ds, const std::filesystem::path& path);

} // namespace emos
