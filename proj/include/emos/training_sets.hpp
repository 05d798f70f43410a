#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "emos/clustering.hpp"
#include "emos/dataset.hpp"
#include "emos/similarity.hpp"

namespace emos {

// All stations share one training set.
struct Regional {};
// Each station uses only its own history.
struct Local {};
// Each station pools the histories of its L nearest stations (itself included).
struct DistanceSemiLocal {
  DistanceSpec spec;
  std::size_t nearest = 1; // L
};
// Stations are clustered anew before every verification date; each cluster
// shares one training set.
struct ClusterSemiLocal {
  FeatureSpec features;
  std::size_t clusters = 1; // k
};

using Regime = std::variant<Regional, Local, DistanceSemiLocal, ClusterSemiLocal>;

std::string regime_name(const Regime& regime);
// Throws DomainError on L == 0, k == 0 or invalid feature specs.
void validate(const Regime& regime);

// A set of stations whose windows are pooled into one training set, and the
// stations forecast with the resulting coefficients.
struct Pool {
  std::string id;
  std::vector<std::size_t> stations; // ascending
  std::vector<std::size_t> targets;  // ascending
};

// Side inputs a regime needs: the cached distance matrix for the distance
// regime, the current window's clustering for the cluster regime.
struct RegimeContext {
  const DistanceMatrix* distances = nullptr;
  const Clustering* clustering = nullptr;
};

// Pools covering every station once as a target on a given date. Stations the
// clustering excluded get singleton pools.
std::vector<Pool> pools_for_date(const Regime& regime, const Dataset& ds, const RegimeContext& context);

// Training cases of one pool: the union over pool stations of each station's
// n most recent cases before the verification date, in pool order. Pointers
// refer into the dataset, which must outlive the training set.
struct TrainingSet {
  std::vector<std::size_t> target_stations;
  Date verification_date{};
  std::vector<const ForecastCase*> cases;

  bool empty() const { return cases.empty(); }
  std::size_t size() const { return cases.size(); }
};

TrainingSet pooled_training_set(const Dataset& ds, const Pool& pool, Date date, std::size_t n);

// Training set used for one station under a regime. An empty result signals
// that estimation must be skipped.
TrainingSet build_training_set(const Regime& regime, const Dataset& ds, std::size_t station, Date date, std::size_t n,
                               const RegimeContext& context);

} // namespace emos
