#include "emos/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "emos/csv.hpp"
#include "emos/error.hpp"
#include "emos/parallel.hpp"
#include "emos/similarity.hpp"

namespace emos {

FeatureKind parse_feature_kind(const std::string& name) {
  if (name == "fs1" || name == "climatology") return FeatureKind::climatology;
  if (name == "fs2" || name == "forecast_errors") return FeatureKind::forecast_errors;
  if (name == "fs3" || name == "combined") return FeatureKind::combined;
  throw ConfigError("unknown feature set '" + name + "' (expected fs1, fs2 or fs3)");
}

std::string to_string(FeatureKind kind) {
  switch (kind) {
  case FeatureKind::climatology:
    return "fs1";
  case FeatureKind::forecast_errors:
    return "fs2";
  case FeatureKind::combined:
    return "fs3";
  }
  return "unknown";
}

std::size_t FeatureSpec::climatology_count() const {
  switch (kind) {
  case FeatureKind::climatology:
    return count;
  case FeatureKind::forecast_errors:
    return 0;
  case FeatureKind::combined:
    return (count + 1) / 2;
  }
  return 0;
}

std::size_t FeatureSpec::error_count() const { return count - climatology_count(); }

void FeatureSpec::validate() const {
  if (count < 1) throw DomainError("feature count N must be at least 1");
}

namespace {

void append_quantiles(const EmpiricalCdf& cdf, std::size_t levels, std::vector<double>& out) {
  for (std::size_t j = 1; j <= levels; ++j)
    out.push_back(cdf.quantile(static_cast<double>(j) / static_cast<double>(levels + 1)));
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

struct Run {
  std::vector<std::size_t> assignment;
  std::vector<std::vector<double>> centroids;
  double objective = 0.0;
  double initial_objective = 0.0;
  std::vector<double> trace;
};

std::vector<std::vector<double>> seed_centroids(const std::vector<std::vector<double>>& pts, std::size_t k,
                                                std::mt19937_64& rng) {
  const std::size_t n = pts.size();
  std::vector<bool> chosen(n, false);
  std::vector<std::vector<double>> centroids;
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t pick = first(rng);
  chosen[pick] = true;
  centroids.push_back(pts[pick]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(pts[i], centroids.back()));
      if (chosen[i]) d2[i] = 0.0;
      total += d2[i];
    }
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        pick = i;
        if (acc > target) break;
      }
    } else {
      // All remaining points coincide with a centroid.
      pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
    }
    chosen[pick] = true;
    centroids.push_back(pts[pick]);
  }
  return centroids;
}

double assign(const std::vector<std::vector<double>>& pts, const std::vector<std::vector<double>>& centroids,
              std::vector<std::size_t>& assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double d = squared_distance(pts[i], centroids[c]);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    assignment[i] = arg;
    total += best;
  }
  return total;
}

double objective_of(const std::vector<std::vector<double>>& pts, const std::vector<std::vector<double>>& centroids,
                    const std::vector<std::size_t>& assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) total += squared_distance(pts[i], centroids[assignment[i]]);
  return total;
}

// Moves the farthest point of a multi-member cluster into each empty cluster.
void reseed_empty(const std::vector<std::vector<double>>& pts, std::vector<std::vector<double>>& centroids,
                  std::vector<std::size_t>& assignment) {
  const std::size_t k = centroids.size();
  while (true) {
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assignment) ++sizes[a];
    const auto empty = std::find(sizes.begin(), sizes.end(), 0u);
    if (empty == sizes.end()) return;
    double worst = -1.0;
    std::size_t arg = pts.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (sizes[assignment[i]] < 2) continue;
      const double d = squared_distance(pts[i], centroids[assignment[i]]);
      if (d > worst) {
        worst = d;
        arg = i;
      }
    }
    if (arg == pts.size()) return; // k > n cannot happen after validation
    const auto c = static_cast<std::size_t>(empty - sizes.begin());
    assignment[arg] = c;
    centroids[c] = pts[arg];
  }
}

void update_centroids(const std::vector<std::vector<double>>& pts, const std::vector<std::size_t>& assignment,
                      std::vector<std::vector<double>>& centroids) {
  const std::size_t dim = pts.front().size();
  std::vector<std::vector<double>> sums(centroids.size(), std::vector<double>(dim, 0.0));
  std::vector<std::size_t> sizes(centroids.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ++sizes[assignment[i]];
    for (std::size_t d = 0; d < dim; ++d) sums[assignment[i]][d] += pts[i][d];
  }
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    if (sizes[c] == 0) continue;
    for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] / static_cast<double>(sizes[c]);
  }
}

Run lloyd(const std::vector<std::vector<double>>& pts, std::size_t k, std::mt19937_64& rng, std::size_t max_iterations) {
  Run run;
  run.centroids = seed_centroids(pts, k, rng);
  run.assignment.assign(pts.size(), 0);
  run.initial_objective = assign(pts, run.centroids, run.assignment);
  reseed_empty(pts, run.centroids, run.assignment);
  update_centroids(pts, run.assignment, run.centroids);
  run.trace.push_back(objective_of(pts, run.centroids, run.assignment));

  std::vector<std::size_t> next(pts.size());
  for (std::size_t it = 0; it < max_iterations; ++it) {
    auto centroids = run.centroids;
    assign(pts, centroids, next);
    reseed_empty(pts, centroids, next);
    if (next == run.assignment) break;
    update_centroids(pts, next, centroids);
    const double obj = objective_of(pts, centroids, next);
    // Stop on floating-point churn between tied assignments.
    if (obj >= run.trace.back()) break;
    run.assignment = next;
    run.centroids = std::move(centroids);
    run.trace.push_back(obj);
  }
  run.objective = run.trace.back();
  return run;
}

} // namespace

FeatureMatrix extract_features(const FeatureSpec& spec, const Dataset& ds, Date target, std::size_t n) {
  spec.validate();
  if (n == 0) throw DomainError("rolling window length must be positive");
  FeatureMatrix fm;
  for (std::size_t s = 0; s < ds.station_count(); ++s) {
    const auto window = window_cases(ds, s, target, n);
    if (window.empty()) {
      fm.excluded.push_back(s);
      continue;
    }
    std::vector<double> row;
    row.reserve(spec.count);
    if (spec.climatology_count() > 0) {
      std::vector<double> obs;
      for (const auto& c : window) obs.push_back(c.observation);
      append_quantiles(EmpiricalCdf(std::move(obs)), spec.climatology_count(), row);
    }
    if (spec.error_count() > 0) {
      std::vector<double> errors;
      for (const auto& c : window) {
        const double mean = std::accumulate(c.members.begin(), c.members.end(), 0.0) / static_cast<double>(c.members.size());
        errors.push_back(mean - c.observation);
      }
      append_quantiles(EmpiricalCdf(std::move(errors)), spec.error_count(), row);
    }
    fm.stations.push_back(s);
    fm.rows.push_back(std::move(row));
  }
  return fm;
}

KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, const KMeansOptions& options) {
  if (k == 0) throw DomainError("k-means needs k >= 1");
  if (k > points.size())
    throw DomainError("k-means: k = " + std::to_string(k) + " exceeds the number of points " + std::to_string(points.size()));
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw DomainError("k-means: feature vectors differ in length");
    for (double v : p)
      if (!std::isfinite(v)) throw DomainError("k-means: features must be finite");
  }
  const std::size_t restarts = std::max<std::size_t>(1, options.restarts);
  std::vector<Run> runs(restarts);
  parallel_for(restarts, options.workers, [&](std::size_t r) {
    std::seed_seq seq{options.seed, static_cast<std::uint64_t>(r)};
    std::mt19937_64 rng(seq);
    runs[r] = lloyd(points, k, rng, options.max_iterations);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r)
    if (runs[r].objective < runs[best].objective) best = r;

  // Canonical labels: order clusters by their lowest-index member.
  auto& run = runs[best];
  std::vector<std::size_t> relabel(k, k);
  std::size_t next_label = 0;
  for (auto a : run.assignment)
    if (relabel[a] == k) relabel[a] = next_label++;
  KMeansResult out;
  out.assignment.reserve(points.size());
  for (auto a : run.assignment) out.assignment.push_back(relabel[a]);
  out.centroids.resize(k);
  for (std::size_t c = 0; c < k; ++c) out.centroids[relabel[c]] = std::move(run.centroids[c]);
  out.objective = run.objective;
  out.trace = std::move(run.trace);
  out.initial_objective = run.initial_objective;
  out.winning_restart = best;
  return out;
}

std::vector<std::size_t> Clustering::members(std::size_t c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < stations.size(); ++i)
    if (assignment[i] == c) out.push_back(stations[i]);
  return out;
}

Clustering cluster_per_window(const FeatureSpec& spec, const Dataset& ds, Date target, std::size_t n, std::size_t k,
                              const KMeansOptions& options) {
  auto features = extract_features(spec, ds, target, n);
  if (features.rows.empty()) throw DomainError("no station has history before " + format_date(target));
  auto km = kmeans(features.rows, k, options);
  Clustering c;
  c.k = k;
  c.target_date = target;
  c.stations = std::move(features.stations);
  c.assignment = std::move(km.assignment);
  c.centroids = std::move(km.centroids);
  c.objective = km.objective;
  c.excluded = std::move(features.excluded);
  return c;
}

void write_clustering(const Clustering& clustering, const Dataset& ds, const std::filesystem::path& path) {
  std::string out = "station_id,cluster_id\n";
  for (std::size_t i = 0; i < clustering.stations.size(); ++i)
    out += ds.stations()[clustering.stations[i]].id + "," + std::to_string(clustering.assignment[i]) + "\n";
  csv::write_file_atomic(path, out);
}

} // namespace emos
