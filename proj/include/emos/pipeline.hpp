#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emos/clustering.hpp"
#include "emos/estimation.hpp"
#include "emos/kv_config.hpp"
#include "emos/model.hpp"
#include "emos/similarity.hpp"
#include "emos/training_sets.hpp"
#include "emos/verification.hpp"

namespace emos {

enum class RegimeKind { regional, local, distance, cluster };
RegimeKind parse_regime_kind(const std::string& name);
std::string to_string(RegimeKind kind);

// Settings of one experiment. Keys of the flat config file:
//   stations, cases               data paths
//   regime                        regional | local | distance | cluster
//   variant                       full | lag_ignoring | simplified | custom
//   custom_groups                 `id:0,1,2;id2:3,4` member indices per group
//   n, L, k, N                    window length, neighbours, clusters, features
//   features                      fs1 | fs2 | fs3
//   distance                      d1 .. d5
//   distance_matrix               cached matrix file (read if present)
//   alpha                         central interval level, e.g. 2/53
//   objective, tolerance, max_iterations, nonneg_location
//   seed, restarts, workers, pit_bins, tie_seed
//   reference_start, reference_end, verify_start, verify_end   YYYY-MM-DD
//   grid_S, grid_Sprime           `lo:step:hi`
//   sweep_n, sweep_L, sweep_k, sweep_N   comma-separated sweep grids
struct RunConfig {
  std::filesystem::path stations;
  std::filesystem::path cases;
  RegimeKind regime = RegimeKind::regional;
  Variant variant = Variant::simplified;
  std::string custom_groups;
  std::size_t n = 80;
  std::size_t L = 10;
  std::size_t k = 1;
  std::size_t N = 24;
  FeatureKind features = FeatureKind::forecast_errors;
  DistanceKind distance = DistanceKind::combined;
  std::optional<std::filesystem::path> distance_matrix;
  double alpha = default_alpha;
  FitConfig fit;
  std::uint64_t seed = 0;
  std::uint64_t tie_seed = 0;
  std::size_t restarts = 10;
  std::size_t workers = 1;
  std::size_t pit_bins = default_pit_bins;
  std::optional<Date> reference_start, reference_end, verify_start, verify_end;
  std::vector<double> grid_s = make_grid(0.0, 15.0, 0.5);
  std::vector<double> grid_s_prime = make_grid(-10.0, 10.0, 0.5);
  std::vector<std::size_t> sweep_n, sweep_L, sweep_k, sweep_N;

  // Throws ConfigError on unknown values or inconsistent settings.
  static RunConfig from_config(const KeyValueConfig& cfg);
  void validate() const;
};

ModelFormulation make_formulation(const RunConfig& config, const SubensembleLayout& layout);

struct Periods {
  std::vector<Date> reference; // similarity and clustering climatology
  std::vector<Date> verification;
};

// Defaults: reference = first half of the dataset dates, verification = the
// remaining dates.
Periods resolve_periods(const RunConfig& config, const Dataset& ds);

DistanceSpec make_distance_spec(const RunConfig& config, const std::vector<Date>& reference);
Regime make_regime(const RunConfig& config, const std::vector<Date>& reference);

struct PredictionRow {
  std::size_t station = 0;
  Date date{};
  double observation = 0.0;
  FitStatus status = FitStatus::failed;
  std::optional<TnParams> params; // absent when no coefficients exist
  double pit = 0.0, median = 0.0, lower = 0.0, upper = 0.0, crps = 0.0;
};

// One row of the run summary.
struct SummaryRow {
  std::string regime, variant;
  std::optional<std::size_t> n, L, k, N;
  std::string features, distance;
  std::size_t cases = 0; // scored cases
  double crps = 0.0, mae = 0.0, coverage = 0.0, width = 0.0;
  double fallback_rate = 0.0;
  std::size_t failed = 0;
  std::string status; // ok | partial | failed

  static std::string header();
  std::string to_csv() const;
};

struct RunResult {
  ModelFormulation formulation;
  Periods periods;
  FitSequence fits;
  std::vector<PredictionRow> predictions;
  std::optional<VerificationReport> model; // absent when nothing was scored
  EnsembleReport raw;
  SummaryRow summary;
};

// Loads or computes the distance matrix the config needs; nullopt for
// regimes that do not use one.
std::optional<DistanceMatrix> prepare_distances(const RunConfig& config, const Dataset& ds, const Periods& periods);

// Fits over the verification dates and scores the predictions. Station-dates
// without coefficients are left out of the scores and counted as failed.
RunResult execute_run(const RunConfig& config, const Dataset& ds, const DistanceMatrix* distances);

// Command bodies. Each writes under `out` and returns the process exit code.
int cmd_synth(const KeyValueConfig& cfg, const std::filesystem::path& out);
int cmd_distances(const KeyValueConfig& cfg, const std::filesystem::path& out);
int cmd_run(const KeyValueConfig& cfg, const std::filesystem::path& out);
int cmd_sweep(const KeyValueConfig& cfg, const std::filesystem::path& out);
int cmd_verify(const KeyValueConfig& cfg, const std::filesystem::path& out);

struct SweepCell {
  std::size_t n = 0;
  std::optional<std::size_t> L, k, N;
};

// Cross product of the sweep grids; unset grids fall back to the single
// configured value.
std::vector<SweepCell> sweep_grid(const RunConfig& config);

// Runs every cell; failures are recorded in the row status, not thrown.
std::vector<SummaryRow> run_sweep(const RunConfig& config, const Dataset& ds, const DistanceMatrix* distances);

} // namespace emos
