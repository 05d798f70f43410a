#include "emos/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>

#include <json.hpp>

#include "emos/csv.hpp"
#include "emos/error.hpp"
#include "emos/parallel.hpp"
#include "emos/synthetic.hpp"

namespace emos {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

RegimeKind parse_regime_kind(const std::string& name) {
  if (name == "regional") return RegimeKind::regional;
  if (name == "local") return RegimeKind::local;
  if (name == "distance" || name == "distance_semi_local") return RegimeKind::distance;
  if (name == "cluster" || name == "cluster_semi_local") return RegimeKind::cluster;
  throw ConfigError("unknown regime '" + name + "' (expected regional, local, distance or cluster)");
}

std::string to_string(RegimeKind kind) {
  switch (kind) {
  case RegimeKind::regional:
    return "regional";
  case RegimeKind::local:
    return "local";
  case RegimeKind::distance:
    return "distance";
  case RegimeKind::cluster:
    return "cluster";
  }
  return "unknown";
}

namespace {

std::size_t positive_key(const KeyValueConfig& cfg, const std::string& key, std::size_t fallback) {
  const long long v = cfg.get_int(key, static_cast<long long>(fallback));
  if (v < 1) throw ConfigError("config key '" + key + "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> positive_list(const KeyValueConfig& cfg, const std::string& key) {
  std::vector<std::size_t> out;
  for (long long v : cfg.get_int_list(key)) {
    if (v < 1) throw ConfigError("config key '" + key + "' must list positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::optional<Date> date_key(const KeyValueConfig& cfg, const std::string& key) {
  const auto v = cfg.get(key);
  if (!v) return std::nullopt;
  try {
    return parse_date(*v);
  } catch (const DataError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

std::vector<double> grid_key(const KeyValueConfig& cfg, const std::string& key, std::vector<double> fallback) {
  const auto v = cfg.get(key);
  if (!v) return fallback;
  const auto parts = csv::split(*v, ':');
  if (parts.size() != 3) throw ConfigError("config key '" + key + "' expects lo:step:hi");
  try {
    const double lo = csv::parse_double(parts[0], key);
    const double step = csv::parse_double(parts[1], key);
    const double hi = csv::parse_double(parts[2], key);
    return make_grid(lo, hi, step);
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

std::string opt_size(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string(); }

const char* const kPitZeroPolicy = "an observation of exactly 0 gets PIT 0 (no randomisation)";

} // namespace

RunConfig RunConfig::from_config(const KeyValueConfig& cfg) {
  RunConfig c;
  c.stations = cfg.get_string("stations", "");
  c.cases = cfg.get_string("cases", "");
  c.regime = parse_regime_kind(cfg.get_string("regime", "regional"));
  c.variant = parse_variant(cfg.get_string("variant", "simplified"));
  c.custom_groups = cfg.get_string("custom_groups", "");
  c.n = positive_key(cfg, "n", c.n);
  c.L = positive_key(cfg, "L", c.L);
  c.k = positive_key(cfg, "k", c.k);
  c.N = positive_key(cfg, "N", c.N);
  c.features = parse_feature_kind(cfg.get_string("features", "fs2"));
  c.distance = parse_distance_kind(cfg.get_string("distance", "d4"));
  if (const auto p = cfg.get("distance_matrix")) c.distance_matrix = fs::path(*p);
  if (const auto a = cfg.get("alpha")) c.alpha = parse_real_or_fraction(*a, "alpha");
  c.fit.objective = parse_objective(cfg.get_string("objective", "crps"));
  c.fit.tolerance = cfg.get_double("tolerance", c.fit.tolerance);
  const long long iters = cfg.get_int("max_iterations", static_cast<long long>(c.fit.max_iterations));
  if (iters < 1) throw ConfigError("config key 'max_iterations' must be positive");
  c.fit.max_iterations = static_cast<std::size_t>(iters);
  c.fit.nonneg_location = cfg.get_bool("nonneg_location", false);
  const long long seed = cfg.get_int("seed", 0);
  if (seed < 0) throw ConfigError("config key 'seed' must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  const long long tie = cfg.get_int("tie_seed", seed);
  if (tie < 0) throw ConfigError("config key 'tie_seed' must be non-negative");
  c.tie_seed = static_cast<std::uint64_t>(tie);
  c.restarts = positive_key(cfg, "restarts", c.restarts);
  const long long workers = cfg.get_int("workers", 1);
  if (workers < 0) throw ConfigError("config key 'workers' must be non-negative (0 = all cores)");
  c.workers = static_cast<std::size_t>(workers);
  c.pit_bins = positive_key(cfg, "pit_bins", c.pit_bins);
  c.reference_start = date_key(cfg, "reference_start");
  c.reference_end = date_key(cfg, "reference_end");
  c.verify_start = date_key(cfg, "verify_start");
  c.verify_end = date_key(cfg, "verify_end");
  c.grid_s = grid_key(cfg, "grid_S", c.grid_s);
  c.grid_s_prime = grid_key(cfg, "grid_Sprime", c.grid_s_prime);
  c.sweep_n = positive_list(cfg, "sweep_n");
  c.sweep_L = positive_list(cfg, "sweep_L");
  c.sweep_k = positive_list(cfg, "sweep_k");
  c.sweep_N = positive_list(cfg, "sweep_N");
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(fit.tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (variant == Variant::custom && custom_groups.empty())
    throw ConfigError("variant custom needs custom_groups");
  if (variant != Variant::custom && !custom_groups.empty())
    throw ConfigError("custom_groups is only valid with variant custom");
  try {
    FeatureSpec{features, N}.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (!sweep_L.empty() && regime != RegimeKind::distance) throw ConfigError("sweep_L needs regime distance");
  if ((!sweep_k.empty() || !sweep_N.empty()) && regime != RegimeKind::cluster)
    throw ConfigError("sweep_k and sweep_N need regime cluster");
}

ModelFormulation make_formulation(const RunConfig& config, const SubensembleLayout& layout) {
  try {
    if (config.variant != Variant::custom) return build_formulation(config.variant, layout);
    std::vector<MemberGroup> groups;
    for (const auto& spec : csv::split(config.custom_groups, ';')) {
      const auto colon = spec.find(':');
      if (colon == std::string::npos) throw ConfigError("custom group '" + spec + "' must be id:indices");
      MemberGroup g;
      g.id = csv::trim(spec.substr(0, colon));
      for (const auto& idx : csv::split(spec.substr(colon + 1), ',')) {
        const long long v = csv::parse_int(csv::trim(idx), "custom group member");
        if (v < 0) throw ConfigError("custom group member indices must be non-negative");
        g.members.push_back(static_cast<std::size_t>(v));
      }
      groups.push_back(std::move(g));
    }
    GroupStructure gs(std::move(groups));
    if (gs.member_count() != layout.member_count())
      throw ConfigError("custom groups cover " + std::to_string(gs.member_count()) + " members, data has " +
                        std::to_string(layout.member_count()));
    return custom_formulation(std::move(gs));
  } catch (const StructureError& e) {
    throw ConfigError(e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

Periods resolve_periods(const RunConfig& config, const Dataset& ds) {
  const auto& dates = ds.dates();
  if (dates.size() < 2) throw DataError("dataset needs at least two dates");
  const std::size_t half = dates.size() / 2;
  Periods p;
  const Date ref_lo = config.reference_start.value_or(dates.front());
  const Date ref_hi = config.reference_end.value_or(dates[half - 1]);
  const Date ver_lo = config.verify_start.value_or(dates[half]);
  const Date ver_hi = config.verify_end.value_or(dates.back());
  p.reference = dates_between(ds, ref_lo, ref_hi);
  p.verification = dates_between(ds, ver_lo, ver_hi);
  if (p.verification.empty()) throw ConfigError("verification period contains no dataset dates");
  if (p.reference.empty()) throw ConfigError("reference period contains no dataset dates");
  return p;
}

DistanceSpec make_distance_spec(const RunConfig& config, const std::vector<Date>& reference) {
  DistanceSpec spec;
  spec.kind = config.distance;
  spec.grid_s = config.grid_s;
  spec.grid_s_prime = config.grid_s_prime;
  spec.reference_dates = reference;
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

Regime make_regime(const RunConfig& config, const std::vector<Date>& reference) {
  switch (config.regime) {
  case RegimeKind::regional:
    return Regional{};
  case RegimeKind::local:
    return Local{};
  case RegimeKind::distance:
    return DistanceSemiLocal{make_distance_spec(config, reference), config.L};
  case RegimeKind::cluster:
    return ClusterSemiLocal{FeatureSpec{config.features, config.N}, config.k};
  }
  throw ConfigError("unknown regime");
}

std::optional<DistanceMatrix> prepare_distances(const RunConfig& config, const Dataset& ds, const Periods& periods) {
  if (config.regime != RegimeKind::distance) return std::nullopt;
  if (config.distance_matrix && fs::exists(*config.distance_matrix)) {
    auto m = read_distance_matrix(*config.distance_matrix);
    if (m.kind_label != to_string(config.distance))
      throw ConfigError("cached distance matrix " + config.distance_matrix->string() + " holds " + m.kind_label +
                        ", config asks for " + to_string(config.distance));
    return m;
  }
  auto m = distance_matrix(make_distance_spec(config, periods.reference), ds, config.workers);
  if (config.distance_matrix) write_distance_matrix(m, *config.distance_matrix);
  return m;
}

std::string SummaryRow::header() {
  return "regime,variant,n,L,k,N,features,distance,cases,crps,mae,coverage,width,fallback_rate,failed,status";
}

std::string SummaryRow::to_csv() const {
  const bool scored = status != "failed";
  const auto num = [&](double v) { return scored ? csv::format_double(v) : std::string(); };
  return regime + "," + variant + "," + opt_size(n) + "," + opt_size(L) + "," + opt_size(k) + "," + opt_size(N) + "," +
         features + "," + distance + "," + std::to_string(cases) + "," + num(crps) + "," + num(mae) + "," +
         num(coverage) + "," + num(width) + "," + csv::format_double(fallback_rate) + "," + std::to_string(failed) +
         "," + status;
}

RunResult execute_run(const RunConfig& config, const Dataset& ds, const DistanceMatrix* distances) {
  config.validate();
  RunResult r;
  r.formulation = make_formulation(config, ds.layout());
  r.periods = resolve_periods(config, ds);
  const Regime regime = make_regime(config, r.periods.reference);
  if (config.regime == RegimeKind::cluster && config.k > ds.station_count())
    throw ConfigError("k = " + std::to_string(config.k) + " exceeds the " + std::to_string(ds.station_count()) +
                      " stations");
  if (config.regime == RegimeKind::distance && config.L > ds.station_count())
    throw ConfigError("L = " + std::to_string(config.L) + " exceeds the " + std::to_string(ds.station_count()) +
                      " stations");

  SequenceOptions opts;
  opts.window = config.n;
  opts.workers = config.workers;
  opts.kmeans.seed = config.seed;
  opts.kmeans.restarts = config.restarts;
  opts.distances = distances;
  r.fits = fit_sequence(regime, r.formulation, ds, r.periods.verification, config.fit, opts);

  std::vector<TnParams> params;
  std::vector<double> observations;
  std::vector<const ForecastCase*> verified;
  for (std::size_t di = 0; di < r.periods.verification.size(); ++di) {
    const Date date = r.periods.verification[di];
    for (std::size_t s = 0; s < ds.station_count(); ++s) {
      const ForecastCase* c = ds.find(s, date);
      if (!c) continue;
      verified.push_back(c);
      const auto& sf = r.fits.at(di, s);
      PredictionRow row;
      row.station = s;
      row.date = date;
      row.observation = c->observation;
      row.status = sf.status;
      if (sf.has_coefficients) {
        const TnParams p = link(r.formulation, sf.coefficients, c->members);
        const auto ci = central_interval(p, config.alpha);
        row.params = p;
        row.pit = pit(p, c->observation);
        row.median = tn_quantile(p, 0.5);
        row.lower = ci.lower;
        row.upper = ci.upper;
        row.crps = tn_crps(p, c->observation);
        params.push_back(p);
        observations.push_back(c->observation);
      }
      r.predictions.push_back(row);
    }
  }
  if (verified.empty()) throw DataError("no forecast cases in the verification period");
  if (!params.empty()) r.model = report(params, observations, config.alpha, config.pit_bins);
  r.raw = ensemble_report(verified, std::nullopt, config.tie_seed);

  auto& s = r.summary;
  s.regime = to_string(config.regime);
  s.variant = to_string(config.variant);
  s.n = config.n;
  if (config.regime == RegimeKind::distance) {
    s.L = config.L;
    s.distance = to_string(config.distance);
  }
  if (config.regime == RegimeKind::cluster) {
    s.k = config.k;
    s.N = config.N;
    s.features = to_string(config.features);
  }
  s.cases = params.size();
  s.fallback_rate = r.fits.fallback_rate(ds);
  s.failed = r.fits.failed_count(ds);
  if (r.model) {
    s.crps = r.model->mean_crps;
    s.mae = r.model->mae;
    s.coverage = r.model->coverage;
    s.width = r.model->mean_width;
  }
  s.status = !r.model ? "failed" : (s.failed > 0 ? "partial" : "ok");
  return r;
}

namespace {

RunConfig load_run_config(const KeyValueConfig& cfg) {
  auto c = RunConfig::from_config(cfg);
  if (c.stations.empty() || c.cases.empty()) throw ConfigError("config keys 'stations' and 'cases' are required");
  return c;
}

json report_json(const VerificationReport& r) {
  json j;
  j["mean_crps"] = r.mean_crps;
  j["mae"] = r.mae;
  j["coverage_percent"] = r.coverage;
  j["mean_width"] = r.mean_width;
  j["case_count"] = r.case_count;
  j["alpha"] = r.alpha;
  j["nominal_coverage_percent"] = 100.0 * (1.0 - r.alpha);
  j["pit_bins"] = r.pit_bins;
  return j;
}

std::string pit_histogram_csv(const std::vector<std::size_t>& bins) {
  std::string out = "bin,lower,upper,count\n";
  const double width = 1.0 / static_cast<double>(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b)
    out += std::to_string(b + 1) + "," + csv::format_double(width * static_cast<double>(b)) + "," +
           csv::format_double(b + 1 == bins.size() ? 1.0 : width * static_cast<double>(b + 1)) + "," +
           std::to_string(bins[b]) + "\n";
  return out;
}

std::string rank_histogram_csv(const RankHistogram& h) {
  std::string out = "rank,count\n";
  for (std::size_t b = 0; b < h.bins.size(); ++b) out += std::to_string(b + 1) + "," + std::to_string(h.bins[b]) + "\n";
  return out;
}

std::string predictions_csv(const RunResult& r, const Dataset& ds) {
  std::string out = "station_id,date,obs,location,scale,pit,median,lower,upper,crps,status\n";
  for (const auto& row : r.predictions) {
    out += ds.stations()[row.station].id + "," + format_date(row.date) + "," + csv::format_double(row.observation);
    if (row.params) {
      for (double v : {row.params->location, row.params->scale, row.pit, row.median, row.lower, row.upper, row.crps})
        out += "," + csv::format_double(v);
    } else {
      out += ",,,,,,,";
    }
    out += "," + to_string(row.status) + "\n";
  }
  return out;
}

} // namespace

int cmd_synth(const KeyValueConfig& cfg, const fs::path& out) {
  const auto config = SynthConfig::from_config(cfg);
  const auto synth = generate_synthetic(config);
  fs::create_directories(out);
  write_dataset(synth.data, out / "stations.csv", out / "cases.csv");
  std::string types = "station_id,type,a0,a1,b0,b1\n";
  for (std::size_t s = 0; s < synth.station_type.size(); ++s) {
    const auto& t = config.types[synth.station_type[s]];
    types += synth.data.stations()[s].id + "," + std::to_string(synth.station_type[s]) + "," +
             csv::format_double(t.a0) + "," + csv::format_double(t.a1) + "," + csv::format_double(t.b0) + "," +
             csv::format_double(t.b1) + "\n";
  }
  csv::write_file_atomic(out / "station_types.csv", types);
  std::cout << "wrote " << synth.data.station_count() << " stations and " << synth.data.cases().size()
            << " forecast cases to " << out.string() << "\n";
  return 0;
}

int cmd_distances(const KeyValueConfig& cfg, const fs::path& out) {
  const auto config = load_run_config(cfg);
  const auto ds = load_dataset(config.stations, config.cases);
  const auto periods = resolve_periods(config, ds);
  const auto matrix = distance_matrix(make_distance_spec(config, periods.reference), ds, config.workers);
  const fs::path path = config.distance_matrix.value_or(out / "distances.csv");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_distance_matrix(matrix, path);
  const std::size_t p = matrix.size();
  std::cout << "distance " << matrix.kind_label << ": " << p << " stations, " << p * (p - 1) / 2 << " pairs -> "
            << path.string() << "\n";
  return 0;
}

int cmd_run(const KeyValueConfig& cfg, const fs::path& out) {
  const auto config = load_run_config(cfg);
  const auto ds = load_dataset(config.stations, config.cases);
  const auto periods = resolve_periods(config, ds);
  const auto distances = prepare_distances(config, ds, periods);
  const auto r = execute_run(config, ds, distances ? &*distances : nullptr);

  fs::create_directories(out);
  write_fit_sequence(r.fits, r.formulation, out / "fits.csv");
  csv::write_file_atomic(out / "predictions.csv", predictions_csv(r, ds));
  csv::write_file_atomic(out / "summary.csv", SummaryRow::header() + "\n" + r.summary.to_csv() + "\n");
  if (r.model) csv::write_file_atomic(out / "pit_histogram.csv", pit_histogram_csv(r.model->pit_bins));
  csv::write_file_atomic(out / "rank_histogram.csv", rank_histogram_csv(r.raw.ranks));
  if (!r.fits.clusterings.empty()) {
    fs::create_directories(out / "clusters");
    for (const auto& c : r.fits.clusterings)
      write_clustering(c, ds, out / "clusters" / (format_date(c.target_date) + ".csv"));
  }

  json j;
  json cfg_echo = json::object();
  for (const auto& [k, v] : cfg.entries()) cfg_echo[k] = v;
  j["config"] = cfg_echo;
  j["model"] = r.model ? report_json(*r.model) : json(nullptr);
  j["raw_ensemble"] = report_json(r.raw.scores);
  j["raw_ensemble"]["rank_histogram"] = r.raw.ranks.bins;
  json meta;
  meta["reference_start"] = format_date(r.periods.reference.front());
  meta["reference_end"] = format_date(r.periods.reference.back());
  meta["verify_start"] = format_date(r.periods.verification.front());
  meta["verify_end"] = format_date(r.periods.verification.back());
  meta["pit_zero_policy"] = kPitZeroPolicy;
  meta["tie_seed"] = config.tie_seed;
  meta["fits_performed"] = r.fits.fits_performed();
  meta["fallback_rate"] = r.summary.fallback_rate;
  meta["failed_station_dates"] = r.summary.failed;
  meta["partial"] = r.summary.status != "ok";
  if (config.regime == RegimeKind::distance && config.distance == DistanceKind::ensemble_stats)
    meta["d5_dates"] = "dates common to both stations";
  j["metadata"] = meta;
  csv::write_file_atomic(out / "report.json", j.dump(2) + "\n");

  std::cout << SummaryRow::header() << "\n" << r.summary.to_csv() << "\n";
  if (r.summary.status != "ok") {
    std::cerr << "emos: " << r.summary.failed << " station-dates had no usable coefficients; outputs are partial\n";
    return 4;
  }
  return 0;
}

std::vector<SweepCell> sweep_grid(const RunConfig& config) {
  const auto or_single = [](const std::vector<std::size_t>& grid, std::size_t v) {
    return grid.empty() ? std::vector<std::size_t>{v} : grid;
  };
  std::vector<SweepCell> cells;
  for (auto n : or_single(config.sweep_n, config.n)) {
    if (config.regime == RegimeKind::distance) {
      for (auto L : or_single(config.sweep_L, config.L)) cells.push_back({n, L, std::nullopt, std::nullopt});
    } else if (config.regime == RegimeKind::cluster) {
      for (auto k : or_single(config.sweep_k, config.k))
        for (auto N : or_single(config.sweep_N, config.N)) cells.push_back({n, std::nullopt, k, N});
    } else {
      cells.push_back({n, std::nullopt, std::nullopt, std::nullopt});
    }
  }
  return cells;
}

std::vector<SummaryRow> run_sweep(const RunConfig& config, const Dataset& ds, const DistanceMatrix* distances) {
  const auto cells = sweep_grid(config);
  std::vector<SummaryRow> rows(cells.size());
  std::vector<std::string> errors(cells.size());
  parallel_for(cells.size(), config.workers, [&](std::size_t i) {
    RunConfig c = config;
    c.workers = 1;
    c.n = cells[i].n;
    if (cells[i].L) c.L = *cells[i].L;
    if (cells[i].k) c.k = *cells[i].k;
    if (cells[i].N) c.N = *cells[i].N;
    try {
      rows[i] = execute_run(c, ds, distances).summary;
    } catch (const std::exception& e) {
      SummaryRow& s = rows[i];
      s.regime = to_string(c.regime);
      s.variant = to_string(c.variant);
      s.n = c.n;
      if (cells[i].L) {
        s.L = c.L;
        s.distance = to_string(c.distance);
      }
      if (cells[i].k) {
        s.k = c.k;
        s.N = c.N;
        s.features = to_string(c.features);
      }
      s.status = "failed";
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) std::cerr << "emos: sweep cell " << i + 1 << " failed: " << errors[i] << "\n";
  return rows;
}

int cmd_sweep(const KeyValueConfig& cfg, const fs::path& out) {
  const auto config = load_run_config(cfg);
  const auto ds = load_dataset(config.stations, config.cases);
  const auto periods = resolve_periods(config, ds);
  const auto distances = prepare_distances(config, ds, periods);
  const auto rows = run_sweep(config, ds, distances ? &*distances : nullptr);

  fs::create_directories(out / "cells");
  std::string all = SummaryRow::header() + "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string line = rows[i].to_csv() + "\n";
    char name[32];
    std::snprintf(name, sizeof name, "cell_%04zu.csv", i + 1);
    csv::write_file_atomic(out / "cells" / name, SummaryRow::header() + "\n" + line);
    all += line;
  }
  csv::write_file_atomic(out / "sweep.csv", all);
  std::cout << all;
  return 0;
}

int cmd_verify(const KeyValueConfig& cfg, const fs::path& out) {
  const fs::path path = cfg.require("predictions");
  double alpha = default_alpha;
  if (const auto a = cfg.get("alpha")) alpha = parse_real_or_fraction(*a, "alpha");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  const long long bins = cfg.get_int("pit_bins", static_cast<long long>(default_pit_bins));
  if (bins < 1) throw ConfigError("config key 'pit_bins' must be a positive integer");

  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw DataError(path.string() + ": empty file");
  const auto header = csv::split(lines.front());
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[csv::trim(header[i])] = i;
  for (const char* name : {"obs", "location", "scale"})
    if (!col.count(name)) throw DataError(path.string() + ": missing column '" + name + "'");

  std::vector<TnParams> params;
  std::vector<double> observations;
  std::size_t skipped = 0;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (csv::trim(lines[row]).empty()) continue;
    const auto f = csv::split(lines[row]);
    if (f.size() != header.size())
      throw DataError(path.string() + ": row " + std::to_string(row + 1) + " has " + std::to_string(f.size()) +
                      " fields, expected " + std::to_string(header.size()));
    if (csv::trim(f[col["location"]]).empty()) {
      ++skipped;
      continue;
    }
    const std::string where = path.string() + " row " + std::to_string(row + 1);
    TnParams p{csv::parse_double(f[col["location"]], where), csv::parse_double(f[col["scale"]], where)};
    try {
      p.validate();
    } catch (const DomainError& e) {
      throw DataError(where + ": " + e.what());
    }
    const double y = csv::parse_double(f[col["obs"]], where);
    if (y < 0.0) throw DataError(where + ": negative observation");
    params.push_back(p);
    observations.push_back(y);
  }
  if (params.empty()) throw DataError(path.string() + ": no scorable predictions");
  const auto r = report(params, observations, alpha, static_cast<std::size_t>(bins));

  fs::create_directories(out);
  json j;
  j["model"] = report_json(r);
  j["metadata"] = {{"predictions", path.string()}, {"skipped_rows", skipped}, {"pit_zero_policy", kPitZeroPolicy}};
  csv::write_file_atomic(out / "verification.json", j.dump(2) + "\n");
  csv::write_file_atomic(out / "pit_histogram.csv", pit_histogram_csv(r.pit_bins));
  std::cout << "cases,crps,mae,coverage,width\n"
            << r.case_count << "," << csv::format_double(r.mean_crps) << "," << csv::format_double(r.mae) << ","
            << csv::format_double(r.coverage) << "," << csv::format_double(r.mean_width) << "\n";
  return 0;
}

} // namespace emos
