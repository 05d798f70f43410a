// Acceptance checks 1-10. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "emos/clustering.hpp"
#include "emos/estimation.hpp"
#include "emos/pipeline.hpp"
#include "emos/similarity.hpp"
#include "emos/synthetic.hpp"
#include "emos/verification.hpp"
#include "test_support.hpp"

using namespace emos;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

RunConfig run_config(RegimeKind regime, std::size_t n, Date verify_start) {
  RunConfig c;
  c.regime = regime;
  c.n = n;
  c.verify_start = verify_start;
  c.seed = 3;
  return c;
}

RunResult run(const RunConfig& c, const Dataset& ds) {
  const auto periods = resolve_periods(c, ds);
  const auto dm = prepare_distances(c, ds, periods);
  return execute_run(c, ds, dm ? &*dm : nullptr);
}

// Summary row without the columns naming the regime and its tuning.
std::string scores(const SummaryRow& r) {
  auto copy = r;
  copy.regime = copy.variant = copy.features = copy.distance = "";
  copy.L = copy.k = copy.N = std::nullopt;
  return copy.to_csv();
}

bool same_fits(const FitSequence& a, const FitSequence& b) {
  if (a.station_fits.size() != b.station_fits.size()) return false;
  for (std::size_t i = 0; i < a.station_fits.size(); ++i) {
    const auto& x = a.station_fits[i];
    const auto& y = b.station_fits[i];
    if (x.status != y.status || x.has_coefficients != y.has_coefficients || !(x.coefficients == y.coefficients))
      return false;
  }
  return true;
}

// 1. closed-form CRPS against quadrature on a 10 x 10 x 10 grid
Outcome crps_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      for (int k = 0; k < 10; ++k) {
        const TnParams p{-5.0 + 25.0 * i / 9.0, 0.1 + 9.9 * j / 9.0};
        const double y = 30.0 * k / 9.0;
        worst = std::max(worst, std::abs(tn_crps(p, y) - tn_crps_quadrature(p, y)));
      }
  const double secs = seconds_since(t0);
  return {worst <= 1e-8 && secs < 60.0, fmt("max |closed - quadrature| = %.2e over 1000 points, %.1f s", worst, secs)};
}

// 2. cluster regime with k = 1 against regional
Outcome cluster_one_is_regional(const Dataset& ds, Date verify_start) {
  auto reg_cfg = run_config(RegimeKind::regional, 40, verify_start);
  auto cl_cfg = reg_cfg;
  cl_cfg.regime = RegimeKind::cluster;
  cl_cfg.k = 1;
  const auto reg = run(reg_cfg, ds);
  const auto cl = run(cl_cfg, ds);

  bool sets_equal = reg.periods.verification == cl.periods.verification;
  for (std::size_t d = 0; sets_equal && d < cl.periods.verification.size(); ++d) {
    const Date date = cl.periods.verification[d];
    const RegimeContext ctx{nullptr, &cl.fits.clusterings[d]};
    for (std::size_t s = 0; s < ds.station_count(); ++s) {
      const auto a = build_training_set(Regional{}, ds, s, date, reg_cfg.n, {});
      const auto b = build_training_set(ClusterSemiLocal{{cl_cfg.features, cl_cfg.N}, 1}, ds, s, date, cl_cfg.n, ctx);
      sets_equal = sets_equal && a.cases == b.cases;
    }
  }
  bool pools_equal = reg.fits.pool_fits.size() == cl.fits.pool_fits.size();
  for (std::size_t i = 0; pools_equal && i < reg.fits.pool_fits.size(); ++i)
    pools_equal = reg.fits.pool_fits[i].result.coefficients == cl.fits.pool_fits[i].result.coefficients &&
                  reg.fits.pool_fits[i].result.objective == cl.fits.pool_fits[i].result.objective;
  const bool fits_equal = pools_equal && same_fits(reg.fits, cl.fits);
  const bool summary_equal = scores(reg.summary) == scores(cl.summary);
  return {sets_equal && fits_equal && summary_equal,
          fmt("training sets %s, fits %s, summary %s (CRPS %.6f vs %.6f)", sets_equal ? "identical" : "differ",
              fits_equal ? "identical" : "differ", summary_equal ? "identical" : "differs", reg.summary.crps,
              cl.summary.crps)};
}

// 3. distance regime with L = 1 and cluster regime with k = P against local
Outcome semi_local_degenerates_to_local(const Dataset& ds, Date verify_start) {
  const auto loc = run(run_config(RegimeKind::local, 40, verify_start), ds);
  auto dcfg = run_config(RegimeKind::distance, 40, verify_start);
  dcfg.L = 1;
  const auto dist = run(dcfg, ds);
  auto kcfg = run_config(RegimeKind::cluster, 40, verify_start);
  kcfg.k = ds.station_count();
  const auto clus = run(kcfg, ds);
  const bool l1 = scores(dist.summary) == scores(loc.summary) && same_fits(dist.fits, loc.fits);
  const bool kp = scores(clus.summary) == scores(loc.summary) && same_fits(clus.fits, loc.fits);
  return {l1 && kp, fmt("L=1 %s local, k=%d %s local (local CRPS %.6f)", l1 ? "==" : "!=",
                        static_cast<int>(ds.station_count()), kp ? "==" : "!=", loc.summary.crps)};
}

// 4. parameter recovery with the simplified model
Outcome parameter_recovery() {
  const auto t0 = Clock::now();
  SynthConfig sc;
  sc.stations = 50;
  sc.days = 200;
  sc.seed = 4040;
  StationType t;
  t.a0 = 0.7;
  t.a1 = 0.9;
  t.b0 = 0.5;
  t.b1 = 1.2;
  sc.types = {t};
  const auto ds = generate_synthetic(sc).data;
  const auto form = build_formulation(Variant::simplified, ds.layout());
  const Date after = ds.dates().back() + std::chrono::days(1);
  const auto training = build_training_set(Regional{}, ds, 0, after, 200, {});
  const auto r = fit(form, training, FitConfig{});
  const auto& c = r.coefficients;
  const double errs[] = {std::abs(c.a0 - t.a0) / t.a0, std::abs(c.group_coeffs[0] - t.a1) / t.a1,
                         std::abs(c.b0 - t.b0) / t.b0, std::abs(c.b1 - t.b1) / t.b1};
  const double worst = *std::max_element(std::begin(errs), std::end(errs));
  const double secs = seconds_since(t0);
  return {r.status == FitStatus::converged && worst <= 0.10 && secs < 120.0,
          fmt("a0=%.3f a1=%.3f b0=%.3f", c.a0, c.group_coeffs[0], c.b0) +
              fmt(" b1=%.3f (truth 0.7/0.9/0.5/1.2), worst rel. error %.1f%%, %.1f s", c.b1, 100 * worst, secs)};
}

// 5. semi-local beats regional on heterogeneous stations
Outcome semi_local_beats_regional() {
  const auto synth = generate_synthetic(fixture::three_type_config(60, 200, 5150));
  const auto& ds = synth.data;
  const Date verify_start = ds.dates()[100];
  const auto reg = run(run_config(RegimeKind::regional, 80, verify_start), ds);
  auto ccfg = run_config(RegimeKind::cluster, 80, verify_start);
  ccfg.k = 3;
  ccfg.features = FeatureKind::forecast_errors;
  const auto clus = run(ccfg, ds);
  auto dcfg = run_config(RegimeKind::distance, 80, verify_start);
  dcfg.L = 10;
  dcfg.distance = DistanceKind::combined;
  const auto dist = run(dcfg, ds);
  const double gain_fs2 = 1.0 - clus.summary.crps / reg.summary.crps;
  const double gain_d4 = 1.0 - dist.summary.crps / reg.summary.crps;
  return {gain_fs2 >= 0.05 || gain_d4 >= 0.05,
          fmt("CRPS regional %.4f, fs2 k=3 %.4f (%.1f%% better)", reg.summary.crps, clus.summary.crps, 100 * gain_fs2) +
              fmt(", d4 L=10 %.4f (%.1f%% better)", dist.summary.crps, 100 * gain_d4)};
}

// Truth of the generator for every case of a single-type synthetic dataset.
struct TruthSample {
  SyntheticData synth;
  std::vector<TnParams> truth;
  std::vector<double> obs;
};

TruthSample truth_sample() {
  SynthConfig sc;
  sc.stations = 50;
  sc.days = 200;
  sc.seed = 6060;
  TruthSample t{generate_synthetic(sc), {}, {}};
  const auto form = build_formulation(Variant::simplified, t.synth.data.layout());
  for (const auto& c : t.synth.data.cases()) {
    const auto& ty = sc.types[t.synth.station_type[t.synth.data.station_index(c.station_id)]];
    t.truth.push_back(link(form, {ty.a0, {ty.a1}, ty.b0, ty.b1}, c.members));
    t.obs.push_back(c.observation);
  }
  return t;
}

// 6. calibration of the true model, underdispersion of the raw ensemble
Outcome calibration(const TruthSample& t) {
  std::vector<double> pits;
  for (std::size_t i = 0; i < t.obs.size(); ++i) pits.push_back(pit(t.truth[i], t.obs[i]));
  const double p = ks_uniform_pvalue(pits);
  std::vector<const ForecastCase*> cases;
  for (const auto& c : t.synth.data.cases()) cases.push_back(&c);
  const auto raw = ensemble_report(cases, std::nullopt, 1);
  const double mean = static_cast<double>(raw.ranks.total()) / static_cast<double>(raw.ranks.bins.size());
  const double lo = static_cast<double>(raw.ranks.bins.front()) / mean;
  const double hi = static_cast<double>(raw.ranks.bins.back()) / mean;
  return {p > 0.01 && lo > 1.5 && hi > 1.5,
          fmt("KS p-value %.3f on %d PITs; rank end bins %.2fx and ", p, static_cast<int>(pits.size()), lo) +
              fmt("%.2fx the mean bin", hi)};
}

// 7. central interval coverage at alpha = 2/53
Outcome coverage(const TruthSample& t) {
  const auto r = report(t.truth, t.obs, default_alpha);
  return {std::abs(r.coverage - 96.2) <= 1.0,
          fmt("coverage %.2f%% of %d cases (nominal %.1f%%)", r.coverage, static_cast<int>(r.case_count),
              100.0 * (1.0 - default_alpha))};
}

// 8. distance and feature properties
Outcome distance_and_feature_properties() {
  const auto ds = fixture::synth(15, 60, 888).data;
  std::vector<Date> ref(ds.dates().begin(), ds.dates().begin() + 30);
  bool metric_ok = true;
  std::vector<DistanceMatrix> mats;
  for (auto kind : {DistanceKind::location, DistanceKind::climatology, DistanceKind::forecast_error,
                    DistanceKind::combined, DistanceKind::ensemble_stats}) {
    DistanceSpec spec;
    spec.kind = kind;
    spec.reference_dates = ref;
    mats.push_back(distance_matrix(spec, ds));
    const auto& m = mats.back();
    for (std::size_t i = 0; i < m.size(); ++i) {
      metric_ok = metric_ok && m(i, i) == 0.0;
      for (std::size_t j = 0; j < m.size(); ++j) metric_ok = metric_ok && m(i, j) == m(j, i) && m(i, j) >= 0.0;
    }
  }
  bool d4_ok = true;
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t j = 0; j < 15; ++j) d4_ok = d4_ok && mats[3](i, j) == mats[1](i, j) + mats[2](i, j);

  bool split_ok = true;
  for (std::size_t n = 1; n <= 48; ++n) {
    const FeatureSpec fs{FeatureKind::combined, n};
    split_ok = split_ok && fs.climatology_count() == (n + 1) / 2 && fs.climatology_count() + fs.error_count() == n;
  }

  bool monotone = true;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto fm = extract_features({FeatureKind::combined, 24}, ds, ds.dates()[40 + trial], 30);
    auto pts = fm.rows;
    for (auto& p : pts)
      for (auto& v : p) v += 0.1 * z(rng);
    KMeansOptions opts;
    opts.seed = static_cast<std::uint64_t>(trial);
    const auto r = kmeans(pts, 4, opts);
    monotone = monotone && !r.trace.empty() && r.trace.front() <= r.initial_objective;
    for (std::size_t i = 1; i < r.trace.size(); ++i) monotone = monotone && r.trace[i] <= r.trace[i - 1];
  }
  return {metric_ok && d4_ok && split_ok && monotone,
          std::string("symmetry/zero-diagonal/non-negativity ") + (metric_ok ? "ok" : "violated") + ", d4 = d2 + d3 " +
              (d4_ok ? "exact" : "inexact") + ", fs3 split " + (split_ok ? "ok" : "wrong") + ", k-means trace " +
              (monotone ? "monotone" : "not monotone")};
}

// 9. propriety and median optimality
Outcome propriety(const TruthSample& t) {
  const auto scaled = [&](double f) {
    std::vector<TnParams> out;
    for (auto p : t.truth) out.push_back({p.location, p.scale * f});
    return report(out, t.obs).mean_crps;
  };
  const auto truth = report(t.truth, t.obs);
  const double half = scaled(0.5), twice = scaled(2.0);
  bool median_best = true;
  for (double tau : {0.25, 0.4, 0.45, 0.55, 0.6, 0.75}) {
    double mae = 0.0;
    for (std::size_t i = 0; i < t.obs.size(); ++i) mae += std::abs(tn_quantile(t.truth[i], tau) - t.obs[i]);
    median_best = median_best && truth.mae <= mae / static_cast<double>(t.obs.size());
  }
  return {truth.mean_crps < half && truth.mean_crps < twice && median_best,
          fmt("CRPS true %.4f, scale x0.5 %.4f, x2 %.4f; ", truth.mean_crps, half, twice) +
              std::string("median MAE ") + (median_best ? "minimal" : "not minimal") + " among tested levels"};
}

// 10. forced fit failure falls back to the last successful coefficients
Outcome fallback() {
  const auto sc = fixture::fallback_scenario();
  const auto form = build_formulation(Variant::simplified, sc.data.layout());
  SequenceOptions opts;
  opts.window = 5;
  const auto seq =
      fit_sequence(ClusterSemiLocal{{FeatureKind::climatology, 1}, 2}, form, sc.data, sc.dates, FitConfig{}, opts);
  const std::size_t last = sc.dates.size() - 1;
  const auto& now = seq.at(last, sc.sparse_station);
  const auto& before = seq.at(last - 1, sc.sparse_station);
  const auto& pool = seq.pool_fits[now.pool_fit];
  const bool ok = now.status == FitStatus::fallback_used && before.status == FitStatus::converged &&
                  now.coefficients == before.coefficients && pool.result.status != FitStatus::converged &&
                  seq.fallback_rate(sc.data) > 0.0;
  return {ok, fmt("pool of %d cases for %d parameters -> %s; reused previous coefficients: %s; fallback rate %.2f%%",
                  static_cast<int>(pool.result.diagnostics.training_size), static_cast<int>(form.parameter_count()),
                  to_string(now.status).c_str(), now.coefficients == before.coefficients ? "yes" : "no",
                  100.0 * seq.fallback_rate(sc.data))};
}

} // namespace

int main() {
  const auto small = fixture::synth(20, 120, 2020).data;
  const Date verify_start = small.dates()[60];
  std::optional<TruthSample> truth;
  const auto need_truth = [&]() -> const TruthSample& {
    if (!truth) truth = truth_sample();
    return *truth;
  };

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"closed-form CRPS matches quadrature oracle", crps_oracle},
      {"cluster k=1 identical to regional", [&] { return cluster_one_is_regional(small, verify_start); }},
      {"distance L=1 and cluster k=P identical to local",
       [&] { return semi_local_degenerates_to_local(small, verify_start); }},
      {"parameter recovery within 10%", parameter_recovery},
      {"semi-local CRPS at least 5% below regional", semi_local_beats_regional},
      {"PIT uniformity and U-shaped raw rank histogram", [&] { return calibration(need_truth()); }},
      {"coverage at alpha=2/53 within 96.2 +- 1 pp", [&] { return coverage(need_truth()); }},
      {"distance and feature properties", distance_and_feature_properties},
      {"propriety and median optimality", [&] { return propriety(need_truth()); }},
      {"fallback to last successful coefficients", fallback},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %zu: %s -- %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu acceptance criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
