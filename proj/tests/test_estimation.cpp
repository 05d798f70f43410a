#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "emos/csv.hpp"
#include "emos/error.hpp"
#include "emos/estimation.hpp"
#include "emos/synthetic.hpp"
#include "test_support.hpp"

using namespace emos;

namespace {

TrainingSet as_training(const std::vector<ForecastCase>& cases) {
  TrainingSet ts;
  for (const auto& c : cases) ts.cases.push_back(&c);
  return ts;
}

TrainingSet regional_training(const Dataset& ds, Date date, std::size_t n) {
  return build_training_set(Regional{}, ds, 0, date, n, {});
}

} // namespace

TEST(MeanObjective, NormalRegimeValue) {
  const auto form = build_formulation(Variant::simplified, SubensembleLayout::single(2));
  std::vector<ForecastCase> cases;
  for (double m : {8.0, 10.0, 12.0, 15.0}) cases.push_back({"A", {}, {m - 1.0, m + 1.0}, m});
  const double sigma = 1.3;
  const double v = mean_objective(form, {0.0, {1.0}, sigma * sigma, 0.0}, as_training(cases));
  EXPECT_NEAR(v, sigma * 0.23369497725510907, 1e-6);
}

TEST(MeanObjective, DegenerateScaleAndPermutation) {
  const auto form = build_formulation(Variant::simplified, SubensembleLayout::single(2));
  std::vector<ForecastCase> one{{"A", {}, {4.0, 6.0}, 7.5}};
  EXPECT_NEAR(mean_objective(form, {0.0, {1.0}, 1e-14, 0.0}, as_training(one)), 2.5, 1e-6);

  const auto ds = fixture::synth(4, 30, 2).data;
  auto cases = ds.cases();
  const auto f8 = build_formulation(Variant::simplified, ds.layout());
  const EmosCoefficients c{0.3, {0.9}, 0.7, 1.1};
  const double base = mean_objective(f8, c, as_training(cases));
  std::mt19937_64 rng(3);
  std::shuffle(cases.begin(), cases.end(), rng);
  EXPECT_NEAR(mean_objective(f8, c, as_training(cases)), base, 1e-12);
  EXPECT_THROW(mean_objective(f8, c, TrainingSet{}), DomainError);
  const std::vector<ForecastCase> flat{{"A", {}, std::vector<double>(8, 2.0), 2.0}};
  EXPECT_EQ(mean_objective(f8, {0.0, {1.0}, 0.0, 1.0}, as_training(flat)), std::numeric_limits<double>::infinity());
}

TEST(MeanObjective, LogScoreIsNegativeMeanLogLikelihood) {
  const auto ds = fixture::synth(3, 20, 5).data;
  const auto form = build_formulation(Variant::simplified, ds.layout());
  const EmosCoefficients c{0.2, {0.95}, 0.4, 0.8};
  double loglik = 0.0;
  for (const auto& fc : ds.cases()) loglik += std::log(tn_pdf(link(form, c, fc.members), fc.observation));
  EXPECT_NEAR(mean_objective(form, c, as_training(ds.cases()), Objective::log_score),
              -loglik / static_cast<double>(ds.cases().size()), 1e-10);
}

TEST(ObjectiveFunction, GradientMatchesFiniteDifferences) {
  SynthConfig sc;
  sc.stations = 3;
  sc.days = 30;
  sc.seed = 8;
  sc.layout = SubensembleLayout::glameps();
  const auto ds = generate_synthetic(sc).data;
  const auto training = as_training(ds.cases());
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto variant : {Variant::full, Variant::lag_ignoring, Variant::simplified})
    for (auto objective : {Objective::crps, Objective::log_score})
      for (bool nonneg : {false, true}) {
        const auto form = build_formulation(variant, ds.layout());
        FitConfig cfg;
        cfg.objective = objective;
        cfg.nonneg_location = nonneg;
        const ObjectiveFunction fn(form, training, cfg);
        for (int trial = 0; trial < 5; ++trial) {
          auto theta = fn.to_theta(mean_reproducing_coefficients(form));
          for (auto& t : theta) t += 0.2 * u(rng);
          std::vector<double> grad(theta.size());
          fn.evaluate(theta, grad);
          for (std::size_t i = 0; i < theta.size(); ++i) {
            auto up = theta, down = theta;
            const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
            up[i] += h;
            down[i] -= h;
            const double fd = (fn.evaluate(up, {}) - fn.evaluate(down, {})) / (2 * h);
            EXPECT_NEAR(grad[i], fd, 1e-5 * std::max(1.0, std::abs(fd))) << to_string(variant) << " " << i;
          }
        }
      }
}

TEST(ObjectiveFunction, ThetaRoundTrip) {
  const auto form = build_formulation(Variant::full, SubensembleLayout::glameps());
  SynthConfig sc;
  sc.stations = 1;
  sc.days = 5;
  sc.seed = 1;
  sc.layout = SubensembleLayout::glameps();
  const auto ds = generate_synthetic(sc).data;
  const ObjectiveFunction fn(form, as_training(ds.cases()), FitConfig{});
  EmosCoefficients c{0.5, {}, 0.3, 0.9};
  for (std::size_t k = 0; k < 12; ++k) c.group_coeffs.push_back(0.01 * static_cast<double>(k));
  const auto back = fn.to_coefficients(fn.to_theta(c));
  EXPECT_NEAR(back.a0, c.a0, 1e-15);
  for (std::size_t k = 0; k < 12; ++k) EXPECT_NEAR(back.group_coeffs[k], c.group_coeffs[k], 1e-15);
  EXPECT_NEAR(back.b0, c.b0, 1e-15);
  EXPECT_NEAR(back.b1, c.b1, 1e-15);
  EXPECT_EQ(fn.dimension(), 15u);
}

TEST(Fit, RecoversGenerativeCoefficients) {
  SynthConfig sc;
  sc.stations = 50;
  sc.days = 81;
  sc.seed = 606;
  StationType t;
  t.a0 = 0.8;
  t.a1 = 0.9;
  t.b0 = 0.6;
  t.b1 = 1.4;
  sc.types = {t};
  const auto ds = generate_synthetic(sc).data;
  const auto form = build_formulation(Variant::simplified, ds.layout());
  const auto r = fit(form, regional_training(ds, ds.dates().back(), 80), FitConfig{});
  ASSERT_EQ(r.status, FitStatus::converged) << r.diagnostics.message;
  EXPECT_NEAR(r.coefficients.a0, 0.8, 0.08);
  EXPECT_NEAR(r.coefficients.group_coeffs[0], 0.9, 0.09);
  EXPECT_NEAR(r.coefficients.b0, 0.6, 0.06);
  EXPECT_NEAR(r.coefficients.b1, 1.4, 0.14);
}

TEST(Fit, DescentAndDeterminism) {
  const auto ds = fixture::synth(10, 60, 12).data;
  const auto form = build_formulation(Variant::simplified, ds.layout());
  const auto ts = regional_training(ds, ds.dates().back(), 40);
  FitConfig cfg;
  cfg.warm_start = EmosCoefficients{1.0, {0.5}, 2.0, 0.1};
  const auto r = fit(form, ts, cfg);
  ASSERT_EQ(r.status, FitStatus::converged);
  EXPECT_LE(r.objective, mean_objective(form, *cfg.warm_start, ts));
  EXPECT_LE(r.objective, mean_objective(form, mean_reproducing_coefficients(form), ts));
  EXPECT_NEAR(r.objective, mean_objective(form, r.coefficients, ts), 1e-12);
  const auto again = fit(form, ts, cfg);
  EXPECT_EQ(again.coefficients, r.coefficients);
  EXPECT_GE(r.coefficients.b0, 0.0);
  EXPECT_GE(r.coefficients.b1, 0.0);

  cfg.objective = Objective::log_score;
  const auto ml = fit(form, ts, cfg);
  EXPECT_EQ(ml.status, FitStatus::converged);
  EXPECT_LE(ml.objective, mean_objective(form, r.coefficients, ts, Objective::log_score));
}

TEST(Fit, InvariantUnderStationRelabeling) {
  const auto ds = fixture::synth(8, 50, 33).data;
  const auto form = build_formulation(Variant::simplified, ds.layout());
  auto ts = regional_training(ds, ds.dates().back(), 30);
  const auto a = fit(form, ts, FitConfig{});
  // the pool is a multiset: reversing station order (or renaming) must not matter
  std::vector<StationRecord> renamed;
  std::vector<ForecastCase> cases;
  for (const auto& s : ds.stations()) renamed.push_back({"Z" + s.id, s.x, s.y});
  std::reverse(renamed.begin(), renamed.end());
  for (const auto& c : ds.cases()) cases.push_back({"Z" + c.station_id, c.date, c.members, c.observation});
  const Dataset relabeled(renamed, cases, ds.layout());
  const auto b = fit(form, regional_training(relabeled, relabeled.dates().back(), 30), FitConfig{});
  EXPECT_NEAR(a.coefficients.a0, b.coefficients.a0, 1e-6);
  EXPECT_NEAR(a.coefficients.group_coeffs[0], b.coefficients.group_coeffs[0], 1e-6);
  EXPECT_NEAR(a.coefficients.b0, b.coefficients.b0, 1e-6);
  EXPECT_NEAR(a.coefficients.b1, b.coefficients.b1, 1e-6);
  EXPECT_NEAR(a.objective, b.objective, 1e-12);
}

TEST(Fit, SmallTrainingSetFallsBack) {
  const auto ds = fixture::synth(1, 10, 7).data;
  const auto form = build_formulation(Variant::simplified, ds.layout());
  const auto ts = build_training_set(Local{}, ds, 0, ds.dates()[3], 80, {});
  ASSERT_EQ(ts.size(), 3u);
  FitConfig cfg;
  cfg.warm_start = EmosCoefficients{0.1, {0.9}, 0.5, 0.5};
  auto r = fit(form, ts, cfg);
  EXPECT_EQ(r.status, FitStatus::fallback_used);
  EXPECT_EQ(r.coefficients, *cfg.warm_start);
  EXPECT_EQ(r.diagnostics.training_size, 3u);

  cfg.warm_start.reset();
  r = fit(form, ts, cfg);
  EXPECT_EQ(r.status, FitStatus::failed);
  r = fit(form, TrainingSet{}, cfg);
  EXPECT_EQ(r.status, FitStatus::failed);
  cfg.tolerance = 0.0;
  EXPECT_THROW(fit(form, ts, cfg), DomainError);
}

TEST(FitSequence, RegionalAndClusterFitCounts) {
  const auto ds = fixture::synth(8, 70, 19).data;
  const auto form = build_formulation(Variant::simplified, ds.layout());
  const std::vector<Date> dates(ds.dates().begin() + 60, ds.dates().end());
  SequenceOptions opts;
  opts.window = 30;
  const auto reg = fit_sequence(Regional{}, form, ds, dates, FitConfig{}, opts);
  EXPECT_EQ(reg.pool_fits.size(), dates.size());
  EXPECT_EQ(reg.fits_performed(), dates.size());
  EXPECT_EQ(reg.fallback_rate(ds), 0.0);
  for (std::size_t d = 0; d < dates.size(); ++d)
    for (std::size_t s = 1; s < 8; ++s) EXPECT_EQ(reg.at(d, s).coefficients, reg.at(d, 0).coefficients);

  const auto cl = fit_sequence(ClusterSemiLocal{{FeatureKind::forecast_errors, 24}, 3}, form, ds, dates, FitConfig{}, opts);
  EXPECT_LE(cl.pool_fits.size(), 3 * dates.size());
  EXPECT_EQ(cl.clusterings.size(), dates.size());

  const auto one = fit_sequence(ClusterSemiLocal{{FeatureKind::forecast_errors, 24}, 1}, form, ds, dates, FitConfig{}, opts);
  for (std::size_t i = 0; i < dates.size(); ++i) {
    EXPECT_EQ(one.pool_fits[i].result.coefficients, reg.pool_fits[i].result.coefficients);
    EXPECT_EQ(one.pool_fits[i].result.objective, reg.pool_fits[i].result.objective);
  }
  std::vector<Date> unordered{dates[1], dates[0]};
  EXPECT_THROW(fit_sequence(Regional{}, form, ds, unordered, FitConfig{}, opts), DomainError);
}

TEST(FitSequence, WorkerCountDoesNotChangeResults) {
  const auto ds = fixture::synth(6, 60, 29).data;
  const auto form = build_formulation(Variant::simplified, ds.layout());
  const std::vector<Date> dates(ds.dates().begin() + 50, ds.dates().end());
  SequenceOptions opts;
  opts.window = 25;
  const auto a = fit_sequence(Local{}, form, ds, dates, FitConfig{}, opts);
  opts.workers = 4;
  const auto b = fit_sequence(Local{}, form, ds, dates, FitConfig{}, opts);
  ASSERT_EQ(a.station_fits.size(), b.station_fits.size());
  for (std::size_t i = 0; i < a.station_fits.size(); ++i)
    EXPECT_EQ(a.station_fits[i].coefficients, b.station_fits[i].coefficients);
}

TEST(FitSequence, FallbackReusesLastSuccessfulCoefficients) {
  const auto sc = fixture::fallback_scenario();
  const auto form = build_formulation(Variant::simplified, sc.data.layout());
  SequenceOptions opts;
  opts.window = 5;
  const auto seq = fit_sequence(ClusterSemiLocal{{FeatureKind::climatology, 1}, 2}, form, sc.data, sc.dates,
                                FitConfig{}, opts);
  const std::size_t last = sc.dates.size() - 1;
  const auto& b = seq.at(last, sc.sparse_station);
  ASSERT_EQ(b.status, FitStatus::fallback_used);
  EXPECT_TRUE(b.has_coefficients);
  const auto& before = seq.at(last - 1, sc.sparse_station);
  ASSERT_EQ(before.status, FitStatus::converged);
  EXPECT_EQ(b.coefficients, before.coefficients);
  EXPECT_EQ(seq.pool_fits[b.pool_fit].pool.stations, std::vector<std::size_t>{sc.sparse_station});
  EXPECT_NE(seq.pool_fits[b.pool_fit].result.status, FitStatus::converged);
  EXPECT_GT(seq.fallback_rate(sc.data), 0.0);
  EXPECT_EQ(seq.failed_count(sc.data), 0u);
}

TEST(FitSequence, FirstDateFailureWithoutPredecessor) {
  const auto ds = fixture::synth(2, 20, 4).data;
  const auto form = build_formulation(Variant::simplified, ds.layout());
  SequenceOptions opts;
  opts.window = 80;
  const std::vector<Date> dates(ds.dates().begin() + 1, ds.dates().begin() + 8);
  const auto seq = fit_sequence(Local{}, form, ds, dates, FitConfig{}, opts);
  EXPECT_EQ(seq.at(0, 0).status, FitStatus::failed);
  EXPECT_FALSE(seq.at(0, 0).has_coefficients);
  EXPECT_GT(seq.failed_count(ds), 0u);
  EXPECT_EQ(seq.at(dates.size() - 1, 0).status, FitStatus::converged);
}

TEST(FitSequence, CsvExport) {
  const auto ds = fixture::synth(3, 40, 4).data;
  const auto form = build_formulation(Variant::simplified, ds.layout());
  SequenceOptions opts;
  opts.window = 20;
  const std::vector<Date> dates(ds.dates().begin() + 30, ds.dates().end());
  const auto seq = fit_sequence(Local{}, form, ds, dates, FitConfig{}, opts);
  const auto dir = fixture::scratch_dir("fits");
  write_fit_sequence(seq, form, dir / "fits.csv");
  const auto lines = csv::read_lines(dir / "fits.csv");
  EXPECT_EQ(lines.front(), "date,pool_id,status,a0,a1,b0,b1,objective");
  EXPECT_EQ(lines.size(), 1 + 3 * dates.size());
}

TEST(Objective, Parsing) {
  EXPECT_EQ(parse_objective("crps"), Objective::crps);
  EXPECT_EQ(parse_objective("log_score"), Objective::log_score);
  EXPECT_THROW(parse_objective("brier"), ConfigError);
}
