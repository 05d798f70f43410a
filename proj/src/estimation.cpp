#include "emos/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_blas.h>
#include <gsl/gsl_multimin.h>

#include "emos/csv.hpp"
#include "emos/error.hpp"
#include "emos/parallel.hpp"

namespace emos {

Objective parse_objective(const std::string& name) {
  if (name == "crps") return Objective::crps;
  if (name == "log_score" || name == "ml") return Objective::log_score;
  throw ConfigError("unknown objective '" + name + "' (expected crps or log_score)");
}

std::string to_string(Objective objective) { return objective == Objective::crps ? "crps" : "log_score"; }

std::string to_string(FitStatus status) {
  switch (status) {
  case FitStatus::converged:
    return "converged";
  case FitStatus::fallback_used:
    return "fallback_used";
  case FitStatus::failed:
    return "failed";
  }
  return "unknown";
}

double mean_objective(const ModelFormulation& formulation, const EmosCoefficients& coeffs, const TrainingSet& training,
                      Objective objective) {
  if (training.empty()) throw DomainError("mean objective over an empty training set");
  double sum = 0.0;
  for (const auto* c : training.cases) {
    TnParams p;
    try {
      p = link(formulation, coeffs, c->members);
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
    sum += objective == Objective::crps ? tn_crps(p, c->observation) : tn_log_score(p, c->observation);
  }
  return sum / static_cast<double>(training.size());
}

ObjectiveFunction::ObjectiveFunction(const ModelFormulation& formulation, const TrainingSet& training,
                                     const FitConfig& config)
    : groups_(formulation.groups.group_count()), uses_mean_(formulation.uses_mean()), objective_(config.objective),
      nonneg_(config.nonneg_location), floor_(config.scale2_floor) {
  const auto& gs = formulation.groups;
  for (std::size_t k = 0; k < groups_; ++k) group_sizes_.push_back(static_cast<double>(gs.group_size(k)));
  group_means_.reserve(training.size() * groups_);
  for (const auto* c : training.cases) {
    if (c->members.size() != gs.member_count()) throw StructureError("training case does not match the member layout");
    for (std::size_t k = 0; k < groups_; ++k) {
      double sum = 0.0;
      for (auto idx : gs.groups()[k].members) sum += c->members[idx];
      group_means_.push_back(sum / group_sizes_[k]);
    }
    variance_.push_back(ensemble_stats(c->members).variance);
    obs_.push_back(c->observation);
  }
}

std::vector<double> ObjectiveFunction::to_theta(const EmosCoefficients& coeffs) const {
  coeffs.validate(groups_);
  std::vector<double> theta;
  theta.push_back(coeffs.a0);
  for (std::size_t k = 0; k < groups_; ++k) {
    const double w = uses_mean_ ? coeffs.group_coeffs[k] : coeffs.group_coeffs[k] * group_sizes_[k];
    theta.push_back(nonneg_ ? std::sqrt(std::max(0.0, w)) : w);
  }
  theta.push_back(std::sqrt(coeffs.b0));
  theta.push_back(std::sqrt(coeffs.b1));
  return theta;
}

EmosCoefficients ObjectiveFunction::to_coefficients(std::span<const double> theta) const {
  EmosCoefficients c;
  c.a0 = theta[0];
  for (std::size_t k = 0; k < groups_; ++k) {
    const double w = nonneg_ ? theta[1 + k] * theta[1 + k] : theta[1 + k];
    c.group_coeffs.push_back(uses_mean_ ? w : w / group_sizes_[k]);
  }
  c.b0 = theta[groups_ + 1] * theta[groups_ + 1];
  c.b1 = theta[groups_ + 2] * theta[groups_ + 2];
  return c;
}

double ObjectiveFunction::evaluate(std::span<const double> theta, std::span<double> gradient) const {
  const std::size_t dim = dimension();
  const bool want_grad = !gradient.empty();
  if (want_grad) std::fill(gradient.begin(), gradient.end(), 0.0);
  for (double t : theta)
    if (!std::isfinite(t)) return std::numeric_limits<double>::infinity();

  std::vector<double> w(groups_);
  for (std::size_t k = 0; k < groups_; ++k) w[k] = nonneg_ ? theta[1 + k] * theta[1 + k] : theta[1 + k];
  const double c0 = theta[dim - 2];
  const double c1 = theta[dim - 1];

  double sum = 0.0;
  const std::size_t n = obs_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double* g = &group_means_[i * groups_];
    double mu = theta[0];
    for (std::size_t k = 0; k < groups_; ++k) mu += w[k] * g[k];
    double scale2 = c0 * c0 + c1 * c1 * variance_[i];
    const bool floored = scale2 < floor_;
    if (floored) scale2 = floor_;
    const double sigma = std::sqrt(scale2);
    if (!std::isfinite(mu)) return std::numeric_limits<double>::infinity();
    const auto sg = objective_ == Objective::crps ? tn_crps_gradient({mu, sigma}, obs_[i])
                                                  : tn_log_score_gradient({mu, sigma}, obs_[i]);
    sum += sg.value;
    if (!want_grad) continue;
    gradient[0] += sg.d_location;
    for (std::size_t k = 0; k < groups_; ++k)
      gradient[1 + k] += sg.d_location * g[k] * (nonneg_ ? 2.0 * theta[1 + k] : 1.0);
    if (!floored) {
      gradient[dim - 2] += sg.d_scale * c0 / sigma;
      gradient[dim - 1] += sg.d_scale * c1 * variance_[i] / sigma;
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  if (want_grad)
    for (auto& gi : gradient) gi *= inv;
  return sum * inv;
}

double ObjectiveFunction::floored_fraction(std::span<const double> theta) const {
  const std::size_t dim = dimension();
  const double c0 = theta[dim - 2];
  const double c1 = theta[dim - 1];
  std::size_t count = 0;
  for (double v : variance_)
    if (c0 * c0 + c1 * c1 * v < floor_) ++count;
  return obs_.empty() ? 0.0 : static_cast<double>(count) / static_cast<double>(obs_.size());
}

namespace {

void disable_gsl_abort() {
  static std::once_flag once;
  std::call_once(once, [] { gsl_set_error_handler_off(); });
}

struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct MinimizerDeleter {
  void operator()(gsl_multimin_fdfminimizer* m) const { gsl_multimin_fdfminimizer_free(m); }
};

std::vector<double> copy_out(const gsl_vector* v) {
  std::vector<double> out(v->size);
  for (std::size_t i = 0; i < v->size; ++i) out[i] = gsl_vector_get(v, i);
  return out;
}

double gsl_value(const gsl_vector* x, void* params) {
  const auto* fn = static_cast<const ObjectiveFunction*>(params);
  const auto theta = copy_out(x);
  return fn->evaluate(theta, {});
}

void gsl_value_gradient(const gsl_vector* x, void* params, double* f, gsl_vector* g) {
  const auto* fn = static_cast<const ObjectiveFunction*>(params);
  const auto theta = copy_out(x);
  std::vector<double> grad(theta.size());
  const double value = fn->evaluate(theta, grad);
  if (f) *f = value;
  for (std::size_t i = 0; i < grad.size(); ++i) gsl_vector_set(g, i, grad[i]);
}

void gsl_gradient(const gsl_vector* x, void* params, gsl_vector* g) { gsl_value_gradient(x, params, nullptr, g); }

struct Attempt {
  std::vector<double> theta;
  double value = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  double gradient_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::string message;
};

Attempt run_bfgs(const ObjectiveFunction& fn, const std::vector<double>& start, std::size_t max_iterations,
                 double tolerance) {
  disable_gsl_abort();
  const std::size_t dim = fn.dimension();
  gsl_multimin_function_fdf fdf;
  fdf.n = dim;
  fdf.f = &gsl_value;
  fdf.df = &gsl_gradient;
  fdf.fdf = &gsl_value_gradient;
  fdf.params = const_cast<ObjectiveFunction*>(&fn);

  std::unique_ptr<gsl_vector, VectorDeleter> x(gsl_vector_alloc(dim));
  for (std::size_t i = 0; i < dim; ++i) gsl_vector_set(x.get(), i, start[i]);
  std::unique_ptr<gsl_multimin_fdfminimizer, MinimizerDeleter> s(
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, dim));

  Attempt a;
  a.theta = start;
  if (gsl_multimin_fdfminimizer_set(s.get(), &fdf, x.get(), 0.1, 0.1) != GSL_SUCCESS || !std::isfinite(s->f)) {
    a.value = fn.evaluate(start, {});
    a.message = "objective not finite at the starting point";
    return a;
  }
  for (a.iterations = 0; a.iterations < max_iterations;) {
    const double previous = s->f;
    const int status = gsl_multimin_fdfminimizer_iterate(s.get());
    ++a.iterations;
    a.gradient_norm = gsl_blas_dnrm2(s->gradient);
    if (status == GSL_ENOPROG) {
      a.converged = true;
      a.message = "no further descent possible";
      break;
    }
    if (status != GSL_SUCCESS) {
      a.message = std::string("optimiser error: ") + gsl_strerror(status);
      break;
    }
    if (!std::isfinite(s->f)) {
      a.message = "objective diverged";
      break;
    }
    if ((previous - s->f < tolerance && a.gradient_norm < 1e-3) || a.gradient_norm < 1e-7) {
      a.converged = true;
      a.message = "objective improvement below tolerance";
      break;
    }
  }
  if (!a.converged && a.message.empty()) a.message = "iteration limit reached";
  a.theta = copy_out(gsl_multimin_fdfminimizer_x(s.get()));
  a.value = s->f;
  return a;
}

bool coefficients_valid(const EmosCoefficients& c, std::size_t groups) {
  try {
    c.validate(groups);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

} // namespace

FitResult fit(const ModelFormulation& formulation, const TrainingSet& training, const FitConfig& config) {
  if (!(config.tolerance > 0.0)) throw DomainError("optimiser tolerance must be positive");
  const std::size_t groups = formulation.groups.group_count();
  const EmosCoefficients default_init = config.default_init.value_or(mean_reproducing_coefficients(formulation));
  std::optional<EmosCoefficients> fallback = config.fallback;
  if (!fallback && config.fallback_to_warm_start) fallback = config.warm_start;

  FitResult result;
  result.diagnostics.training_size = training.size();
  const auto give_up = [&](const std::string& why, std::optional<EmosCoefficients> best) {
    result.diagnostics.message = why;
    if (fallback) {
      result.status = FitStatus::fallback_used;
      result.coefficients = *fallback;
    } else {
      result.status = FitStatus::failed;
      result.coefficients = best && coefficients_valid(*best, groups) ? *best : default_init;
    }
    result.objective = training.empty() ? std::numeric_limits<double>::quiet_NaN()
                                        : mean_objective(formulation, result.coefficients, training, config.objective);
    return result;
  };

  if (training.size() < formulation.parameter_count())
    return give_up("training set of " + std::to_string(training.size()) + " cases is smaller than the " +
                       std::to_string(formulation.parameter_count()) + " parameters",
                   std::nullopt);

  const ObjectiveFunction fn(formulation, training, config);
  const auto default_theta = fn.to_theta(default_init);
  auto start = default_theta;
  if (config.warm_start) {
    const auto warm = fn.to_theta(*config.warm_start);
    if (fn.evaluate(warm, {}) <= fn.evaluate(default_theta, {})) start = warm;
  }

  const auto failed_reason = [&](const Attempt& a) -> std::string {
    if (!std::isfinite(a.value)) return "non-finite objective";
    if (fn.floored_fraction(a.theta) > 0.5) return "predictive variance at the floor for most cases";
    if (!a.converged) return a.message;
    return {};
  };

  Attempt attempt = run_bfgs(fn, start, config.max_iterations, config.tolerance);
  std::string why = failed_reason(attempt);
  if (!why.empty() && !fallback) {
    Attempt retry = run_bfgs(fn, default_theta, 2 * config.max_iterations, config.tolerance);
    retry.iterations += attempt.iterations;
    if (failed_reason(retry).empty() || retry.value < attempt.value) attempt = std::move(retry);
    why = failed_reason(attempt);
  }

  result.diagnostics.iterations = attempt.iterations;
  result.diagnostics.gradient_norm = attempt.gradient_norm;
  result.diagnostics.floored_fraction = fn.floored_fraction(attempt.theta);
  const auto coeffs = fn.to_coefficients(attempt.theta);
  if (!why.empty()) return give_up(why, coeffs);
  if (!coefficients_valid(coeffs, groups)) return give_up("degenerate scale coefficients", std::nullopt);

  result.status = FitStatus::converged;
  result.coefficients = coeffs;
  result.objective = attempt.value;
  result.diagnostics.message = attempt.message;
  return result;
}

std::size_t FitSequence::fits_performed() const {
  std::size_t n = 0;
  for (const auto& pf : pool_fits)
    if (pf.result.diagnostics.iterations > 0) ++n;
  return n;
}

double FitSequence::fallback_rate(const Dataset& ds) const {
  std::size_t total = 0;
  std::size_t fallback = 0;
  for (std::size_t d = 0; d < dates.size(); ++d)
    for (std::size_t s = 0; s < station_count; ++s) {
      if (!ds.find(s, dates[d])) continue;
      ++total;
      if (at(d, s).status != FitStatus::converged) ++fallback;
    }
  return total == 0 ? 0.0 : static_cast<double>(fallback) / static_cast<double>(total);
}

std::size_t FitSequence::failed_count(const Dataset& ds) const {
  std::size_t n = 0;
  for (std::size_t d = 0; d < dates.size(); ++d)
    for (std::size_t s = 0; s < station_count; ++s)
      if (ds.find(s, dates[d]) && at(d, s).status == FitStatus::failed) ++n;
  return n;
}

FitSequence fit_sequence(const Regime& regime, const ModelFormulation& formulation, const Dataset& ds,
                         std::span<const Date> dates, const FitConfig& config, const SequenceOptions& options) {
  validate(regime);
  if (options.window == 0) throw DomainError("rolling window length must be positive");
  for (std::size_t i = 1; i < dates.size(); ++i)
    if (!(dates[i - 1] < dates[i])) throw DomainError("verification dates must be strictly increasing");

  const std::size_t stations = ds.station_count();
  FitSequence seq;
  seq.dates.assign(dates.begin(), dates.end());
  seq.station_count = stations;
  seq.station_fits.resize(dates.size() * stations);

  std::vector<std::optional<EmosCoefficients>> previous(stations);
  std::vector<std::optional<EmosCoefficients>> last_success(stations);
  const auto* cluster_regime = std::get_if<ClusterSemiLocal>(&regime);

  for (std::size_t di = 0; di < dates.size(); ++di) {
    const Date date = dates[di];
    RegimeContext ctx;
    ctx.distances = options.distances;
    if (cluster_regime) {
      seq.clusterings.push_back(cluster_per_window(cluster_regime->features, ds, date, options.window,
                                                   cluster_regime->clusters, options.kmeans));
      ctx.clustering = &seq.clusterings.back();
    }
    auto pools = pools_for_date(regime, ds, ctx);

    std::vector<FitResult> results(pools.size());
    parallel_for(pools.size(), options.workers, [&](std::size_t p) {
      const auto ts = pooled_training_set(ds, pools[p], date, options.window);
      FitConfig cfg = config;
      cfg.fallback.reset();
      cfg.fallback_to_warm_start = false;
      if (const auto& warm = previous[pools[p].targets.front()]) cfg.warm_start = *warm;
      results[p] = fit(formulation, ts, cfg);
    });

    for (std::size_t p = 0; p < pools.size(); ++p) {
      const std::size_t index = seq.pool_fits.size();
      for (auto s : pools[p].targets) {
        auto& sf = seq.station_fits[di * stations + s];
        sf.pool_fit = index;
        if (results[p].status == FitStatus::converged) {
          sf.status = FitStatus::converged;
          sf.coefficients = results[p].coefficients;
          sf.has_coefficients = true;
          last_success[s] = sf.coefficients;
        } else if (last_success[s]) {
          sf.status = FitStatus::fallback_used;
          sf.coefficients = *last_success[s];
          sf.has_coefficients = true;
        } else {
          sf.status = FitStatus::failed;
          sf.has_coefficients = false;
          sf.coefficients = results[p].coefficients;
        }
        if (sf.has_coefficients) previous[s] = sf.coefficients;
      }
      seq.pool_fits.push_back({date, std::move(pools[p]), std::move(results[p])});
    }
  }
  return seq;
}

void write_fit_sequence(const FitSequence& seq, const ModelFormulation& formulation, const std::filesystem::path& path) {
  const std::size_t m = formulation.groups.group_count();
  std::string out = "date,pool_id,status,a0";
  for (std::size_t k = 1; k <= m; ++k) out += ",a" + std::to_string(k);
  out += ",b0,b1,objective\n";
  for (const auto& pf : seq.pool_fits) {
    const auto& c = pf.result.coefficients;
    out += format_date(pf.date) + "," + pf.pool.id + "," + to_string(pf.result.status) + "," + csv::format_double(c.a0);
    for (std::size_t k = 0; k < m; ++k)
      out += "," + (k < c.group_coeffs.size() ? csv::format_double(c.group_coeffs[k]) : std::string("nan"));
    out += "," + csv::format_double(c.b0) + "," + csv::format_double(c.b1) + "," + csv::format_double(pf.result.objective) +
           "\n";
  }
  csv::write_file_atomic(path, out);
}

} // namespace emos
