#include "emos/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "emos/distributions.hpp"
#include "emos/error.hpp"

namespace emos {

void SynthConfig::validate() const {
  if (stations == 0) throw ConfigError("synthetic config: stations must be positive");
  if (days == 0) throw ConfigError("synthetic config: days must be positive");
  if (layout.member_count() < 2) throw ConfigError("synthetic config: at least two ensemble members are required");
  if (types.empty()) throw ConfigError("synthetic config: at least one station type is required");
  if (!(missing >= 0.0 && missing < 1.0)) throw ConfigError("synthetic config: missing must lie in [0, 1)");
  if (!(region_size > 0.0)) throw ConfigError("synthetic config: region_size must be positive");
  for (std::size_t t = 0; t < types.size(); ++t) {
    const auto& ty = types[t];
    const std::string tag = " (type " + std::to_string(t) + ")";
    if (!(ty.weight > 0.0)) throw ConfigError("synthetic config: weight must be positive" + tag);
    if (!(ty.climate > 0.0)) throw ConfigError("synthetic config: climate must be positive" + tag);
    if (!(ty.spread > 0.0)) throw ConfigError("synthetic config: spread must be positive" + tag);
    if (!(ty.dispersion > 0.0)) throw ConfigError("synthetic config: dispersion must be positive" + tag);
    if (ty.b0 < 0.0 || ty.b1 < 0.0 || (ty.b0 == 0.0 && ty.b1 == 0.0))
      throw ConfigError("synthetic config: b0, b1 must be non-negative and not both zero" + tag);
  }
}

SynthConfig SynthConfig::from_config(const KeyValueConfig& cfg) {
  SynthConfig c;
  const auto positive = [&](const char* key, long long fallback) {
    const auto v = cfg.get_int(key, fallback);
    if (v <= 0) throw ConfigError(std::string("synthetic config: ") + key + " must be positive");
    return static_cast<std::size_t>(v);
  };
  if (!cfg.has("seed")) throw ConfigError("synthetic config: missing required key 'seed'");
  const auto seed = cfg.get_int("seed", 0);
  if (seed < 0) throw ConfigError("synthetic config: seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.stations = positive("stations", 20);
  c.days = positive("days", 200);
  try {
    c.start_date = parse_date(cfg.get_string("start_date", "2013-10-01"));
  } catch (const DataError& e) {
    throw ConfigError(std::string("synthetic config: ") + e.what());
  }
  const auto layout = cfg.get_string("layout", "single");
  if (layout == "glameps") {
    c.layout = SubensembleLayout::glameps();
  } else if (layout == "single") {
    c.layout = SubensembleLayout::single(positive("members", 8));
  } else {
    throw ConfigError("synthetic config: layout must be 'single' or 'glameps'");
  }
  c.missing = cfg.get_double("missing", 0.0);
  c.region_size = cfg.get_double("region_size", 100.0);

  const auto type_count = positive("types", 1);
  c.types.assign(type_count, StationType{});
  for (std::size_t t = 0; t < type_count; ++t) {
    auto& ty = c.types[t];
    const auto key = [t](const char* name) { return std::string(name) + "_" + std::to_string(t); };
    ty.weight = cfg.get_double(key("weight"), ty.weight);
    ty.climate = cfg.get_double(key("climate"), ty.climate);
    ty.spread = cfg.get_double(key("spread"), ty.spread);
    ty.dispersion = cfg.get_double(key("dispersion"), ty.dispersion);
    ty.a0 = -cfg.get_double(key("bias"), -ty.a0);
    ty.a0 = cfg.get_double(key("a0"), ty.a0);
    ty.a1 = cfg.get_double(key("a1"), ty.a1);
    ty.b0 = cfg.get_double(key("b0"), ty.b0);
    ty.b1 = cfg.get_double(key("b1"), ty.b1);
  }
  c.validate();
  return c;
}

SyntheticData generate_synthetic(const SynthConfig& config) {
  config.validate();
  const std::size_t types = config.types.size();

  // Types are assigned in contiguous blocks proportional to their weights.
  double total_weight = 0.0;
  for (const auto& t : config.types) total_weight += t.weight;
  std::vector<std::size_t> station_type(config.stations);
  for (std::size_t i = 0; i < config.stations; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(config.stations) * total_weight;
    double acc = 0.0;
    std::size_t t = 0;
    for (; t + 1 < types; ++t) {
      acc += config.types[t].weight;
      if (u < acc) break;
    }
    station_type[i] = t;
  }

  const auto& layout = config.layout;
  std::vector<StationRecord> stations;
  std::vector<ForecastCase> cases;
  cases.reserve(config.stations * config.days);
  const int width = config.stations >= 1000 ? 5 : 4;

  for (std::size_t i = 0; i < config.stations; ++i) {
    std::seed_seq seq{config.seed, static_cast<std::uint64_t>(i), std::uint64_t{0x5e1f}};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const auto& ty = config.types[station_type[i]];

    char id[32];
    std::snprintf(id, sizeof id, "S%0*zu", width, i + 1);
    // Types occupy overlapping regions around points on a circle.
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(station_type[i]) / static_cast<double>(types);
    const double cx = 0.5 + (types > 1 ? 0.25 * std::cos(angle) : 0.0);
    const double cy = 0.5 + (types > 1 ? 0.25 * std::sin(angle) : 0.0);
    const double x = config.region_size * (cx + 0.4 * (uniform(rng) - 0.5));
    const double y = config.region_size * (cy + 0.4 * (uniform(rng) - 0.5));
    stations.push_back({id, x, y});

    const double station_level = ty.climate * std::exp(0.15 * normal(rng));
    for (std::size_t d = 0; d < config.days; ++d) {
      const bool absent = uniform(rng) < config.missing;
      const double signal = station_level * std::exp(0.35 * normal(rng));
      const double spread = ty.spread * (0.4 + 1.2 * uniform(rng));
      ForecastCase c;
      c.station_id = id;
      c.date = config.start_date + std::chrono::days(static_cast<int>(d));
      c.members.reserve(layout.member_count());
      for (const auto& col : layout.columns) {
        const double sd = ty.dispersion * spread * (col.role == MemberRole::control ? 0.5 : 1.0);
        c.members.push_back(std::max(0.0, signal + sd * normal(rng)));
      }
      const auto stats = ensemble_stats(c.members);
      const TnParams truth{ty.a0 + ty.a1 * stats.mean, std::sqrt(ty.b0 + ty.b1 * stats.variance)};
      double u = uniform(rng);
      u = std::clamp(u, 1e-12, 1.0 - 1e-12);
      c.observation = tn_quantile(truth, u);
      if (!absent) cases.push_back(std::move(c));
    }
  }
  return {Dataset(std::move(stations), std::move(cases), layout), std::move(station_type)};
}

} // namespace emos
