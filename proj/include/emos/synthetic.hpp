#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emos/dataset.hpp"
#include "emos/kv_config.hpp"

namespace emos {

// Generative parameters of one class of stations. Observations are drawn
// from N_0(a0 + a1 * mean, b0 + b1 * S^2) given the ensemble; ensemble
// members scatter around a latent signal with standard deviation
// dispersion * spread, so dispersion < 1 shrinks the ensemble relative to
// the forecast uncertainty.
struct StationType {
  double weight = 1.0;     // relative share of stations
  double climate = 5.0;    // typical wind speed level (m/s)
  double spread = 1.0;     // typical forecast uncertainty (m/s)
  double dispersion = 0.6; // ensemble spread factor
  double a0 = 0.0;         // true location intercept (-bias of the ensemble mean)
  double a1 = 1.0;
  double b0 = 0.5;
  double b1 = 1.0;
};

struct SynthConfig {
  std::size_t stations = 20;
  std::size_t days = 200;
  Date start_date = parse_date("2013-10-01");
  SubensembleLayout layout = SubensembleLayout::single(8);
  std::vector<StationType> types{StationType{}};
  double missing = 0.0;      // probability that a (station, day) case is absent
  double region_size = 100.; // side length of the coordinate square
  std::uint64_t seed = 0;

  // Throws ConfigError on inconsistent settings.
  void validate() const;

  // Keys: stations, days, start_date, seed (required), layout (single |
  // glameps), members, missing, region_size, types, and per type index t:
  // weight_t, climate_t, spread_t, dispersion_t, bias_t (sets a0 = -bias),
  // a0_t, a1_t, b0_t, b1_t.
  static SynthConfig from_config(const KeyValueConfig& cfg);
};

struct SyntheticData {
  Dataset data;
  std::vector<std::size_t> station_type; // per station, index into types
};

// Deterministic given the config (including its seed).
SyntheticData generate_synthetic(const SynthConfig& config);

} // namespace emos
