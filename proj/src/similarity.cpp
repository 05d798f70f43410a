#include "emos/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emos/csv.hpp"
#include "emos/error.hpp"
#include "emos/parallel.hpp"

namespace emos {

EmpiricalCdf::EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
  if (sorted_.empty()) throw DomainError("empirical CDF needs at least one value");
  for (double v : sorted_)
    if (!std::isfinite(v)) throw DomainError("empirical CDF values must be finite");
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double x) const {
  const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
  return static_cast<double>(count) / static_cast<double>(sorted_.size());
}

double EmpiricalCdf::quantile(double tau) const {
  if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("empirical quantile level must lie in (0, 1]");
  // Smallest k with k / n >= tau, guarding against rounding in k / n.
  const double n = static_cast<double>(sorted_.size());
  auto k = static_cast<std::size_t>(std::ceil(tau * n));
  while (k > 1 && static_cast<double>(k - 1) / n >= tau) --k;
  while (k < sorted_.size() && static_cast<double>(k) / n < tau) ++k;
  k = std::clamp<std::size_t>(k, 1, sorted_.size());
  return sorted_[k - 1];
}

DistanceKind parse_distance_kind(const std::string& name) {
  if (name == "d1" || name == "location") return DistanceKind::location;
  if (name == "d2" || name == "climatology") return DistanceKind::climatology;
  if (name == "d3" || name == "forecast_error") return DistanceKind::forecast_error;
  if (name == "d4" || name == "combined") return DistanceKind::combined;
  if (name == "d5" || name == "ensemble_stats") return DistanceKind::ensemble_stats;
  throw ConfigError("unknown distance kind '" + name + "' (expected d1..d5)");
}

std::string to_string(DistanceKind kind) {
  switch (kind) {
  case DistanceKind::location:
    return "d1";
  case DistanceKind::climatology:
    return "d2";
  case DistanceKind::forecast_error:
    return "d3";
  case DistanceKind::combined:
    return "d4";
  case DistanceKind::ensemble_stats:
    return "d5";
  }
  return "unknown";
}

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw DomainError("grid needs step > 0 and hi >= lo");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t k = 0; k < count; ++k) grid[k] = lo + static_cast<double>(k) * step;
  return grid;
}

void DistanceSpec::validate() const {
  const auto increasing = [](const std::vector<double>& g) {
    if (g.empty()) return false;
    for (std::size_t i = 1; i < g.size(); ++i)
      if (!(g[i] > g[i - 1])) return false;
    return true;
  };
  if (!increasing(grid_s) || !increasing(grid_s_prime))
    throw DomainError("distance grids must be nonempty and strictly increasing");
  if (kind != DistanceKind::location && reference_dates.empty())
    throw DomainError("distance " + to_string(kind) + " needs a nonempty reference period");
}

std::vector<Date> dates_between(const Dataset& ds, Date first, Date last) {
  std::vector<Date> out;
  for (auto d : ds.dates())
    if (d >= first && d <= last) out.push_back(d);
  return out;
}

namespace {

template <typename Fn>
void for_each_case_in(const Dataset& ds, std::size_t station, std::span<const Date> dates, Fn&& fn) {
  for (const auto& c : ds.station_cases(station))
    if (std::binary_search(dates.begin(), dates.end(), c.date)) fn(c);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct DailyStats {
  Date date;
  double mean;
  double sd;
};

// Everything a pairwise distance needs from one station.
struct StationProfile {
  double x = 0.0;
  double y = 0.0;
  std::vector<double> obs_cdf;   // on grid S
  std::vector<double> error_cdf; // on grid S'
  std::vector<DailyStats> daily;
};

StationProfile make_profile(const DistanceSpec& spec, const Dataset& ds, std::size_t station) {
  StationProfile p;
  p.x = ds.stations()[station].x;
  p.y = ds.stations()[station].y;
  const auto& dates = spec.reference_dates;
  const std::string& id = ds.stations()[station].id;
  switch (spec.kind) {
  case DistanceKind::location:
    break;
  case DistanceKind::climatology:
  case DistanceKind::forecast_error:
  case DistanceKind::combined: {
    try {
      if (spec.kind != DistanceKind::forecast_error) {
        const auto F = observation_cdf(ds, station, dates);
        for (double s : spec.grid_s) p.obs_cdf.push_back(F(s));
      }
      if (spec.kind != DistanceKind::climatology) {
        const auto G = forecast_error_cdf(ds, station, dates);
        for (double s : spec.grid_s_prime) p.error_cdf.push_back(G(s));
      }
    } catch (const DomainError&) {
      throw DomainError("station '" + id + "' has no cases in the reference period");
    }
    break;
  }
  case DistanceKind::ensemble_stats:
    for_each_case_in(ds, station, dates, [&](const ForecastCase& c) {
      const auto st = ensemble_stats(c.members);
      p.daily.push_back({c.date, st.mean, std::sqrt(st.variance)});
    });
    break;
  }
  return p;
}

double mean_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += std::abs(a[k] - b[k]);
  return sum / static_cast<double>(a.size());
}

double profile_distance(DistanceKind kind, const StationProfile& a, const StationProfile& b) {
  switch (kind) {
  case DistanceKind::location:
    return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y));
  case DistanceKind::climatology:
    return mean_abs_diff(a.obs_cdf, b.obs_cdf);
  case DistanceKind::forecast_error:
    return mean_abs_diff(a.error_cdf, b.error_cdf);
  case DistanceKind::combined:
    return mean_abs_diff(a.obs_cdf, b.obs_cdf) + mean_abs_diff(a.error_cdf, b.error_cdf);
  case DistanceKind::ensemble_stats: {
    // Sum over dates present at both stations (merge of two sorted lists).
    double sum = 0.0;
    std::size_t common = 0;
    auto ia = a.daily.begin();
    auto ib = b.daily.begin();
    while (ia != a.daily.end() && ib != b.daily.end()) {
      if (ia->date < ib->date) {
        ++ia;
      } else if (ib->date < ia->date) {
        ++ib;
      } else {
        sum += std::sqrt((ia->mean - ib->mean) * (ia->mean - ib->mean) + (ia->sd - ib->sd) * (ia->sd - ib->sd));
        ++common;
        ++ia;
        ++ib;
      }
    }
    if (common == 0) throw DomainError("d5: stations share no reference dates");
    return sum;
  }
  }
  return 0.0;
}

} // namespace

EmpiricalCdf observation_cdf(const Dataset& ds, std::size_t station, std::span<const Date> dates) {
  std::vector<double> values;
  for_each_case_in(ds, station, dates, [&](const ForecastCase& c) { values.push_back(c.observation); });
  return EmpiricalCdf(std::move(values));
}

EmpiricalCdf forecast_error_cdf(const Dataset& ds, std::size_t station, std::span<const Date> dates) {
  std::vector<double> errors;
  for_each_case_in(ds, station, dates,
                   [&](const ForecastCase& c) { errors.push_back(mean_of(c.members) - c.observation); });
  return EmpiricalCdf(std::move(errors));
}

double distance(const DistanceSpec& spec, const Dataset& ds, std::size_t i, std::size_t j) {
  spec.validate();
  if (i >= ds.station_count() || j >= ds.station_count()) throw DomainError("station index out of range");
  if (i == j) return 0.0;
  return profile_distance(spec.kind, make_profile(spec, ds, i), make_profile(spec, ds, j));
}

DistanceMatrix::DistanceMatrix(std::vector<std::string> station_ids)
    : ids_(std::move(station_ids)), values_(ids_.size() * ids_.size(), 0.0) {}

void DistanceMatrix::set(std::size_t i, std::size_t j, double d) {
  if (i == j) {
    if (d != 0.0) throw DomainError("distance matrix diagonal must be zero");
    return;
  }
  if (!std::isfinite(d) || d < 0.0) throw DomainError("distances must be finite and non-negative");
  values_[i * ids_.size() + j] = d;
  values_[j * ids_.size() + i] = d;
}

DistanceMatrix distance_matrix(const DistanceSpec& spec, const Dataset& ds, std::size_t workers) {
  spec.validate();
  const std::size_t n = ds.station_count();
  std::vector<StationProfile> profiles(n);
  parallel_for(n, workers, [&](std::size_t s) { profiles[s] = make_profile(spec, ds, s); });

  std::vector<std::string> ids;
  for (const auto& s : ds.stations()) ids.push_back(s.id);
  DistanceMatrix m(std::move(ids));
  m.kind_label = to_string(spec.kind);
  m.metadata.push_back("reference_dates=" + std::to_string(spec.reference_dates.size()));
  if (!spec.reference_dates.empty()) {
    m.metadata.push_back("reference_start=" + format_date(spec.reference_dates.front()));
    m.metadata.push_back("reference_end=" + format_date(spec.reference_dates.back()));
  }
  if (spec.kind == DistanceKind::ensemble_stats) m.metadata.push_back("d5_dates=common_to_both_stations");

  std::vector<std::vector<double>> rows(n);
  parallel_for(n, workers, [&](std::size_t i) {
    rows[i].resize(i);
    for (std::size_t j = 0; j < i; ++j) rows[i][j] = profile_distance(spec.kind, profiles[i], profiles[j]);
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) m.set(i, j, rows[i][j]);
  return m;
}

std::vector<std::size_t> nearest_stations(const DistanceMatrix& matrix, std::size_t station, std::size_t count) {
  const std::size_t n = matrix.size();
  if (station >= n) throw DomainError("station index out of range");
  if (count < 1 || count > n) throw DomainError("number of nearest stations must lie in [1, station count]");
  std::vector<std::size_t> order;
  order.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j)
    if (j != station) order.push_back(j);
  const auto& ids = matrix.station_ids();
  const auto closer = [&](std::size_t a, std::size_t b) {
    const double da = matrix(station, a);
    const double db = matrix(station, b);
    return da != db ? da < db : ids[a] < ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count - 1), order.end(), closer);
  std::vector<std::size_t> out{station};
  out.insert(out.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count - 1));
  return out;
}

void write_distance_matrix(const DistanceMatrix& matrix, const std::filesystem::path& path) {
  std::string out = "# kind=" + matrix.kind_label + "\n";
  for (const auto& line : matrix.metadata) out += "# " + line + "\n";
  out += "station_id";
  for (const auto& id : matrix.station_ids()) out += "," + id;
  out += "\n";
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out += matrix.station_ids()[i];
    for (std::size_t j = 0; j < i; ++j) out += "," + csv::format_double(matrix(i, j));
    out += "\n";
  }
  csv::write_file_atomic(path, out);
}

DistanceMatrix read_distance_matrix(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  std::string kind;
  std::vector<std::string> metadata;
  std::size_t row = 0;
  for (; row < lines.size() && lines[row].rfind('#', 0) == 0; ++row) {
    const std::string body = csv::trim(std::string_view(lines[row]).substr(1));
    if (body.rfind("kind=", 0) == 0)
      kind = body.substr(5);
    else
      metadata.push_back(body);
  }
  if (row >= lines.size()) throw DataError(path.string() + ": missing header");
  auto header = csv::split(lines[row]);
  if (header.empty() || header[0] != "station_id") throw DataError(path.string() + ": header must start with station_id");
  std::vector<std::string> ids(header.begin() + 1, header.end());
  DistanceMatrix m(ids);
  m.kind_label = kind;
  m.metadata = std::move(metadata);
  ++row;
  for (std::size_t i = 0; i < ids.size(); ++i, ++row) {
    if (row >= lines.size()) throw DataError(path.string() + ": expected " + std::to_string(ids.size()) + " matrix rows");
    const auto f = csv::split(lines[row]);
    const std::string where = path.filename().string() + " row " + std::to_string(row + 1);
    if (f.size() != i + 1 || f[0] != ids[i]) throw DataError(where + ": expected station '" + ids[i] + "' with " + std::to_string(i) + " values");
    for (std::size_t j = 0; j < i; ++j) {
      try {
        m.set(i, j, csv::parse_double(f[j + 1], "distance"));
      } catch (const DomainError& e) {
        throw DataError(where + ": " + e.what());
      }
    }
  }
  return m;
}

} // namespace emos
