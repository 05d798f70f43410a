#include "emos/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "emos/csv.hpp"
#include "emos/error.hpp"

namespace emos {

namespace {

constexpr std::size_t kMaxListedErrors = 20;

void throw_if_errors(const std::vector<std::string>& errors, const std::string& context) {
  if (errors.empty()) return;
  std::ostringstream msg;
  msg << context << ": " << errors.size() << " problem(s)";
  for (std::size_t i = 0; i < errors.size() && i < kMaxListedErrors; ++i) msg << "\n  " << errors[i];
  if (errors.size() > kMaxListedErrors) msg << "\n  ...";
  throw DataError(msg.str());
}

} // namespace

Dataset::Dataset(std::vector<StationRecord> stations, std::vector<ForecastCase> cases, SubensembleLayout layout)
    : stations_(std::move(stations)), cases_(std::move(cases)), layout_(std::move(layout)) {
  std::vector<std::string> errors;
  for (std::size_t s = 0; s < stations_.size(); ++s) {
    const auto& st = stations_[s];
    if (st.id.empty()) errors.push_back("station " + std::to_string(s) + " has an empty id");
    if (!std::isfinite(st.x) || !std::isfinite(st.y)) errors.push_back("station '" + st.id + "' has non-finite coordinates");
    if (!index_.emplace(st.id, s).second) errors.push_back("duplicate station id '" + st.id + "'");
  }
  throw_if_errors(errors, "invalid stations");

  const std::size_t m = layout_.member_count();
  for (std::size_t i = 0; i < cases_.size(); ++i) {
    const auto& c = cases_[i];
    const std::string where = "case " + std::to_string(i) + " (" + c.station_id + ", " + format_date(c.date) + ")";
    if (!index_.count(c.station_id)) errors.push_back(where + ": unknown station");
    if (c.members.size() != m)
      errors.push_back(where + ": " + std::to_string(c.members.size()) + " members, expected " + std::to_string(m));
    if (!std::isfinite(c.observation) || c.observation < 0.0) errors.push_back(where + ": observation must be finite and >= 0");
    for (double f : c.members)
      if (!std::isfinite(f) || f < 0.0) {
        errors.push_back(where + ": members must be finite and >= 0");
        break;
      }
  }
  throw_if_errors(errors, "invalid cases");

  std::stable_sort(cases_.begin(), cases_.end(), [&](const ForecastCase& a, const ForecastCase& b) {
    const auto sa = index_.at(a.station_id);
    const auto sb = index_.at(b.station_id);
    return sa != sb ? sa < sb : a.date < b.date;
  });
  for (std::size_t i = 1; i < cases_.size(); ++i)
    if (cases_[i].station_id == cases_[i - 1].station_id && cases_[i].date == cases_[i - 1].date)
      errors.push_back("duplicate case (" + cases_[i].station_id + ", " + format_date(cases_[i].date) + ")");
  throw_if_errors(errors, "invalid cases");

  offsets_.assign(stations_.size() + 1, 0);
  for (const auto& c : cases_) ++offsets_[index_.at(c.station_id) + 1];
  for (std::size_t s = 0; s < stations_.size(); ++s) offsets_[s + 1] += offsets_[s];

  std::set<Date> dates;
  for (const auto& c : cases_) dates.insert(c.date);
  dates_.assign(dates.begin(), dates.end());
}

std::size_t Dataset::station_index(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) throw DataError("unknown station '" + std::string(id) + "'");
  return it->second;
}

std::span<const ForecastCase> Dataset::station_cases(std::size_t station) const {
  if (station >= stations_.size()) throw DataError("station index out of range");
  return std::span<const ForecastCase>(cases_).subspan(offsets_[station], offsets_[station + 1] - offsets_[station]);
}

const ForecastCase* Dataset::find(std::size_t station, Date date) const {
  const auto cs = station_cases(station);
  const auto it = std::lower_bound(cs.begin(), cs.end(), date, [](const ForecastCase& c, Date d) { return c.date < d; });
  return it != cs.end() && it->date == date ? &*it : nullptr;
}

Dataset load_dataset(const std::filesystem::path& stations_csv, const std::filesystem::path& cases_csv) {
  std::vector<std::string> errors;

  const auto station_lines = csv::read_lines(stations_csv);
  if (station_lines.empty() || csv::split(station_lines[0]) != std::vector<std::string>{"station_id", "x", "y"})
    throw DataError(stations_csv.string() + ": header must be 'station_id,x,y'");
  std::vector<StationRecord> stations;
  for (std::size_t row = 1; row < station_lines.size(); ++row) {
    if (csv::trim(station_lines[row]).empty()) continue;
    const auto f = csv::split(station_lines[row]);
    const std::string where = stations_csv.filename().string() + " row " + std::to_string(row + 1);
    if (f.size() != 3) {
      errors.push_back(where + ": expected 3 fields, got " + std::to_string(f.size()));
      continue;
    }
    try {
      stations.push_back({csv::trim(f[0]), csv::parse_double(f[1], "x"), csv::parse_double(f[2], "y")});
    } catch (const DataError& e) {
      errors.push_back(where + ": " + e.what());
    }
  }
  throw_if_errors(errors, "cannot load stations");

  const auto case_lines = csv::read_lines(cases_csv);
  if (case_lines.empty()) throw DataError(cases_csv.string() + ": missing header");
  const auto header = csv::split(case_lines[0]);
  if (header.size() < 4 || header[0] != "station_id" || header[1] != "date" || header[2] != "obs")
    throw DataError(cases_csv.string() + ": header must start with 'station_id,date,obs' followed by member columns");
  SubensembleLayout layout;
  try {
    layout = SubensembleLayout::from_column_names({header.begin() + 3, header.end()});
  } catch (const std::exception& e) {
    throw DataError(cases_csv.string() + ": " + e.what());
  }

  std::set<std::string> known;
  for (const auto& s : stations) known.insert(s.id);
  std::set<std::pair<std::string, Date>> seen;
  std::vector<ForecastCase> cases;
  cases.reserve(case_lines.size());
  for (std::size_t row = 1; row < case_lines.size(); ++row) {
    if (csv::trim(case_lines[row]).empty()) continue;
    const auto f = csv::split(case_lines[row]);
    const std::string where = cases_csv.filename().string() + " row " + std::to_string(row + 1);
    if (f.size() != header.size()) {
      errors.push_back(where + ": expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
      continue;
    }
    try {
      ForecastCase c;
      c.station_id = csv::trim(f[0]);
      c.date = parse_date(csv::trim(f[1]));
      c.observation = csv::parse_double(f[2], "obs");
      c.members.reserve(header.size() - 3);
      for (std::size_t j = 3; j < f.size(); ++j) c.members.push_back(csv::parse_double(f[j], header[j]));
      if (!known.count(c.station_id)) throw DataError("unknown station '" + c.station_id + "'");
      if (!std::isfinite(c.observation) || c.observation < 0.0)
        throw DataError("negative or non-finite wind speed in obs");
      for (std::size_t j = 0; j < c.members.size(); ++j)
        if (!std::isfinite(c.members[j]) || c.members[j] < 0.0)
          throw DataError("negative or non-finite wind speed in " + header[j + 3]);
      if (!seen.emplace(c.station_id, c.date).second)
        throw DataError("duplicate (station, date) (" + c.station_id + ", " + format_date(c.date) + ")");
      cases.push_back(std::move(c));
    } catch (const DataError& e) {
      errors.push_back(where + ": " + e.what());
    }
  }
  throw_if_errors(errors, "cannot load cases");
  return Dataset(std::move(stations), std::move(cases), std::move(layout));
}

void write_dataset(const Dataset& ds, const std::filesystem::path& stations_csv, const std::filesystem::path& cases_csv) {
  std::string out = "station_id,x,y\n";
  for (const auto& s : ds.stations()) out += s.id + "," + csv::format_double(s.x) + "," + csv::format_double(s.y) + "\n";
  csv::write_file_atomic(stations_csv, out);

  out = "station_id,date,obs";
  for (const auto& name : ds.layout().column_names()) out += "," + name;
  out += "\n";
  for (const auto& c : ds.cases()) {
    out += c.station_id + "," + format_date(c.date) + "," + csv::format_double(c.observation);
    for (double f : c.members) out += "," + csv::format_double(f);
    out += "\n";
  }
  csv::write_file_atomic(cases_csv, out);
}

std::span<const ForecastCase> window_cases(const Dataset& ds, std::size_t station, Date target, std::size_t n) {
  const auto cs = ds.station_cases(station);
  const auto end = std::lower_bound(cs.begin(), cs.end(), target, [](const ForecastCase& c, Date d) { return c.date < d; });
  const auto available = static_cast<std::size_t>(end - cs.begin());
  const auto take = std::min(n, available);
  return cs.subspan(available - take, take);
}

RollingWindow rolling_window(const Dataset& ds, std::size_t station, Date target, std::size_t n) {
  const std::size_t pool[] = {station};
  return rolling_window(ds, std::span<const std::size_t>(pool), target, n);
}

RollingWindow rolling_window(const Dataset& ds, std::span<const std::size_t> pool, Date target, std::size_t n) {
  if (n == 0) throw DomainError("rolling window length must be positive");
  std::set<Date> dates;
  for (auto s : pool)
    for (const auto& c : window_cases(ds, s, target, n)) dates.insert(c.date);
  if (dates.empty()) throw DataError("no history before " + format_date(target) + " for the requested station(s)");
  RollingWindow w;
  w.target_date = target;
  w.length = n;
  auto first = dates.begin();
  if (dates.size() > n) std::advance(first, static_cast<std::ptrdiff_t>(dates.size() - n));
  w.included_dates.assign(first, dates.end());
  return w;
}

} // namespace emos
