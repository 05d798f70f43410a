#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "emos/date.hpp"
#include "emos/model.hpp"

namespace emos {

// Station position on a planar (linearly transformed model) grid.
struct StationRecord {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const StationRecord&, const StationRecord&) = default;
};

// One ensemble forecast with its verifying observation (m/s).
struct ForecastCase {
  std::string station_id;
  Date date{};
  std::vector<double> members;
  double observation = 0.0;
  friend bool operator==(const ForecastCase&, const ForecastCase&) = default;
};

// Immutable collection of forecast cases indexed by (station, date). Missing
// (station, date) pairs are allowed. Cases are stored grouped by station in
// station order and sorted by date within a station.
class Dataset {
public:
  Dataset() = default;
  // Validates all invariants; throws DataError listing the offending cases.
  Dataset(std::vector<StationRecord> stations, std::vector<ForecastCase> cases, SubensembleLayout layout);

  const std::vector<StationRecord>& stations() const { return stations_; }
  std::size_t station_count() const { return stations_.size(); }
  const std::vector<ForecastCase>& cases() const { return cases_; }
  const SubensembleLayout& layout() const { return layout_; }
  std::size_t member_count() const { return layout_.member_count(); }
  // Sorted distinct dates with at least one case.
  const std::vector<Date>& dates() const { return dates_; }

  std::size_t station_index(std::string_view id) const;
  // All cases of a station in ascending date order.
  std::span<const ForecastCase> station_cases(std::size_t station) const;
  const ForecastCase* find(std::size_t station, Date date) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.stations_ == b.stations_ && a.cases_ == b.cases_ && a.layout_.column_names() == b.layout_.column_names();
  }

private:
  std::vector<StationRecord> stations_;
  std::vector<ForecastCase> cases_;
  SubensembleLayout layout_;
  std::vector<Date> dates_;
  std::vector<std::size_t> offsets_; // station s owns cases_[offsets_[s], offsets_[s+1])
  std::unordered_map<std::string, std::size_t> index_;
};

// Reads a stations file (`station_id,x,y`) and a cases file
// (`station_id,date,obs,m_<sub>_<role>...`). Throws DataError with
// row-numbered diagnostics.
Dataset load_dataset(const std::filesystem::path& stations_csv, const std::filesystem::path& cases_csv);
void write_dataset(const Dataset& ds, const std::filesystem::path& stations_csv, const std::filesystem::path& cases_csv);

// The n most recent dates strictly before the target date for which data
// exist (at one station or, for a pool, at any pool station).
struct RollingWindow {
  Date target_date{};
  std::size_t length = 0;
  std::vector<Date> included_dates; // ascending
  bool is_short() const { return included_dates.size() < length; }
};

// Throws DomainError for n == 0 and DataError when no history is available.
RollingWindow rolling_window(const Dataset& ds, std::size_t station, Date target, std::size_t n);
RollingWindow rolling_window(const Dataset& ds, std::span<const std::size_t> pool, Date target, std::size_t n);

// Cases of one station inside its own n-case window before the target date;
// empty when the station has no history.
std::span<const ForecastCase> window_cases(const Dataset& ds, std::size_t station, Date target, std::size_t n);

} // namespace emos
