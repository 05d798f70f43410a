#include "emos/training_sets.hpp"

#include <algorithm>

#include "emos/error.hpp"

namespace emos {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<std::size_t> all_stations(const Dataset& ds) {
  std::vector<std::size_t> v(ds.station_count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

const DistanceMatrix& need_distances(const RegimeContext& ctx, const Dataset& ds) {
  if (!ctx.distances) throw DomainError("distance-based regime needs a distance matrix");
  if (ctx.distances->size() != ds.station_count())
    throw DataError("distance matrix covers " + std::to_string(ctx.distances->size()) + " stations, dataset has " +
                    std::to_string(ds.station_count()));
  for (std::size_t i = 0; i < ds.station_count(); ++i)
    if (ctx.distances->station_ids()[i] != ds.stations()[i].id)
      throw DataError("distance matrix station order does not match the dataset");
  return *ctx.distances;
}

} // namespace

std::string regime_name(const Regime& regime) {
  return std::visit(overloaded{[](const Regional&) { return std::string("regional"); },
                               [](const Local&) { return std::string("local"); },
                               [](const DistanceSemiLocal&) { return std::string("distance"); },
                               [](const ClusterSemiLocal&) { return std::string("cluster"); }},
                    regime);
}

void validate(const Regime& regime) {
  std::visit(overloaded{[](const Regional&) {}, [](const Local&) {},
                        [](const DistanceSemiLocal& r) {
                          if (r.nearest < 1) throw DomainError("L must be at least 1");
                          r.spec.validate();
                        },
                        [](const ClusterSemiLocal& r) {
                          if (r.clusters < 1) throw DomainError("k must be at least 1");
                          r.features.validate();
                        }},
             regime);
}

std::vector<Pool> pools_for_date(const Regime& regime, const Dataset& ds, const RegimeContext& context) {
  validate(regime);
  std::vector<Pool> pools;
  const auto& st = ds.stations();
  std::visit(overloaded{[&](const Regional&) {
                          const auto all = all_stations(ds);
                          pools.push_back({"regional", all, all});
                        },
                        [&](const Local&) {
                          for (std::size_t s = 0; s < ds.station_count(); ++s) pools.push_back({st[s].id, {s}, {s}});
                        },
                        [&](const DistanceSemiLocal& r) {
                          const auto& dm = need_distances(context, ds);
                          for (std::size_t s = 0; s < ds.station_count(); ++s) {
                            auto members = nearest_stations(dm, s, r.nearest);
                            std::sort(members.begin(), members.end());
                            pools.push_back({st[s].id, std::move(members), {s}});
                          }
                        },
                        [&](const ClusterSemiLocal&) {
                          if (!context.clustering) throw DomainError("cluster-based regime needs a clustering");
                          const auto& cl = *context.clustering;
                          for (std::size_t c = 0; c < cl.k; ++c) {
                            auto members = cl.members(c);
                            pools.push_back({"cluster" + std::to_string(c), members, members});
                          }
                          for (auto s : cl.excluded) pools.push_back({st[s].id, {s}, {s}});
                        }},
             regime);
  return pools;
}

TrainingSet pooled_training_set(const Dataset& ds, const Pool& pool, Date date, std::size_t n) {
  if (n == 0) throw DomainError("rolling window length must be positive");
  TrainingSet ts;
  ts.target_stations = pool.targets;
  ts.verification_date = date;
  for (auto s : pool.stations)
    for (const auto& c : window_cases(ds, s, date, n)) ts.cases.push_back(&c);
  return ts;
}

TrainingSet build_training_set(const Regime& regime, const Dataset& ds, std::size_t station, Date date, std::size_t n,
                               const RegimeContext& context) {
  if (station >= ds.station_count()) throw DomainError("station index out of range");
  for (const auto& pool : pools_for_date(regime, ds, context))
    if (std::binary_search(pool.targets.begin(), pool.targets.end(), station)) {
      auto ts = pooled_training_set(ds, pool, date, n);
      ts.target_stations = {station};
      return ts;
    }
  throw DomainError("station is not covered by any pool");
}

} // namespace emos
