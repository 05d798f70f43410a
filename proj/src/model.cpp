#include "emos/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "emos/error.hpp"

namespace emos {

GroupStructure::GroupStructure(std::vector<MemberGroup> groups) : groups_(std::move(groups)) {
  std::set<std::string> ids;
  std::size_t total = 0;
  for (const auto& g : groups_) {
    if (g.members.empty()) throw StructureError("group '" + g.id + "' is empty");
    if (!ids.insert(g.id).second) throw StructureError("duplicate group id '" + g.id + "'");
    total += g.members.size();
  }
  std::vector<bool> seen(total, false);
  for (const auto& g : groups_) {
    for (auto idx : g.members) {
      if (idx >= total) throw StructureError("member index " + std::to_string(idx) + " outside 0.." + std::to_string(total - 1));
      if (seen[idx]) throw StructureError("member index " + std::to_string(idx) + " assigned to more than one group");
      seen[idx] = true;
    }
  }
  member_count_ = total;
}

std::string MemberColumn::name() const {
  switch (role) {
  case MemberRole::control:
    return "m_" + subensemble + "_c";
  case MemberRole::perturbed:
    return "m_" + subensemble + "_p" + std::to_string(index);
  case MemberRole::lagged:
    return "m_" + subensemble + "_l" + std::to_string(index);
  }
  return {};
}

MemberColumn MemberColumn::parse(const std::string& column_name) {
  const auto bad = [&] {
    return StructureError("member column '" + column_name + "' does not match m_<subensemble>_(c|p<idx>|l<idx>)");
  };
  if (column_name.rfind("m_", 0) != 0) throw bad();
  const auto sep = column_name.rfind('_');
  if (sep <= 2 || sep + 1 >= column_name.size()) throw bad();
  MemberColumn col;
  col.subensemble = column_name.substr(2, sep - 2);
  const std::string tag = column_name.substr(sep + 1);
  if (tag == "c") {
    col.role = MemberRole::control;
    return col;
  }
  if (tag.size() < 2 || (tag[0] != 'p' && tag[0] != 'l')) throw bad();
  for (std::size_t i = 1; i < tag.size(); ++i)
    if (tag[i] < '0' || tag[i] > '9') throw bad();
  col.role = tag[0] == 'p' ? MemberRole::perturbed : MemberRole::lagged;
  col.index = std::stoi(tag.substr(1));
  return col;
}

std::vector<std::string> SubensembleLayout::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& c : columns) names.push_back(c.name());
  return names;
}

SubensembleLayout SubensembleLayout::glameps() {
  SubensembleLayout layout;
  for (const char* sub : {"AI", "AS", "HK", "HS"}) {
    layout.columns.push_back({sub, MemberRole::control, 0});
    for (int i = 1; i <= 6; ++i) layout.columns.push_back({sub, MemberRole::perturbed, i});
    for (int i = 1; i <= 6; ++i) layout.columns.push_back({sub, MemberRole::lagged, i});
  }
  return layout;
}

SubensembleLayout SubensembleLayout::single(std::size_t members) {
  SubensembleLayout layout;
  for (std::size_t i = 1; i <= members; ++i)
    layout.columns.push_back({"E", MemberRole::perturbed, static_cast<int>(i)});
  return layout;
}

SubensembleLayout SubensembleLayout::from_column_names(const std::vector<std::string>& names) {
  SubensembleLayout layout;
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw StructureError("duplicate member column '" + n + "'");
    layout.columns.push_back(MemberColumn::parse(n));
  }
  return layout;
}

Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "lag_ignoring") return Variant::lag_ignoring;
  if (name == "simplified") return Variant::simplified;
  if (name == "custom") return Variant::custom;
  throw ConfigError("unknown model variant '" + name + "' (expected full, lag_ignoring, simplified or custom)");
}

std::string to_string(Variant v) {
  switch (v) {
  case Variant::full:
    return "full";
  case Variant::lag_ignoring:
    return "lag_ignoring";
  case Variant::simplified:
    return "simplified";
  case Variant::custom:
    return "custom";
  }
  return "unknown";
}

ModelFormulation build_formulation(Variant variant, const SubensembleLayout& layout) {
  if (layout.columns.empty()) throw StructureError("empty member layout");
  if (variant == Variant::custom) throw StructureError("custom formulations need an explicit group structure");

  if (variant == Variant::simplified) {
    MemberGroup all{"all", {}};
    for (std::size_t i = 0; i < layout.columns.size(); ++i) all.members.push_back(i);
    return {variant, GroupStructure({std::move(all)})};
  }

  // Groups are emitted in order of first appearance of (subensemble, role).
  std::vector<MemberGroup> groups;
  std::map<std::string, std::size_t> index_of;
  for (std::size_t col = 0; col < layout.columns.size(); ++col) {
    const auto& c = layout.columns[col];
    std::string id = c.subensemble;
    switch (c.role) {
    case MemberRole::control:
      id += "_c";
      break;
    case MemberRole::perturbed:
      id += variant == Variant::full ? "_p" : "_pl";
      break;
    case MemberRole::lagged:
      id += variant == Variant::full ? "_l" : "_pl";
      break;
    }
    auto [it, inserted] = index_of.try_emplace(id, groups.size());
    if (inserted) groups.push_back({id, {}});
    groups[it->second].members.push_back(col);
  }
  return {variant, GroupStructure(std::move(groups))};
}

ModelFormulation custom_formulation(GroupStructure groups) { return {Variant::custom, std::move(groups)}; }

void EmosCoefficients::validate(std::size_t group_count) const {
  if (group_coeffs.size() != group_count)
    throw StructureError("expected " + std::to_string(group_count) + " group coefficients, got " +
                         std::to_string(group_coeffs.size()));
  if (!std::isfinite(a0) || !std::isfinite(b0) || !std::isfinite(b1))
    throw DomainError("coefficients must be finite");
  for (double a : group_coeffs)
    if (!std::isfinite(a)) throw DomainError("coefficients must be finite");
  if (b0 < 0.0 || b1 < 0.0) throw DomainError("scale coefficients must be non-negative");
  if (b0 == 0.0 && b1 == 0.0) throw DomainError("scale coefficients must not both be zero");
}

EnsembleStats ensemble_stats(std::span<const double> forecast) {
  if (forecast.size() < 2) throw DomainError("ensemble variance needs at least two members");
  double sum = 0.0;
  for (double f : forecast) {
    if (!std::isfinite(f)) throw DomainError("ensemble members must be finite");
    sum += f;
  }
  const double mean = sum / static_cast<double>(forecast.size());
  double ss = 0.0;
  for (double f : forecast) ss += (f - mean) * (f - mean);
  return {mean, ss / static_cast<double>(forecast.size() - 1)};
}

TnParams link(const ModelFormulation& formulation, const EmosCoefficients& coeffs, std::span<const double> forecast) {
  const auto& gs = formulation.groups;
  if (forecast.size() != gs.member_count())
    throw StructureError("forecast has " + std::to_string(forecast.size()) + " members, formulation expects " +
                         std::to_string(gs.member_count()));
  if (coeffs.group_coeffs.size() != gs.group_count())
    throw StructureError("coefficient vector does not match the group structure");

  const auto stats = ensemble_stats(forecast);
  double location = coeffs.a0;
  if (formulation.uses_mean()) {
    location += coeffs.group_coeffs[0] * stats.mean;
  } else {
    for (std::size_t k = 0; k < gs.group_count(); ++k) {
      double group_sum = 0.0;
      for (auto idx : gs.groups()[k].members) group_sum += forecast[idx];
      location += coeffs.group_coeffs[k] * group_sum;
    }
  }
  const double scale2 = coeffs.b0 + coeffs.b1 * stats.variance;
  if (!(scale2 > 0.0) || !std::isfinite(scale2))
    throw DomainError("invalid coefficients: predictive variance b0 + b1 S^2 must be positive");
  return {location, std::sqrt(scale2)};
}

EmosCoefficients mean_reproducing_coefficients(const ModelFormulation& formulation) {
  EmosCoefficients c;
  const auto& gs = formulation.groups;
  if (formulation.uses_mean()) {
    c.group_coeffs.assign(gs.group_count(), 1.0);
  } else {
    c.group_coeffs.assign(gs.group_count(), 1.0 / static_cast<double>(gs.member_count()));
  }
  c.a0 = 0.0;
  c.b0 = 1.0;
  c.b1 = 1.0;
  return c;
}

} // namespace emos
