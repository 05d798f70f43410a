#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "emos/distributions.hpp"

namespace emos {

// One set of exchangeable ensemble members sharing a location coefficient.
struct MemberGroup {
  std::string id;
  std::vector<std::size_t> members; // column indices into the forecast vector
};

// Partition of the ensemble columns into exchangeable groups.
class GroupStructure {
public:
  GroupStructure() = default;
  // Throws StructureError unless the groups partition {0, ..., M-1}, are
  // nonempty, and have unique ids.
  explicit GroupStructure(std::vector<MemberGroup> groups);

  std::size_t group_count() const { return groups_.size(); }
  std::size_t member_count() const { return member_count_; }
  const std::vector<MemberGroup>& groups() const { return groups_; }
  std::size_t group_size(std::size_t k) const { return groups_.at(k).members.size(); }

private:
  std::vector<MemberGroup> groups_;
  std::size_t member_count_ = 0;
};

// Role of a member within its subensemble.
enum class MemberRole { control, perturbed, lagged };

// Column layout of a multi-model ensemble: every column belongs to one
// subensemble (e.g. "AI") and has a role. Encoded in column names as
// m_<subensemble>_c, m_<subensemble>_p<idx>, m_<subensemble>_l<idx>.
struct MemberColumn {
  std::string subensemble;
  MemberRole role = MemberRole::perturbed;
  int index = 0; // 0 for control
  std::string name() const;
  static MemberColumn parse(const std::string& column_name);
};

struct SubensembleLayout {
  std::vector<MemberColumn> columns;

  std::size_t member_count() const { return columns.size(); }
  std::vector<std::string> column_names() const;
  // Four subensembles AI, AS, HK, HS, each one control plus 6 perturbed and
  // 6 lagged members (52 columns).
  static SubensembleLayout glameps();
  // One subensemble "E" of `members` perturbed members.
  static SubensembleLayout single(std::size_t members);
  static SubensembleLayout from_column_names(const std::vector<std::string>& names);
};

enum class Variant { full, lag_ignoring, simplified, custom };

Variant parse_variant(const std::string& name);
std::string to_string(Variant v);

struct ModelFormulation {
  Variant variant = Variant::simplified;
  GroupStructure groups;

  // a0, one coefficient per group, b0, b1.
  std::size_t parameter_count() const { return groups.group_count() + 3; }
  // In the simplified model the single coefficient multiplies the ensemble
  // mean; otherwise each coefficient multiplies its group sum.
  bool uses_mean() const { return variant == Variant::simplified; }
};

// Builds the group structure of a variant over a layout:
//   full         control, perturbed and lagged members of each subensemble
//                form separate groups
//   lag_ignoring perturbed and lagged members of a subensemble are merged
//   simplified   one group with all members
// `custom` is rejected here; use custom_formulation.
ModelFormulation build_formulation(Variant variant, const SubensembleLayout& layout);
ModelFormulation custom_formulation(GroupStructure groups);

// Location and scale link coefficients.
struct EmosCoefficients {
  double a0 = 0.0;
  std::vector<double> group_coeffs;
  double b0 = 1.0;
  double b1 = 1.0;

  // Throws DomainError on b0 < 0, b1 < 0, both zero, or non-finite values.
  void validate(std::size_t group_count) const;
  friend bool operator==(const EmosCoefficients&, const EmosCoefficients&) = default;
};

struct EnsembleStats {
  double mean = 0.0;
  double variance = 0.0; // divisor M - 1
};

// Throws DomainError for fewer than two members or non-finite values.
EnsembleStats ensemble_stats(std::span<const double> forecast);

// Predictive truncated normal N_0(location, b0 + b1 S^2).
TnParams link(const ModelFormulation& formulation, const EmosCoefficients& coeffs, std::span<const double> forecast);

// Coefficients for which the predictive location equals the ensemble mean:
// a0 = 0, location weights reproducing the mean, b0 = b1 = 1.
EmosCoefficients mean_reproducing_coefficients(const ModelFormulation& formulation);

} // namespace emos
