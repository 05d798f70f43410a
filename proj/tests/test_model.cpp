#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "emos/error.hpp"
#include "emos/model.hpp"

using namespace emos;

TEST(EnsembleStats, Examples) {
  auto s = ensemble_stats(std::vector<double>{1, 1, 1, 1});
  EXPECT_EQ(s.mean, 1.0);
  EXPECT_EQ(s.variance, 0.0);
  s = ensemble_stats(std::vector<double>{0, 2});
  EXPECT_EQ(s.mean, 1.0);
  EXPECT_EQ(s.variance, 2.0);
  s = ensemble_stats(std::vector<double>{1, 2, 3, 4, 5, 6});
  EXPECT_DOUBLE_EQ(s.mean, 3.5);
  EXPECT_DOUBLE_EQ(s.variance, 3.5);
  EXPECT_THROW(ensemble_stats(std::vector<double>{1}), DomainError);
}

TEST(GroupStructure, RejectsInvalidPartitions) {
  EXPECT_THROW(GroupStructure({{"a", {0, 1}}, {"b", {1, 2}}}), StructureError);
  EXPECT_THROW(GroupStructure({{"a", {0}}, {"b", {2}}}), StructureError);
  EXPECT_THROW(GroupStructure({{"a", {0}}, {"a", {1}}}), StructureError);
  EXPECT_THROW(GroupStructure({{"a", {}}, {"b", {0}}}), StructureError);
  const GroupStructure ok({{"a", {2, 0}}, {"b", {1}}});
  EXPECT_EQ(ok.group_count(), 2u);
  EXPECT_EQ(ok.member_count(), 3u);
}

TEST(Layout, ColumnNamesRoundTrip) {
  const auto g = SubensembleLayout::glameps();
  EXPECT_EQ(g.member_count(), 52u);
  const auto names = g.column_names();
  EXPECT_EQ(names.front(), "m_AI_c");
  EXPECT_NE(std::find(names.begin(), names.end(), "m_HS_l6"), names.end());
  EXPECT_EQ(SubensembleLayout::from_column_names(names).column_names(), names);
  EXPECT_THROW(MemberColumn::parse("m_AI_x1"), StructureError);
  EXPECT_THROW(SubensembleLayout::from_column_names({"m_AI_p1", "m_AI_p1"}), StructureError);
}

TEST(BuildFormulation, GlamepsGroupCounts) {
  const auto layout = SubensembleLayout::glameps();
  const auto full = build_formulation(Variant::full, layout);
  EXPECT_EQ(full.groups.group_count(), 12u);
  EXPECT_EQ(full.parameter_count(), 15u);
  std::vector<std::size_t> sizes;
  for (std::size_t k = 0; k < 12; ++k) sizes.push_back(full.groups.group_size(k));
  EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 6u), 8);
  EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 1u), 4);

  const auto lag = build_formulation(Variant::lag_ignoring, layout);
  EXPECT_EQ(lag.groups.group_count(), 8u);
  EXPECT_EQ(lag.parameter_count(), 11u);
  sizes.clear();
  for (std::size_t k = 0; k < 8; ++k) sizes.push_back(lag.groups.group_size(k));
  EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 12u), 4);
  EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 1u), 4);

  const auto simple = build_formulation(Variant::simplified, layout);
  EXPECT_EQ(simple.groups.group_count(), 1u);
  EXPECT_EQ(simple.groups.group_size(0), 52u);
  EXPECT_EQ(simple.parameter_count(), 4u);
  EXPECT_THROW(build_formulation(Variant::custom, layout), StructureError);
}

TEST(Link, Examples) {
  const auto simple = build_formulation(Variant::simplified, SubensembleLayout::single(2));
  auto p = link(simple, {0.0, {1.0}, 1.0, 0.0}, std::vector<double>{2, 4});
  EXPECT_DOUBLE_EQ(p.location, 3.0);
  EXPECT_DOUBLE_EQ(p.scale, 1.0);

  const auto one_group = custom_formulation(GroupStructure({{"g", {0, 1}}}));
  p = link(one_group, {0.0, {0.5}, 0.0, 1.0}, std::vector<double>{0, 2});
  EXPECT_DOUBLE_EQ(p.location, 1.0);
  EXPECT_DOUBLE_EQ(p.scale, std::sqrt(2.0));

  EXPECT_THROW(link(simple, {0.0, {1.0, 2.0}, 1.0, 0.0}, std::vector<double>{2, 4}), StructureError);
  EXPECT_THROW(link(simple, {0.0, {1.0}, 1.0, 0.0}, std::vector<double>{2, 4, 5}), StructureError);
  EXPECT_THROW(link(simple, {0.0, {1.0}, 0.0, 1.0}, std::vector<double>{3, 3}), DomainError);
}

TEST(Link, MeanReproducingOnGlameps) {
  const auto layout = SubensembleLayout::glameps();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 12.0);
  std::vector<double> f(52);
  for (auto& v : f) v = u(rng);
  const double mean = std::accumulate(f.begin(), f.end(), 0.0) / 52.0;
  for (auto v : {Variant::full, Variant::lag_ignoring, Variant::simplified}) {
    const auto form = build_formulation(v, layout);
    auto c = mean_reproducing_coefficients(form);
    c.a0 = 0.7;
    EXPECT_NEAR(link(form, c, f).location, 0.7 + mean, 1e-12);
  }
}

TEST(Link, InvariantUnderWithinGroupPermutation) {
  const auto form = build_formulation(Variant::full, SubensembleLayout::glameps());
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 12.0);
  std::vector<double> f(52);
  for (auto& v : f) v = u(rng);
  EmosCoefficients c{0.3, {}, 0.4, 0.9};
  for (std::size_t k = 0; k < 12; ++k) c.group_coeffs.push_back(u(rng) / 100.0);
  const auto base = link(form, c, f);
  auto g = f;
  const auto& members = form.groups.groups()[1].members;
  std::vector<double> vals;
  for (auto i : members) vals.push_back(g[i]);
  std::reverse(vals.begin(), vals.end());
  for (std::size_t i = 0; i < members.size(); ++i) g[members[i]] = vals[i];
  const auto permuted = link(form, c, g);
  EXPECT_NEAR(permuted.location, base.location, 1e-12);
  EXPECT_NEAR(permuted.scale, base.scale, 1e-12);
}

TEST(Link, FullEqualsLagIgnoringWhenLagCoefficientsTied) {
  const auto layout = SubensembleLayout::glameps();
  const auto full = build_formulation(Variant::full, layout);
  const auto lag = build_formulation(Variant::lag_ignoring, layout);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 12.0);
  std::vector<double> f(52);
  for (auto& v : f) v = u(rng);

  EmosCoefficients cl{0.2, {}, 0.5, 0.8};
  for (std::size_t k = 0; k < 8; ++k) cl.group_coeffs.push_back(0.01 * static_cast<double>(k + 1));
  // map each full group to the lag-ignoring group containing its members
  EmosCoefficients cf{0.2, {}, 0.5, 0.8};
  for (const auto& g : full.groups.groups()) {
    for (std::size_t k = 0; k < 8; ++k) {
      const auto& lm = lag.groups.groups()[k].members;
      if (std::find(lm.begin(), lm.end(), g.members.front()) != lm.end()) cf.group_coeffs.push_back(cl.group_coeffs[k]);
    }
  }
  ASSERT_EQ(cf.group_coeffs.size(), 12u);
  EXPECT_NEAR(link(full, cf, f).location, link(lag, cl, f).location, 1e-12);
  EXPECT_EQ(link(full, cf, f).scale, link(lag, cl, f).scale);
}

TEST(Coefficients, Validation) {
  EXPECT_THROW((EmosCoefficients{0, {1}, -0.1, 1}.validate(1)), DomainError);
  EXPECT_THROW((EmosCoefficients{0, {1}, 0, 0}.validate(1)), DomainError);
  EXPECT_THROW((EmosCoefficients{0, {1, 2}, 1, 1}.validate(1)), StructureError);
  EXPECT_NO_THROW((EmosCoefficients{0, {1}, 0, 1}.validate(1)));
}

TEST(Variant, Parsing) {
  EXPECT_EQ(parse_variant("full"), Variant::full);
  EXPECT_EQ(parse_variant("lag_ignoring"), Variant::lag_ignoring);
  EXPECT_EQ(to_string(Variant::simplified), "simplified");
  EXPECT_THROW(parse_variant("fancy"), ConfigError);
}
