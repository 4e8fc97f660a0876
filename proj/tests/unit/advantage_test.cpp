#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "stc/advantage.hpp"
#include "stc/error.hpp"

namespace stc {
namespace {

std::string trace_with(const std::vector<int>& scores, const std::string& boxed) {
  std::string s;
  for (std::size_t n = 0; n < scores.size(); ++n) {
    if (n) s += "\n\n";
    s += "Step " + std::to_string(n + 1) + ".";
    if (n + 1 == scores.size() && !boxed.empty()) s += " \\boxed{" + boxed + "}";
    if (scores[n] < 0) continue;
    s += " <critic>ok</critic> <score>" + std::to_string(scores[n]) + "</score>";
  }
  return s;
}

GroupBatch group_of(const std::vector<std::string>& traces,
                    const std::string& gold = "5") {
  std::vector<ParsedTrajectory> ts;
  for (const auto& t : traces) ts.push_back(parse_trace(t));
  return make_group("p", std::move(ts), canonicalize(gold));
}

void expect_near_all(const std::vector<double>& a, const std::vector<double>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12) << i;
}

TEST(GroupNormalize, HandComputedValues) {
  expect_near_all(group_normalize(std::vector<double>{1, 1, 0, 0}), {1, 1, -1, -1});
  expect_near_all(group_normalize(std::vector<double>{1, 1, 1, 1}), {0, 0, 0, 0});
  expect_near_all(group_normalize(std::vector<double>{1, 0}), {1, -1});
}

TEST(GroupNormalize, RejectsSingleton) {
  EXPECT_THROW(group_normalize(std::vector<double>{1}), InvalidInput);
}

TEST(GroupNormalize, ZeroMeanUnitStdAndAffineInvariant) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> v(2 + i % 15);
    for (double& x : v) x = u(rng);
    const auto z = group_normalize(v);
    double mean = 0, var = 0;
    for (double x : z) mean += x;
    mean /= static_cast<double>(z.size());
    for (double x : z) var += (x - mean) * (x - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var / static_cast<double>(z.size()), 1.0, 1e-12);
    const double a = std::exp(u(rng) / 2), b = u(rng);
    std::vector<double> w = v;
    for (double& x : w) x = a * x + b;
    expect_near_all(group_normalize(w), z);
  }
}

TEST(GroupBatch, NeedsTwoMembers) {
  EXPECT_THROW(critique_token_field(group_of({"a"})), InvalidInput);
}

TEST(CritiqueField, MaskedToCritiqueTokens) {
  const GroupBatch g = group_of({trace_with({1}, "5"), trace_with({1}, "4")});
  const TokenField f = critique_token_field(g);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& labels = g.members[k].trajectory.token_labels;
    for (std::size_t t = 0; t < labels.size(); ++t) {
      if (labels[t].kind == LabelKind::CritiqueBody)
        EXPECT_EQ(f[k][t], k == 0 ? 1.0 : -1.0);
      else
        EXPECT_EQ(f[k][t], 0.0);
    }
  }
}

TEST(CritiqueField, NoCritiqueTokensGivesZeros) {
  const GroupBatch g = group_of({trace_with({-1}, "5"), trace_with({1}, "5")});
  const TokenField f = critique_token_field(g);
  for (double x : f[0]) EXPECT_EQ(x, 0.0);
}

TEST(CombinedField, ReasoningOnlyWeights) {
  const GroupBatch g = group_of({trace_with({-1}, "5"), trace_with({-1}, "4")});
  AdvantageWeights w{0, 1, 0, 0};
  const TokenField f = combined_field(g, w);
  for (double x : f[0]) EXPECT_DOUBLE_EQ(x, 1.0);
  for (double x : f[1]) EXPECT_DOUBLE_EQ(x, -1.0);
}

TEST(CombinedField, ConstantPerTrajectoryWithoutCritiqueWeight) {
  const GroupBatch g = group_of(
      {trace_with({1, 0}, "5"), trace_with({1, -1}, "4"), trace_with({0}, "5")});
  const TokenField f = combined_field(g, {0, 1, 0.05, 0.5});
  for (const auto& row : f)
    for (double x : row) EXPECT_EQ(x, row.front());
}

TEST(CombinedField, CritiqueTermScaledByTokenRatio) {
  const GroupBatch g = group_of({trace_with({1}, "5"), trace_with({1}, "4")});
  const AdvantageField a = total_field(g, {1, 0, 0, 0});
  const ParsedTrajectory& t = g.members[0].trajectory;
  const double ratio = static_cast<double>(t.token_count()) /
                       static_cast<double>(t.critique_token_count());
  EXPECT_DOUBLE_EQ(a.trajectories[0].crit_ratio, ratio);
  for (std::size_t i = 0; i < t.token_count(); ++i)
    EXPECT_DOUBLE_EQ(a.trajectories[0].combined[i],
                     t.token_labels[i].kind == LabelKind::CritiqueBody ? ratio : 0.0);
}

TEST(DenseAdvantage, HandComputedTwoStepGroup) {
  const GroupBatch g = group_of({trace_with({1, 0}, "5"), trace_with({1, 0}, "5")});
  const auto d = dense_step_advantages(g);
  expect_near_all(d[0], {0, -1});
  expect_near_all(d[1], {0, -1});

  const AdvantageField a = total_field(g, {0, 0, 0, 0.5});
  for (std::size_t k = 0; k < 2; ++k) {
    const ParsedTrajectory& t = g.members[k].trajectory;
    for (std::size_t i = 0; i < t.token_count(); ++i) {
      const TokenLabel& l = t.token_labels[i];
      const double expected =
          l.kind == LabelKind::Reasoning ? (l.step == 2 ? -0.5 : 0.0) : 0.0;
      EXPECT_NEAR(a.trajectories[k].total[i], expected, 1e-12);
    }
  }
}

TEST(DenseAdvantage, SingleStepAndUniformCases) {
  const auto d = dense_step_advantages(
      group_of({trace_with({1}, "5"), trace_with({0}, "5")}));
  expect_near_all(d[0], {1});
  expect_near_all(d[1], {-1});
  for (const auto& row : dense_step_advantages(
           group_of({trace_with({1, 1}, "5"), trace_with({1}, "5")})))
    for (double x : row) EXPECT_EQ(x, 0.0);
}

TEST(TotalField, UniformRewardsGiveZeroField) {
  const GroupBatch g = group_of({trace_with({1, 1}, "5"), trace_with({1, 1}, "5")});
  for (const auto& t : total_field(g, {}).trajectories)
    for (double x : t.total) EXPECT_EQ(x, 0.0);
}

TEST(TotalField, NoDenseWeightEqualsCombined) {
  const GroupBatch g = group_of({trace_with({1, 0}, "5"), trace_with({0, 1}, "4")});
  for (const auto& t : total_field(g, {1, 1, 0.05, 0}).trajectories)
    EXPECT_EQ(t.total, t.combined);
}

TEST(TotalField, RejectsNegativeWeights) {
  const GroupBatch g = group_of({trace_with({1}, "5"), trace_with({0}, "4")});
  EXPECT_THROW(total_field(g, {1, -1, 0, 0}), InvalidInput);
}

TEST(TotalField, PropertiesOnRandomGroups) {
  std::mt19937_64 rng(123);
  const AdvantageWeights w;
  for (int i = 0; i < 300; ++i) {
    std::vector<ParsedTrajectory> ts;
    for (int k = 0; k < 2 + i % 7; ++k)
      ts.push_back(parse_trace(oracle::build_random(rng, 1 + k % 5, 3).text));
    const GroupBatch g = make_group("p", std::move(ts), canonicalize("3"));
    const AdvantageField f = total_field(g, w);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const TrajectoryAdvantage& a = f.trajectories[k];
      const ParsedTrajectory& t = g.members[k].trajectory;
      for (std::size_t i = 0; i < t.token_count(); ++i) {
        if (a.critique[i] != 0.0)
          EXPECT_EQ(t.token_labels[i].kind, LabelKind::CritiqueBody);
        EXPECT_EQ(total_advantage(a, i, w), a.total[i]);
        EXPECT_EQ(combine_components(a, i, w), a.combined[i]);
      }
    }
  }
}

TEST(TotalField, SuffixSumRecurrence) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 200; ++i) {
    std::vector<ParsedTrajectory> ts;
    for (int k = 0; k < 4; ++k)
      ts.push_back(parse_trace(oracle::build_random(rng, 1 + (i + k) % 6, 3).text));
    const GroupBatch g = make_group("p", std::move(ts), canonicalize("3"));
    std::vector<double> pooled;
    for (const GroupMember& m : g.members)
      for (const StepScore& s : m.rewards.step_scores) pooled.push_back(s.value_or(0));
    const std::vector<double> z = group_normalize(pooled);
    const auto d = dense_step_advantages(g);
    std::size_t offset = 0;
    for (const auto& row : d) {
      for (std::size_t n = 0; n < row.size(); ++n) {
        const double next = n + 1 < row.size() ? row[n + 1] : 0.0;
        EXPECT_NEAR(row[n], z[offset + n] + next, 1e-12);
      }
      offset += row.size();
    }
  }
}

TEST(TotalField, MatchesLongDoubleOracle) {
  std::mt19937_64 rng(4242);
  const oracle::Weights ow{1.0L, 1.0L, 0.05L, 0.5L};
  for (int i = 0; i < 200; ++i) {
    std::vector<oracle::BuiltTrajectory> built;
    std::vector<ParsedTrajectory> ts;
    for (int k = 0; k < 2 + i % 6; ++k) {
      built.push_back(oracle::build_random(rng, 1 + (k + i) % 6, 8));
      ts.push_back(parse_trace(built.back().text));
    }
    const GroupBatch g = make_group("p", std::move(ts), canonicalize("8"));
    const AdvantageField f = total_field(g, {});
    const oracle::Expected e = oracle::expected_advantages(built, ow);
    for (std::size_t k = 0; k < built.size(); ++k)
      for (std::size_t t = 0; t < built[k].kinds.size(); ++t)
        EXPECT_LT(oracle::relative_error(f.trajectories[k].total[t], e.total[k][t], 1.0L),
                  1e-10L);
  }
}

}  // namespace
}  // namespace stc
