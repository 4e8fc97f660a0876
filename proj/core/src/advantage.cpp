#include "stc/advantage.hpp"

#include <algorithm>
#include <cmath>

#include "stc/error.hpp"

namespace stc {
namespace {

void check_aligned(const GroupMember& m) {
  if (m.trajectory.token_labels.size() != m.trajectory.tokens.size())
    throw InvalidInput("token labels and tokens differ in length");
}

std::vector<double> member_values(const GroupBatch& batch, auto&& get) {
  std::vector<double> v;
  v.reserve(batch.size());
  for (const GroupMember& m : batch.members) v.push_back(get(m));
  return v;
}

}  // namespace

void AdvantageWeights::validate() const {
  for (double w : {lambda_crit, lambda_reason, lambda_format, lambda_dense})
    if (!std::isfinite(w) || w < 0.0)
      throw InvalidInput("advantage weights must be finite and non-negative");
}

void GroupBatch::validate() const {
  if (members.size() < 2)
    throw InvalidInput("group '" + problem_id + "' has " +
                       std::to_string(members.size()) +
                       " trajectories; at least 2 are required");
  for (const GroupMember& m : members) check_aligned(m);
}

GroupBatch make_group(std::string problem_id,
                      std::vector<ParsedTrajectory> trajectories,
                      const CanonicalAnswer& gold) {
  GroupBatch batch;
  batch.problem_id = std::move(problem_id);
  batch.members.reserve(trajectories.size());
  for (ParsedTrajectory& t : trajectories) {
    RewardBundle r = compute_rewards(t, gold);
    batch.members.push_back({std::move(t), std::move(r)});
  }
  return batch;
}

std::vector<double> group_normalize(std::span<const double> values) {
  if (values.size() < 2)
    throw InvalidInput("group normalization needs at least 2 values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  std::vector<double> out(values.size(), 0.0);
  if (*lo == *hi) return out;
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = (values[i] - mean) / sd;
  return out;
}

TokenField critique_token_field(const GroupBatch& batch) {
  batch.validate();
  const std::vector<double> a_crit = group_normalize(member_values(
      batch, [](const GroupMember& m) { return double(m.rewards.r_crit); }));
  TokenField field;
  field.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& labels = batch.members[k].trajectory.token_labels;
    std::vector<double> row(labels.size(), 0.0);
    for (std::size_t t = 0; t < labels.size(); ++t)
      if (labels[t].kind == LabelKind::CritiqueBody) row[t] = a_crit[k];
    field.push_back(std::move(row));
  }
  return field;
}

TokenField combined_field(const GroupBatch& batch, const AdvantageWeights& w) {
  const AdvantageField full = total_field(batch, w);
  TokenField out;
  out.reserve(full.trajectories.size());
  for (const TrajectoryAdvantage& a : full.trajectories)
    out.push_back(a.combined);
  return out;
}

std::vector<std::vector<double>> dense_step_advantages(const GroupBatch& batch) {
  batch.validate();
  std::vector<double> pooled;
  for (const GroupMember& m : batch.members)
    for (const StepScore& s : m.rewards.step_scores)
      pooled.push_back(s.value_or(0));

  std::vector<double> normalized(pooled.size(), 0.0);
  if (pooled.size() >= 2) normalized = group_normalize(pooled);

  std::vector<std::vector<double>> out;
  out.reserve(batch.size());
  std::size_t offset = 0;
  for (const GroupMember& m : batch.members) {
    const std::size_t steps = m.rewards.step_scores.size();
    std::vector<double> row(steps, 0.0);
    double suffix = 0.0;
    for (std::size_t n = steps; n-- > 0;) {
      suffix += normalized[offset + n];
      row[n] = suffix;
    }
    offset += steps;
    out.push_back(std::move(row));
  }
  return out;
}

AdvantageField total_field(const GroupBatch& batch, const AdvantageWeights& w) {
  w.validate();
  const TokenField critique = critique_token_field(batch);
  const std::vector<double> a_reason = group_normalize(member_values(
      batch, [](const GroupMember& m) { return double(m.rewards.r_reason); }));
  const std::vector<double> a_format = group_normalize(member_values(
      batch, [](const GroupMember& m) { return m.rewards.r_format; }));
  std::vector<std::vector<double>> dense = dense_step_advantages(batch);

  AdvantageField field;
  field.trajectories.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const ParsedTrajectory& traj = batch.members[k].trajectory;
    const std::size_t n_tokens = traj.token_count();
    const std::size_t n_crit = traj.critique_token_count();

    TrajectoryAdvantage a;
    a.crit_ratio = n_crit == 0 ? 0.0
                               : static_cast<double>(n_tokens) /
                                     static_cast<double>(n_crit);
    a.reasoning = a_reason[k];
    a.format = a_format[k];
    a.critique = critique[k];
    a.step_dense = std::move(dense[k]);
    a.dense.assign(n_tokens, 0.0);
    for (std::size_t t = 0; t < n_tokens; ++t) {
      const TokenLabel& label = traj.token_labels[t];
      if (label.kind == LabelKind::Reasoning && label.step >= 1 &&
          label.step <= a.step_dense.size())
        a.dense[t] = a.step_dense[label.step - 1];
    }
    a.combined.resize(n_tokens);
    a.total.resize(n_tokens);
    for (std::size_t t = 0; t < n_tokens; ++t) {
      a.combined[t] = combine_components(a, t, w);
      a.total[t] = total_advantage(a, t, w);
    }
    field.trajectories.push_back(std::move(a));
  }
  return field;
}

}  // namespace stc
