#pragma once

#include <span>
#include <string>
#include <vector>

#include "stc/rewards.hpp"
#include "stc/trajectory.hpp"

namespace stc {

// Weights of the advantage components.
struct AdvantageWeights {
  double lambda_crit = 1.0;
  double lambda_reason = 1.0;
  double lambda_format = 0.05;
  double lambda_dense = 0.5;

  // Throws InvalidInput if any weight is negative or non-finite.
  void validate() const;
};

struct GroupMember {
  ParsedTrajectory trajectory;
  RewardBundle rewards;
};

// G trajectories sampled for one problem: the unit of advantage computation.
struct GroupBatch {
  std::string problem_id;
  std::vector<GroupMember> members;

  std::size_t size() const noexcept { return members.size(); }
  // Throws InvalidInput when G < 2.
  void validate() const;
};

GroupBatch make_group(std::string problem_id,
                      std::vector<ParsedTrajectory> trajectories,
                      const CanonicalAnswer& gold);

// (v - mean) / std with the population standard deviation. Returns zeros
// when all values are identical. Throws InvalidInput for fewer than 2 values.
std::vector<double> group_normalize(std::span<const double> values);

// Per trajectory, per token.
using TokenField = std::vector<std::vector<double>>;

// Normalized R_crit on CritiqueBody tokens, 0 elsewhere.
TokenField critique_token_field(const GroupBatch& batch);

// λ_crit·(|τ|/|τ_crit|)·critique + λ_reason·A_reason + λ_format·A_format.
TokenField combined_field(const GroupBatch& batch, const AdvantageWeights& w);

// Per trajectory, per step: suffix sums of step scores normalized over the
// pooled scores of the whole group (absent scores count as 0).
std::vector<std::vector<double>> dense_step_advantages(const GroupBatch& batch);

struct TrajectoryAdvantage {
  double crit_ratio = 0.0;  // |τ| / |τ_crit|, 0 without critique tokens
  double reasoning = 0.0;   // normalized R_reason, applied to every token
  double format = 0.0;      // normalized R_format, applied to every token
  std::vector<double> critique;    // per token, masked to CritiqueBody
  std::vector<double> step_dense;  // per step
  std::vector<double> dense;       // per token, step_dense[s(t)] on Reasoning
  std::vector<double> combined;    // per token, without the dense term
  std::vector<double> total;       // per token, combined + λ_dense·dense
};

struct AdvantageField {
  std::vector<TrajectoryAdvantage> trajectories;
};

AdvantageField total_field(const GroupBatch& batch, const AdvantageWeights& w);

// The combination rules. total_field() evaluates exactly these expressions,
// so recomputing from stored components is bit-identical.
inline double combine_components(const TrajectoryAdvantage& a, std::size_t t,
                                 const AdvantageWeights& w) {
  return w.lambda_crit * a.crit_ratio * a.critique[t] +
         w.lambda_reason * a.reasoning + w.lambda_format * a.format;
}

inline double total_advantage(const TrajectoryAdvantage& a, std::size_t t,
                              const AdvantageWeights& w) {
  return combine_components(a, t, w) + w.lambda_dense * a.dense[t];
}

}  // namespace stc
