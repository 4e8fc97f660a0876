#pragma once

#include <optional>
#include <vector>

#include "stc/trajectory.hpp"
#include "stc/verifier.hpp"

namespace stc {

// Per-step self-assessment: 0, 1, or absent (missing or malformed critique).
using StepScore = std::optional<int>;

struct RewardBundle {
  int r_reason = 0;       // final answer matches gold
  int z = 0;              // true correctness of the final answer; == r_reason
  int r_crit = 0;         // final critique valid and its score == z
  double r_format = 0.0;  // fraction of steps with a valid critique
  std::vector<StepScore> step_scores;
};

int reasoning_reward(const ParsedTrajectory& trajectory,
                     const CanonicalAnswer& gold);
int critique_consistency_reward(const ParsedTrajectory& trajectory,
                                const CanonicalAnswer& gold);
double format_reward(const ParsedTrajectory& trajectory);
std::vector<StepScore> step_scores(const ParsedTrajectory& trajectory);

RewardBundle compute_rewards(const ParsedTrajectory& trajectory,
                             const CanonicalAnswer& gold);

}  // namespace stc
