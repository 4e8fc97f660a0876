#include "stc/rewards.hpp"

#include "stc/error.hpp"

namespace stc {

int reasoning_reward(const ParsedTrajectory& trajectory,
                     const CanonicalAnswer& gold) {
  return trajectory.final_answer &&
                 answers_equal(*trajectory.final_answer, gold)
             ? 1
             : 0;
}

int critique_consistency_reward(const ParsedTrajectory& trajectory,
                                const CanonicalAnswer& gold) {
  if (trajectory.steps.empty()) return 0;
  const auto& critique = trajectory.steps.back().critique;
  if (!critique || !critique->valid) return 0;
  const int s_final = critique->score == Score::Correct ? 1 : 0;
  return s_final == reasoning_reward(trajectory, gold) ? 1 : 0;
}

double format_reward(const ParsedTrajectory& trajectory) {
  if (trajectory.steps.empty())
    throw InvalidInput("format reward of a trajectory without steps");
  std::size_t valid = 0;
  for (const Step& s : trajectory.steps)
    if (s.critique && s.critique->valid) ++valid;
  return static_cast<double>(valid) /
         static_cast<double>(trajectory.steps.size());
}

std::vector<StepScore> step_scores(const ParsedTrajectory& trajectory) {
  std::vector<StepScore> out;
  out.reserve(trajectory.steps.size());
  for (const Step& s : trajectory.steps) {
    if (s.critique && s.critique->valid)
      out.emplace_back(s.critique->score == Score::Correct ? 1 : 0);
    else
      out.emplace_back(std::nullopt);
  }
  return out;
}

RewardBundle compute_rewards(const ParsedTrajectory& trajectory,
                             const CanonicalAnswer& gold) {
  RewardBundle b;
  b.z = reasoning_reward(trajectory, gold);
  b.r_reason = b.z;
  b.r_crit = critique_consistency_reward(trajectory, gold);
  b.r_format = format_reward(trajectory);
  b.step_scores = step_scores(trajectory);
  return b;
}

}  // namespace stc
