#pragma once

#include <span>
#include <vector>

#include "stc/advantage.hpp"

namespace stc {

// Per-token log-probabilities of one trajectory under the current, behavior
// (sampling) and reference policies.
struct PolicyLogprobs {
  std::vector<double> current;
  std::vector<double> behavior;
  std::vector<double> reference;

  // Throws InvalidInput unless all three have `token_count` finite entries
  // that are <= 0.
  void validate(std::size_t token_count) const;
};

struct ClipConfig {
  double epsilon = 0.2;
  double beta = 0.001;

  void validate() const;
};

// exp(current - behavior) per token. Throws InvalidInput on mismatched
// lengths and NumericError on a non-finite ratio.
std::vector<double> importance_ratios(const PolicyLogprobs& lp);

// min(ρA, clip(ρ, 1-ε, 1+ε)A).
double clipped_surrogate(double ratio, double advantage, double epsilon);

// Non-negative per-token KL estimator exp(r - c) - (r - c) - 1 with
// c = log π_θ, r = log π_ref.
double kl_estimate(double logp_current, double logp_reference);

struct ObjectiveResult {
  double objective = 0.0;
  // ∂objective / ∂logp_current, per trajectory, per token.
  std::vector<std::vector<double>> gradient;
};

// (1/G) Σ_k (1/|τ_k|) Σ_t [clipped_surrogate(ρ_kt, Ã_kt) - β·kl_kt]
// together with its closed-form gradient. The clipped branch contributes no
// ratio gradient; ties at the clip boundary take the unclipped branch.
ObjectiveResult grpo_objective(const GroupBatch& group,
                               const AdvantageField& field,
                               std::span<const PolicyLogprobs> logprobs,
                               const ClipConfig& cfg);

// Same objective when only token counts matter (no parsed trajectories).
ObjectiveResult grpo_objective(const AdvantageField& field,
                               std::span<const PolicyLogprobs> logprobs,
                               const ClipConfig& cfg);

// Negative log-likelihood of one trajectory: -Σ_t logp[t]. Throws
// InvalidInput for an empty trajectory.
double sft_nll(std::span<const double> logp_current);

}  // namespace stc
