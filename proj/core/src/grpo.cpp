#include "stc/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "stc/error.hpp"

namespace stc {

void PolicyLogprobs::validate(std::size_t token_count) const {
  if (current.size() != token_count || behavior.size() != token_count ||
      reference.size() != token_count)
    throw InvalidInput("log-probability vectors must all have length " +
                       std::to_string(token_count));
  for (const auto* v : {&current, &behavior, &reference})
    for (std::size_t t = 0; t < v->size(); ++t)
      if (!std::isfinite((*v)[t]) || (*v)[t] > 0.0)
        throw InvalidInput("log-probability at token " + std::to_string(t) +
                           " is not a finite value <= 0");
}

void ClipConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw InvalidInput("clip epsilon must lie in (0, 1)");
  if (!std::isfinite(beta) || beta < 0.0)
    throw InvalidInput("KL coefficient beta must be finite and >= 0");
}

std::vector<double> importance_ratios(const PolicyLogprobs& lp) {
  if (lp.current.size() != lp.behavior.size())
    throw InvalidInput("current and behavior log-probabilities differ in length");
  std::vector<double> out(lp.current.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] = std::exp(lp.current[t] - lp.behavior[t]);
    if (!std::isfinite(out[t]))
      throw NumericError("non-finite importance ratio", t);
  }
  return out;
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

double kl_estimate(double logp_current, double logp_reference) {
  const double d = logp_reference - logp_current;
  return std::exp(d) - d - 1.0;
}

ObjectiveResult grpo_objective(const AdvantageField& field,
                               std::span<const PolicyLogprobs> logprobs,
                               const ClipConfig& cfg) {
  cfg.validate();
  const std::size_t G = field.trajectories.size();
  if (G == 0) throw InvalidInput("objective over an empty group");
  if (logprobs.size() != G)
    throw InvalidInput("expected " + std::to_string(G) +
                       " log-probability records, got " +
                       std::to_string(logprobs.size()));

  ObjectiveResult out;
  out.gradient.resize(G);
  const double eps = cfg.epsilon;
  for (std::size_t k = 0; k < G; ++k) {
    const std::vector<double>& adv = field.trajectories[k].total;
    const PolicyLogprobs& lp = logprobs[k];
    const std::size_t n = adv.size();
    if (n == 0) throw InvalidInput("trajectory without tokens");
    lp.validate(n);
    const std::vector<double> ratio = importance_ratios(lp);
    const double scale = 1.0 / (static_cast<double>(G) * static_cast<double>(n));

    double sum = 0.0;
    std::vector<double>& grad = out.gradient[k];
    grad.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      const double rho = ratio[t];
      const double a = adv[t];
      const double unclipped = rho * a;
      const double clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps) * a;
      const bool take_unclipped = unclipped <= clipped;
      const double d = lp.reference[t] - lp.current[t];
      const double e = std::exp(d);
      sum += (take_unclipped ? unclipped : clipped) - cfg.beta * (e - d - 1.0);
      // d/dc of ρA is ρA; the clipped branch is constant in c; d/dc of the
      // KL estimator is 1 - exp(r - c).
      const double surrogate_grad = take_unclipped ? unclipped : 0.0;
      grad[t] = scale * (surrogate_grad - cfg.beta * (1.0 - e));
    }
    out.objective += sum / static_cast<double>(n);
  }
  out.objective /= static_cast<double>(G);
  if (!std::isfinite(out.objective))
    throw NumericError("non-finite objective", 0);
  return out;
}

ObjectiveResult grpo_objective(const GroupBatch& group,
                               const AdvantageField& field,
                               std::span<const PolicyLogprobs> logprobs,
                               const ClipConfig& cfg) {
  if (field.trajectories.size() != group.size())
    throw InvalidInput("advantage field and group differ in size");
  for (std::size_t k = 0; k < group.size(); ++k)
    if (field.trajectories[k].total.size() !=
        group.members[k].trajectory.token_count())
      throw InvalidInput("advantage field of trajectory " + std::to_string(k) +
                         " does not match its token count");
  return grpo_objective(field, logprobs, cfg);
}

double sft_nll(std::span<const double> logp_current) {
  if (logp_current.empty())
    throw InvalidInput("negative log-likelihood of an empty trajectory");
  double sum = 0.0;
  for (double lp : logp_current) sum += lp;
  return -sum;
}

}  // namespace stc
