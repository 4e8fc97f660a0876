#pragma once

// Desk-scale reasoning environment for closing the RL loop end to end.
//
// A problem is a chain of small integer operations starting from a digit,
// e.g. 5, +3, *2 with intermediates 8, 16. A trajectory has one reasoning
// step per link, "8 * 2 = 17", the last step also stating the boxed answer;
// in Full mode each step is followed by a critique block.
//
// The policy is a table of logits with two kinds of decision slots:
//   * answer slots, keyed by (operator, operand): a choice among nine
//     offsets -4..4 added to the true value of the step, offset 0 being
//     correct;
//   * critique slots, keyed by whether the step is correct: a choice among
//     score 0, score 1, or a malformed score.
// Every other token is forced (probability 1), so per-token log-probabilities
// and their gradients with respect to the logits are exact.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stc/advantage.hpp"
#include "stc/error.hpp"
#include "stc/eval.hpp"
#include "stc/grpo.hpp"
#include "stc/random.hpp"
#include "stc/trajectory.hpp"

namespace stc::toy {

enum class Op : std::uint8_t { Add = 0, Sub = 1, Mul = 2 };

struct Link {
  Op op = Op::Add;
  int operand = 1;  // in [1, 9]

  bool operator==(const Link&) const = default;
};

struct ToyProblem {
  std::uint64_t seed = 0;
  int initial = 1;  // in [1, 9]
  std::vector<Link> chain;
  std::vector<long long> intermediates;  // value after each link
  long long answer = 0;

  std::string statement() const;
  bool operator==(const ToyProblem&) const = default;
};

long long apply(Op op, long long lhs, long long rhs) noexcept;
char op_symbol(Op op) noexcept;

ToyProblem make_problem(int initial, std::vector<Link> chain,
                        std::uint64_t seed = 0);

// Deterministic in (seed, min_length, max_length).
ToyProblem gen_problem(std::uint64_t seed, int min_length = 2,
                       int max_length = 6);

inline constexpr int kMaxOffset = 4;

enum CritiqueChoice : std::size_t {
  kScoreZero = 0,
  kScoreOne = 1,
  kScoreMalformed = 2,
};

class ToyPolicy {
 public:
  static constexpr std::size_t kAnswerSlots = 27;
  static constexpr std::size_t kCritiqueSlots = 2;
  static constexpr std::size_t kAnswerChoices = 2 * kMaxOffset + 1;
  static constexpr std::size_t kCritiqueChoices = 3;
  static constexpr std::size_t kSlotCount = kAnswerSlots + kCritiqueSlots;
  static constexpr std::size_t kParameterCount =
      kAnswerSlots * kAnswerChoices + kCritiqueSlots * kCritiqueChoices;
  static constexpr std::size_t kCorrectAnswerChoice = kMaxOffset;

  // All logits zero: uniform choices.
  ToyPolicy() : params_(kParameterCount, 0.0) {}

  static std::size_t answer_slot(Op op, int operand);
  static std::size_t critique_slot(bool step_correct);
  static std::size_t slot_width(std::size_t slot);
  static std::size_t slot_offset(std::size_t slot);
  static int offset_of_choice(std::size_t choice) {
    return static_cast<int>(choice) - kMaxOffset;
  }

  std::span<const double> logits(std::size_t slot) const;
  std::span<double> logits(std::size_t slot);

  // softmax(logits / temperature).
  std::vector<double> probabilities(std::size_t slot) const;
  double log_prob(std::size_t slot, std::size_t choice) const;

  std::vector<double>& parameters() noexcept { return params_; }
  const std::vector<double>& parameters() const noexcept { return params_; }

  double temperature = 1.0;
  RenderMode mode = RenderMode::Full;

 private:
  std::vector<double> params_;
};

// A sampled choice and the token that carries it.
struct Decision {
  std::size_t token = 0;
  std::size_t slot = 0;
  std::size_t choice = 0;
};

struct ToyTrajectory {
  TraceText text;
  ParsedTrajectory parsed;
  std::vector<Decision> decisions;
  std::vector<long long> emitted;  // value stated by each step
  std::vector<int> step_correct;   // exact ground truth per step
};

// Builds the trajectory that a given sequence of choices produces.
// `critique_choices` is ignored in Compact mode.
ToyTrajectory build_trajectory(const ToyProblem& problem,
                               std::span<const std::size_t> answer_choices,
                               std::span<const std::size_t> critique_choices,
                               RenderMode mode);

ToyTrajectory sample_trajectory(const ToyPolicy& policy,
                                const ToyProblem& problem, Rng& rng);

PolicyLogprobs trajectory_logprobs(const ToyTrajectory& trajectory,
                                   const ToyPolicy& current,
                                   const ToyPolicy& behavior,
                                   const ToyPolicy& reference);

struct PolicySnapshots {
  const ToyPolicy& current;
  const ToyPolicy& behavior;  // sampling policy
  const ToyPolicy& reference;
};

struct Rollout {
  GroupBatch batch;
  std::vector<PolicyLogprobs> logprobs;
  std::vector<ToyTrajectory> trajectories;
};

// Samples G trajectories from the behavior policy and scores them.
Rollout rollout(const PolicySnapshots& policies, const ToyProblem& problem,
                std::size_t group_size, Rng& rng);

// Chains per-token gradients with respect to logp_current through the
// softmax: returns ∂J/∂logits, laid out like ToyPolicy::parameters().
std::vector<double> policy_gradient(
    const ToyPolicy& current, std::span<const ToyTrajectory> trajectories,
    std::span<const std::vector<double>> token_gradient);

struct TrainRunConfig {
  std::size_t group_size = 16;
  AdvantageWeights weights;
  ClipConfig clip;
  double learning_rate = 8.0;
  std::size_t iterations = 2000;
  std::uint64_t seed = 0;
  int min_length = 2;
  int max_length = 6;
  std::size_t problems_per_iteration = 4;
  // Gradient steps per sampled batch; above 1 the later steps are off-policy
  // and the importance ratio departs from 1.
  std::size_t updates_per_batch = 1;
  double temperature = 1.0;
  RenderMode mode = RenderMode::Full;
  std::size_t eval_problems = 500;
  std::size_t eval_samples = 8;
  unsigned threads = 0;

  void validate() const;
};

struct IterationMetrics {
  std::size_t iteration = 0;
  double reasoning_accuracy = 0.0;    // mean R_reason over the batch
  double critique_consistency = 0.0;  // mean R_crit over the batch
  double format_reward = 0.0;         // mean R_format over the batch
  double objective = 0.0;             // before the first update

  bool operator==(const IterationMetrics&) const = default;
};

struct ToyEvaluation {
  std::size_t problems = 0;
  std::size_t samples_per_problem = 0;
  double pass_at_1 = 0.0;
  std::optional<double> pass_at_8;
  double critique_consistency = 0.0;
  double format_reward = 0.0;
  eval::CritiqueMetrics answer;
  std::optional<eval::CritiqueMetrics> process;
};

struct TrainResult {
  std::vector<IterationMetrics> history;
  ToyPolicy policy;
  ToyEvaluation heldout;
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(std::size_t iteration)
      : Error("non-finite policy parameters after iteration " +
              std::to_string(iteration)),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

// Called after each iteration's update.
using IterationObserver =
    std::function<void(const IterationMetrics&, const ToyPolicy&)>;

// sample problems -> rollout -> rewards -> advantages -> objective ->
// gradient ascent on the logits. Deterministic in cfg (thread count
// included or not).
TrainResult train(const TrainRunConfig& cfg,
                  const IterationObserver& observer = {});

// Samples `samples_per_problem` trajectories for each of `n_problems`
// held-out problems and collects them as an evaluation sample set.
eval::SampleSet collect_samples(const ToyPolicy& policy, std::size_t n_problems,
                                std::size_t samples_per_problem,
                                std::uint64_t seed, int min_length = 2,
                                int max_length = 6, unsigned threads = 0);

ToyEvaluation evaluate_policy(const ToyPolicy& policy, std::size_t n_problems,
                              std::size_t samples_per_problem,
                              std::uint64_t seed, int min_length = 2,
                              int max_length = 6, unsigned threads = 0);

// Seed of the i-th held-out problem for a run seeded with `seed`.
std::uint64_t heldout_problem_seed(std::uint64_t seed, std::size_t index);

}  // namespace stc::toy
