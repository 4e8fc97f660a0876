#include <gtest/gtest.h>

#include <set>

#include "oracle.hpp"
#include "stc/toy_env.hpp"

namespace stc::toy {
namespace {

ToyPolicy scripted_policy(double answer_bias, double score_one_bias,
                          double score_zero_bias) {
  ToyPolicy p;
  for (std::size_t s = 0; s < ToyPolicy::kAnswerSlots; ++s)
    p.logits(s)[ToyPolicy::kCorrectAnswerChoice] = answer_bias;
  p.logits(ToyPolicy::critique_slot(true))[kScoreOne] = score_one_bias;
  p.logits(ToyPolicy::critique_slot(false))[kScoreZero] = score_zero_bias;
  return p;
}

TrainRunConfig small_run() {
  TrainRunConfig cfg;
  cfg.iterations = 25;
  cfg.eval_problems = 40;
  cfg.seed = 3;
  return cfg;
}

TEST(Problem, ChainArithmetic) {
  const ToyProblem p = make_problem(5, {{Op::Add, 3}, {Op::Mul, 2}});
  EXPECT_EQ(p.intermediates, (std::vector<long long>{8, 16}));
  EXPECT_EQ(p.answer, 16);
  EXPECT_EQ(p.statement(), "Start from 5, then apply: + 3, * 2.");
  EXPECT_THROW(make_problem(0, {{Op::Add, 3}}), InvalidInput);
  EXPECT_THROW(make_problem(1, {{Op::Add, 10}}), InvalidInput);
}

TEST(Problem, GenerationIsDeterministicAndVaried) {
  EXPECT_EQ(gen_problem(0), gen_problem(0));
  std::set<std::pair<int, std::vector<std::pair<int, int>>>> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const ToyProblem p = gen_problem(s);
    ASSERT_GE(p.chain.size(), 2u);
    ASSERT_LE(p.chain.size(), 6u);
    long long v = p.initial;
    std::vector<std::pair<int, int>> key;
    for (std::size_t i = 0; i < p.chain.size(); ++i) {
      v = apply(p.chain[i].op, v, p.chain[i].operand);
      EXPECT_EQ(p.intermediates[i], v);
      key.emplace_back(static_cast<int>(p.chain[i].op), p.chain[i].operand);
    }
    seen.insert({p.initial, key});
  }
  EXPECT_GE(seen.size(), 990u);
  EXPECT_THROW(gen_problem(0, 3, 2), InvalidInput);
}

TEST(Policy, ProbabilitiesAreASoftmax) {
  ToyPolicy p;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 3);
  for (double& x : p.parameters()) x = n(rng);
  p.temperature = 0.7;
  for (std::size_t s = 0; s < ToyPolicy::kSlotCount; ++s) {
    const auto probs = p.probabilities(s);
    double sum = 0;
    for (double q : probs) sum += q;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    std::vector<oracle::Real> logits(p.logits(s).begin(), p.logits(s).end());
    for (std::size_t c = 0; c < probs.size(); ++c)
      EXPECT_NEAR(p.log_prob(s, c),
                  static_cast<double>(oracle::log_softmax(logits, c, 0.7L)), 1e-12);
  }
}

TEST(Trajectory, ScriptedChoicesRenderAndReparse) {
  const ToyProblem p = make_problem(5, {{Op::Add, 3}, {Op::Mul, 2}});
  const std::vector<std::size_t> answers = {ToyPolicy::kCorrectAnswerChoice,
                                            ToyPolicy::kCorrectAnswerChoice + 1};
  const std::vector<std::size_t> critiques = {kScoreOne, kScoreZero};
  const ToyTrajectory t = build_trajectory(p, answers, critiques, RenderMode::Full);
  EXPECT_EQ(t.emitted, (std::vector<long long>{8, 17}));
  EXPECT_EQ(t.step_correct, (std::vector<int>{1, 0}));
  EXPECT_EQ(t.parsed.step_count(), 2u);
  EXPECT_EQ(step_scores(t.parsed), (std::vector<StepScore>{1, 0}));
  EXPECT_EQ(t.parsed.final_answer->render(), "17");
  EXPECT_EQ(render(t.parsed, RenderMode::Full), t.text.raw);

  const ToyTrajectory c = build_trajectory(p, answers, {}, RenderMode::Compact);
  EXPECT_EQ(c.text.raw, render(t.parsed, RenderMode::Compact));
  EXPECT_EQ(format_reward(c.parsed), 0.0);
}

TEST(Rollout, RoundTripsAndRecordsDecisions) {
  ToyPolicy policy;
  Rng rng(10);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const ToyProblem problem = gen_problem(s);
    const Rollout r = rollout({policy, policy, policy}, problem, 4, rng);
    ASSERT_EQ(r.trajectories.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
      const ToyTrajectory& t = r.trajectories[k];
      const ParsedTrajectory again = parse_trace(render(t.parsed, RenderMode::Full));
      EXPECT_EQ(again.step_count(), problem.chain.size());
      EXPECT_EQ(step_scores(again), step_scores(t.parsed));
      EXPECT_EQ(r.logprobs[k].current.size(), t.parsed.token_count());
      std::size_t n = 0;
      for (std::size_t i = 0; i < t.parsed.token_count(); ++i) {
        const bool decided =
            n < t.decisions.size() && t.decisions[n].token == i;
        if (decided) {
          EXPECT_EQ(r.logprobs[k].current[i],
                    policy.log_prob(t.decisions[n].slot, t.decisions[n].choice));
          ++n;
        } else {
          EXPECT_EQ(r.logprobs[k].current[i], 0.0);
        }
      }
      EXPECT_EQ(n, t.decisions.size());
    }
  }
}

TEST(Rollout, CompactModeHasNoFormatReward) {
  ToyPolicy policy;
  policy.mode = RenderMode::Compact;
  Rng rng(2);
  const Rollout r = rollout({policy, policy, policy}, gen_problem(1), 8, rng);
  for (const GroupMember& m : r.batch.members) EXPECT_EQ(m.rewards.r_format, 0.0);
}

TEST(Rollout, DeterministicPolicyGivesZeroAdvantages) {
  const ToyPolicy policy = scripted_policy(1e3, 1e3, 1e3);
  Rng rng(2);
  const Rollout r = rollout({policy, policy, policy}, gen_problem(5), 6, rng);
  for (const ToyTrajectory& t : r.trajectories)
    EXPECT_EQ(t.text.raw, r.trajectories.front().text.raw);
  for (const TrajectoryAdvantage& a : total_field(r.batch, {}).trajectories)
    for (double x : a.total) EXPECT_EQ(x, 0.0);
}

TEST(Rewards, CorrectingAStepNeverLowersReasoningReward) {
  Rng rng(44);
  for (std::uint64_t s = 0; s < 300; ++s) {
    const ToyProblem p = gen_problem(s);
    const CanonicalAnswer gold = CanonicalAnswer::integer(p.answer);
    std::vector<std::size_t> a(p.chain.size()), c(p.chain.size());
    for (auto& x : a) x = rng.below(ToyPolicy::kAnswerChoices);
    for (auto& x : c) x = rng.below(ToyPolicy::kCritiqueChoices);
    const int before = reasoning_reward(
        build_trajectory(p, a, c, RenderMode::Full).parsed, gold);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == ToyPolicy::kCorrectAnswerChoice) continue;
      std::vector<std::size_t> fixed = a;
      fixed[i] = ToyPolicy::kCorrectAnswerChoice;
      EXPECT_GE(reasoning_reward(
                    build_trajectory(p, fixed, c, RenderMode::Full).parsed, gold),
                before);
    }
  }
}

// Chained gradient against central differences of the objective in the logits.
TEST(PolicyGradient, MatchesFiniteDifferences) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> noise(0, 0.8);
  for (int trial = 0; trial < 6; ++trial) {
    ToyPolicy reference;
    ToyPolicy behavior;
    for (double& x : behavior.parameters()) x = noise(gen);
    ToyPolicy current = behavior;
    for (double& x : current.parameters()) x += 0.05 * noise(gen);
    for (ToyPolicy* p : {&reference, &behavior, &current})
      p->temperature = trial % 2 ? 0.8 : 1.0;

    Rng rng(100 + trial);
    const Rollout r = rollout({current, behavior, reference},
                              gen_problem(trial, 2, 4), 6, rng);
    const AdvantageField field = total_field(r.batch, {});
    const ClipConfig clip{0.2, 0.02};
    const ObjectiveResult obj = grpo_objective(r.batch, field, r.logprobs, clip);
    const std::vector<double> grad = policy_gradient(current, r.trajectories, obj.gradient);

    auto objective_at = [&](const ToyPolicy& p) {
      std::vector<PolicyLogprobs> lps;
      for (const ToyTrajectory& t : r.trajectories)
        lps.push_back(trajectory_logprobs(t, p, behavior, reference));
      return grpo_objective(r.batch, field, lps, clip).objective;
    };
    const double h = 1e-5;
    for (std::size_t j = 0; j < grad.size(); ++j) {
      ToyPolicy up = current, down = current;
      up.parameters()[j] += h;
      down.parameters()[j] -= h;
      const double fd = (objective_at(up) - objective_at(down)) / (2 * h);
      EXPECT_LT(static_cast<double>(oracle::relative_error(grad[j], fd, 1e-6L)), 1e-5)
          << "parameter " << j;
    }
  }
}

TEST(Evaluate, ScriptedPolicies) {
  const ToyEvaluation perfect =
      evaluate_policy(scripted_policy(60, 60, 60), 100, 8, 1);
  EXPECT_EQ(perfect.pass_at_1, 1.0);
  EXPECT_EQ(*perfect.pass_at_8, 1.0);
  EXPECT_EQ(perfect.answer.f1, 1.0);
  EXPECT_EQ(perfect.process->f1, 1.0);
  EXPECT_EQ(perfect.format_reward, 1.0);

  ToyPolicy yes = scripted_policy(0, 60, 0);
  yes.logits(ToyPolicy::critique_slot(false))[kScoreOne] = 60;
  const ToyEvaluation always_one = evaluate_policy(yes, 100, 1, 1);
  ASSERT_TRUE(always_one.process->specificity);
  EXPECT_EQ(*always_one.process->specificity, 0.0);
  EXPECT_FALSE(always_one.pass_at_8);
}

TEST(Evaluate, UniformPolicyAnswersAtChance) {
  const ToyEvaluation e = evaluate_policy(ToyPolicy{}, 1000, 1, 21);
  const double p = 1.0 / 9.0, sd = std::sqrt(p * (1 - p) / 1000);
  EXPECT_NEAR(e.pass_at_1, p, 3 * sd);
}

TEST(Train, ZeroLearningRateLeavesPolicyUnchanged) {
  TrainRunConfig cfg = small_run();
  cfg.learning_rate = 0.0;
  const TrainResult r = train(cfg);
  for (double x : r.policy.parameters()) EXPECT_EQ(x, 0.0);
  const ToyEvaluation fresh = evaluate_policy(ToyPolicy{}, cfg.eval_problems,
                                              cfg.eval_samples, cfg.seed);
  EXPECT_EQ(r.heldout.pass_at_1, fresh.pass_at_1);

  cfg.learning_rate = 8.0;
  cfg.weights = {0, 0, 0, 0};
  cfg.clip.beta = 0.0;
  const TrainResult idle = train(cfg);
  for (double x : idle.policy.parameters()) EXPECT_EQ(x, 0.0);
}

TEST(Train, DeterministicAcrossRunsAndThreads) {
  TrainRunConfig cfg = small_run();
  const TrainResult a = train(cfg);
  cfg.threads = 3;
  const TrainResult b = train(cfg);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.policy.parameters(), b.policy.parameters());
  EXPECT_EQ(a.heldout.pass_at_1, b.heldout.pass_at_1);
}

TEST(Train, DenseTermChangesTheRun) {
  TrainRunConfig cfg = small_run();
  const TrainResult with_dense = train(cfg);
  cfg.weights.lambda_dense = 0.0;
  const TrainResult without = train(cfg);
  EXPECT_NE(with_dense.history, without.history);
}

TEST(Train, ObserverSeesEveryIteration) {
  TrainRunConfig cfg = small_run();
  cfg.iterations = 5;
  std::size_t calls = 0;
  train(cfg, [&](const IterationMetrics& m, const ToyPolicy&) {
    EXPECT_EQ(m.iteration, calls);
    ++calls;
  });
  EXPECT_EQ(calls, 5u);
}

TEST(Train, OffPolicyUpdatesStayFinite) {
  TrainRunConfig cfg = small_run();
  cfg.updates_per_batch = 3;
  const TrainResult r = train(cfg);
  for (double x : r.policy.parameters()) EXPECT_TRUE(std::isfinite(x));
}

TEST(Train, RejectsInvalidConfig) {
  TrainRunConfig cfg = small_run();
  cfg.group_size = 1;
  EXPECT_THROW(train(cfg), InvalidInput);
  cfg = small_run();
  cfg.learning_rate = -1;
  EXPECT_THROW(train(cfg), InvalidInput);
}

TEST(Train, OverflowingUpdateIsReportedAsDivergence) {
  TrainRunConfig cfg = small_run();
  cfg.learning_rate = 1e300;
  cfg.clip.beta = 1.0;
  cfg.updates_per_batch = 2;
  try {
    train(cfg);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.iteration(), 0u);
  }
}

}  // namespace
}  // namespace stc::toy
