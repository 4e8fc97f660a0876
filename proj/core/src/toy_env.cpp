#include "stc/toy_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stc/parallel.hpp"
#include "stc/rewards.hpp"

namespace stc::toy {
namespace {

constexpr std::string_view kJustification = "Recheck the arithmetic.";
constexpr int kMaxChainLength = 16;

// Stream tags for mix_seed so that training and held-out draws never collide.
constexpr std::uint64_t kTrainStream = 0x7472616eULL;
constexpr std::uint64_t kHeldoutStream = 0x68656c64ULL;
constexpr std::uint64_t kSampleStream = 0x73616d70ULL;

class TokenWriter {
 public:
  std::size_t push(std::string text) {
    const std::size_t begin = raw_.size();
    raw_ += text;
    tokens_.push_back({std::move(text), begin, raw_.size()});
    return tokens_.size() - 1;
  }

  TraceText finish() && { return {std::move(raw_), std::move(tokens_)}; }

 private:
  std::string raw_;
  std::vector<TokenPiece> tokens_;
};

std::string signed_token(long long v) { return " " + std::to_string(v); }

const char* score_text(std::size_t choice) {
  switch (choice) {
    case kScoreZero:
      return "0";
    case kScoreOne:
      return "1";
    default:
      return "?";
  }
}

void check_lengths(int min_length, int max_length) {
  if (min_length < 1 || max_length < min_length ||
      max_length > kMaxChainLength)
    throw InvalidInput("chain lengths must satisfy 1 <= min <= max <= " +
                       std::to_string(kMaxChainLength));
}

struct ScoredSample {
  eval::Sample sample;
  int r_crit = 0;
  double r_format = 0.0;
};

ScoredSample score_sample(const ToyTrajectory& t, const ToyProblem& problem) {
  const CanonicalAnswer gold = CanonicalAnswer::integer(problem.answer);
  const RewardBundle r = compute_rewards(t.parsed, gold);
  ScoredSample s;
  s.sample.answer = t.parsed.final_answer;
  s.sample.step_scores = r.step_scores;
  if (!r.step_scores.empty()) s.sample.final_score = r.step_scores.back();
  s.sample.gold_step_labels = t.step_correct;
  s.r_crit = r.r_crit;
  s.r_format = t.parsed.step_count() ? r.r_format : 0.0;
  return s;
}

std::vector<std::vector<ScoredSample>> sample_heldout(
    const ToyPolicy& policy, std::size_t n_problems,
    std::size_t samples_per_problem, std::uint64_t seed, int min_length,
    int max_length, unsigned threads, std::vector<ToyProblem>& problems) {
  check_lengths(min_length, max_length);
  problems.resize(n_problems);
  std::vector<std::vector<ScoredSample>> out(n_problems);
  parallel_for(n_problems, threads, [&](std::size_t i) {
    const std::uint64_t pseed = heldout_problem_seed(seed, i);
    problems[i] = gen_problem(pseed, min_length, max_length);
    Rng rng(mix_seed(pseed, kSampleStream));
    out[i].reserve(samples_per_problem);
    for (std::size_t j = 0; j < samples_per_problem; ++j)
      out[i].push_back(
          score_sample(sample_trajectory(policy, problems[i], rng),
                       problems[i]));
  });
  return out;
}

}  // namespace

long long apply(Op op, long long lhs, long long rhs) noexcept {
  switch (op) {
    case Op::Add:
      return lhs + rhs;
    case Op::Sub:
      return lhs - rhs;
    case Op::Mul:
      return lhs * rhs;
  }
  return lhs;
}

char op_symbol(Op op) noexcept {
  switch (op) {
    case Op::Add:
      return '+';
    case Op::Sub:
      return '-';
    case Op::Mul:
      return '*';
  }
  return '?';
}

std::string ToyProblem::statement() const {
  std::string s = "Start from " + std::to_string(initial) + ", then apply:";
  for (std::size_t i = 0; i < chain.size(); ++i) {
    s += i ? ", " : " ";
    s += op_symbol(chain[i].op);
    s += ' ';
    s += std::to_string(chain[i].operand);
  }
  s += '.';
  return s;
}

ToyProblem make_problem(int initial, std::vector<Link> chain,
                        std::uint64_t seed) {
  if (initial < 1 || initial > 9)
    throw InvalidInput("initial value must be in [1, 9]");
  if (chain.empty()) throw InvalidInput("a problem needs at least one link");
  if (chain.size() > static_cast<std::size_t>(kMaxChainLength))
    throw InvalidInput("chain longer than " + std::to_string(kMaxChainLength));
  ToyProblem p;
  p.seed = seed;
  p.initial = initial;
  long long v = initial;
  for (const Link& l : chain) {
    if (l.operand < 1 || l.operand > 9)
      throw InvalidInput("operands must be in [1, 9]");
    v = apply(l.op, v, l.operand);
    p.intermediates.push_back(v);
  }
  p.chain = std::move(chain);
  p.answer = v;
  return p;
}

ToyProblem gen_problem(std::uint64_t seed, int min_length, int max_length) {
  check_lengths(min_length, max_length);
  Rng rng(seed);
  const int length = rng.between(min_length, max_length);
  const int initial = rng.between(1, 9);
  std::vector<Link> chain(static_cast<std::size_t>(length));
  for (Link& l : chain) {
    l.op = static_cast<Op>(rng.below(3));
    l.operand = rng.between(1, 9);
  }
  return make_problem(initial, std::move(chain), seed);
}

std::size_t ToyPolicy::answer_slot(Op op, int operand) {
  if (operand < 1 || operand > 9)
    throw InvalidInput("operands must be in [1, 9]");
  return static_cast<std::size_t>(op) * 9 +
         static_cast<std::size_t>(operand - 1);
}

std::size_t ToyPolicy::critique_slot(bool step_correct) {
  return kAnswerSlots + (step_correct ? 1 : 0);
}

std::size_t ToyPolicy::slot_width(std::size_t slot) {
  if (slot >= kSlotCount) throw InvalidInput("slot index out of range");
  return slot < kAnswerSlots ? kAnswerChoices : kCritiqueChoices;
}

std::size_t ToyPolicy::slot_offset(std::size_t slot) {
  if (slot >= kSlotCount) throw InvalidInput("slot index out of range");
  if (slot < kAnswerSlots) return slot * kAnswerChoices;
  return kAnswerSlots * kAnswerChoices + (slot - kAnswerSlots) * kCritiqueChoices;
}

std::span<const double> ToyPolicy::logits(std::size_t slot) const {
  return std::span<const double>(params_).subspan(slot_offset(slot),
                                                  slot_width(slot));
}

std::span<double> ToyPolicy::logits(std::size_t slot) {
  return std::span<double>(params_).subspan(slot_offset(slot),
                                            slot_width(slot));
}

std::vector<double> ToyPolicy::probabilities(std::size_t slot) const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidInput("temperature must be positive and finite");
  const auto z = logits(slot);
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp((z[i] - top) / temperature);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

double ToyPolicy::log_prob(std::size_t slot, std::size_t choice) const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidInput("temperature must be positive and finite");
  const auto z = logits(slot);
  if (choice >= z.size()) throw InvalidInput("choice index out of range");
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp((x - top) / temperature);
  return std::min(0.0, (z[choice] - top) / temperature - std::log(sum));
}

ToyTrajectory build_trajectory(const ToyProblem& problem,
                               std::span<const std::size_t> answer_choices,
                               std::span<const std::size_t> critique_choices,
                               RenderMode mode) {
  const std::size_t n = problem.chain.size();
  if (answer_choices.size() != n)
    throw InvalidInput("one answer choice per link is required");
  if (mode == RenderMode::Full && critique_choices.size() != n)
    throw InvalidInput("one critique choice per link is required");

  ToyTrajectory t;
  TokenWriter w;
  long long lhs = problem.initial;
  for (std::size_t i = 0; i < n; ++i) {
    const Link& link = problem.chain[i];
    const std::size_t a = answer_choices[i];
    if (a >= ToyPolicy::kAnswerChoices)
      throw InvalidInput("answer choice out of range");
    const long long value =
        problem.intermediates[i] + ToyPolicy::offset_of_choice(a);
    const bool correct = a == ToyPolicy::kCorrectAnswerChoice;
    t.emitted.push_back(value);
    t.step_correct.push_back(correct ? 1 : 0);

    if (i) w.push(std::string(kStepSeparator));
    w.push(std::to_string(lhs));
    w.push(std::string(" ") + op_symbol(link.op));
    w.push(" " + std::to_string(link.operand));
    w.push(" =");
    const std::size_t answer_token = w.push(signed_token(value));
    t.decisions.push_back(
        {answer_token, ToyPolicy::answer_slot(link.op, link.operand), a});
    if (i + 1 == n) {
      w.push(".");
      w.push(" Answer:");
      w.push(" \\boxed{");
      w.push(std::to_string(value));
      w.push("}");
    }
    if (mode == RenderMode::Full) {
      const std::size_t c = critique_choices[i];
      if (c >= ToyPolicy::kCritiqueChoices)
        throw InvalidInput("critique choice out of range");
      w.push(" " + std::string(kCriticOpen));
      w.push(std::string(kJustification));
      w.push(std::string(kCriticClose));
      w.push(" " + std::string(kScoreOpen));
      const std::size_t score_token = w.push(score_text(c));
      w.push(std::string(kScoreClose));
      t.decisions.push_back(
          {score_token, ToyPolicy::critique_slot(correct), c});
    }
    lhs = problem.intermediates[i];
  }
  t.text = std::move(w).finish();
  t.parsed = parse_trace(t.text);
  return t;
}

ToyTrajectory sample_trajectory(const ToyPolicy& policy,
                                const ToyProblem& problem, Rng& rng) {
  const std::size_t n = problem.chain.size();
  std::vector<std::size_t> answers(n);
  std::vector<std::size_t> critiques;
  for (std::size_t i = 0; i < n; ++i) {
    const Link& l = problem.chain[i];
    answers[i] = rng.categorical(
        policy.probabilities(ToyPolicy::answer_slot(l.op, l.operand)));
    if (policy.mode == RenderMode::Full) {
      const bool correct = answers[i] == ToyPolicy::kCorrectAnswerChoice;
      critiques.push_back(rng.categorical(
          policy.probabilities(ToyPolicy::critique_slot(correct))));
    }
  }
  return build_trajectory(problem, answers, critiques, policy.mode);
}

PolicyLogprobs trajectory_logprobs(const ToyTrajectory& trajectory,
                                   const ToyPolicy& current,
                                   const ToyPolicy& behavior,
                                   const ToyPolicy& reference) {
  const std::size_t n = trajectory.parsed.token_count();
  PolicyLogprobs lp{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                    std::vector<double>(n, 0.0)};
  for (const Decision& d : trajectory.decisions) {
    lp.current[d.token] = current.log_prob(d.slot, d.choice);
    lp.behavior[d.token] = behavior.log_prob(d.slot, d.choice);
    lp.reference[d.token] = reference.log_prob(d.slot, d.choice);
  }
  return lp;
}

Rollout rollout(const PolicySnapshots& policies, const ToyProblem& problem,
                std::size_t group_size, Rng& rng) {
  if (group_size < 2) throw InvalidInput("group size must be at least 2");
  Rollout r;
  r.trajectories.reserve(group_size);
  std::vector<ParsedTrajectory> parsed;
  parsed.reserve(group_size);
  for (std::size_t k = 0; k < group_size; ++k) {
    r.trajectories.push_back(sample_trajectory(policies.behavior, problem, rng));
    parsed.push_back(r.trajectories.back().parsed);
    r.logprobs.push_back(trajectory_logprobs(
        r.trajectories.back(), policies.current, policies.behavior,
        policies.reference));
  }
  r.batch = make_group("toy-" + std::to_string(problem.seed), std::move(parsed),
                       CanonicalAnswer::integer(problem.answer));
  return r;
}

std::vector<double> policy_gradient(
    const ToyPolicy& current, std::span<const ToyTrajectory> trajectories,
    std::span<const std::vector<double>> token_gradient) {
  if (trajectories.size() != token_gradient.size())
    throw InvalidInput("one token gradient per trajectory is required");
  std::vector<double> grad(ToyPolicy::kParameterCount, 0.0);
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const auto& g = token_gradient[k];
    if (g.size() != trajectories[k].parsed.token_count())
      throw InvalidInput("token gradient length differs from token count");
    for (const Decision& d : trajectories[k].decisions) {
      const double upstream = g[d.token];
      if (upstream == 0.0) continue;
      const std::vector<double> p = current.probabilities(d.slot);
      const std::size_t base = ToyPolicy::slot_offset(d.slot);
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double indicator = j == d.choice ? 1.0 : 0.0;
        grad[base + j] += upstream * (indicator - p[j]) / current.temperature;
      }
    }
  }
  return grad;
}

void TrainRunConfig::validate() const {
  if (group_size < 2) throw InvalidInput("group_size must be at least 2");
  weights.validate();
  clip.validate();
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw InvalidInput("learning_rate must be finite and >= 0");
  if (problems_per_iteration == 0)
    throw InvalidInput("problems_per_iteration must be at least 1");
  if (updates_per_batch == 0)
    throw InvalidInput("updates_per_batch must be at least 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidInput("temperature must be positive and finite");
  check_lengths(min_length, max_length);
}

std::uint64_t heldout_problem_seed(std::uint64_t seed, std::size_t index) {
  return mix_seed(mix_seed(seed, kHeldoutStream), index);
}

TrainResult train(const TrainRunConfig& cfg,
                  const IterationObserver& observer) {
  cfg.validate();
  TrainResult result;
  ToyPolicy& policy = result.policy;
  policy.temperature = cfg.temperature;
  policy.mode = cfg.mode;
  const ToyPolicy reference = policy;
  const std::uint64_t train_seed = mix_seed(cfg.seed, kTrainStream);
  const std::size_t P = cfg.problems_per_iteration;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const ToyPolicy behavior = policy;
    std::vector<Rollout> rollouts(P);
    parallel_for(P, cfg.threads, [&](std::size_t p) {
      const std::uint64_t s = mix_seed(train_seed, it * P + p);
      const ToyProblem problem = gen_problem(s, cfg.min_length, cfg.max_length);
      Rng rng(mix_seed(s, kSampleStream));
      rollouts[p] = rollout({policy, behavior, reference}, problem,
                            cfg.group_size, rng);
    });

    IterationMetrics m;
    m.iteration = it;
    for (const Rollout& r : rollouts)
      for (const GroupMember& g : r.batch.members) {
        m.reasoning_accuracy += g.rewards.r_reason;
        m.critique_consistency += g.rewards.r_crit;
        m.format_reward += g.rewards.r_format;
      }
    const double n = static_cast<double>(P * cfg.group_size);
    m.reasoning_accuracy /= n;
    m.critique_consistency /= n;
    m.format_reward /= n;

    std::vector<AdvantageField> fields(P);
    for (std::size_t p = 0; p < P; ++p)
      fields[p] = total_field(rollouts[p].batch, cfg.weights);

    try {
      for (std::size_t u = 0; u < cfg.updates_per_batch; ++u) {
        std::vector<std::vector<double>> grads(P);
        std::vector<double> objectives(P, 0.0);
        parallel_for(P, cfg.threads, [&](std::size_t p) {
          Rollout& r = rollouts[p];
          if (u > 0)
            for (std::size_t k = 0; k < r.trajectories.size(); ++k)
              for (const Decision& d : r.trajectories[k].decisions)
                r.logprobs[k].current[d.token] = policy.log_prob(d.slot, d.choice);
          const ObjectiveResult obj =
              grpo_objective(r.batch, fields[p], r.logprobs, cfg.clip);
          objectives[p] = obj.objective;
          grads[p] = policy_gradient(policy, r.trajectories, obj.gradient);
        });
        if (u == 0) {
          for (double o : objectives) m.objective += o;
          m.objective /= static_cast<double>(P);
        }
        auto& params = policy.parameters();
        const double scale = cfg.learning_rate / static_cast<double>(P);
        for (std::size_t p = 0; p < P; ++p)
          for (std::size_t j = 0; j < params.size(); ++j)
            params[j] += scale * grads[p][j];
      }
    } catch (const NumericError&) {
      throw TrainingDiverged(it);
    }

    for (double x : policy.parameters())
      if (!std::isfinite(x)) throw TrainingDiverged(it);
    result.history.push_back(m);
    if (observer) observer(m, policy);
  }

  result.heldout =
      evaluate_policy(policy, cfg.eval_problems, cfg.eval_samples, cfg.seed,
                      cfg.min_length, cfg.max_length, cfg.threads);
  return result;
}

eval::SampleSet collect_samples(const ToyPolicy& policy, std::size_t n_problems,
                                std::size_t samples_per_problem,
                                std::uint64_t seed, int min_length,
                                int max_length, unsigned threads) {
  std::vector<ToyProblem> problems;
  auto scored = sample_heldout(policy, n_problems, samples_per_problem, seed,
                               min_length, max_length, threads, problems);
  eval::SampleSet set;
  set.reserve(n_problems);
  for (std::size_t i = 0; i < n_problems; ++i) {
    eval::ProblemSamples ps;
    ps.problem_id = "heldout-" + std::to_string(i);
    ps.gold = CanonicalAnswer::integer(problems[i].answer);
    for (ScoredSample& s : scored[i]) ps.samples.push_back(std::move(s.sample));
    set.push_back(std::move(ps));
  }
  return set;
}

ToyEvaluation evaluate_policy(const ToyPolicy& policy, std::size_t n_problems,
                              std::size_t samples_per_problem,
                              std::uint64_t seed, int min_length,
                              int max_length, unsigned threads) {
  if (n_problems == 0 || samples_per_problem == 0)
    throw InvalidInput("evaluation needs at least one problem and sample");
  std::vector<ToyProblem> problems;
  auto scored = sample_heldout(policy, n_problems, samples_per_problem, seed,
                               min_length, max_length, threads, problems);
  ToyEvaluation ev;
  ev.problems = n_problems;
  ev.samples_per_problem = samples_per_problem;
  eval::SampleSet set;
  double crit = 0.0;
  double format = 0.0;
  for (std::size_t i = 0; i < n_problems; ++i) {
    eval::ProblemSamples ps;
    ps.problem_id = "heldout-" + std::to_string(i);
    ps.gold = CanonicalAnswer::integer(problems[i].answer);
    for (ScoredSample& s : scored[i]) {
      crit += s.r_crit;
      format += s.r_format;
      ps.samples.push_back(std::move(s.sample));
    }
    set.push_back(std::move(ps));
  }
  const double total = static_cast<double>(n_problems * samples_per_problem);
  ev.pass_at_1 = eval::pass_at_n(set, 1);
  if (samples_per_problem >= 8) ev.pass_at_8 = eval::pass_at_n(set, 8);
  ev.critique_consistency = crit / total;
  ev.format_reward = format / total;
  ev.answer = eval::answer_critique_metrics(set);
  ev.process = eval::process_critique_metrics(set);
  return ev;
}

}  // namespace stc::toy
