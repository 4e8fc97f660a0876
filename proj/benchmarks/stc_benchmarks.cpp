#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "stc/advantage.hpp"
#include "stc/grpo.hpp"
#include "stc/random.hpp"
#include "stc/toy_env.hpp"

namespace {

using namespace stc;

std::string long_trace(int steps) {
  std::string s;
  for (int n = 0; n < steps; ++n) {
    if (n) s += "\n\n";
    s += "Step " + std::to_string(n) + ": multiply 12 by 7 to get 84, then add 3.";
    if (n + 1 == steps) s += " So the answer is \\boxed{87}.";
    s += " <critic>The arithmetic checks out.</critic> <score>" + std::to_string(n % 2) +
         "</score>";
  }
  return s;
}

GroupBatch sample_group(std::size_t G, std::uint64_t seed) {
  toy::ToyPolicy policy;
  Rng rng(seed);
  const toy::Rollout r =
      toy::rollout({policy, policy, policy}, toy::gen_problem(seed, 4, 6), G, rng);
  return r.batch;
}

void BM_ParseTrace(benchmark::State& state) {
  const std::string text = long_trace(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(parse_trace(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseTrace)->Arg(4)->Arg(32)->Arg(256);

void BM_TotalField(benchmark::State& state) {
  const GroupBatch batch = sample_group(static_cast<std::size_t>(state.range(0)), 1);
  const AdvantageWeights w;
  for (auto _ : state) benchmark::DoNotOptimize(total_field(batch, w));
}
BENCHMARK(BM_TotalField)->Arg(4)->Arg(16)->Arg(64);

void BM_Objective(benchmark::State& state) {
  const std::size_t G = static_cast<std::size_t>(state.range(0));
  toy::ToyPolicy policy;
  Rng rng(2);
  const toy::Rollout r =
      toy::rollout({policy, policy, policy}, toy::gen_problem(2, 4, 6), G, rng);
  const AdvantageField field = total_field(r.batch, {});
  for (auto _ : state)
    benchmark::DoNotOptimize(grpo_objective(r.batch, field, r.logprobs, ClipConfig{}));
}
BENCHMARK(BM_Objective)->Arg(4)->Arg(16)->Arg(64);

void BM_ToyRollout(benchmark::State& state) {
  const std::size_t G = static_cast<std::size_t>(state.range(0));
  toy::ToyPolicy policy;
  const toy::ToyProblem problem = toy::gen_problem(3, 2, 6);
  Rng rng(3);
  for (auto _ : state)
    benchmark::DoNotOptimize(toy::rollout({policy, policy, policy}, problem, G, rng));
}
BENCHMARK(BM_ToyRollout)->Arg(16);

void BM_TrainIteration(benchmark::State& state) {
  toy::TrainRunConfig cfg;
  cfg.iterations = 10;
  cfg.eval_problems = 1;
  cfg.eval_samples = 1;
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(toy::train(cfg));
}
BENCHMARK(BM_TrainIteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
