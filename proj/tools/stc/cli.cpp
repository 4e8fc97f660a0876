#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "options.hpp"
#include "output.hpp"
#include "stc/data_pipeline.hpp"
#include "stc/eval.hpp"
#include "stc/grpo.hpp"
#include "stc/io.hpp"
#include "stc/toy_env.hpp"

namespace stc::cli {
namespace {

namespace fs = std::filesystem;
using io::Json;

struct Globals {
  std::uint64_t seed = 0;
  std::string output_format = "jsonl";
  unsigned threads = 0;
  std::string config;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open input file '" + path + "'");
  return in;
}

std::string read_file(const std::string& path) {
  std::ifstream in = open_input(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<Json> read_records(const std::string& path) {
  std::ifstream in = open_input(path);
  try {
    return io::read_jsonl_strict(in);
  } catch (const InvalidInput& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write output file '" + path + "'");
  return out;
}

// Record streams go to --output as JSONL when given, else to stdout in the
// selected format.
void emit_records(std::ostream& out, Format format, const std::string& output,
                  const std::vector<Json>& records) {
  if (output.empty()) {
    print_records(out, format, records);
    return;
  }
  std::ofstream file = open_output(output);
  for (const Json& r : records) file << io::dump_line(r) << '\n';
  if (!file) throw Error("failed writing '" + output + "'");
  print_object(out, format, Json{{"records", records.size()}, {"output", output}});
}

RenderMode parse_mode(const std::string& m) {
  if (m == "full") return RenderMode::Full;
  if (m == "compact") return RenderMode::Compact;
  throw UsageError("mode must be 'full' or 'compact', not '" + m + "'");
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// ---- parse ---------------------------------------------------------------

struct ParseArgs {
  std::string input;
  std::string output;
  std::string mode = "full";
};

int cmd_parse(const ParseArgs& a, Format format, std::ostream& out) {
  const RenderMode mode = parse_mode(a.mode);
  std::vector<Json> records;
  std::size_t line = 0;
  for (const Json& j : read_records(a.input)) {
    ++line;
    try {
      const io::TraceRecord rec = io::trace_from_json(j);
      const ParsedTrajectory t = parse_trace(rec.text);
      Json r;
      r["problem_id"] = rec.problem_id;
      if (rec.gold_answer) r["gold_answer"] = *rec.gold_answer;
      r.update(io::trajectory_to_json(t));
      r["mode"] = a.mode;
      r["rendered"] = render(t, mode);
      records.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(a.input + ": record " + std::to_string(line) + ": " +
                  e.what());
    }
  }
  emit_records(out, format, a.output, records);
  return kExitOk;
}

// ---- verify --------------------------------------------------------------

struct VerifyArgs {
  std::string pred;
  std::string gold;
};

int cmd_verify(const VerifyArgs& a, Format format, std::ostream& out) {
  const CanonicalAnswer pred = canonicalize(trim(read_file(a.pred)));
  const CanonicalAnswer gold = canonicalize(trim(read_file(a.gold)));
  const bool equal = answers_equal(pred, gold);
  print_object(out, format,
               Json{{"equal", equal},
                    {"pred", io::answer_to_json(pred)},
                    {"gold", io::answer_to_json(gold)}});
  return equal ? kExitOk : kExitDomainError;
}

// ---- reward --------------------------------------------------------------

struct RewardArgs {
  std::string input;
  std::string gold;
  std::string output;
};

int cmd_reward(const RewardArgs& a, Format format, std::ostream& out) {
  sft::GoldTable gold;
  if (!a.gold.empty()) gold = io::gold_from_jsonl(read_records(a.gold));
  std::vector<Json> records;
  std::size_t line = 0;
  for (const Json& j : read_records(a.input)) {
    ++line;
    try {
      const io::TraceRecord rec = io::trace_from_json(j);
      std::optional<std::string> g = rec.gold_answer;
      if (auto it = gold.find(rec.problem_id); it != gold.end())
        g = it->second.gold_answer;
      if (!g)
        throw InvalidInput("no gold answer for problem '" + rec.problem_id +
                           "'");
      const ParsedTrajectory t = parse_trace(rec.text);
      Json r;
      r["problem_id"] = rec.problem_id;
      r.update(io::rewards_to_json(compute_rewards(t, canonicalize(*g))));
      records.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(a.input + ": record " + std::to_string(line) + ": " +
                  e.what());
    }
  }
  emit_records(out, format, a.output, records);
  return kExitOk;
}

// ---- advantage / objective -----------------------------------------------

struct WeightArgs {
  AdvantageWeights weights;
  std::size_t group_size = 0;
};

std::vector<GroupBatch> read_batches(const std::string& path,
                                     std::size_t group_size) {
  std::vector<GroupBatch> batches;
  std::size_t line = 0;
  for (const Json& j : read_records(path)) {
    ++line;
    try {
      GroupBatch b = io::group_from_json(j);
      b.validate();
      if (group_size && b.size() != group_size)
        throw InvalidInput("group has " + std::to_string(b.size()) +
                           " trajectories, expected group_size " +
                           std::to_string(group_size));
      batches.push_back(std::move(b));
    } catch (const Error& e) {
      throw Error(path + ": record " + std::to_string(line) + ": " + e.what());
    }
  }
  return batches;
}

struct AdvantageArgs {
  std::string input;
  std::string weights_file;
  std::string output;
};

int cmd_advantage(const AdvantageArgs& a, const WeightArgs& w, Format format,
                  std::ostream& out) {
  w.weights.validate();
  std::vector<Json> records;
  for (const GroupBatch& b : read_batches(a.input, w.group_size)) {
    const AdvantageField field = total_field(b, w.weights);
    Json r;
    r["problem_id"] = b.problem_id;
    r["group_size"] = b.size();
    r["weights"] = io::weights_to_json(w.weights);
    Json rewards = Json::array();
    for (const GroupMember& m : b.members)
      rewards.push_back(io::rewards_to_json(m.rewards));
    r["rewards"] = std::move(rewards);
    Json adv = Json::array();
    for (const TrajectoryAdvantage& t : field.trajectories)
      adv.push_back(io::advantage_to_json(t));
    r["advantages"] = std::move(adv);
    records.push_back(std::move(r));
  }
  emit_records(out, format, a.output, records);
  return kExitOk;
}

struct ObjectiveArgs {
  std::string batch;
  std::string logprobs;
  std::string output;
  ClipConfig clip;
};

int cmd_objective(const ObjectiveArgs& a, const WeightArgs& w, Format format,
                  std::ostream& out) {
  w.weights.validate();
  a.clip.validate();
  const std::vector<GroupBatch> batches = read_batches(a.batch, w.group_size);
  const std::vector<Json> lp_records = read_records(a.logprobs);
  if (lp_records.size() != batches.size())
    throw InvalidInput("batch file has " + std::to_string(batches.size()) +
                       " groups but the log-probability file has " +
                       std::to_string(lp_records.size()));
  std::vector<Json> records;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const GroupBatch& b = batches[i];
    const Json& lj = lp_records[i];
    if (auto id = lj.find("problem_id");
        id != lj.end() && (!id->is_string() || *id != b.problem_id))
      throw InvalidInput("log-probability record " + std::to_string(i + 1) +
                         " does not match problem '" + b.problem_id + "'");
    const auto list = lj.find("logprobs");
    if (list == lj.end() || !list->is_array())
      throw InvalidInput("log-probability record " + std::to_string(i + 1) +
                         " needs a 'logprobs' array");
    std::vector<PolicyLogprobs> lps;
    for (const Json& x : *list) lps.push_back(io::logprobs_from_json(x));
    const ObjectiveResult res =
        grpo_objective(b, total_field(b, w.weights), lps, a.clip);
    Json r;
    r["problem_id"] = b.problem_id;
    r["objective"] = res.objective;
    r["coefficients"] = res.gradient;
    records.push_back(std::move(r));
  }
  emit_records(out, format, a.output, records);
  return kExitOk;
}

// ---- train-toy -----------------------------------------------------------

struct TrainArgs {
  toy::TrainRunConfig cfg;
  std::string mode = "full";
  std::string out;
  std::size_t snapshot_every = 500;
  std::size_t log_every = 0;
};

std::string snapshot_name(std::size_t iterations) {
  std::ostringstream s;
  s << "policy_" << std::setw(6) << std::setfill('0') << iterations << ".json";
  return s.str();
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream f = open_output(path.string());
  f << j.dump(2) << '\n';
  if (!f) throw Error("failed writing '" + path.string() + "'");
}

int cmd_train(TrainArgs a, const Globals& g, Format format, std::ostream& out,
              std::ostream& err) {
  a.cfg.mode = parse_mode(a.mode);
  a.cfg.seed = g.seed;
  a.cfg.threads = g.threads;
  a.cfg.validate();

  const fs::path dir(a.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create run directory '" + a.out + "'");

  const toy::TrainRunConfig& c = a.cfg;
  Json resolved{{"seed", c.seed},
                {"group_size", c.group_size},
                {"lambda_crit", c.weights.lambda_crit},
                {"lambda_reason", c.weights.lambda_reason},
                {"lambda_format", c.weights.lambda_format},
                {"lambda_dense", c.weights.lambda_dense},
                {"epsilon", c.clip.epsilon},
                {"beta", c.clip.beta},
                {"learning_rate", c.learning_rate},
                {"iterations", c.iterations},
                {"min_length", c.min_length},
                {"max_length", c.max_length},
                {"problems_per_iteration", c.problems_per_iteration},
                {"updates_per_batch", c.updates_per_batch},
                {"temperature", c.temperature},
                {"mode", a.mode},
                {"eval_problems", c.eval_problems},
                {"eval_samples", c.eval_samples},
                {"snapshot_every", a.snapshot_every}};
  write_json(dir / "config.json", resolved);

  std::ofstream metrics = open_output((dir / "metrics.jsonl").string());
  const toy::TrainResult result =
      toy::train(c, [&](const toy::IterationMetrics& m, const toy::ToyPolicy& p) {
        metrics << io::dump_line(io::iteration_to_json(m)) << '\n';
        const std::size_t done = m.iteration + 1;
        if (a.snapshot_every && done % a.snapshot_every == 0)
          write_json(dir / snapshot_name(done), io::policy_to_json(p));
        if (a.log_every && done % a.log_every == 0)
          err << "iteration " << done << " accuracy " << m.reasoning_accuracy
              << " consistency " << m.critique_consistency << '\n';
      });
  metrics.close();
  if (!metrics) throw Error("failed writing metrics.jsonl");
  write_json(dir / "policy_final.json", io::policy_to_json(result.policy));
  const Json heldout = io::evaluation_to_json(result.heldout);
  write_json(dir / "heldout.json", heldout);

  Json summary;
  summary["iterations"] = result.history.size();
  if (!result.history.empty())
    summary["final_iteration"] = io::iteration_to_json(result.history.back());
  summary["heldout"] = heldout;
  summary["out"] = a.out;
  print_object(out, format, summary);
  return kExitOk;
}

// ---- eval / select -------------------------------------------------------

struct EvalArgs {
  std::string input;
  std::string policy;
  std::string metrics = "pass@1,pass@8,precision,recall,f1,specificity";
  std::size_t problems = 500;
  std::size_t samples = 8;
  int min_length = 2;
  int max_length = 6;
  std::string dump;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!(item = trim(item)).empty()) out.push_back(item);
  return out;
}

std::size_t metric_k(const std::string& name, std::string_view prefix) {
  const std::string digits = name.substr(prefix.size());
  if (digits.empty() ||
      digits.find_first_not_of("0123456789") != std::string::npos ||
      digits.size() > 6 || std::stoul(digits) == 0)
    throw UsageError("metric '" + name + "' needs a positive count");
  return std::stoul(digits);
}

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json compute_metric(const std::string& name, const eval::SampleSet& set) {
  auto starts = [&](std::string_view p) { return name.rfind(p, 0) == 0; };
  if (starts("pass@")) return eval::pass_at_n(set, metric_k(name, "pass@"));
  if (starts("majority@"))
    return eval::selection_accuracy(set, eval::SelectionMethod::Majority,
                                    metric_k(name, "majority@"));
  if (starts("critique@"))
    return eval::selection_accuracy(set, eval::SelectionMethod::Critique,
                                    metric_k(name, "critique@"));
  const bool process = starts("process_");
  const std::string base = process ? name.substr(8) : name;
  if (base != "precision" && base != "recall" && base != "f1" &&
      base != "specificity" && base != "counts")
    throw UsageError("unknown metric '" + name + "'");
  std::optional<eval::CritiqueMetrics> m;
  if (process)
    m = eval::process_critique_metrics(set);
  else
    m = eval::answer_critique_metrics(set);
  if (!m) return nullptr;
  if (base == "precision") return m->precision;
  if (base == "recall") return m->recall;
  if (base == "f1") return m->f1;
  if (base == "specificity") return optional_number(m->specificity);
  const Json full = io::metrics_to_json(*m);
  return Json{{"tp", full["tp"]}, {"fp", full["fp"]}, {"tn", full["tn"]},
              {"fn", full["fn"]}};
}

int cmd_eval(const EvalArgs& a, const Globals& g, Format format,
             std::ostream& out) {
  if (a.input.empty() == a.policy.empty())
    throw UsageError("eval needs exactly one of --input or --policy");
  const std::vector<std::string> names = split_list(a.metrics);
  if (names.empty()) throw UsageError("--metrics lists no metric");

  eval::SampleSet set;
  if (!a.input.empty()) {
    set = io::samples_from_jsonl(read_records(a.input));
  } else {
    const toy::ToyPolicy policy =
        io::policy_from_json(Json::parse(read_file(a.policy)));
    set = toy::collect_samples(policy, a.problems, a.samples, g.seed,
                               a.min_length, a.max_length, g.threads);
    if (!a.dump.empty()) {
      std::ofstream f = open_output(a.dump);
      for (const auto& p : set)
        for (const auto& s : p.samples)
          f << io::dump_line(io::sample_to_json(p, s)) << '\n';
      if (!f) throw Error("failed writing '" + a.dump + "'");
    }
  }
  if (set.empty()) throw InvalidInput("no samples to evaluate");

  Json result = Json::object();
  for (const std::string& n : names) result[n] = compute_metric(n, set);
  print_object(out, format, result);
  return kExitOk;
}

struct SelectArgs {
  std::string input;
  std::string method = "critique";
  std::size_t k = 0;
};

int cmd_select(const SelectArgs& a, Format format, std::ostream& out) {
  eval::SelectionMethod method;
  if (a.method == "majority")
    method = eval::SelectionMethod::Majority;
  else if (a.method == "critique")
    method = eval::SelectionMethod::Critique;
  else
    throw UsageError("method must be 'majority' or 'critique'");

  const eval::SampleSet set = io::samples_from_jsonl(read_records(a.input));
  if (set.empty()) throw InvalidInput("no samples to select from");
  Json selections = Json::array();
  std::size_t correct = 0;
  for (const eval::ProblemSamples& p : set) {
    const std::size_t k = a.k ? a.k : p.samples.size();
    if (p.samples.size() < k)
      throw InvalidInput("problem '" + p.problem_id + "' has fewer than k = " +
                         std::to_string(k) + " samples");
    const auto first = std::span<const eval::Sample>(p.samples).first(k);
    Json s;
    s["problem_id"] = p.problem_id;
    try {
      const CanonicalAnswer pick = method == eval::SelectionMethod::Majority
                                       ? eval::majority_vote(first)
                                       : eval::best_of_k_critique(first);
      const bool ok = answers_equal(pick, p.gold);
      correct += ok;
      s["selected"] = pick.render();
      s["correct"] = ok;
    } catch (const InvalidInput&) {
      s["selected"] = nullptr;
      s["correct"] = false;
    }
    selections.push_back(std::move(s));
  }
  Json result;
  result["method"] = a.method;
  result["k"] = a.k;
  result["problems"] = set.size();
  result["accuracy"] =
      static_cast<double>(correct) / static_cast<double>(set.size());
  result["selections"] = std::move(selections);
  print_object(out, format, result);
  return kExitOk;
}

// ---- synth-sft -----------------------------------------------------------

struct SynthArgs {
  std::string traces;
  std::string annotations;
  std::string provider;
  std::string gold;
  std::string out;
  std::string report;
};

int cmd_synth(const SynthArgs& a, Format format, std::ostream& out) {
  if (a.annotations.empty() == a.provider.empty())
    throw UsageError(
        "synth-sft needs exactly one of --annotations or --provider");
  sft::GoldTable gold;
  if (!a.gold.empty()) gold = io::gold_from_jsonl(read_records(a.gold));
  const std::string spec =
      a.annotations.empty() ? a.provider : "file:" + a.annotations;
  if (!a.annotations.empty()) open_input(a.annotations);
  const auto provider = sft::make_provider(spec, gold);

  std::ifstream traces = open_input(a.traces);
  std::ofstream corpus = open_output(a.out);
  const sft::CorpusReport report =
      sft::build_corpus(traces, *provider, gold, corpus);
  corpus.close();
  if (!corpus) throw Error("failed writing '" + a.out + "'");
  const Json rj = io::report_to_json(report);
  if (!a.report.empty()) write_json(a.report, rj);
  print_object(out, format, rj);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Stepwise think-critique toolkit: trajectory parsing, "
               "rewards, advantages, GRPO objective, toy RL training, "
               "evaluation and SFT corpus synthesis.",
               "stc"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Registry reg;
  Globals g;
  reg.add(&app, "seed", g.seed, "Seed for every stochastic output");
  reg.add(&app, "output_format", g.output_format,
          "Format of results on stdout: json, jsonl or table");
  reg.add(&app, "threads", g.threads,
          "Worker threads (0 = machine parallelism)");
  app.add_option("--config", g.config,
                 "JSON file whose keys mirror the long flags; flags win");

  ParseArgs parse_args;
  auto* parse = app.add_subcommand("parse", "Parse trace records (JSONL)");
  parse->add_option("--input", parse_args.input, "Trace records")->required();
  parse->add_option("--output", parse_args.output, "Parsed records (JSONL)");
  reg.add(parse, "mode", parse_args.mode, "Rendering mode: full or compact");

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand(
      "verify", "Check answer equivalence; exits 0 when equal, 1 otherwise");
  verify->add_option("--pred", verify_args.pred, "File holding the answer")
      ->required();
  verify->add_option("--gold", verify_args.gold, "File holding the reference")
      ->required();

  RewardArgs reward_args;
  auto* reward = app.add_subcommand("reward", "Score parsed trajectories");
  reward->add_option("--input", reward_args.input, "Parsed or trace records")
      ->required();
  reward->add_option("--gold", reward_args.gold,
                     "Gold records {problem_id, gold_answer} (JSONL)");
  reward->add_option("--output", reward_args.output, "Reward records (JSONL)");

  WeightArgs weights;
  auto add_weights = [&](CLI::App* sub) {
    reg.add(sub, "lambda_crit", weights.weights.lambda_crit,
            "Weight of the critique-consistency advantage");
    reg.add(sub, "lambda_reason", weights.weights.lambda_reason,
            "Weight of the reasoning advantage");
    reg.add(sub, "lambda_format", weights.weights.lambda_format,
            "Weight of the format advantage");
    reg.add(sub, "lambda_dense", weights.weights.lambda_dense,
            "Weight of the dense step advantage");
    reg.add(sub, "group_size", weights.group_size,
            "Required trajectories per group (0 = any, at least 2)");
  };

  AdvantageArgs adv_args;
  auto* advantage =
      app.add_subcommand("advantage", "Token-level advantages of group batches");
  advantage->add_option("--input", adv_args.input, "Group batch records")
      ->required();
  advantage->add_option("--weights", adv_args.weights_file,
                        "Config file with lambda_* and group_size keys");
  advantage->add_option("--output", adv_args.output,
                        "Advantage records (JSONL)");
  add_weights(advantage);

  ObjectiveArgs obj_args;
  auto* objective = app.add_subcommand(
      "objective", "GRPO objective and per-token gradient coefficients");
  objective->add_option("--batch", obj_args.batch, "Group batch records")
      ->required();
  objective->add_option("--logprobs", obj_args.logprobs,
                        "Per-group {problem_id, logprobs: [...]} records")
      ->required();
  objective->add_option("--output", obj_args.output,
                        "Objective records (JSONL)");
  reg.add(objective, "epsilon", obj_args.clip.epsilon, "Clip range");
  reg.add(objective, "beta", obj_args.clip.beta, "KL penalty weight");
  add_weights(objective);

  TrainArgs train_args;
  auto& tc = train_args.cfg;
  auto* train =
      app.add_subcommand("train-toy", "Train the toy policy with group-relative policy optimization");
  train->add_option("--out", train_args.out, "Run directory")->required();
  reg.add(train, "group_size", tc.group_size, "Trajectories per problem (G)");
  reg.add(train, "lambda_crit", tc.weights.lambda_crit,
          "Weight of the critique-consistency advantage");
  reg.add(train, "lambda_reason", tc.weights.lambda_reason,
          "Weight of the reasoning advantage");
  reg.add(train, "lambda_format", tc.weights.lambda_format,
          "Weight of the format advantage");
  reg.add(train, "lambda_dense", tc.weights.lambda_dense,
          "Weight of the dense step advantage");
  reg.add(train, "epsilon", tc.clip.epsilon, "Clip range");
  reg.add(train, "beta", tc.clip.beta, "KL penalty weight");
  reg.add(train, "learning_rate", tc.learning_rate,
          "Gradient ascent step on the logits");
  reg.add(train, "iterations", tc.iterations, "Training iterations");
  reg.add(train, "min_length", tc.min_length, "Shortest operation chain");
  reg.add(train, "max_length", tc.max_length, "Longest operation chain");
  reg.add(train, "problems_per_iteration", tc.problems_per_iteration,
          "Problems sampled per iteration");
  reg.add(train, "updates_per_batch", tc.updates_per_batch,
          "Gradient steps per sampled batch");
  reg.add(train, "temperature", tc.temperature, "Sampling temperature");
  reg.add(train, "mode", train_args.mode, "Trajectory mode: full or compact");
  reg.add(train, "eval_problems", tc.eval_problems, "Held-out problems");
  reg.add(train, "eval_samples", tc.eval_samples,
          "Samples per held-out problem");
  reg.add(train, "snapshot_every", train_args.snapshot_every,
          "Iterations between policy snapshots (0 = final only)");
  reg.add(train, "log_every", train_args.log_every,
          "Iterations between progress lines on stderr (0 = silent)");

  EvalArgs eval_args;
  auto* evaluate = app.add_subcommand(
      "eval", "Metrics over sample records or a toy policy snapshot");
  evaluate->add_option("--input", eval_args.input, "Sample records (JSONL)");
  evaluate->add_option("--policy", eval_args.policy,
                       "Toy policy snapshot to sample held-out problems from");
  reg.add(evaluate, "metrics", eval_args.metrics,
          "Comma-separated: pass@N, majority@K, critique@K, precision, "
          "recall, f1, specificity, counts, process_<metric>");
  reg.add(evaluate, "problems", eval_args.problems,
          "Held-out problems (with --policy)");
  reg.add(evaluate, "samples", eval_args.samples,
          "Samples per problem (with --policy)");
  reg.add(evaluate, "min_length", eval_args.min_length,
          "Shortest chain (with --policy)");
  reg.add(evaluate, "max_length", eval_args.max_length,
          "Longest chain (with --policy)");
  evaluate->add_option("--dump", eval_args.dump,
                       "Write the sampled records here (with --policy)");

  SelectArgs select_args;
  auto* select = app.add_subcommand("select", "Test-time answer selection");
  select->add_option("--input", select_args.input, "Sample records (JSONL)")
      ->required();
  reg.add(select, "method", select_args.method, "majority or critique");
  reg.add(select, "k", select_args.k,
          "Samples considered per problem (0 = all)");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand(
      "synth-sft", "Merge traces with critiques and keep verified ones");
  synth->add_option("--traces", synth_args.traces, "Trace records (JSONL)")
      ->required();
  synth->add_option("--annotations", synth_args.annotations,
                    "Annotation records (JSONL)");
  reg.add(synth, "provider", synth_args.provider,
          "Critique provider: stub:, exec:<command> or http://host:port/path");
  synth->add_option("--gold", synth_args.gold,
                    "Gold records {problem_id, gold_answer, "
                    "gold_intermediates?} (JSONL)");
  synth->add_option("--out", synth_args.out, "Corpus output (JSONL)")
      ->required();
  synth->add_option("--report", synth_args.report, "Report output (JSON)");

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "stc: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsageError;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    std::string config_path = g.config;
    if (sub == advantage && !adv_args.weights_file.empty()) {
      if (!config_path.empty())
        throw UsageError("give either --config or --weights, not both");
      config_path = adv_args.weights_file;
    }
    if (!config_path.empty()) {
      Json config;
      try {
        config = Json::parse(read_file(config_path));
      } catch (const Json::parse_error& e) {
        throw UsageError("config file '" + config_path +
                         "' is not valid JSON: " + e.what());
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      reg.apply(config, &app, sub);
    }
    const Format format = parse_format(g.output_format);

    if (sub == parse) return cmd_parse(parse_args, format, out);
    if (sub == verify) return cmd_verify(verify_args, format, out);
    if (sub == reward) return cmd_reward(reward_args, format, out);
    if (sub == advantage) return cmd_advantage(adv_args, weights, format, out);
    if (sub == objective) return cmd_objective(obj_args, weights, format, out);
    if (sub == train) return cmd_train(train_args, g, format, out, err);
    if (sub == evaluate) return cmd_eval(eval_args, g, format, out);
    if (sub == select) return cmd_select(select_args, format, out);
    if (sub == synth) return cmd_synth(synth_args, format, out);
    throw UsageError("unknown subcommand");
  } catch (const UsageError& e) {
    err << "stc " << sub->get_name() << ": " << e.what() << "\n\n"
        << sub->help();
    return kExitUsageError;
  } catch (const Error& e) {
    err << "stc " << sub->get_name() << ": " << e.what() << '\n';
    return kExitDomainError;
  } catch (const Json::exception& e) {
    err << "stc " << sub->get_name() << ": " << e.what() << '\n';
    return kExitDomainError;
  }
}

}  // namespace stc::cli
