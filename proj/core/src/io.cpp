#include "stc/io.hpp"

#include <algorithm>
#include <istream>
#include <unordered_map>

#include "stc/utf8.hpp"

namespace stc::io {
namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) throw InvalidInput("expected a JSON object");
  const auto it = j.find(key);
  if (it == j.end()) throw InvalidInput(std::string("missing field '") + key + "'");
  return *it;
}

const Json* optional_field(const Json& j, const char* key) {
  if (!j.is_object()) throw InvalidInput("expected a JSON object");
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

std::string string_field(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_string())
    throw InvalidInput(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const Json& j, const char* key) {
  const Json* v = optional_field(j, key);
  if (!v) return std::nullopt;
  if (!v->is_string())
    throw InvalidInput(std::string("field '") + key + "' must be a string");
  return v->get<std::string>();
}

std::vector<double> doubles(const Json& j, const char* what) {
  if (!j.is_array()) throw InvalidInput(std::string(what) + " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const Json& x : j) {
    if (!x.is_number())
      throw InvalidInput(std::string(what) + " must contain numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

// Integer-valued JSON number, else nullopt.
std::optional<long long> as_integer(const Json& j) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (d == static_cast<double>(static_cast<long long>(d)))
      return static_cast<long long>(d);
  }
  return std::nullopt;
}

int binary_value(const Json& j, const char* what) {
  const auto v = as_integer(j);
  if (!v || (*v != 0 && *v != 1))
    throw InvalidInput(std::string(what) + " must be 0 or 1");
  return static_cast<int>(*v);
}

std::string answer_text(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw InvalidInput(std::string("field '") + key +
                     "' must be a string or number");
}

const char* mode_name(RenderMode m) {
  return m == RenderMode::Full ? "full" : "compact";
}

}  // namespace

std::string dump_line(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

std::vector<JsonlLine> read_jsonl(std::istream& in) {
  std::vector<JsonlLine> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); }))
      continue;
    JsonlLine entry;
    entry.line_number = number;
    try {
      entry.value = Json::parse(line);
    } catch (const Json::parse_error& e) {
      entry.error = e.what();
    }
    lines.push_back(std::move(entry));
  }
  return lines;
}

std::vector<Json> read_jsonl_strict(std::istream& in) {
  std::vector<Json> out;
  for (JsonlLine& l : read_jsonl(in)) {
    if (!l.value)
      throw InvalidInput("line " + std::to_string(l.line_number) + ": " +
                         l.error);
    out.push_back(std::move(*l.value));
  }
  return out;
}

std::vector<TokenPiece> tokens_from_json(const std::string& raw,
                                         const Json& pieces) {
  if (!pieces.is_array()) throw InvalidInput("tokens must be an array");
  const std::vector<std::size_t> cp = utf8::boundaries(raw);
  const std::size_t count = cp.size() - 1;
  std::vector<TokenPiece> tokens;
  tokens.reserve(pieces.size());
  for (const Json& p : pieces) {
    if (!p.is_array() || p.size() != 3 || !p[0].is_string())
      throw InvalidInput("each token must be [text, start, end]");
    const auto b = as_integer(p[1]);
    const auto e = as_integer(p[2]);
    if (!b || !e || *b < 0 || *e < *b || static_cast<std::size_t>(*e) > count)
      throw InvalidInput("token offsets out of range");
    tokens.push_back({p[0].get<std::string>(), cp[static_cast<std::size_t>(*b)],
                      cp[static_cast<std::size_t>(*e)]});
  }
  validate_tokens(raw, tokens);
  return tokens;
}

Json tokens_to_json(const std::string& raw,
                    const std::vector<TokenPiece>& tokens) {
  const std::vector<std::size_t> cp = utf8::boundaries(raw);
  auto index = [&](std::size_t byte) {
    const auto it = std::lower_bound(cp.begin(), cp.end(), byte);
    if (it == cp.end() || *it != byte)
      throw InvalidInput("token boundary inside a code point");
    return static_cast<std::size_t>(it - cp.begin());
  };
  Json out = Json::array();
  for (const TokenPiece& t : tokens)
    out.push_back(Json::array({t.text, index(t.begin), index(t.end)}));
  return out;
}

TraceRecord trace_from_json(const Json& j) {
  TraceRecord r;
  r.problem_id = string_field(j, "problem_id");
  r.text.raw = string_field(j, "text");
  if (const Json* t = optional_field(j, "tokens"))
    r.text.tokens = tokens_from_json(r.text.raw, *t);
  if (optional_field(j, "gold_answer")) r.gold_answer = answer_text(j, "gold_answer");
  r.problem = optional_string(j, "problem");
  return r;
}

Json trace_to_json(const TraceRecord& record) {
  Json j;
  j["problem_id"] = record.problem_id;
  j["text"] = record.text.raw;
  if (!record.text.tokens.empty())
    j["tokens"] = tokens_to_json(record.text.raw, record.text.tokens);
  if (record.gold_answer) j["gold_answer"] = *record.gold_answer;
  if (record.problem) j["problem"] = *record.problem;
  return j;
}

Json critique_to_json(const Critique& c) {
  Json j;
  j["justification"] = c.justification;
  if (c.score == Score::Malformed)
    j["score"] = nullptr;
  else
    j["score"] = c.score == Score::Correct ? 1 : 0;
  j["valid"] = c.valid;
  return j;
}

Critique critique_from_json(const Json& j) {
  const std::string justification = string_field(j, "justification");
  const Json* s = optional_field(j, "score");
  if (!s) return Critique::make(justification, Score::Malformed);
  return Critique::make(justification, binary_value(*s, "score") == 1
                                           ? Score::Correct
                                           : Score::Incorrect);
}

Json answer_to_json(const std::optional<CanonicalAnswer>& answer) {
  if (!answer) return nullptr;
  Json j;
  j["kind"] = kind_name(answer->kind());
  j["value"] = answer->render();
  return j;
}

Json trajectory_to_json(const ParsedTrajectory& t) {
  Json j;
  const std::string text = render(t, RenderMode::Full);
  j["text"] = text;
  j["step_count"] = t.step_count();
  j["token_count"] = t.token_count();
  j["critique_token_count"] = t.critique_token_count();
  Json steps = Json::array();
  for (const Step& s : t.steps) {
    Json step;
    step["reasoning"] = s.reasoning;
    step["critique"] = s.critique ? critique_to_json(*s.critique) : Json(nullptr);
    steps.push_back(std::move(step));
  }
  j["steps"] = std::move(steps);
  Json validity = Json::array();
  for (bool v : t.validity()) validity.push_back(v ? 1 : 0);
  j["validity"] = std::move(validity);
  j["final_answer_text"] =
      t.final_answer_text ? Json(*t.final_answer_text) : Json(nullptr);
  j["final_answer"] = answer_to_json(t.final_answer);
  j["diagnostics"] = t.diagnostics;
  if (text == [&] {
        std::string raw;
        for (const TokenPiece& p : t.tokens) raw += p.text;
        return raw;
      }())
    j["tokens"] = tokens_to_json(text, t.tokens);
  Json labels = Json::array();
  for (const TokenLabel& l : t.token_labels)
    labels.push_back(Json::array({label_name(l.kind), l.step}));
  j["token_labels"] = std::move(labels);
  return j;
}

ParsedTrajectory trajectory_from_json(const Json& j) {
  TraceText text;
  text.raw = string_field(j, "text");
  if (const Json* t = optional_field(j, "tokens"))
    text.tokens = tokens_from_json(text.raw, *t);
  return parse_trace(text);
}

Json step_scores_to_json(const std::vector<StepScore>& scores) {
  Json j = Json::array();
  for (const StepScore& s : scores) j.push_back(s ? Json(*s) : Json(nullptr));
  return j;
}

std::vector<StepScore> step_scores_from_json(const Json& j) {
  if (!j.is_array()) throw InvalidInput("step_scores must be an array");
  std::vector<StepScore> out;
  for (const Json& x : j)
    out.push_back(x.is_null() ? StepScore{}
                              : StepScore{binary_value(x, "step score")});
  return out;
}

Json rewards_to_json(const RewardBundle& r) {
  Json j;
  j["r_reason"] = r.r_reason;
  j["z"] = r.z;
  j["r_crit"] = r.r_crit;
  j["r_format"] = r.r_format;
  j["step_scores"] = step_scores_to_json(r.step_scores);
  return j;
}

RewardBundle rewards_from_json(const Json& j) {
  RewardBundle r;
  r.r_reason = binary_value(field(j, "r_reason"), "r_reason");
  r.z = binary_value(field(j, "z"), "z");
  r.r_crit = binary_value(field(j, "r_crit"), "r_crit");
  const Json& f = field(j, "r_format");
  if (!f.is_number()) throw InvalidInput("r_format must be a number");
  r.r_format = f.get<double>();
  r.step_scores = step_scores_from_json(field(j, "step_scores"));
  return r;
}

Json advantage_to_json(const TrajectoryAdvantage& a) {
  Json j;
  j["crit_ratio"] = a.crit_ratio;
  j["reasoning"] = a.reasoning;
  j["format"] = a.format;
  j["critique"] = a.critique;
  j["step_dense"] = a.step_dense;
  j["dense"] = a.dense;
  j["combined"] = a.combined;
  j["total"] = a.total;
  return j;
}

Json weights_to_json(const AdvantageWeights& w) {
  Json j;
  j["lambda_crit"] = w.lambda_crit;
  j["lambda_reason"] = w.lambda_reason;
  j["lambda_format"] = w.lambda_format;
  j["lambda_dense"] = w.lambda_dense;
  return j;
}

PolicyLogprobs logprobs_from_json(const Json& j) {
  PolicyLogprobs lp;
  lp.current = doubles(field(j, "current"), "current");
  const Json* b = optional_field(j, "behavior");
  lp.behavior = b ? doubles(*b, "behavior") : lp.current;
  const Json* r = optional_field(j, "reference");
  lp.reference = r ? doubles(*r, "reference") : lp.current;
  return lp;
}

Json logprobs_to_json(const PolicyLogprobs& lp) {
  Json j;
  j["current"] = lp.current;
  j["behavior"] = lp.behavior;
  j["reference"] = lp.reference;
  return j;
}

Json metrics_to_json(const eval::CritiqueMetrics& m) {
  Json j;
  j["tp"] = m.counts.tp;
  j["fp"] = m.counts.fp;
  j["tn"] = m.counts.tn;
  j["fn"] = m.counts.fn;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["specificity"] = m.specificity ? Json(*m.specificity) : Json(nullptr);
  return j;
}

eval::SampleSet samples_from_jsonl(const std::vector<Json>& records) {
  eval::SampleSet set;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> gold_texts;
  for (const Json& j : records) {
    const std::string id = string_field(j, "problem_id");
    const std::string gold = answer_text(j, "gold_answer");
    auto [it, fresh] = index.try_emplace(id, set.size());
    if (fresh) {
      set.push_back({id, canonicalize(gold), {}});
      gold_texts.push_back(gold);
    } else if (gold_texts[it->second] != gold &&
               !answers_equal(canonicalize(gold), set[it->second].gold)) {
      throw InvalidInput("conflicting gold answers for problem '" + id + "'");
    }
    eval::Sample s;
    if (optional_field(j, "answer")) {
      const std::string a = answer_text(j, "answer");
      if (a.find_first_not_of(" \t\r\n") != std::string::npos)
        s.answer = canonicalize(a);
    }
    if (const Json* f = optional_field(j, "final_score"))
      s.final_score = binary_value(*f, "final_score");
    if (const Json* ss = optional_field(j, "step_scores"))
      s.step_scores = step_scores_from_json(*ss);
    if (const Json* g = optional_field(j, "gold_step_labels")) {
      if (!g->is_array()) throw InvalidInput("gold_step_labels must be an array");
      for (const Json& x : *g)
        s.gold_step_labels.push_back(binary_value(x, "gold step label"));
    }
    set[it->second].samples.push_back(std::move(s));
  }
  return set;
}

Json sample_to_json(const eval::ProblemSamples& problem,
                    const eval::Sample& sample) {
  Json j;
  j["problem_id"] = problem.problem_id;
  j["answer"] = sample.answer ? Json(sample.answer->render()) : Json(nullptr);
  j["final_score"] =
      sample.final_score ? Json(*sample.final_score) : Json(nullptr);
  j["step_scores"] = step_scores_to_json(sample.step_scores);
  j["gold_answer"] = problem.gold.render();
  if (!sample.gold_step_labels.empty())
    j["gold_step_labels"] = sample.gold_step_labels;
  return j;
}

GroupBatch group_from_json(const Json& j) {
  const std::string id = string_field(j, "problem_id");
  const CanonicalAnswer gold = canonicalize(answer_text(j, "gold_answer"));
  const Json& list = field(j, "trajectories");
  if (!list.is_array()) throw InvalidInput("trajectories must be an array");
  std::vector<ParsedTrajectory> parsed;
  for (const Json& t : list)
    parsed.push_back(t.is_string() ? parse_trace(t.get<std::string>())
                                   : trajectory_from_json(t));
  return make_group(id, std::move(parsed), gold);
}

Json annotation_to_json(const sft::CritiqueAnnotation& a) {
  Json j;
  j["problem_id"] = a.problem_id;
  Json steps = Json::array();
  for (const sft::StepCritique& s : a.steps)
    steps.push_back(Json{{"justification", s.justification}, {"score", s.score}});
  j["steps"] = std::move(steps);
  return j;
}

sft::CritiqueAnnotation annotation_from_json(const Json& j) {
  sft::CritiqueAnnotation a;
  a.problem_id = optional_string(j, "problem_id").value_or("");
  const Json& steps = field(j, "steps");
  if (!steps.is_array()) throw InvalidInput("steps must be an array");
  for (const Json& s : steps) {
    sft::StepCritique c;
    c.justification = string_field(s, "justification");
    // Out-of-range scores are kept so the merge can reject them by reason.
    const Json& score = field(s, "score");
    if (score.is_boolean())
      c.score = score.get<bool>() ? 1 : 0;
    else if (const auto v = as_integer(score); v && *v >= -1 && *v <= 1)
      c.score = static_cast<int>(*v);
    else
      c.score = -1;
    a.steps.push_back(std::move(c));
  }
  return a;
}

Json request_to_json(const sft::CritiqueRequest& r) {
  Json j;
  j["problem_id"] = r.problem_id;
  j["problem"] = r.problem;
  j["steps"] = r.steps;
  return j;
}

sft::GoldTable gold_from_jsonl(const std::vector<Json>& records) {
  sft::GoldTable table;
  for (const Json& j : records) {
    sft::GoldRecord g;
    const std::string id = string_field(j, "problem_id");
    g.gold_answer = answer_text(j, "gold_answer");
    if (const Json* im = optional_field(j, "gold_intermediates")) {
      if (!im->is_array())
        throw InvalidInput("gold_intermediates must be an array");
      for (const Json& x : *im) {
        if (x.is_string())
          g.gold_intermediates.push_back(x.get<std::string>());
        else if (x.is_number())
          g.gold_intermediates.push_back(x.dump());
        else
          throw InvalidInput("gold_intermediates must hold strings or numbers");
      }
    }
    if (!table.emplace(id, std::move(g)).second)
      throw InvalidInput("duplicate gold record for problem '" + id + "'");
  }
  return table;
}

Json report_to_json(const sft::CorpusReport& report) {
  Json j;
  j["input"] = report.input;
  j["kept"] = report.kept;
  j["discarded_total"] = report.discarded_total();
  Json by_reason = Json::object();
  for (const auto& [reason, count] : report.discarded) by_reason[reason] = count;
  j["discarded"] = std::move(by_reason);
  return j;
}

Json policy_to_json(const toy::ToyPolicy& policy) {
  Json j;
  j["format"] = "stc-toy-policy";
  j["version"] = 1;
  j["temperature"] = policy.temperature;
  j["mode"] = mode_name(policy.mode);
  j["answer_slots"] = toy::ToyPolicy::kAnswerSlots;
  j["answer_choices"] = toy::ToyPolicy::kAnswerChoices;
  j["critique_slots"] = toy::ToyPolicy::kCritiqueSlots;
  j["critique_choices"] = toy::ToyPolicy::kCritiqueChoices;
  j["parameters"] = policy.parameters();
  return j;
}

toy::ToyPolicy policy_from_json(const Json& j) {
  if (string_field(j, "format") != "stc-toy-policy")
    throw InvalidInput("not a toy policy snapshot");
  toy::ToyPolicy p;
  const Json& t = field(j, "temperature");
  if (!t.is_number()) throw InvalidInput("temperature must be a number");
  p.temperature = t.get<double>();
  const std::string mode = string_field(j, "mode");
  if (mode == "full")
    p.mode = RenderMode::Full;
  else if (mode == "compact")
    p.mode = RenderMode::Compact;
  else
    throw InvalidInput("mode must be 'full' or 'compact'");
  std::vector<double> params = doubles(field(j, "parameters"), "parameters");
  if (params.size() != toy::ToyPolicy::kParameterCount)
    throw InvalidInput("expected " +
                       std::to_string(toy::ToyPolicy::kParameterCount) +
                       " parameters");
  p.parameters() = std::move(params);
  return p;
}

Json iteration_to_json(const toy::IterationMetrics& m) {
  Json j;
  j["iteration"] = m.iteration;
  j["reasoning_accuracy"] = m.reasoning_accuracy;
  j["critique_consistency"] = m.critique_consistency;
  j["format_reward"] = m.format_reward;
  j["objective"] = m.objective;
  return j;
}

Json evaluation_to_json(const toy::ToyEvaluation& e) {
  Json j;
  j["problems"] = e.problems;
  j["samples_per_problem"] = e.samples_per_problem;
  j["pass@1"] = e.pass_at_1;
  j["pass@8"] = e.pass_at_8 ? Json(*e.pass_at_8) : Json(nullptr);
  j["critique_consistency"] = e.critique_consistency;
  j["format_reward"] = e.format_reward;
  j["answer_critique"] = metrics_to_json(e.answer);
  j["process_critique"] = e.process ? metrics_to_json(*e.process) : Json(nullptr);
  return j;
}

Json problem_to_json(const toy::ToyProblem& p) {
  Json j;
  j["seed"] = p.seed;
  j["initial"] = p.initial;
  Json chain = Json::array();
  for (const toy::Link& l : p.chain)
    chain.push_back(Json::array({std::string(1, toy::op_symbol(l.op)), l.operand}));
  j["chain"] = std::move(chain);
  j["intermediates"] = p.intermediates;
  j["answer"] = p.answer;
  j["statement"] = p.statement();
  return j;
}

}  // namespace stc::io
