#pragma once

// JSON codecs for the on-disk record formats.

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stc/advantage.hpp"
#include "stc/data_pipeline.hpp"
#include "stc/eval.hpp"
#include "stc/grpo.hpp"
#include "stc/rewards.hpp"
#include "stc/toy_env.hpp"
#include "stc/trajectory.hpp"

namespace stc::io {

using Json = nlohmann::ordered_json;

// Compact single-line serialization; invalid UTF-8 is replaced rather than
// rejected.
std::string dump_line(const Json& j);

// Reads non-blank lines of a JSONL stream. Each entry is either a parsed
// value or the parse error message for that line.
struct JsonlLine {
  std::size_t line_number = 0;
  std::optional<Json> value;
  std::string error;
};
std::vector<JsonlLine> read_jsonl(std::istream& in);
// Throws InvalidInput on the first malformed line.
std::vector<Json> read_jsonl_strict(std::istream& in);

// Trace record: {"problem_id", "text", "tokens"?: [[text, start, end]],
// "gold_answer"?, "problem"?}. Token offsets are code point offsets.
struct TraceRecord {
  std::string problem_id;
  TraceText text;
  std::optional<std::string> gold_answer;
  std::optional<std::string> problem;
};
TraceRecord trace_from_json(const Json& j);
Json trace_to_json(const TraceRecord& record);

// Converts between code point offsets (file format) and byte offsets.
std::vector<TokenPiece> tokens_from_json(const std::string& raw,
                                         const Json& pieces);
Json tokens_to_json(const std::string& raw,
                    const std::vector<TokenPiece>& tokens);

Json critique_to_json(const Critique& critique);
Critique critique_from_json(const Json& j);

Json trajectory_to_json(const ParsedTrajectory& trajectory);
ParsedTrajectory trajectory_from_json(const Json& j);

Json answer_to_json(const std::optional<CanonicalAnswer>& answer);
Json step_scores_to_json(const std::vector<StepScore>& scores);
std::vector<StepScore> step_scores_from_json(const Json& j);

Json rewards_to_json(const RewardBundle& rewards);
RewardBundle rewards_from_json(const Json& j);

Json advantage_to_json(const TrajectoryAdvantage& advantage);
Json weights_to_json(const AdvantageWeights& weights);

PolicyLogprobs logprobs_from_json(const Json& j);
Json logprobs_to_json(const PolicyLogprobs& lp);

Json metrics_to_json(const eval::CritiqueMetrics& metrics);

// Evaluation sample record: {"problem_id", "answer", "final_score",
// "step_scores", "gold_answer", "gold_step_labels"?}. Records are grouped by
// problem id in order of first appearance.
eval::SampleSet samples_from_jsonl(const std::vector<Json>& records);
Json sample_to_json(const eval::ProblemSamples& problem,
                    const eval::Sample& sample);

// Group batch record: {"problem_id", "gold_answer", "trajectories": [...]}
// where each trajectory is a string or a {"text", "tokens"?} object.
GroupBatch group_from_json(const Json& j);

Json annotation_to_json(const sft::CritiqueAnnotation& annotation);
sft::CritiqueAnnotation annotation_from_json(const Json& j);
Json request_to_json(const sft::CritiqueRequest& request);

sft::GoldTable gold_from_jsonl(const std::vector<Json>& records);
Json report_to_json(const sft::CorpusReport& report);

Json policy_to_json(const toy::ToyPolicy& policy);
toy::ToyPolicy policy_from_json(const Json& j);
Json iteration_to_json(const toy::IterationMetrics& metrics);
Json evaluation_to_json(const toy::ToyEvaluation& evaluation);
Json problem_to_json(const toy::ToyProblem& problem);

}  // namespace stc::io
