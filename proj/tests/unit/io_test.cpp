#include <gtest/gtest.h>

#include <sstream>

#include "stc/io.hpp"

namespace stc::io {
namespace {

TEST(Jsonl, ReportsMalformedLinesWithNumbers) {
  std::istringstream in("{\"a\":1}\n\n{oops\n[2]\n");
  const auto lines = read_jsonl(in);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_TRUE(lines[0].value);
  EXPECT_FALSE(lines[1].value);
  EXPECT_EQ(lines[1].line_number, 3u);
  EXPECT_FALSE(lines[1].error.empty());
  std::istringstream again("{\"a\":1}\n{oops\n");
  EXPECT_THROW(read_jsonl_strict(again), InvalidInput);
}

TEST(Jsonl, DumpLineToleratesInvalidUtf8) {
  const std::string line = dump_line(Json{{"t", std::string("a\xFF")}});
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_NO_THROW(Json::parse(line));
}

TEST(Trace, CodePointOffsetsRoundTrip) {
  const std::string raw = "\xC3\xA9t\xC3\xA9 ok";
  const Json pieces = Json::parse(R"([["ét",0,2],["é ok",2,6]])");
  const std::vector<TokenPiece> tokens = tokens_from_json(raw, pieces);
  ASSERT_EQ(tokens.size(), 2u);
  EXPECT_EQ(tokens[0].end, 3u);
  EXPECT_EQ(tokens[1].begin, 3u);
  EXPECT_EQ(tokens_to_json(raw, tokens), pieces);
  EXPECT_THROW(tokens_from_json(raw, Json::parse(R"([["x",0,2]])")), InvalidInput);
}

TEST(Trace, RecordRoundTrip) {
  TraceRecord r;
  r.problem_id = "p";
  r.text.raw = "a \\boxed{1}";
  r.gold_answer = "1";
  r.problem = "q";
  const TraceRecord back = trace_from_json(trace_to_json(r));
  EXPECT_EQ(back.problem_id, "p");
  EXPECT_EQ(back.text.raw, r.text.raw);
  EXPECT_EQ(back.gold_answer, r.gold_answer);
  EXPECT_EQ(back.problem, r.problem);
  EXPECT_EQ(trace_from_json(Json{{"problem_id", "n"}, {"text", "x"}, {"gold_answer", 25}})
                .gold_answer,
            "25");
  EXPECT_THROW(trace_from_json(Json{{"text", "x"}}), InvalidInput);
}

TEST(Trajectory, JsonRoundTripKeepsStructure) {
  const ParsedTrajectory t = parse_trace(
      "A <critic>fine</critic> <score>1</score>\n\nB \\boxed{3/6} <critic>x</critic>");
  const Json j = trajectory_to_json(t);
  EXPECT_EQ(j.at("step_count"), 2);
  EXPECT_EQ(j.at("final_answer").at("kind"), "rational");
  EXPECT_EQ(j.at("final_answer").at("value"), "1/2");
  EXPECT_EQ(j.at("validity"), Json::parse("[1,0]"));
  EXPECT_EQ(j.at("token_labels").size(), t.token_count());
  const ParsedTrajectory back = trajectory_from_json(j);
  EXPECT_EQ(back.token_labels, t.token_labels);
  EXPECT_EQ(render(back, RenderMode::Full), render(t, RenderMode::Full));
}

TEST(Rewards, JsonRoundTrip) {
  RewardBundle r;
  r.r_reason = r.z = 1;
  r.r_format = 0.5;
  r.step_scores = {1, std::nullopt};
  const RewardBundle back = rewards_from_json(rewards_to_json(r));
  EXPECT_EQ(back.r_reason, 1);
  EXPECT_EQ(back.r_format, 0.5);
  EXPECT_EQ(back.step_scores, r.step_scores);
}

TEST(Logprobs, BehaviorAndReferenceDefaultToCurrent) {
  const PolicyLogprobs lp = logprobs_from_json(Json{{"current", {-1.0, -2.0}}});
  EXPECT_EQ(lp.behavior, lp.current);
  EXPECT_EQ(lp.reference, lp.current);
  EXPECT_THROW(logprobs_from_json(Json{{"current", {"x"}}}), InvalidInput);
}

TEST(Samples, GroupedByProblemInFirstAppearanceOrder) {
  const std::vector<Json> records = {
      Json{{"problem_id", "b"}, {"answer", "1"}, {"final_score", 1}, {"gold_answer", "1"}},
      Json{{"problem_id", "a"}, {"answer", nullptr}, {"gold_answer", 2}},
      Json{{"problem_id", "b"}, {"answer", "2"}, {"final_score", 0}, {"gold_answer", "1"},
           {"step_scores", {1, nullptr}}, {"gold_step_labels", {1, 0}}}};
  const eval::SampleSet set = samples_from_jsonl(records);
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set[0].problem_id, "b");
  EXPECT_EQ(set[0].samples.size(), 2u);
  EXPECT_FALSE(set[1].samples[0].answer);
  EXPECT_EQ(set[0].samples[1].gold_step_labels, (std::vector<int>{1, 0}));
  EXPECT_EQ(sample_to_json(set[0], set[0].samples[1]).at("answer"), "2");

  const std::vector<Json> conflicting = {
      Json{{"problem_id", "a"}, {"answer", "1"}, {"gold_answer", "1"}},
      Json{{"problem_id", "a"}, {"answer", "1"}, {"gold_answer", "2"}}};
  EXPECT_THROW(samples_from_jsonl(conflicting), InvalidInput);
  EXPECT_THROW(samples_from_jsonl({Json{{"problem_id", "a"}, {"final_score", 3},
                                        {"gold_answer", "1"}}}),
               InvalidInput);
}

TEST(Group, AcceptsStringsAndObjects) {
  const GroupBatch g = group_from_json(Json::parse(R"({
    "problem_id": "p", "gold_answer": "5",
    "trajectories": ["x \\boxed{5}", {"text": "ab", "tokens": [["a",0,1],["b",1,2]]}]
  })"));
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g.members[0].rewards.r_reason, 1);
  EXPECT_EQ(g.members[1].trajectory.token_count(), 2u);
}

TEST(Annotation, ScoresOutsideRangeAreMarked) {
  const sft::CritiqueAnnotation a = annotation_from_json(Json::parse(R"({
    "problem_id": "p",
    "steps": [{"justification": "a", "score": true},
              {"justification": "b", "score": 0},
              {"justification": "c", "score": 7},
              {"justification": "d", "score": "1"}]})"));
  ASSERT_EQ(a.steps.size(), 4u);
  EXPECT_EQ(a.steps[0].score, 1);
  EXPECT_EQ(a.steps[1].score, 0);
  EXPECT_EQ(a.steps[2].score, -1);
  EXPECT_EQ(a.steps[3].score, -1);
  EXPECT_EQ(annotation_from_json(annotation_to_json(a)).steps[1].justification, "b");
}

TEST(Gold, RejectsDuplicates) {
  const std::vector<Json> ok = {
      Json{{"problem_id", "p"}, {"gold_answer", 16}, {"gold_intermediates", {8, "16"}}}};
  const sft::GoldTable t = gold_from_jsonl(ok);
  EXPECT_EQ(t.at("p").gold_answer, "16");
  EXPECT_EQ(t.at("p").gold_intermediates, (std::vector<std::string>{"8", "16"}));
  EXPECT_THROW(gold_from_jsonl({ok[0], ok[0]}), InvalidInput);
}

TEST(Policy, JsonRoundTripIsExact) {
  toy::ToyPolicy p;
  for (std::size_t i = 0; i < p.parameters().size(); ++i)
    p.parameters()[i] = 0.1 * static_cast<double>(i) - 3.3333333333333335;
  p.temperature = 0.7;
  p.mode = RenderMode::Compact;
  const toy::ToyPolicy back = policy_from_json(Json::parse(policy_to_json(p).dump()));
  EXPECT_EQ(back.parameters(), p.parameters());
  EXPECT_EQ(back.temperature, 0.7);
  EXPECT_EQ(back.mode, RenderMode::Compact);
  Json bad = policy_to_json(p);
  bad["parameters"].erase(0);
  EXPECT_THROW(policy_from_json(bad), InvalidInput);
  bad = policy_to_json(p);
  bad["format"] = "other";
  EXPECT_THROW(policy_from_json(bad), InvalidInput);
}

TEST(Report, CountsByReason) {
  sft::CorpusReport r;
  r.input = 5;
  r.kept = 3;
  r.discarded["verifier-disagreement"] = 2;
  const Json j = report_to_json(r);
  EXPECT_EQ(j.at("discarded_total"), 2);
  EXPECT_EQ(j.at("discarded").at("verifier-disagreement"), 2);
}

}  // namespace
}  // namespace stc::io
