#include <gtest/gtest.h>

#include <httplib.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "stc/data_pipeline.hpp"
#include "stc/io.hpp"

namespace stc::sft {
namespace {

CritiqueAnnotation annotation(const std::string& id, std::vector<int> scores) {
  CritiqueAnnotation a;
  a.problem_id = id;
  for (int s : scores) a.steps.push_back({"checked", s});
  return a;
}

std::string trace_line(const std::string& id, const std::string& text,
                       const std::string& gold = "") {
  io::Json j{{"problem_id", id}, {"problem", "what is it"}, {"text", text}};
  if (!gold.empty()) j["gold_answer"] = gold;
  return io::dump_line(j) + "\n";
}

TEST(Merge, FillsEveryStep) {
  const ParsedTrajectory t = parse_trace("Add 2 and 3.\n\nSo \\boxed{5}.");
  const auto merged = merge_critiques(t, annotation("p", {1, 0}));
  const auto& m = std::get<ParsedTrajectory>(merged);
  EXPECT_EQ(m.validity(), (std::vector<bool>{true, true}));
  EXPECT_EQ(render(m, RenderMode::Full),
            "Add 2 and 3. <critic>checked</critic> <score>1</score>\n\n"
            "So \\boxed{5}. <critic>checked</critic> <score>0</score>");
  const ParsedTrajectory again = parse_trace(render(m, RenderMode::Full));
  EXPECT_EQ(again.step_count(), 2u);
  EXPECT_EQ(render(again, RenderMode::Full), render(m, RenderMode::Full));
  EXPECT_EQ(m.token_labels.size(), m.token_count());
}

TEST(Merge, ReplacesExistingCritiques) {
  const ParsedTrajectory t =
      parse_trace("A <critic>old</critic> <score>0</score>\n\nB");
  const auto& m = std::get<ParsedTrajectory>(merge_critiques(t, annotation("p", {1, 1})));
  EXPECT_EQ(m.steps[0].critique->justification, "checked");
  EXPECT_EQ(m.steps[0].critique->score, Score::Correct);
}

TEST(Merge, RejectsMismatchAndBadScores) {
  const ParsedTrajectory t = parse_trace("a\n\nb\n\nc");
  EXPECT_EQ(std::get<Rejection>(merge_critiques(t, annotation("p", {1, 1}))).reason,
            reason::kStepCountMismatch);
  EXPECT_EQ(std::get<Rejection>(merge_critiques(t, annotation("p", {1, 1, -1}))).reason,
            reason::kMalformedAnnotation);
  CritiqueAnnotation tagged = annotation("p", {1, 1, 1});
  tagged.steps[1].justification = "see </critic> here";
  EXPECT_EQ(std::get<Rejection>(merge_critiques(t, tagged)).reason,
            reason::kMalformedAnnotation);
}

TEST(Filter, FinalScoreAgainstVerifier) {
  const CanonicalAnswer gold = canonicalize("5");
  auto merged = [&](const std::string& answer, int score) {
    return std::get<ParsedTrajectory>(merge_critiques(
        parse_trace("x\n\nso \\boxed{" + answer + "}"), annotation("p", {1, score})));
  };
  EXPECT_TRUE(filter_consistent(merged("5", 1), gold).keep);
  EXPECT_EQ(filter_consistent(merged("4", 1), gold).reason, reason::kVerifierDisagreement);
  EXPECT_TRUE(filter_consistent(merged("4", 0), gold).keep);
  EXPECT_FALSE(filter_consistent(merged("5", 0), gold).keep);
  const auto no_answer = std::get<ParsedTrajectory>(
      merge_critiques(parse_trace("x\n\ny"), annotation("p", {1, 0})));
  EXPECT_EQ(filter_consistent(no_answer, gold).reason, reason::kMissingFinalAnswer);
}

TEST(LastNumber, FindsTheFinalLiteral) {
  EXPECT_EQ(last_number("3 + 4 = 7"), "7");
  EXPECT_EQ(last_number("so x = -2.5."), "-2.5");
  EXPECT_EQ(last_number("ratio 3/4"), "3/4");
  EXPECT_EQ(last_number("x2-5"), "5");
  EXPECT_FALSE(last_number("no digits"));
}

TEST(StubProvider, ScoresAgainstIntermediates) {
  GoldTable gold;
  gold["p"] = {"16", {"8", "16"}};
  gold["q"] = {"16", {}};
  StubCritiqueProvider stub(gold);
  EXPECT_EQ(stub.annotate({"p", "", {"5 + 3 = 8", "8 * 2 = 17"}}).steps[1].score, 0);
  EXPECT_EQ(stub.annotate({"p", "", {"5 + 3 = 9", "8 * 2 = 16"}}).steps[0].score, 0);
  const CritiqueAnnotation q = stub.annotate({"q", "", {"5 + 3 = 9", "\\boxed{16}"}});
  EXPECT_EQ(q.steps[0].score, 1);
  EXPECT_EQ(q.steps[1].score, 1);
  EXPECT_THROW(stub.annotate({"zzz", "", {"1"}}), Error);
}

TEST(AnnotationTable, ServesRecordsInOrder) {
  AnnotationTable table;
  table.add(annotation("p", {1}));
  table.add(annotation("p", {0}));
  EXPECT_EQ(table.annotate({"p", "", {"a"}}).steps[0].score, 1);
  EXPECT_EQ(table.annotate({"p", "", {"a"}}).steps[0].score, 0);
  EXPECT_THROW(table.annotate({"p", "", {"a"}}), AnnotationMissing);
}

TEST(CommandProvider, ReadsAnnotationFromStdout) {
  CommandCritiqueProvider ok(
      "cat > /dev/null; printf '%s' "
      "'{\"problem_id\":\"p\",\"steps\":[{\"justification\":\"j\",\"score\":1}]}'");
  EXPECT_EQ(ok.annotate({"p", "", {"a"}}).steps.at(0).justification, "j");
  CommandCritiqueProvider failing("exit 3");
  EXPECT_THROW(failing.annotate({"p", "", {"a"}}), Error);
}

TEST(CommandProvider, ReceivesRequestOnStdin) {
  CommandCritiqueProvider echo(
      "python3 -c 'import json,sys; r=json.load(sys.stdin); "
      "print(json.dumps({\"problem_id\": r[\"problem_id\"], \"steps\": "
      "[{\"justification\": s, \"score\": 1} for s in r[\"steps\"]]}))'");
  const CritiqueAnnotation a = echo.annotate({"p", "prob", {"one", "two"}});
  ASSERT_EQ(a.steps.size(), 2u);
  EXPECT_EQ(a.steps[1].justification, "two");
}

TEST(HttpProvider, PostsRequestAndParsesReply) {
  httplib::Server server;
  server.Post("/critique", [](const httplib::Request& req, httplib::Response& res) {
    const io::Json r = io::Json::parse(req.body);
    io::Json steps = io::Json::array();
    for (const auto& s : r.at("steps"))
      steps.push_back({{"justification", "ok " + s.get<std::string>()}, {"score", 0}});
    res.set_content(io::Json{{"problem_id", r.at("problem_id")}, {"steps", steps}}.dump(),
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpCritiqueProvider provider("http://127.0.0.1:" + std::to_string(port) + "/critique");
  const CritiqueAnnotation a = provider.annotate({"p", "", {"s1"}});
  HttpCritiqueProvider missing("http://127.0.0.1:" + std::to_string(port) + "/nope");
  EXPECT_THROW(missing.annotate({"p", "", {"s1"}}), Error);
  server.stop();
  worker.join();
  ASSERT_EQ(a.steps.size(), 1u);
  EXPECT_EQ(a.steps[0].justification, "ok s1");
  EXPECT_EQ(a.steps[0].score, 0);
}

TEST(MakeProvider, ParsesSpecs) {
  GoldTable gold;
  EXPECT_NE(dynamic_cast<StubCritiqueProvider*>(make_provider("stub", gold).get()), nullptr);
  EXPECT_NE(dynamic_cast<CommandCritiqueProvider*>(make_provider("exec:cat", gold).get()),
            nullptr);
  EXPECT_NE(dynamic_cast<HttpCritiqueProvider*>(
                make_provider("http://localhost:8080/x", gold).get()),
            nullptr);
  EXPECT_THROW(make_provider("ftp://x", gold), InvalidInput);
  EXPECT_THROW(make_provider("http://host:notaport/", gold), InvalidInput);
  EXPECT_THROW(make_provider("exec:", gold), InvalidInput);
  EXPECT_THROW(make_provider("file:/nonexistent/annotations.jsonl", gold), InvalidInput);
}

TEST(BuildCorpus, EmptyInput) {
  std::istringstream in;
  std::ostringstream out;
  AnnotationTable table;
  const CorpusReport r = build_corpus(in, table, {}, out);
  EXPECT_EQ(r.input, 0u);
  EXPECT_EQ(r.kept, 0u);
  EXPECT_EQ(r.discarded_total(), 0u);
  EXPECT_TRUE(out.str().empty());
}

TEST(BuildCorpus, CountsDisagreements) {
  std::string traces;
  AnnotationTable table;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "p" + std::to_string(i);
    traces += trace_line(id, "Work.\n\nThus \\boxed{" + std::to_string(i) + "}.",
                         std::to_string(i));
    table.add(annotation(id, {1, i < 4 ? 0 : 1}));
  }
  std::istringstream in(traces);
  std::ostringstream out;
  const CorpusReport r = build_corpus(in, table, {}, out);
  EXPECT_EQ(r.input, 10u);
  EXPECT_EQ(r.kept, 6u);
  EXPECT_EQ(r.discarded.at(std::string(reason::kVerifierDisagreement)), 4u);

  std::istringstream kept(out.str());
  const auto records = io::read_jsonl_strict(kept);
  ASSERT_EQ(records.size(), 6u);
  EXPECT_EQ(records[0].at("problem_id"), "p4");
  for (const auto& rec : records) {
    const ParsedTrajectory t = parse_trace(rec.at("text").get<std::string>());
    EXPECT_TRUE(filter_consistent(t, canonicalize(rec.at("problem_id")
                                                      .get<std::string>()
                                                      .substr(1)))
                    .keep);
  }
}

TEST(BuildCorpus, ReportsEveryFailureReason) {
  std::string traces = "{not json\n";
  traces += io::dump_line(io::Json{{"problem_id", 3}}) + "\n";
  traces += trace_line("nogold", "x \\boxed{1}");
  traces += trace_line("empty", "", "1");
  traces += trace_line("missing", "x \\boxed{1}", "1");
  traces += trace_line("short", "a\n\nb \\boxed{1}", "1");
  traces += trace_line("ok", "a\n\nb \\boxed{1}", "1");
  AnnotationTable table;
  table.add(annotation("short", {1}));
  table.add(annotation("ok", {0, 1}));
  std::istringstream in(traces);
  std::ostringstream out;
  const CorpusReport r = build_corpus(in, table, {}, out);
  EXPECT_EQ(r.input, 7u);
  EXPECT_EQ(r.kept, 1u);
  EXPECT_EQ(r.kept + r.discarded_total(), r.input);
  EXPECT_EQ(r.discarded.at(std::string(reason::kSchemaError)), 2u);
  EXPECT_EQ(r.discarded.at(std::string(reason::kMissingGold)), 1u);
  EXPECT_EQ(r.discarded.at(std::string(reason::kEmptyTrace)), 1u);
  EXPECT_EQ(r.discarded.at(std::string(reason::kMissingAnnotation)), 1u);
  EXPECT_EQ(r.discarded.at(std::string(reason::kStepCountMismatch)), 1u);
}

TEST(BuildCorpus, GoldTableOverridesAndRunsAreRepeatable) {
  const std::string traces = trace_line("p", "5 + 3 = 8\n\n8 * 2 = 16 \\boxed{16}") +
                             trace_line("q", "5 + 3 = 9\n\n9 * 2 = 18 \\boxed{18}");
  GoldTable gold;
  gold["p"] = {"16", {"8", "16"}};
  gold["q"] = {"16", {"8", "16"}};
  std::string first;
  for (int run = 0; run < 2; ++run) {
    StubCritiqueProvider stub(gold);
    std::istringstream in(traces);
    std::ostringstream out;
    const CorpusReport r = build_corpus(in, stub, gold, out);
    EXPECT_EQ(r.kept, 2u);
    if (run == 0) first = out.str();
    else EXPECT_EQ(out.str(), first);
  }
  EXPECT_NE(first.find("<score>0</score>"), std::string::npos);
}

}  // namespace
}  // namespace stc::sft
