#include "stc/data_pipeline.hpp"

#include <istream>
#include <ostream>
#include <regex>

#include "stc/io.hpp"

namespace stc::sft {
namespace {

bool contains_tag(std::string_view text) {
  for (std::string_view tag : {kCriticOpen, kCriticClose, kScoreOpen, kScoreClose})
    if (text.find(tag) != std::string_view::npos) return true;
  return false;
}

Rejection reject(std::string_view reason, std::string detail) {
  return {std::string(reason), std::move(detail)};
}

}  // namespace

std::variant<ParsedTrajectory, Rejection> merge_critiques(
    const ParsedTrajectory& trace, const CritiqueAnnotation& annotation) {
  const std::size_t T = trace.step_count();
  if (annotation.steps.size() != T)
    return reject(reason::kStepCountMismatch,
                  "trace has " + std::to_string(T) + " steps, annotation has " +
                      std::to_string(annotation.steps.size()));
  if (T == 0) return reject(reason::kEmptyTrace, "trace has no steps");

  ParsedTrajectory merged;
  for (std::size_t i = 0; i < T; ++i) {
    const StepCritique& c = annotation.steps[i];
    if (c.score != 0 && c.score != 1)
      return reject(reason::kMalformedAnnotation,
                    "step " + std::to_string(i + 1) + " score " +
                        std::to_string(c.score) + " is not 0 or 1");
    if (contains_tag(c.justification))
      return reject(reason::kMalformedAnnotation,
                    "step " + std::to_string(i + 1) +
                        " justification contains a critique tag");
    Step s;
    s.reasoning = trace.steps[i].reasoning;
    s.critique = Critique::make(c.justification,
                                c.score == 1 ? Score::Correct : Score::Incorrect);
    s.gap = " ";
    s.trail = i + 1 < T ? std::string(kStepSeparator) : "";
    merged.steps.push_back(std::move(s));
  }

  ParsedTrajectory out = parse_trace(render(merged, RenderMode::Full));
  bool valid = out.step_count() == T;
  for (std::size_t i = 0; valid && i < T; ++i)
    valid = out.steps[i].critique && out.steps[i].critique->valid &&
            out.steps[i].reasoning == trace.steps[i].reasoning;
  if (!valid)
    return reject(reason::kMalformedAnnotation,
                  "merged trace does not re-parse to the same steps");
  return out;
}

FilterResult filter_consistent(const ParsedTrajectory& merged,
                               const CanonicalAnswer& gold) {
  if (!merged.final_answer)
    return {false, std::string(reason::kMissingFinalAnswer)};
  if (merged.steps.empty() || !merged.steps.back().critique ||
      !merged.steps.back().critique->valid)
    return {false, std::string(reason::kMalformedAnnotation)};
  const bool correct = answers_equal(*merged.final_answer, gold);
  const bool claims_correct =
      merged.steps.back().critique->score == Score::Correct;
  if (correct != claims_correct)
    return {false, std::string(reason::kVerifierDisagreement)};
  return {true, ""};
}

std::optional<std::string> last_number(std::string_view text) {
  static const std::regex number(
      R"(-?(?:\d+(?:\.\d+)?|\.\d+)(?:\s*/\s*-?\d+)?)");
  const std::string s(text);
  std::optional<std::string> last;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), number);
       it != std::sregex_iterator(); ++it) {
    std::string m = it->str();
    const auto pos = static_cast<std::size_t>(it->position());
    // "5-3": the minus is an operator, not a sign.
    if (m.front() == '-' && pos > 0) {
      const char prev = s[pos - 1];
      if (std::isalnum(static_cast<unsigned char>(prev)) || prev == ')' ||
          prev == '}')
        m.erase(0, 1);
    }
    last = std::move(m);
  }
  return last;
}

std::size_t CorpusReport::discarded_total() const {
  std::size_t n = 0;
  for (const auto& [reason, count] : discarded) n += count;
  return n;
}

CorpusReport build_corpus(std::istream& traces, CritiqueProvider& provider,
                          const GoldTable& gold, std::ostream& corpus) {
  CorpusReport report;
  auto discard = [&](std::string_view why) {
    ++report.discarded[std::string(why)];
  };

  for (const io::JsonlLine& line : io::read_jsonl(traces)) {
    ++report.input;
    if (!line.value) {
      discard(reason::kSchemaError);
      continue;
    }
    io::TraceRecord record;
    try {
      record = io::trace_from_json(*line.value);
    } catch (const std::exception&) {
      discard(reason::kSchemaError);
      continue;
    }

    std::optional<std::string> gold_text = record.gold_answer;
    if (auto it = gold.find(record.problem_id); it != gold.end())
      gold_text = it->second.gold_answer;
    if (!gold_text) {
      discard(reason::kMissingGold);
      continue;
    }
    std::optional<CanonicalAnswer> gold_answer;
    try {
      gold_answer = canonicalize(*gold_text);
    } catch (const Error&) {
      discard(reason::kMissingGold);
      continue;
    }

    if (record.text.raw.empty()) {
      discard(reason::kEmptyTrace);
      continue;
    }
    ParsedTrajectory parsed;
    try {
      parsed = parse_trace(record.text);
    } catch (const Error&) {
      discard(reason::kSchemaError);
      continue;
    }
    if (parsed.step_count() == 0) {
      discard(reason::kEmptyTrace);
      continue;
    }

    CritiqueRequest request;
    request.problem_id = record.problem_id;
    request.problem = record.problem.value_or("");
    for (const Step& s : parsed.steps) request.steps.push_back(s.reasoning);

    CritiqueAnnotation annotation;
    try {
      annotation = provider.annotate(request);
    } catch (const AnnotationMissing&) {
      discard(reason::kMissingAnnotation);
      continue;
    } catch (const std::exception&) {
      discard(reason::kProviderError);
      continue;
    }

    auto merged = merge_critiques(parsed, annotation);
    if (auto* r = std::get_if<Rejection>(&merged)) {
      discard(r->reason);
      continue;
    }
    const auto& trajectory = std::get<ParsedTrajectory>(merged);
    const FilterResult verdict = filter_consistent(trajectory, *gold_answer);
    if (!verdict.keep) {
      discard(verdict.reason);
      continue;
    }
    io::Json out;
    out["problem_id"] = record.problem_id;
    out["problem"] = request.problem;
    out["text"] = render(trajectory, RenderMode::Full);
    corpus << io::dump_line(out) << '\n';
    ++report.kept;
  }
  return report;
}

}  // namespace stc::sft
