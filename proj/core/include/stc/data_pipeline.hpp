#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "stc/error.hpp"
#include "stc/trajectory.hpp"
#include "stc/verifier.hpp"

namespace stc::sft {

// Discard / rejection reason codes reported by the corpus builder.
namespace reason {
inline constexpr std::string_view kVerifierDisagreement = "verifier-disagreement";
inline constexpr std::string_view kMissingFinalAnswer = "missing-final-answer";
inline constexpr std::string_view kStepCountMismatch = "step-count-mismatch";
inline constexpr std::string_view kMalformedAnnotation = "malformed-annotation";
inline constexpr std::string_view kMissingAnnotation = "missing-annotation";
inline constexpr std::string_view kMissingGold = "missing-gold";
inline constexpr std::string_view kProviderError = "provider-error";
inline constexpr std::string_view kSchemaError = "schema-error";
inline constexpr std::string_view kEmptyTrace = "empty-trace";
}  // namespace reason

struct StepCritique {
  std::string justification;
  int score = 0;  // 0 or 1
};

struct CritiqueAnnotation {
  std::string problem_id;
  std::vector<StepCritique> steps;
};

struct Rejection {
  std::string reason;
  std::string detail;
};

// Replaces every step's critique with the annotation's and re-parses the
// canonical Full rendering, so the result carries fresh token labels.
std::variant<ParsedTrajectory, Rejection> merge_critiques(
    const ParsedTrajectory& trace, const CritiqueAnnotation& annotation);

struct FilterResult {
  bool keep = false;
  std::string reason;  // empty when kept
};

// Keep iff the final step's score agrees with the verifier's verdict on the
// final answer.
FilterResult filter_consistent(const ParsedTrajectory& merged,
                               const CanonicalAnswer& gold);

// What a critique provider is asked: {"problem": ..., "steps": [...]}.
struct CritiqueRequest {
  std::string problem_id;
  std::string problem;
  std::vector<std::string> steps;
};

// Raised by a provider that has nothing recorded for a request.
class AnnotationMissing : public Error {
 public:
  using Error::Error;
};

class CritiqueProvider {
 public:
  virtual ~CritiqueProvider() = default;
  // Throws stc::Error when no annotation can be produced.
  virtual CritiqueAnnotation annotate(const CritiqueRequest& request) = 0;
};

struct GoldRecord {
  std::string gold_answer;
  std::vector<std::string> gold_intermediates;  // optional, per step
};

using GoldTable = std::unordered_map<std::string, GoldRecord>;

// Pre-computed annotations; the i-th request for a problem id receives the
// i-th annotation recorded for it.
class AnnotationTable final : public CritiqueProvider {
 public:
  void add(CritiqueAnnotation annotation);
  CritiqueAnnotation annotate(const CritiqueRequest& request) override;

 private:
  std::unordered_map<std::string, std::vector<CritiqueAnnotation>> table_;
  std::unordered_map<std::string, std::size_t> served_;
};

// Deterministic offline provider. Scores step n by comparing the last number
// stated in it with the n-th gold intermediate when those are supplied for
// every step; otherwise only the final step is checked, against the gold
// answer, and earlier steps are scored 1.
class StubCritiqueProvider final : public CritiqueProvider {
 public:
  explicit StubCritiqueProvider(const GoldTable& gold) : gold_(gold) {}
  CritiqueAnnotation annotate(const CritiqueRequest& request) override;

 private:
  const GoldTable& gold_;
};

// Runs an external command per request: request JSON on stdin, annotation
// JSON on stdout.
class CommandCritiqueProvider final : public CritiqueProvider {
 public:
  explicit CommandCritiqueProvider(std::string command)
      : command_(std::move(command)) {}
  CritiqueAnnotation annotate(const CritiqueRequest& request) override;

 private:
  std::string command_;
};

// POSTs the request JSON to an http:// URL and reads the annotation JSON.
class HttpCritiqueProvider final : public CritiqueProvider {
 public:
  explicit HttpCritiqueProvider(std::string url);
  CritiqueAnnotation annotate(const CritiqueRequest& request) override;

 private:
  std::string host_;
  int port_ = 80;
  std::string path_;
};

// "stub:", "exec:<command>", "http://host[:port]/path" or
// "file:<annotations.jsonl>".
std::unique_ptr<CritiqueProvider> make_provider(std::string_view spec,
                                                const GoldTable& gold);

// Last integer, fraction or decimal literal stated in `text`, if any.
std::optional<std::string> last_number(std::string_view text);

struct CorpusReport {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> discarded;  // by reason

  std::size_t discarded_total() const;
};

// Reads trace records (JSONL), annotates, merges, filters, and writes kept
// records as {"problem_id", "problem", "text"} JSONL in input order. Errors
// are per record and never abort the run.
CorpusReport build_corpus(std::istream& traces, CritiqueProvider& provider,
                          const GoldTable& gold, std::ostream& corpus);

}  // namespace stc::sft
