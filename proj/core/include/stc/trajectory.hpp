#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stc/verifier.hpp"

namespace stc {

// Literal tag spellings. Matching is exact and case-sensitive.
inline constexpr std::string_view kCriticOpen = "<critic>";
inline constexpr std::string_view kCriticClose = "</critic>";
inline constexpr std::string_view kScoreOpen = "<score>";
inline constexpr std::string_view kScoreClose = "</score>";
inline constexpr std::string_view kStepSeparator = "\n\n";

// One token of a caller-supplied tokenization. Offsets are byte offsets
// into the raw UTF-8 text, half-open.
struct TokenPiece {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const TokenPiece&) const = default;
};

struct TraceText {
  std::string raw;
  // Must partition `raw` contiguously. Empty means "use
  // default_segmentation(raw)".
  std::vector<TokenPiece> tokens;
};

// One token per UTF-8 code point, whitespace included.
std::vector<TokenPiece> default_segmentation(std::string_view raw);

// Throws InvalidInput unless `tokens` are non-empty pieces that cover
// [0, raw.size()) contiguously and whose text matches the covered bytes.
void validate_tokens(std::string_view raw, std::span<const TokenPiece> tokens);

enum class Score : std::uint8_t { Incorrect = 0, Correct = 1, Malformed = 2 };

struct Critique {
  std::string justification;  // raw text between the critic tags
  Score score = Score::Malformed;
  bool valid = false;  // v_n: tags well-formed and score in {0, 1}

  // Layout, so that rendering reproduces parsed text byte for byte.
  std::string score_gap = " ";  // between </critic> and <score>
  std::string score_body;       // raw text between the score tags
  std::string source;           // verbatim block; rendered for invalid blocks

  // A well-formed critique in canonical layout.
  static Critique make(std::string justification, Score score);
};

enum class LabelKind : std::uint8_t { Reasoning, CritiqueBody, Separator };

struct TokenLabel {
  LabelKind kind = LabelKind::Separator;
  std::size_t step = 0;  // 1-based; 0 for separators

  bool operator==(const TokenLabel&) const = default;
};

struct Step {
  std::string reasoning;  // trimmed of surrounding whitespace
  std::optional<Critique> critique;

  std::string lead;   // whitespace before the reasoning text
  std::string gap;    // whitespace between reasoning and critique
  std::string trail;  // separator text that follows the step
};

struct ParsedTrajectory {
  std::vector<Step> steps;
  std::optional<std::string> final_answer_text;
  std::optional<CanonicalAnswer> final_answer;
  std::vector<std::string> diagnostics;
  std::vector<TokenPiece> tokens;
  std::vector<TokenLabel> token_labels;  // parallel to tokens

  std::size_t step_count() const noexcept { return steps.size(); }
  std::size_t token_count() const noexcept { return tokens.size(); }
  std::size_t critique_token_count() const noexcept;
  // v_n for n = 1..T.
  std::vector<bool> validity() const;
};

// Splits text into reasoning steps at "\n\n" and attaches the
// <critic>...</critic> <score>...</score> block that follows a step's text.
// A critique block closes its step; "\n\n" inside a critique does not split.
// Malformed blocks yield Critique::valid == false. Throws ParseError only for
// empty input; any other byte string parses.
ParsedTrajectory parse_trace(const TraceText& text);
ParsedTrajectory parse_trace(std::string_view raw);

enum class RenderMode { Full, Compact };

// Full reproduces steps and critique blocks (canonical tags, recorded
// layout); Compact joins the non-empty reasoning texts with "\n\n".
std::string render(const ParsedTrajectory& trajectory, RenderMode mode);

struct AnswerExtraction {
  std::optional<std::string> text;  // content of the selected \boxed{...}
  std::optional<CanonicalAnswer> answer;
  std::optional<std::string> diagnostic;
};

// Content of the last \boxed{...} in the final step's reasoning, falling back
// to the latest step that has one. Unbalanced braces give no answer and a
// diagnostic.
AnswerExtraction extract_final_answer(std::span<const Step> steps);
AnswerExtraction extract_final_answer(const ParsedTrajectory& trajectory);

const char* label_name(LabelKind kind) noexcept;

}  // namespace stc
