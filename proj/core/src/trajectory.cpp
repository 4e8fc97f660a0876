#include "stc/trajectory.hpp"

#include <algorithm>

#include "stc/error.hpp"
#include "stc/utf8.hpp"

namespace stc {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), is_space);
}

bool at(std::string_view s, std::size_t pos, std::string_view needle) {
  return s.compare(pos, needle.size(), needle) == 0;
}

std::size_t skip_space(std::string_view s, std::size_t pos) {
  while (pos < s.size() && is_space(s[pos])) ++pos;
  return pos;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

struct CharLabel {
  LabelKind kind = LabelKind::Separator;
  std::size_t step = 0;
};

struct ScannedCritique {
  Critique critique;
  std::size_t end = 0;
};

// Scans a critique block starting at `begin`, which holds either <critic>
// or a bare <score>.
ScannedCritique scan_critique(std::string_view raw, std::size_t begin) {
  ScannedCritique out;
  Critique& c = out.critique;
  c.score = Score::Malformed;
  c.score_gap.clear();
  std::size_t pos = begin;
  bool critic_ok = false;

  if (at(raw, pos, kCriticOpen)) {
    pos += kCriticOpen.size();
    const std::size_t close = raw.find(kCriticClose, pos);
    if (close == std::string_view::npos) {
      // Unterminated justification: the block runs to the end of the text.
      c.justification = std::string(raw.substr(pos));
      c.source = std::string(raw.substr(begin));
      out.end = raw.size();
      return out;
    }
    c.justification = std::string(raw.substr(pos, close - pos));
    critic_ok = c.justification.find(kCriticOpen) == std::string::npos &&
                c.justification.find(kScoreOpen) == std::string::npos;
    pos = close + kCriticClose.size();
    const std::size_t score_at = skip_space(raw, pos);
    if (!at(raw, score_at, kScoreOpen)) {
      c.source = std::string(raw.substr(begin, pos - begin));
      out.end = pos;
      return out;
    }
    c.score_gap = std::string(raw.substr(pos, score_at - pos));
    pos = score_at;
  }

  // <score> ... </score>; a missing close tag ends the block at the next
  // step separator.
  pos += kScoreOpen.size();
  const std::size_t close = raw.find(kScoreClose, pos);
  const std::size_t separator = raw.find(kStepSeparator, pos);
  if (close == std::string_view::npos ||
      (separator != std::string_view::npos && separator < close)) {
    const std::size_t end =
        separator == std::string_view::npos ? raw.size() : separator;
    c.score_body = std::string(raw.substr(pos, end - pos));
    c.source = std::string(raw.substr(begin, end - begin));
    out.end = end;
    return out;
  }
  c.score_body = std::string(raw.substr(pos, close - pos));
  const std::string_view value = trim(c.score_body);
  if (value == "1") c.score = Score::Correct;
  if (value == "0") c.score = Score::Incorrect;
  out.end = close + kScoreClose.size();
  c.source = std::string(raw.substr(begin, out.end - begin));
  c.valid = critic_ok && c.score != Score::Malformed;
  return out;
}

class StepBuilder {
 public:
  StepBuilder(std::string_view raw, std::vector<CharLabel>& labels)
      : raw_(raw), labels_(labels) {}

  // Emits the step whose text is raw[body_begin, body_end), optionally
  // followed by a critique spanning [body_end, crit_end), and then the
  // separator raw[sep_begin, sep_end).
  void emit(std::size_t body_begin, std::size_t body_end,
            std::optional<ScannedCritique> critique, std::size_t sep_begin,
            std::size_t sep_end) {
    Step step;
    const std::size_t index = steps_.size() + 1;
    std::size_t r0 = body_begin;
    while (r0 < body_end && is_space(raw_[r0])) ++r0;
    std::size_t r1 = body_end;
    while (r1 > r0 && is_space(raw_[r1 - 1])) --r1;
    step.lead = std::string(raw_.substr(body_begin, r0 - body_begin));
    step.reasoning = std::string(raw_.substr(r0, r1 - r0));
    step.gap = std::string(raw_.substr(r1, body_end - r1));
    for (std::size_t i = r0; i < r1; ++i)
      labels_[i] = {LabelKind::Reasoning, index};
    if (critique) {
      for (std::size_t i = body_end; i < critique->end; ++i)
        labels_[i] = {LabelKind::CritiqueBody, index};
      step.critique = std::move(critique->critique);
    }
    step.trail = std::string(raw_.substr(sep_begin, sep_end - sep_begin));
    steps_.push_back(std::move(step));
  }

  std::vector<Step>& steps() { return steps_; }

 private:
  std::string_view raw_;
  std::vector<CharLabel>& labels_;
  std::vector<Step> steps_;
};

TokenLabel label_token(std::span<const CharLabel> chars) {
  for (const CharLabel& c : chars)
    if (c.kind == LabelKind::CritiqueBody) return {c.kind, c.step};
  for (const CharLabel& c : chars)
    if (c.kind == LabelKind::Reasoning) return {c.kind, c.step};
  return {LabelKind::Separator, 0};
}

// Last "\boxed{" occurrence in `text`: content when balanced, or nullopt
// with `unbalanced` set.
struct BoxedScan {
  bool found = false;
  bool unbalanced = false;
  std::string content;
};

BoxedScan last_boxed(std::string_view text) {
  static constexpr std::string_view kBoxed = "\\boxed{";
  BoxedScan out;
  const std::size_t pos = text.rfind(kBoxed);
  if (pos == std::string_view::npos) return out;
  out.found = true;
  const std::size_t open = pos + kBoxed.size() - 1;
  int depth = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\\' && i + 1 < text.size() &&
        (text[i + 1] == '{' || text[i + 1] == '}')) {
      ++i;
      continue;
    }
    if (c == '{') ++depth;
    if (c == '}' && --depth == 0) {
      out.content = std::string(text.substr(open + 1, i - open - 1));
      return out;
    }
  }
  out.unbalanced = true;
  return out;
}

std::string render_critique(const Critique& c) {
  if (!c.valid && !c.source.empty()) return c.source;
  std::string out;
  out += kCriticOpen;
  out += c.justification;
  out += kCriticClose;
  out += c.score_gap;
  out += kScoreOpen;
  out += c.score_body;
  out += kScoreClose;
  return out;
}

}  // namespace

Critique Critique::make(std::string justification, Score score) {
  Critique c;
  c.justification = std::move(justification);
  c.score = score;
  c.score_gap = " ";
  c.score_body = score == Score::Correct     ? "1"
                 : score == Score::Incorrect ? "0"
                                             : "";
  c.valid = score != Score::Malformed &&
            c.justification.find(kCriticClose) == std::string::npos &&
            c.justification.find(kCriticOpen) == std::string::npos &&
            c.justification.find(kScoreOpen) == std::string::npos;
  c.source = render_critique(c);
  return c;
}

std::vector<TokenPiece> default_segmentation(std::string_view raw) {
  const std::vector<std::size_t> cuts = utf8::boundaries(raw);
  std::vector<TokenPiece> tokens;
  tokens.reserve(cuts.size() - 1);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    tokens.push_back({std::string(raw.substr(cuts[i], cuts[i + 1] - cuts[i])),
                      cuts[i], cuts[i + 1]});
  return tokens;
}

void validate_tokens(std::string_view raw, std::span<const TokenPiece> tokens) {
  std::size_t expected = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenPiece& t = tokens[i];
    if (t.begin != expected || t.end <= t.begin || t.end > raw.size())
      throw InvalidInput("token " + std::to_string(i) +
                         " does not continue the partition at byte " +
                         std::to_string(expected));
    if (raw.substr(t.begin, t.end - t.begin) != t.text)
      throw InvalidInput("token " + std::to_string(i) +
                         " text does not match the covered bytes");
    expected = t.end;
  }
  if (expected != raw.size())
    throw InvalidInput("tokens cover " + std::to_string(expected) + " of " +
                       std::to_string(raw.size()) + " bytes");
}

std::size_t ParsedTrajectory::critique_token_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(token_labels.begin(), token_labels.end(),
                    [](const TokenLabel& l) {
                      return l.kind == LabelKind::CritiqueBody;
                    }));
}

std::vector<bool> ParsedTrajectory::validity() const {
  std::vector<bool> v;
  v.reserve(steps.size());
  for (const Step& s : steps) v.push_back(s.critique && s.critique->valid);
  return v;
}

ParsedTrajectory parse_trace(std::string_view raw) {
  return parse_trace(TraceText{std::string(raw), {}});
}

ParsedTrajectory parse_trace(const TraceText& text) {
  const std::string_view raw = text.raw;
  if (raw.empty()) throw ParseError("empty trace text");

  std::vector<CharLabel> labels(raw.size());
  StepBuilder builder(raw, labels);

  std::size_t step_begin = 0;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    if (at(raw, pos, kCriticOpen) || at(raw, pos, kScoreOpen)) {
      ScannedCritique scanned = scan_critique(raw, pos);
      const std::size_t block_end = scanned.end;
      const std::size_t sep_end = skip_space(raw, block_end);
      builder.emit(step_begin, pos, std::move(scanned), block_end, sep_end);
      pos = step_begin = sep_end;
      continue;
    }
    if (at(raw, pos, kStepSeparator)) {
      if (is_blank(raw.substr(step_begin, pos - step_begin))) {
        // Leading blank lines belong to the next step's lead.
        pos = skip_space(raw, pos);
        continue;
      }
      // Trailing whitespace of the body is the step's gap; the separator
      // starts at the first "\n\n".
      const std::size_t sep_end = skip_space(raw, pos);
      builder.emit(step_begin, pos, std::nullopt, pos, sep_end);
      pos = step_begin = sep_end;
      continue;
    }
    ++pos;
  }

  std::vector<Step>& steps = builder.steps();
  const std::string_view rest = raw.substr(step_begin);
  if (!rest.empty() || steps.empty()) {
    if (!is_blank(rest) || steps.empty()) {
      builder.emit(step_begin, raw.size(), std::nullopt, raw.size(),
                   raw.size());
    } else {
      steps.back().trail += std::string(rest);
    }
  }

  ParsedTrajectory out;
  out.steps = std::move(steps);
  out.tokens = text.tokens.empty() ? default_segmentation(raw) : text.tokens;
  validate_tokens(raw, out.tokens);
  out.token_labels.reserve(out.tokens.size());
  for (const TokenPiece& t : out.tokens)
    out.token_labels.push_back(label_token(
        std::span<const CharLabel>(labels).subspan(t.begin, t.end - t.begin)));

  AnswerExtraction answer = extract_final_answer(out.steps);
  out.final_answer_text = std::move(answer.text);
  out.final_answer = std::move(answer.answer);
  if (answer.diagnostic) out.diagnostics.push_back(*answer.diagnostic);
  return out;
}

std::string render(const ParsedTrajectory& trajectory, RenderMode mode) {
  std::string out;
  if (mode == RenderMode::Compact) {
    for (const Step& s : trajectory.steps) {
      if (s.reasoning.empty()) continue;
      if (!out.empty()) out += kStepSeparator;
      out += s.reasoning;
    }
    return out;
  }
  for (const Step& s : trajectory.steps) {
    out += s.lead;
    out += s.reasoning;
    out += s.gap;
    if (s.critique) out += render_critique(*s.critique);
    out += s.trail;
  }
  return out;
}

AnswerExtraction extract_final_answer(std::span<const Step> steps) {
  AnswerExtraction out;
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    const BoxedScan scan = last_boxed(it->reasoning);
    if (!scan.found) continue;
    if (scan.unbalanced) {
      out.diagnostic = "unbalanced braces in \\boxed{} expression";
      return out;
    }
    out.text = scan.content;
    try {
      out.answer = canonicalize(scan.content);
    } catch (const InvalidInput&) {
      out.diagnostic = "empty \\boxed{} expression";
    }
    return out;
  }
  return out;
}

AnswerExtraction extract_final_answer(const ParsedTrajectory& trajectory) {
  return extract_final_answer(trajectory.steps);
}

const char* label_name(LabelKind kind) noexcept {
  switch (kind) {
    case LabelKind::Reasoning:
      return "reasoning";
    case LabelKind::CritiqueBody:
      return "critique";
    case LabelKind::Separator:
      return "separator";
  }
  return "separator";
}

}  // namespace stc
