#include "stc/verifier.hpp"

#include <array>
#include <cctype>
#include <optional>

#include "stc/error.hpp"

namespace stc {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool starts_with(std::string_view s, std::string_view p) {
  return s.substr(0, p.size()) == p;
}

bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

// Index of the brace closing the '{' at `open`, honoring \{ and \} escapes.
std::optional<std::size_t> matching_brace(std::string_view s,
                                          std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\\' && i + 1 < s.size() && (s[i + 1] == '{' || s[i + 1] == '}')) {
      ++i;
      continue;
    }
    if (c == '{') ++depth;
    if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::nullopt;
}

// Removes one layer of delimiters enclosing the whole string, if any.
bool strip_once(std::string_view& s) {
  const std::string_view t = trim(s);
  if (t.size() != s.size()) {
    s = t;
    return true;
  }
  if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
    s = s.substr(1, s.size() - 2);
    return true;
  }
  for (const auto& [open, close] :
       std::array<std::pair<std::string_view, std::string_view>, 2>{
           {{"\\(", "\\)"}, {"\\[", "\\]"}}}) {
    if (s.size() >= open.size() + close.size() && starts_with(s, open) &&
        ends_with(s, close)) {
      s = s.substr(open.size(), s.size() - open.size() - close.size());
      return true;
    }
  }
  for (std::string_view wrapper : {std::string_view("\\boxed{"),
                                   std::string_view("{")}) {
    if (!starts_with(s, wrapper)) continue;
    const std::size_t open = wrapper.size() - 1;
    const auto close = matching_brace(s, open);
    if (close && *close == s.size() - 1) {
      s = s.substr(wrapper.size(), s.size() - wrapper.size() - 1);
      return true;
    }
  }
  return false;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!is_digit(c)) return false;
  return true;
}

// Decimal digits only. The string constructor of cpp_int treats a leading
// zero as an octal prefix.
BigInt parse_digits(std::string_view digits) {
  const std::size_t first = digits.find_first_not_of('0');
  if (first == std::string_view::npos) return BigInt(0);
  return BigInt(std::string(digits.substr(first)));
}

// [+-]?digits
std::optional<BigInt> parse_signed_integer(std::string_view s) {
  s = trim(s);
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (!all_digits(s)) return std::nullopt;
  const BigInt v = parse_digits(s);
  return negative ? BigInt(-v) : v;
}

std::optional<CanonicalAnswer> parse_fraction_command(std::string_view s,
                                                      bool negative) {
  std::string_view rest;
  for (std::string_view cmd : {"\\frac", "\\dfrac", "\\tfrac"}) {
    if (starts_with(s, cmd)) {
      rest = s.substr(cmd.size());
      break;
    }
  }
  if (rest.empty() || rest.front() != '{') return std::nullopt;
  const auto c1 = matching_brace(rest, 0);
  if (!c1 || *c1 + 1 >= rest.size() || rest[*c1 + 1] != '{')
    return std::nullopt;
  const auto c2 = matching_brace(rest, *c1 + 1);
  if (!c2 || *c2 != rest.size() - 1) return std::nullopt;
  const auto num = parse_signed_integer(rest.substr(1, *c1 - 1));
  const auto den = parse_signed_integer(rest.substr(*c1 + 2, *c2 - *c1 - 2));
  if (!num || !den || *den == 0) return std::nullopt;
  return CanonicalAnswer::rational(negative ? BigInt(-*num) : *num, *den);
}

std::optional<CanonicalAnswer> parse_numeric(std::string_view s) {
  bool negative = false;
  std::string_view body = s;
  if (!body.empty() && (body.front() == '+' || body.front() == '-')) {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  if (body.empty()) return std::nullopt;

  if (body.front() == '\\') return parse_fraction_command(body, negative);

  if (all_digits(body)) {
    const BigInt v = parse_digits(body);
    return CanonicalAnswer::integer(negative ? BigInt(-v) : v);
  }

  const std::size_t dot = body.find('.');
  if (dot != std::string_view::npos && body.find('.', dot + 1) == std::string_view::npos) {
    const std::string_view ip = body.substr(0, dot);
    const std::string_view fp = body.substr(dot + 1);
    const bool ip_ok = ip.empty() || all_digits(ip);
    const bool fp_ok = fp.empty() || all_digits(fp);
    if (ip_ok && fp_ok && !(ip.empty() && fp.empty())) {
      const BigInt unscaled = parse_digits(std::string(ip) + std::string(fp));
      return CanonicalAnswer::decimal(negative ? BigInt(-unscaled) : unscaled,
                                      static_cast<unsigned>(fp.size()));
    }
  }

  const std::size_t slash = body.find('/');
  if (slash != std::string_view::npos) {
    const std::string_view lhs = trim(body.substr(0, slash));
    if (!all_digits(lhs)) return std::nullopt;
    const auto den = parse_signed_integer(body.substr(slash + 1));
    if (!den || *den == 0) return std::nullopt;
    const BigInt num = parse_digits(lhs);
    return CanonicalAnswer::rational(negative ? BigInt(-num) : num, *den);
  }
  return std::nullopt;
}

BigInt pow10(unsigned n) {
  BigInt v = 1;
  for (unsigned i = 0; i < n; ++i) v *= 10;
  return v;
}

}  // namespace

CanonicalAnswer CanonicalAnswer::integer(BigInt value) {
  CanonicalAnswer a;
  a.kind_ = Kind::Integer;
  a.num_ = std::move(value);
  a.den_ = 1;
  return a;
}

CanonicalAnswer CanonicalAnswer::rational(BigInt num, BigInt den) {
  if (den == 0) throw InvalidInput("rational answer with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const BigInt g = gcd(abs(num), den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (den == 1) return integer(std::move(num));
  CanonicalAnswer a;
  a.kind_ = Kind::Rational;
  a.num_ = std::move(num);
  a.den_ = std::move(den);
  return a;
}

CanonicalAnswer CanonicalAnswer::decimal(BigInt unscaled, unsigned scale) {
  CanonicalAnswer exact = rational(unscaled, pow10(scale));
  CanonicalAnswer a;
  a.kind_ = Kind::Decimal;
  a.unscaled_ = std::move(unscaled);
  a.scale_ = scale;
  a.num_ = exact.num_;
  a.den_ = exact.den_;
  return a;
}

CanonicalAnswer CanonicalAnswer::symbolic(std::string text) {
  CanonicalAnswer a;
  a.kind_ = Kind::SymbolicText;
  a.text_ = std::move(text);
  return a;
}

std::string CanonicalAnswer::render() const {
  switch (kind_) {
    case Kind::Integer:
      return num_.str();
    case Kind::Rational:
      return num_.str() + "/" + den_.str();
    case Kind::Decimal: {
      const bool negative = unscaled_ < 0;
      std::string digits = BigInt(abs(unscaled_)).str();
      if (digits.size() <= scale_)
        digits.insert(0, scale_ + 1 - digits.size(), '0');
      const std::size_t point = digits.size() - scale_;
      return (negative ? "-" : "") + digits.substr(0, point) + "." +
             digits.substr(point);
    }
    case Kind::SymbolicText:
      return text_;
  }
  return text_;
}

CanonicalAnswer canonicalize(std::string_view answer) {
  std::string_view s = answer;
  while (strip_once(s)) {
  }
  if (s.empty()) throw InvalidInput("empty answer");
  if (auto numeric = parse_numeric(s)) return *std::move(numeric);
  return CanonicalAnswer::symbolic(collapse_whitespace(s));
}

bool answers_equal(const CanonicalAnswer& a, const CanonicalAnswer& b) {
  if (a.is_numeric() != b.is_numeric()) return false;
  if (a.is_numeric())
    return a.numerator() == b.numerator() &&
           a.denominator() == b.denominator();
  return a.text() == b.text();
}

CanonicalAnswer class_representative(const CanonicalAnswer& a) {
  if (!a.is_numeric()) return a;
  return CanonicalAnswer::rational(a.numerator(), a.denominator());
}

const char* kind_name(CanonicalAnswer::Kind kind) noexcept {
  switch (kind) {
    case CanonicalAnswer::Kind::Integer:
      return "integer";
    case CanonicalAnswer::Kind::Rational:
      return "rational";
    case CanonicalAnswer::Kind::Decimal:
      return "decimal";
    case CanonicalAnswer::Kind::SymbolicText:
      return "symbolic";
  }
  return "symbolic";
}

}  // namespace stc
