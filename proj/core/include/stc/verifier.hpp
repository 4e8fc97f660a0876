#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <string_view>

namespace stc {

using BigInt = boost::multiprecision::cpp_int;

// Exact, normalized form of a final answer.
//
// Numeric kinds hold exact values: Integer, Rational (lowest terms, positive
// denominator, never 1), and Decimal (unscaled integer plus the number of
// written fractional digits, so "0.50" keeps its precision). Anything else
// is SymbolicText: outer delimiters stripped, whitespace runs collapsed,
// case preserved.
class CanonicalAnswer {
 public:
  enum class Kind { Integer, Rational, Decimal, SymbolicText };

  // The integer 0.
  CanonicalAnswer() = default;

  static CanonicalAnswer integer(BigInt value);
  // Reduces to lowest terms; a unit denominator yields an Integer.
  // Throws InvalidInput on a zero denominator.
  static CanonicalAnswer rational(BigInt num, BigInt den);
  static CanonicalAnswer decimal(BigInt unscaled, unsigned scale);
  static CanonicalAnswer symbolic(std::string text);

  Kind kind() const noexcept { return kind_; }
  bool is_numeric() const noexcept { return kind_ != Kind::SymbolicText; }

  // Exact value as a reduced fraction. Only meaningful for numeric kinds.
  const BigInt& numerator() const noexcept { return num_; }
  const BigInt& denominator() const noexcept { return den_; }
  unsigned scale() const noexcept { return scale_; }
  const std::string& text() const noexcept { return text_; }

  // Textual form that canonicalizes back to an identical answer.
  std::string render() const;

  // Structural identity (same kind, value, precision, text). Use
  // answers_equal() for verifier equivalence.
  bool operator==(const CanonicalAnswer&) const = default;

 private:
  Kind kind_ = Kind::Integer;
  BigInt unscaled_{0};  // Decimal digits without the point
  BigInt num_{0};
  BigInt den_{1};
  unsigned scale_ = 0;
  std::string text_;
};

// Rule-based canonicalization. Strips whitespace, $...$, \(...\), \[...\],
// an enclosing \boxed{...} or {...}; parses \frac{a}{b} (and \dfrac,
// \tfrac), a/b, signed integers and finite decimals exactly.
// Throws InvalidInput when nothing remains after stripping.
CanonicalAnswer canonicalize(std::string_view answer);

// Exact value equality across numeric kinds; normalized string equality for
// SymbolicText; numeric never equals symbolic.
bool answers_equal(const CanonicalAnswer& a, const CanonicalAnswer& b);

// Representative of the equivalence class under answers_equal: numeric
// answers become Integer or Rational, symbolic answers are unchanged.
CanonicalAnswer class_representative(const CanonicalAnswer& a);

const char* kind_name(CanonicalAnswer::Kind kind) noexcept;

}  // namespace stc
