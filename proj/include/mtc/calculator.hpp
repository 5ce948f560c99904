// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace mtc::calc
{

using Rational = boost::multiprecision::cpp_rational;

class CalcError: public std::runtime_error
{
  public:
    enum class Kind
    {
        EmptyExpression,
        UnexpectedToken,
        UnbalancedParenthesis,
        TrailingInput,
        DivisionByZero,
        Overflow,
        NonRealResult,
    };

    CalcError(Kind kind, std::string detail, std::optional<std::size_t> position = std::nullopt);

    [[nodiscard]] Kind kind() const noexcept { return _kind; }
    [[nodiscard]] std::optional<std::size_t> position() const noexcept { return _position; }

  private:
    Kind _kind;
    std::optional<std::size_t> _position;
};

[[nodiscard]] std::string_view to_string(CalcError::Kind kind);

enum class BinaryOp
{
    Add,
    Sub,
    Mul,
    Div,
    Pow,
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Number
{
    Rational value;
};

struct Negate
{
    ExprPtr operand;
};

struct Binary
{
    BinaryOp op;
    ExprPtr lhs;
    ExprPtr rhs;
};

/// Immutable expression tree node.
struct Expr
{
    std::variant<Number, Negate, Binary> node;
};

[[nodiscard]] ExprPtr make_number(Rational value);
[[nodiscard]] ExprPtr make_negate(ExprPtr operand);
[[nodiscard]] ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);

struct Expression
{
    ExprPtr root;

    /// Fully parenthesized text that parses back to an equal-valued tree.
    [[nodiscard]] std::string render() const;
};

/// Precedence: ^ (right-assoc) > unary minus > * / > + -. The Unicode
/// operators ×, ÷ and − are accepted as aliases, as is ** for ^.
[[nodiscard]] Expression parse_expression(std::string_view text);

/// Strips noise that model-written formulas carry: '%' signs, thousands
/// separators ("1,000") and a trailing '='.
[[nodiscard]] std::string sanitize_formula(std::string_view text);

struct EvalOptions
{
    /// Maximum decimal digits in any intermediate numerator or denominator.
    std::size_t digit_budget = 4096;
};

struct CalcResult
{
    Rational value;
    /// False once a non-integer exponent forced floating point.
    bool exact = true;
    /// Integers verbatim, otherwise up to 10 significant digits.
    std::string rendered;

    /// Two-decimal form used when the value is injected into a reasoning trace.
    [[nodiscard]] std::string trace_form() const;
};

[[nodiscard]] CalcResult evaluate(const Expression& expression, const EvalOptions& options = {});

[[nodiscard]] std::string render_significant(const Rational& value, int significant_digits = 10);
[[nodiscard]] std::string render_two_decimals(const Rational& value);
[[nodiscard]] Rational rational_from_double(double value);

} // namespace mtc::calc
