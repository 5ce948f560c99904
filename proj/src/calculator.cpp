// SPDX-License-Identifier: Apache-2.0
#include <mtc/calculator.hpp>

#include <cctype>
#include <cmath>
#include <vector>

namespace mtc::calc
{

using boost::multiprecision::cpp_int;

CalcError::CalcError(Kind kind, std::string detail, std::optional<std::size_t> position):
    std::runtime_error(std::string(to_string(kind)) + ": " + detail), _kind(kind), _position(position)
{
}

std::string_view to_string(CalcError::Kind kind)
{
    using K = CalcError::Kind;
    switch (kind)
    {
        case K::EmptyExpression: return "EmptyExpression";
        case K::UnexpectedToken: return "UnexpectedToken";
        case K::UnbalancedParenthesis: return "UnbalancedParenthesis";
        case K::TrailingInput: return "TrailingInput";
        case K::DivisionByZero: return "DivisionByZero";
        case K::Overflow: return "Overflow";
        case K::NonRealResult: return "NonRealResult";
    }
    return "CalcError";
}

ExprPtr make_number(Rational value)
{
    return std::make_shared<const Expr>(Expr{Number{std::move(value)}});
}

ExprPtr make_negate(ExprPtr operand)
{
    return std::make_shared<const Expr>(Expr{Negate{std::move(operand)}});
}

ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs)
{
    return std::make_shared<const Expr>(Expr{Binary{op, std::move(lhs), std::move(rhs)}});
}

namespace
{

constexpr int kMaxNesting = 200;

// ASCII text plus, for each byte, its offset in the caller's original string.
struct Normalized
{
    std::string text;
    std::vector<std::size_t> origin;
};

Normalized normalize_operators(std::string_view in)
{
    struct Alias
    {
        std::string_view utf8;
        char ascii;
    };
    static constexpr Alias kAliases[] = {{"×", '*'}, {"÷", '/'}, {"−", '-'}};

    Normalized out;
    for (std::size_t i = 0; i < in.size();)
    {
        bool replaced = false;
        for (const auto& alias: kAliases)
        {
            if (in.substr(i, alias.utf8.size()) == alias.utf8)
            {
                out.text += alias.ascii;
                out.origin.push_back(i);
                i += alias.utf8.size();
                replaced = true;
                break;
            }
        }
        if (!replaced)
        {
            out.text += in[i];
            out.origin.push_back(i);
            ++i;
        }
    }
    out.origin.push_back(in.size());
    return out;
}

enum class Tok
{
    Number,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
};

struct Token
{
    Tok kind;
    std::size_t pos;
    Rational value;
};

Rational pow10(unsigned n)
{
    return Rational(boost::multiprecision::pow(cpp_int(10), n));
}

std::vector<Token> tokenize(const Normalized& src)
{
    const auto& s = src.text;
    auto at = [&](std::size_t i) { return src.origin[i]; };
    auto digit = [&](std::size_t i) { return i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); };

    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size())
    {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c)))
        {
            ++i;
            continue;
        }
        if (digit(i) || (c == '.' && digit(i + 1)))
        {
            auto start = i;
            cpp_int mantissa = 0;
            unsigned frac_digits = 0;
            while (digit(i))
                mantissa = mantissa * 10 + (s[i++] - '0');
            if (i < s.size() && s[i] == '.')
            {
                ++i;
                while (digit(i))
                {
                    mantissa = mantissa * 10 + (s[i++] - '0');
                    ++frac_digits;
                }
            }
            Rational value(mantissa);
            value /= pow10(frac_digits);
            if (i < s.size() && (s[i] == 'e' || s[i] == 'E'))
            {
                auto j = i + 1;
                bool negative = false;
                if (j < s.size() && (s[j] == '+' || s[j] == '-'))
                    negative = s[j++] == '-';
                if (digit(j))
                {
                    unsigned exponent = 0;
                    while (digit(j))
                    {
                        exponent = exponent * 10 + static_cast<unsigned>(s[j++] - '0');
                        if (exponent > 4096)
                            throw CalcError(CalcError::Kind::Overflow, "exponent literal too large", at(start));
                    }
                    value = negative ? value / pow10(exponent) : value * pow10(exponent);
                    i = j;
                }
            }
            out.push_back({Tok::Number, at(start), std::move(value)});
            continue;
        }
        Tok kind;
        switch (c)
        {
            case '+': kind = Tok::Plus; break;
            case '-': kind = Tok::Minus; break;
            case '/': kind = Tok::Slash; break;
            case '^': kind = Tok::Caret; break;
            case '(': kind = Tok::LParen; break;
            case ')': kind = Tok::RParen; break;
            case '*':
                if (i + 1 < s.size() && s[i + 1] == '*')
                {
                    out.push_back({Tok::Caret, at(i), {}});
                    i += 2;
                    continue;
                }
                kind = Tok::Star;
                break;
            default:
                throw CalcError(CalcError::Kind::UnexpectedToken, "unexpected '" + std::string(1, c) + "'", at(i));
        }
        out.push_back({kind, at(i), {}});
        ++i;
    }
    out.push_back({Tok::End, src.origin.back(), {}});
    return out;
}

class Parser
{
  public:
    explicit Parser(std::vector<Token> tokens): _tokens(std::move(tokens)) {}

    ExprPtr parse()
    {
        auto root = additive();
        const auto& t = peek();
        if (t.kind == Tok::RParen)
            throw CalcError(CalcError::Kind::UnbalancedParenthesis, "unmatched ')'", t.pos);
        if (t.kind != Tok::End)
            throw CalcError(CalcError::Kind::TrailingInput, "unexpected trailing input", t.pos);
        return root;
    }

  private:
    const Token& peek() const { return _tokens[_index]; }
    const Token& next() { return _tokens[_index++]; }

    ExprPtr additive()
    {
        auto lhs = multiplicative();
        while (peek().kind == Tok::Plus || peek().kind == Tok::Minus)
        {
            auto op = next().kind == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub;
            lhs = make_binary(op, std::move(lhs), multiplicative());
        }
        return lhs;
    }

    ExprPtr multiplicative()
    {
        auto lhs = unary();
        while (peek().kind == Tok::Star || peek().kind == Tok::Slash)
        {
            auto op = next().kind == Tok::Star ? BinaryOp::Mul : BinaryOp::Div;
            lhs = make_binary(op, std::move(lhs), unary());
        }
        return lhs;
    }

    ExprPtr unary()
    {
        if (peek().kind == Tok::Minus || peek().kind == Tok::Plus)
        {
            Depth guard(*this, peek().pos);
            bool negate = next().kind == Tok::Minus;
            auto operand = unary();
            return negate ? make_negate(std::move(operand)) : operand;
        }
        return power();
    }

    ExprPtr power()
    {
        auto base = primary();
        if (peek().kind == Tok::Caret)
        {
            Depth guard(*this, next().pos);
            return make_binary(BinaryOp::Pow, std::move(base), unary());
        }
        return base;
    }

    ExprPtr primary()
    {
        const auto& t = next();
        switch (t.kind)
        {
            case Tok::Number: return make_number(t.value);
            case Tok::LParen:
            {
                Depth guard(*this, t.pos);
                auto inner = additive();
                if (peek().kind != Tok::RParen)
                    throw CalcError(CalcError::Kind::UnbalancedParenthesis, "missing ')'", peek().pos);
                next();
                return inner;
            }
            case Tok::RParen: throw CalcError(CalcError::Kind::UnbalancedParenthesis, "unmatched ')'", t.pos);
            case Tok::End: throw CalcError(CalcError::Kind::UnexpectedToken, "unexpected end of input", t.pos);
            default: throw CalcError(CalcError::Kind::UnexpectedToken, "expected a number or '('", t.pos);
        }
    }

    struct Depth
    {
        Depth(Parser& p, std::size_t pos): parser(p)
        {
            if (++parser._depth > kMaxNesting)
                throw CalcError(CalcError::Kind::UnexpectedToken, "expression nested too deeply", pos);
        }
        ~Depth() { --parser._depth; }
        Parser& parser;
    };

    std::vector<Token> _tokens;
    std::size_t _index = 0;
    int _depth = 0;
};

/// Exact decimal digit count; the bit length settles all but the boundary cases.
std::size_t decimal_digits(const cpp_int& v)
{
    if (v == 0)
        return 1;
    const cpp_int magnitude = boost::multiprecision::abs(v);
    const auto bits = static_cast<double>(boost::multiprecision::msb(magnitude) + 1);
    const auto lower = static_cast<std::size_t>((bits - 1) * 0.30102999566398120) + 1;
    const auto upper = static_cast<std::size_t>(bits * 0.30102999566398120) + 1;
    if (lower == upper)
        return lower;
    return magnitude.str().size();
}

struct Value
{
    Rational r;
    bool exact = true;
};

class Evaluator
{
  public:
    explicit Evaluator(const EvalOptions& options): _options(options) {}

    Value eval(const Expr& e) const
    {
        return std::visit([this](const auto& node) { return eval_node(node); }, e.node);
    }

  private:
    Value checked(Value v) const
    {
        if (decimal_digits(boost::multiprecision::numerator(v.r)) > _options.digit_budget ||
            decimal_digits(boost::multiprecision::denominator(v.r)) > _options.digit_budget)
            throw CalcError(CalcError::Kind::Overflow,
                            "result exceeds " + std::to_string(_options.digit_budget) + " digits");
        return v;
    }

    Value eval_node(const Number& n) const { return checked({n.value, true}); }

    Value eval_node(const Negate& n) const
    {
        auto v = eval(*n.operand);
        return {-v.r, v.exact};
    }

    Value eval_node(const Binary& b) const
    {
        auto lhs = eval(*b.lhs);
        auto rhs = eval(*b.rhs);
        const bool exact = lhs.exact && rhs.exact;
        switch (b.op)
        {
            case BinaryOp::Add: return checked({lhs.r + rhs.r, exact});
            case BinaryOp::Sub: return checked({lhs.r - rhs.r, exact});
            case BinaryOp::Mul: return checked({lhs.r * rhs.r, exact});
            case BinaryOp::Div:
                if (rhs.r == 0)
                    throw CalcError(CalcError::Kind::DivisionByZero, "division by zero");
                return checked({lhs.r / rhs.r, exact});
            case BinaryOp::Pow: return power(lhs, rhs);
        }
        throw CalcError(CalcError::Kind::UnexpectedToken, "unknown operator");
    }

    Value power(const Value& base, const Value& exponent) const
    {
        const bool exact = base.exact && exponent.exact;
        if (boost::multiprecision::denominator(exponent.r) == 1)
        {
            const cpp_int& e = boost::multiprecision::numerator(exponent.r);
            if (base.r == 0)
            {
                if (e < 0)
                    throw CalcError(CalcError::Kind::DivisionByZero, "zero raised to a negative power");
                return {Rational(e == 0 ? 1 : 0), exact};
            }
            if (base.r == 1)
                return {Rational(1), exact};
            if (base.r == -1)
                return {Rational(boost::multiprecision::bit_test(e, 0) ? -1 : 1), exact};

            const cpp_int magnitude = boost::multiprecision::abs(e);
            const auto widest = std::max(decimal_digits(boost::multiprecision::numerator(base.r)),
                                         decimal_digits(boost::multiprecision::denominator(base.r)));
            // |base| >= 2 or <= 1/2 here, so the result has at least ~0.3 * |e| digits.
            if (magnitude > cpp_int(_options.digit_budget) * 4 ||
                (widest > 1 && magnitude * (widest - 1) > _options.digit_budget))
                throw CalcError(CalcError::Kind::Overflow, "power exceeds digit budget");

            auto n = magnitude.convert_to<unsigned>();
            Rational r(boost::multiprecision::pow(boost::multiprecision::numerator(base.r), n));
            r /= Rational(boost::multiprecision::pow(boost::multiprecision::denominator(base.r), n));
            if (e < 0)
                r = 1 / r;
            return checked({r, exact});
        }

        if (base.r < 0)
            throw CalcError(CalcError::Kind::NonRealResult, "negative base with non-integer exponent");
        if (base.r == 0)
        {
            if (exponent.r < 0)
                throw CalcError(CalcError::Kind::DivisionByZero, "zero raised to a negative power");
            return {Rational(0), false};
        }
        double out = std::pow(base.r.convert_to<double>(), exponent.r.convert_to<double>());
        if (!std::isfinite(out))
            throw CalcError(CalcError::Kind::Overflow, "power overflows floating point");
        return checked({rational_from_double(out), false});
    }

    const EvalOptions& _options;
};

cpp_int round_half_away(const cpp_int& num, const cpp_int& den)
{
    // den > 0
    cpp_int q = boost::multiprecision::abs(num) / den;
    cpp_int rem = boost::multiprecision::abs(num) % den;
    if (rem * 2 >= den)
        ++q;
    return num < 0 ? cpp_int(-q) : q;
}

std::string with_point(const cpp_int& scaled_abs, unsigned frac_digits)
{
    auto digits = scaled_abs.str();
    if (frac_digits == 0)
        return digits;
    if (digits.size() <= frac_digits)
        digits.insert(0, frac_digits - digits.size() + 1, '0');
    digits.insert(digits.size() - frac_digits, ".");
    while (digits.back() == '0')
        digits.pop_back();
    if (digits.back() == '.')
        digits.pop_back();
    return digits;
}

} // namespace

std::string Expression::render() const
{
    struct Renderer
    {
        std::string operator()(const Number& n) const
        {
            const auto& den = boost::multiprecision::denominator(n.value);
            const auto& num = boost::multiprecision::numerator(n.value);
            if (den == 1 && num >= 0)
                return num.str();
            if (den == 1)
                return "(-" + cpp_int(-num).str() + ")";
            return "(" + (num < 0 ? "-" + cpp_int(-num).str() : num.str()) + "/" + den.str() + ")";
        }
        std::string operator()(const Negate& n) const { return "(-" + render(*n.operand) + ")"; }
        std::string operator()(const Binary& b) const
        {
            static constexpr std::string_view kSymbols[] = {" + ", " - ", " * ", " / ", " ^ "};
            return "(" + render(*b.lhs) + std::string(kSymbols[static_cast<int>(b.op)]) + render(*b.rhs) + ")";
        }
        static std::string render(const Expr& e) { return std::visit(Renderer{}, e.node); }
    };
    return root ? Renderer::render(*root) : std::string();
}

Expression parse_expression(std::string_view text)
{
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
        throw CalcError(CalcError::Kind::EmptyExpression, "expression is empty");
    Parser parser(tokenize(normalize_operators(text)));
    return Expression{parser.parse()};
}

std::string sanitize_formula(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i)
    {
        char c = text[i];
        if (c == '%')
            continue;
        if (c == ',' && i > 0 && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
            std::isdigit(static_cast<unsigned char>(text[i + 1])))
            continue;
        out += c;
    }
    for (;;)
    {
        auto last = out.find_last_not_of(" \t\r\n");
        out.erase(last == std::string::npos ? 0 : last + 1);
        if (out.empty() || out.back() != '=')
            break;
        out.pop_back();
    }
    auto first = out.find_first_not_of(" \t\r\n");
    return first == std::string::npos ? std::string() : out.substr(first);
}

CalcResult evaluate(const Expression& expression, const EvalOptions& options)
{
    if (!expression.root)
        throw CalcError(CalcError::Kind::EmptyExpression, "expression is empty");
    Evaluator evaluator(options);
    auto v = evaluator.eval(*expression.root);
    CalcResult result;
    result.value = std::move(v.r);
    result.exact = v.exact;
    result.rendered = render_significant(result.value);
    return result;
}

std::string CalcResult::trace_form() const
{
    return render_two_decimals(value);
}

std::string render_significant(const Rational& value, int significant_digits)
{
    const auto& num = boost::multiprecision::numerator(value);
    const auto& den = boost::multiprecision::denominator(value);
    if (den == 1)
        return num.str();

    const cpp_int abs_num = boost::multiprecision::abs(num);
    const auto sign = num < 0 ? std::string("-") : std::string();

    // Integer-part digits are never dropped, even past the significant-digit limit.
    const cpp_int int_part = abs_num / den;
    const int int_digits = int_part == 0 ? 0 : static_cast<int>(int_part.str().size());
    if (int_digits >= significant_digits)
    {
        auto rounded = round_half_away(abs_num, den);
        return sign + rounded.str();
    }

    // Find the decimal position of the leading significant digit.
    int frac_digits;
    if (int_digits > 0)
    {
        frac_digits = significant_digits - int_digits;
    }
    else
    {
        int leading_zeros = 0;
        cpp_int probe = abs_num * 10;
        while (probe < den)
        {
            probe *= 10;
            ++leading_zeros;
        }
        frac_digits = leading_zeros + significant_digits;
    }
    const cpp_int scale = boost::multiprecision::pow(cpp_int(10), static_cast<unsigned>(frac_digits));
    auto scaled = round_half_away(abs_num * scale, den);
    auto text = with_point(scaled, static_cast<unsigned>(frac_digits));
    if (text == "0")
        return "0";
    return sign + text;
}

std::string render_two_decimals(const Rational& value)
{
    const auto& num = boost::multiprecision::numerator(value);
    const auto& den = boost::multiprecision::denominator(value);
    if (den == 1)
        return num.str();
    auto cents = round_half_away(num * 100, den);
    if (cents == 0)
        return render_significant(value);
    auto text = with_point(boost::multiprecision::abs(cents), 2);
    return (cents < 0 ? "-" : "") + text;
}

Rational rational_from_double(double value)
{
    if (value == 0.0)
        return Rational(0);
    int exponent = 0;
    double mantissa = std::frexp(value, &exponent);
    // 53-bit integer mantissa.
    auto scaled = static_cast<long long>(std::ldexp(mantissa, 53));
    exponent -= 53;
    Rational r{cpp_int(scaled)};
    if (exponent > 0)
        r *= Rational(cpp_int(1) << exponent);
    else if (exponent < 0)
        r /= Rational(cpp_int(1) << -exponent);
    return r;
}

} // namespace mtc::calc
