// SPDX-License-Identifier: Apache-2.0
#include <mtc/calculator.hpp>

#include "../support/expr_oracle.hpp"

#include <gtest/gtest.h>

#include <cstdlib>

using namespace mtc::calc;

namespace
{

Rational value_of(std::string_view text)
{
    return evaluate(parse_expression(text)).value;
}

CalcError::Kind error_kind(std::string_view text)
{
    try
    {
        (void)evaluate(parse_expression(text));
    }
    catch (const CalcError& e)
    {
        return e.kind();
    }
    ADD_FAILURE() << "expected an error for '" << text << "'";
    return CalcError::Kind::EmptyExpression;
}

mpq_class to_mpq(const Rational& r)
{
    mpq_class q(boost::multiprecision::numerator(r).str() + "/" + boost::multiprecision::denominator(r).str());
    q.canonicalize();
    return q;
}

ExprPtr to_expr(const mtc::testing::OracleNode& n)
{
    using Op = mtc::testing::OracleNode::Op;
    switch (n.op)
    {
        case Op::Leaf: return make_number(Rational(n.leaf));
        case Op::Neg: return make_negate(to_expr(*n.lhs));
        case Op::Add: return make_binary(BinaryOp::Add, to_expr(*n.lhs), to_expr(*n.rhs));
        case Op::Sub: return make_binary(BinaryOp::Sub, to_expr(*n.lhs), to_expr(*n.rhs));
        case Op::Mul: return make_binary(BinaryOp::Mul, to_expr(*n.lhs), to_expr(*n.rhs));
        case Op::Div: return make_binary(BinaryOp::Div, to_expr(*n.lhs), to_expr(*n.rhs));
        case Op::Pow: return make_binary(BinaryOp::Pow, to_expr(*n.lhs), to_expr(*n.rhs));
    }
    return nullptr;
}

const Binary& as_binary(const ExprPtr& e)
{
    return std::get<Binary>(e->node);
}

Rational leaf(const ExprPtr& e)
{
    return std::get<Number>(e->node).value;
}

} // namespace

TEST(ParseExpression, SingleOperator)
{
    auto e = parse_expression("2 * 62");
    const auto& b = as_binary(e.root);
    EXPECT_EQ(b.op, BinaryOp::Mul);
    EXPECT_EQ(leaf(b.lhs), 2);
    EXPECT_EQ(leaf(b.rhs), 62);
}

TEST(ParseExpression, LeftAssociativeChain)
{
    // ((12 * 3) / 342) * 100
    auto e = parse_expression("12 * 3 / 342 * 100");
    const auto& top = as_binary(e.root);
    EXPECT_EQ(top.op, BinaryOp::Mul);
    EXPECT_EQ(leaf(top.rhs), 100);
    const auto& mid = as_binary(top.lhs);
    EXPECT_EQ(mid.op, BinaryOp::Div);
    EXPECT_EQ(leaf(mid.rhs), 342);
    const auto& inner = as_binary(mid.lhs);
    EXPECT_EQ(inner.op, BinaryOp::Mul);
    EXPECT_EQ(leaf(inner.lhs), 12);
    EXPECT_EQ(leaf(inner.rhs), 3);
}

TEST(ParseExpression, PowerIsRightAssociative)
{
    auto e = parse_expression("2 ^ 3 ^ 2");
    const auto& top = as_binary(e.root);
    EXPECT_EQ(top.op, BinaryOp::Pow);
    EXPECT_EQ(leaf(top.lhs), 2);
    const auto& right = as_binary(top.rhs);
    EXPECT_EQ(right.op, BinaryOp::Pow);
    EXPECT_EQ(value_of("2 ^ 3 ^ 2"), 512);
}

TEST(ParseExpression, Precedence)
{
    EXPECT_EQ(value_of("-2 ^ 2"), -4);
    EXPECT_EQ(value_of("2 ^ -1"), Rational(1, 2));
    EXPECT_EQ(value_of("2 + 3 * 4"), 14);
    EXPECT_EQ(value_of("(2 + 3) * 4"), 20);
    EXPECT_EQ(value_of("-3 * -3"), 9);
    EXPECT_EQ(value_of("10 - 4 - 3"), 3);
    EXPECT_EQ(value_of("2 ** 10"), 1024);
}

TEST(ParseExpression, UnicodeOperators)
{
    EXPECT_EQ(value_of("2 × 62"), 124);
    EXPECT_EQ(value_of("12 × 3 ÷ 342 × 100"), Rational(200, 19));
    EXPECT_EQ(value_of("10 − 4"), 6);
}

TEST(ParseExpression, DecimalLiteralsAreExact)
{
    EXPECT_EQ(value_of("0.1 + 0.2"), Rational(3, 10));
    EXPECT_EQ(value_of(".5 * 4"), 2);
    EXPECT_EQ(value_of("1.5e2"), 150);
    EXPECT_EQ(value_of("25e-2"), Rational(1, 4));
}

TEST(ParseExpression, ErrorKinds)
{
    using K = CalcError::Kind;
    EXPECT_EQ(error_kind(""), K::EmptyExpression);
    EXPECT_EQ(error_kind("  "), K::EmptyExpression);
    EXPECT_EQ(error_kind("2 +"), K::UnexpectedToken);
    EXPECT_EQ(error_kind("2 * x"), K::UnexpectedToken);
    EXPECT_EQ(error_kind("(2 + 3"), K::UnbalancedParenthesis);
    EXPECT_EQ(error_kind("2 + 3)"), K::UnbalancedParenthesis);
    EXPECT_EQ(error_kind("2 3"), K::TrailingInput);
}

TEST(ParseExpression, ErrorPositionsPointIntoTheInput)
{
    try
    {
        (void)parse_expression("2 × x");
        FAIL();
    }
    catch (const CalcError& e)
    {
        EXPECT_EQ(e.kind(), CalcError::Kind::UnexpectedToken);
        EXPECT_EQ(e.position(), 5u); // "×" is two bytes
    }
}

TEST(ParseExpression, DeepNestingIsRejected)
{
    std::string deep(500, '(');
    deep += "1" + std::string(500, ')');
    EXPECT_THROW((void)parse_expression(deep), CalcError);
}

TEST(Evaluate, Examples)
{
    EXPECT_EQ(value_of("2 * 62"), 124);
    EXPECT_EQ(evaluate(parse_expression("2 * 62")).rendered, "124");

    auto r = evaluate(parse_expression("12 * 3 / 342 * 100"));
    EXPECT_EQ(r.value, Rational(200, 19));
    EXPECT_EQ(r.trace_form(), "10.53");
    EXPECT_EQ(r.rendered, "10.52631579");
    EXPECT_TRUE(r.exact);

    EXPECT_EQ(value_of("0 + 0"), 0);
    EXPECT_EQ(error_kind("1 / 0"), CalcError::Kind::DivisionByZero);
}

TEST(Evaluate, PowerEdgeCases)
{
    using K = CalcError::Kind;
    EXPECT_EQ(value_of("0 ^ 0"), 1);
    EXPECT_EQ(error_kind("0 ^ -1"), K::DivisionByZero);
    EXPECT_EQ(value_of("(-1) ^ 1000001"), -1);
    EXPECT_EQ(value_of("1 ^ 99999999999"), 1);
    EXPECT_EQ(error_kind("(-8) ^ 0.5"), K::NonRealResult);
    EXPECT_EQ(error_kind("10 ^ 5000"), K::Overflow);
    EXPECT_EQ(error_kind("2 ^ 99999999999"), K::Overflow);

    auto root = evaluate(parse_expression("2 ^ 0.5"));
    EXPECT_FALSE(root.exact);
    EXPECT_EQ(root.rendered, "1.414213562");
    EXPECT_EQ(root.trace_form(), "1.41");
}

TEST(Evaluate, DigitBudgetIsConfigurable)
{
    EvalOptions tight;
    tight.digit_budget = 10;
    EXPECT_THROW((void)evaluate(parse_expression("99999 * 99999 * 99999"), tight), CalcError);
    EXPECT_NO_THROW((void)evaluate(parse_expression("99999 * 99999"), tight));
}

TEST(Rendering, SignificantDigits)
{
    EXPECT_EQ(render_significant(Rational(1, 3)), "0.3333333333");
    EXPECT_EQ(render_significant(Rational(-2, 3)), "-0.6666666667");
    EXPECT_EQ(render_significant(Rational(1, 8)), "0.125");
    EXPECT_EQ(render_significant(Rational(1, 3000)), "0.0003333333333");
    EXPECT_EQ(render_significant(Rational(123456789012LL, 10)), "12345678901");
    EXPECT_EQ(render_significant(Rational(-5)), "-5");
}

TEST(Rendering, TwoDecimals)
{
    EXPECT_EQ(render_two_decimals(Rational(200, 19)), "10.53");
    EXPECT_EQ(render_two_decimals(Rational(5, 2)), "2.5");
    EXPECT_EQ(render_two_decimals(Rational(-1, 3)), "-0.33");
    EXPECT_EQ(render_two_decimals(Rational(1, 1000)), "0.001");
    EXPECT_EQ(render_two_decimals(Rational(1999, 1000)), "2");
    EXPECT_EQ(render_two_decimals(Rational(148)), "148");
}

TEST(Rendering, RoundTripWithinTolerance)
{
    mtc::testing::TreeGenerator gen(99);
    int checked = 0;
    for (int i = 0; i < 400; ++i)
    {
        auto tree = gen.generate(4);
        auto exact = mtc::testing::oracle_eval(*tree);
        if (!exact || *exact == 0)
            continue;
        auto result = evaluate(Expression{to_expr(*tree)});
        double back = std::strtod(result.rendered.c_str(), nullptr);
        double truth = exact->get_d();
        EXPECT_LT(std::abs(back - truth), 1e-9 * std::abs(truth)) << result.rendered;
        ++checked;
    }
    EXPECT_GT(checked, 200);
}

TEST(Sanitize, StripsNoise)
{
    EXPECT_EQ(sanitize_formula("1,000 * 2 ="), "1000 * 2");
    EXPECT_EQ(sanitize_formula("  50% * 2 = "), "50 * 2");
    EXPECT_EQ(sanitize_formula("3 * 16 / 160 * 100"), "3 * 16 / 160 * 100");
    EXPECT_EQ(sanitize_formula("="), "");
}

TEST(Oracle, RandomTreesMatchGmp)
{
    mtc::testing::TreeGenerator gen(2024);
    int compared = 0;
    for (int i = 0; i < 300; ++i)
    {
        auto tree = gen.generate(6);
        auto expected = mtc::testing::oracle_eval(*tree);
        if (!expected)
            continue;
        auto text = mtc::testing::oracle_text(*tree);
        auto parsed = evaluate(parse_expression(text));
        ASSERT_EQ(to_mpq(parsed.value), *expected) << text;

        Expression direct{to_expr(*tree)};
        auto via_tree = evaluate(direct);
        ASSERT_EQ(via_tree.value, parsed.value);
        ASSERT_EQ(evaluate(parse_expression(direct.render())).value, via_tree.value) << direct.render();
        ++compared;
    }
    EXPECT_GT(compared, 200);
}

TEST(Oracle, AdditionCommutes)
{
    std::mt19937 rng(5);
    std::uniform_int_distribution<long> dist(-1'000'000, 1'000'000);
    for (int i = 0; i < 200; ++i)
    {
        auto a = std::to_string(dist(rng));
        auto b = std::to_string(dist(rng));
        EXPECT_EQ(value_of(a + " + " + b), value_of(b + " + " + a));
    }
}
