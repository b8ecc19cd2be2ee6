#include <gtest/gtest.h>

#include <cmath>

#include "diffgeo/expression.hpp"

using diffgeo::Error;
using diffgeo::Expression;
using diffgeo::Vec;

namespace {

Vec pt(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

TEST(Expression, ArithmeticAndPrecedence) {
    auto e = Expression::parse("1 + 2*3 - 4/2", {});
    EXPECT_DOUBLE_EQ(e.eval(Vec{}), 5.0);
    EXPECT_DOUBLE_EQ(Expression::parse("2^3^2", {}).eval(Vec{}), 512.0);  // right assoc
    EXPECT_DOUBLE_EQ(Expression::parse("-2^2", {}).eval(Vec{}), -4.0);
    EXPECT_DOUBLE_EQ(Expression::parse("2^-2", {}).eval(Vec{}), 0.25);
    EXPECT_DOUBLE_EQ(Expression::parse("(1+2)*(3+4)", {}).eval(Vec{}), 21.0);
}

TEST(Expression, CoordinatesAndFunctions) {
    auto e = Expression::parse("1 + 0.3*sin(x)*sin(y)", {"x", "y"});
    EXPECT_NEAR(e.eval(pt(0.7, 1.2)), 1.0 + 0.3 * std::sin(0.7) * std::sin(1.2), 1e-15);
    auto f = Expression::parse("exp(log(x))", {"x", "y"});
    EXPECT_NEAR(f.eval(pt(2.5, 0.0)), 2.5, 1e-14);
    auto g = Expression::parse("cos(pi)", {});
    EXPECT_DOUBLE_EQ(g.eval(Vec{}), -1.0);
    auto h = Expression::parse("e^2", {});
    EXPECT_NEAR(h.eval(Vec{}), std::exp(2.0), 1e-13);
}

TEST(Expression, ScientificLiterals) {
    EXPECT_DOUBLE_EQ(Expression::parse("1e-3", {}).eval(Vec{}), 1e-3);
    EXPECT_DOUBLE_EQ(Expression::parse("2.5E2", {}).eval(Vec{}), 250.0);
    EXPECT_NEAR(Expression::parse("2*e", {}).eval(Vec{}), 2.0 * std::exp(1.0), 1e-14);
    // a bare 'e' after digits is not an exponent marker
    EXPECT_THROW(Expression::parse("2e", {}), Error);
}

TEST(Expression, Errors) {
    EXPECT_THROW(Expression::parse("x + ", {"x"}), Error);
    EXPECT_THROW(Expression::parse("bogus(3)", {}), Error);
    EXPECT_THROW(Expression::parse("sin 3", {}), Error);
    EXPECT_THROW(Expression::parse("(1+2", {}), Error);
    EXPECT_THROW(Expression::parse("1 2", {}), Error);
    EXPECT_THROW(Expression::parse("z", {"x", "y"}), Error);
}

}  // namespace
