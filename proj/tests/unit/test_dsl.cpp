#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "factorlab/dsl.hpp"
#include "factorlab/rng.hpp"
#include "fixtures.hpp"
#include "random_specs.hpp"

using namespace factorlab;
using namespace factorlab::dsl;

namespace {

Grid eval(std::string_view text, const Panel& p) { return evaluate(parse(text, "f"), p).values; }

std::vector<double> section(const Grid& g, std::size_t t) { return {g.row(t).begin(), g.row(t).end()}; }

}  // namespace

TEST_CASE("parse builds the expected tree") {
    const auto e = parse_expression("mean(close,5) - mean(close,20)");
    const auto want = Expr::rolling(RollOp::mean, Expr::col(Field::close), 5) -
                      Expr::rolling(RollOp::mean, Expr::col(Field::close), 20);
    CHECK(e == want);

    const auto c = parse_expression("corr(diff(close), volume, 20)");
    CHECK(c == Expr::corr(Expr::diff(Expr::col(Field::close)), Expr::col(Field::volume), 20));
}

TEST_CASE("precedence and associativity") {
    CHECK(parse_expression("1 + 2 * close") ==
          Expr::literal(1) + Expr::literal(2) * Expr::col(Field::close));
    CHECK(parse_expression("close - open - high") ==
          (Expr::col(Field::close) - Expr::col(Field::open)) - Expr::col(Field::high));
    CHECK(parse_expression("close / (open / high)") ==
          Expr::col(Field::close) / (Expr::col(Field::open) / Expr::col(Field::high)));
    CHECK(parse_expression("-close * 2") == (-Expr::col(Field::close)) * Expr::literal(2));
}

TEST_CASE("parse errors") {
    CHECK_THROWS_WITH_AS(parse_expression("lead(close,1)"), doctest::Contains("unknown identifier 'lead'"), ParseError);
    CHECK_THROWS_WITH_AS(parse_expression("mean(close)"), doctest::Contains("arity"), ParseError);
    CHECK_THROWS_WITH_AS(parse_expression("corr(close, open)"), doctest::Contains("arity"), ParseError);
    CHECK_THROWS_WITH_AS(parse_expression("mean(close, 0)"), doctest::Contains(">= 1"), ParseError);
    CHECK_THROWS_WITH_AS(parse_expression("lag(close, -1)"), doctest::Contains(">= 1"), ParseError);
    CHECK_THROWS_WITH_AS(parse_expression("mean(close, 2.5)"), doctest::Contains("integer"), ParseError);
    CHECK_THROWS_AS(parse_expression("replay"), ParseError);
    try {
        parse_expression("close + * open");
        FAIL("expected a syntax error");
    } catch (const ParseError& e) {
        CHECK(e.position() == 8);
    }
}

TEST_CASE("replay column needs opt-in") {
    ParseOptions opt;
    opt.allow_replay = true;
    CHECK(parse_expression("replay", opt) == Expr::col(Field::replay));
}

TEST_CASE("canonical printer") {
    CHECK(print(parse_expression("mean(close,5)/std(close , 20)")) == "mean(close, 5) / std(close, 20)");
    CHECK(print(parse_expression("close - (open - high)")) == "close - (open - high)");
    CHECK(print(parse_expression("(close - open) - high")) == "close - open - high");
    CHECK(print(-(Expr::col(Field::close) + Expr::col(Field::open))) == "-(close + open)");
    CHECK(print(parse_expression("-2 * close")) == "-2 * close");
}

TEST_CASE("print then parse is identity on random trees") {
    auto rng = Xoshiro256::stream(7, 1);
    for (int k = 0; k < 500; ++k) {
        const auto e = fixtures::random_expr(rng, 4);
        const auto text = print(e);
        INFO(text);
        CHECK(parse_expression(text) == e);
    }
}

TEST_CASE("raw escape syntax round trips illegal offsets") {
    const auto e = Expr::lag(Expr::col(Field::close), -1);
    CHECK(print(e) == "@lag(close, -1)");
    CHECK(parse_expression("@lag(close, -1)") == e);
    CHECK(parse_expression("@mean(close, 0)") == Expr::rolling(RollOp::mean, Expr::col(Field::close), 0));
}

TEST_CASE("static lookahead check") {
    CHECK(check_lookahead(parse_expression("mean(close,5)")).pass);

    const auto lag0 = check_lookahead(Expr::lag(Expr::col(Field::close), 0));
    CHECK(lag0.pass);

    const auto bad = check_lookahead(Expr::col(Field::open) + Expr::lag(Expr::col(Field::close), -1));
    CHECK_FALSE(bad.pass);
    REQUIRE(bad.offenders().size() == 1);
    CHECK(bad.offenders()[0].node == "@lag(close, -1)");
    CHECK(bad.offenders()[0].horizon == -1);

    CHECK_FALSE(check_lookahead(Expr::rolling(RollOp::sum, Expr::col(Field::close), 0)).pass);

    const auto rep = check_lookahead(parse_expression("corr(diff(close), volume, 20) + lag(open, 3)"));
    CHECK(rep.pass);
    CHECK(rep.nodes.size() == 3);
}

TEST_CASE("evaluate rejects lookahead") {
    const auto p = fixtures::from_closes({{100}, {110}});
    CHECK_THROWS_AS(evaluate(FactorSpec{"x", Expr::lag(Expr::col(Field::close), -1)}, p), LookaheadError);
}

TEST_CASE("lag") {
    const auto p = fixtures::from_closes({{100}, {110}, {121}});
    const auto g = eval("lag(close, 1)", p);
    CHECK(is_gap(g(0, 0)));
    CHECK(g(1, 0) == 100.0);
    CHECK(g(2, 0) == 110.0);
}

TEST_CASE("czs of 1, 2, 3") {
    std::vector<double> x = {1, 2, 3};
    zscore_section(x);
    // population sd of {1,2,3} is sqrt(2/3); 1 / sqrt(2/3) = 1.2247448713915890
    CHECK(x[0] == doctest::Approx(-1.224744871391589).epsilon(1e-14));
    CHECK(x[1] == 0.0);
    CHECK(x[2] == doctest::Approx(1.224744871391589).epsilon(1e-14));
}

TEST_CASE("czs and crank degenerate sections") {
    std::vector<double> same = {4, 4, 4};
    zscore_section(same);
    CHECK(same == std::vector<double>{0, 0, 0});

    std::vector<double> one = {9};
    rank_section(one);
    CHECK(one[0] == 0.5);

    const double nan = std::nan("");
    std::vector<double> ties = {3, 1, 3, nan, 2};
    rank_section(ties);
    CHECK(ties[1] == 0.0);
    CHECK(ties[4] == doctest::Approx(1.0 / 3.0));
    CHECK(ties[0] == doctest::Approx(5.0 / 6.0));
    CHECK(ties[2] == doctest::Approx(5.0 / 6.0));
    CHECK(is_gap(ties[3]));
}

TEST_CASE("czs moments and affine invariance") {
    auto rng = Xoshiro256::stream(5, 0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(12);
        for (auto& v : x) v = rng.normal();
        auto z = x;
        zscore_section(z);
        double mean = 0, sq = 0;
        for (double v : z) mean += v;
        mean /= double(z.size());
        for (double v : z) sq += (v - mean) * (v - mean);
        CHECK(std::abs(mean) <= 1e-9);
        CHECK(std::abs(std::sqrt(sq / double(z.size())) - 1.0) <= 1e-9);

        const double a = rng.uniform(0.1, 10), b = rng.uniform(-5, 5);
        auto y = x;
        for (auto& v : y) v = a * v + b;
        zscore_section(y);
        for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(y[k] - z[k]) <= 1e-9);
    }
}

TEST_CASE("crank invariance under increasing transforms") {
    auto rng = Xoshiro256::stream(6, 0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(15);
        for (auto& v : x) v = std::floor(rng.uniform(-4, 4));  // ties included
        auto r = x;
        rank_section(r);
        auto y = x;
        for (auto& v : y) v = std::exp(v) * 3.0 + v * v * v;
        rank_section(y);
        CHECK(r == y);
        for (double v : r) CHECK((v >= 0.0 && v <= 1.0));
    }
}

TEST_CASE("rolling operators") {
    const auto p = fixtures::from_closes({{1}, {2}, {4}, {8}, {16}});
    const auto mean = eval("mean(close, 3)", p);
    CHECK(is_gap(mean(1, 0)));
    CHECK(mean(2, 0) == doctest::Approx(7.0 / 3.0));
    CHECK(mean(4, 0) == doctest::Approx(28.0 / 3.0));

    const auto sd = eval("std(close, 2)", p);
    CHECK(sd(1, 0) == doctest::Approx(std::sqrt(0.5)));  // sample sd of {1, 2}

    CHECK(eval("sum(close, 2)", p)(4, 0) == 24.0);
    CHECK(eval("min(close, 3)", p)(4, 0) == 4.0);
    CHECK(eval("max(close, 3)", p)(3, 0) == 8.0);
    CHECK(eval("diff(close)", p)(3, 0) == 4.0);

    // ret is a gap on the first traded date, so a window touching it is a gap
    const auto mret = eval("mean(ret, 2)", p);
    CHECK(is_gap(mret(1, 0)));
    CHECK(mret(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("rolling windows follow each instrument's traded dates") {
    const double nan = std::nan("");
    const auto p = fixtures::from_closes({{1, 1}, {2, nan}, {3, 5}, {4, 7}});
    const auto g = eval("mean(close, 2)", p);
    CHECK(is_gap(g(1, 1)));
    CHECK(g(2, 1) == 3.0);
    CHECK(g(3, 1) == 6.0);
}

TEST_CASE("rolling correlation") {
    const auto p = fixtures::from_closes({{1, 5}, {3, 5}, {2, 5}, {7, 5}, {4, 5}, {6, 5}});
    const auto self = eval("corr(close, close, 5)", p);
    CHECK(self(4, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(self(5, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(is_gap(self(4, 1)));  // constant window
    const auto neg = eval("corr(close, -close, 5)", p);
    CHECK(neg(5, 0) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("division by zero and log of non-positive give gaps") {
    const auto p = fixtures::from_closes({{100, 200}, {100, 210}});
    const auto d = eval("close / diff(close)", p);
    CHECK(is_gap(d(1, 0)));
    CHECK(d(1, 1) == 21.0);
    const auto l = eval("log(diff(close))", p);
    CHECK(is_gap(l(1, 0)));
    CHECK(l(1, 1) == doctest::Approx(std::log(10.0)));
    const auto s = eval("sign(diff(close)) + abs(-close)", p);
    CHECK(s(1, 0) == 100.0);
    CHECK(s(1, 1) == 211.0);
}

TEST_CASE("cross-sectional operators in evaluation") {
    const auto p = fixtures::from_closes({{1, 2, 3}, {3, 3, 3}});
    const auto z = eval("czs(close)", p);
    CHECK(z(0, 0) == doctest::Approx(-1.224744871391589));
    CHECK(section(z, 1) == std::vector<double>{0, 0, 0});
    const auto r = eval("crank(close)", p);
    CHECK(section(r, 0) == std::vector<double>{0, 0.5, 1});
    CHECK(section(r, 1) == std::vector<double>{0.5, 0.5, 0.5});
}

TEST_CASE("literal factors are defined only on traded cells") {
    const double nan = std::nan("");
    const auto p = fixtures::from_closes({{1, nan}, {2, 3}});
    const auto g = eval("1.0", p);
    CHECK(g(0, 0) == 1.0);
    CHECK(is_gap(g(0, 1)));
    CHECK(g(1, 1) == 1.0);
}

TEST_CASE("perturbation test") {
    const auto p = fixtures::synthetic(21, 8, 40);
    const Date cut = p.calendar()[20];
    CHECK(perturbation_no_lookahead_test(parse("mean(close, 5) - mean(close, 20)"), p, cut, 1));
    CHECK(perturbation_no_lookahead_test(parse("1.0"), p, cut, 1));
    CHECK(perturbation_no_lookahead_test(parse("czs(corr(diff(close), volume, 10))"), p, cut, 1));
    CHECK_FALSE(perturbation_no_lookahead_test(Expr::lag(Expr::col(Field::close), -1), p, cut, 1));
    CHECK_FALSE(perturbation_no_lookahead_test(Expr::lag(Expr::col(Field::ret), -1), p, cut, 1));
    CHECK(perturbation_no_lookahead_test(Expr::lag(Expr::col(Field::close), 0), p, cut, 1));
}

TEST_CASE("rolling values are shift-equivariant once the window fits") {
    const auto p = fixtures::synthetic(22, 6, 50);
    const std::size_t d = 15;
    const auto s = slice(p, p.calendar()[d], p.calendar().back());
    for (const char* text : {"mean(close, 5) - std(high, 4)", "czs(max(volume, 6) / amount)", "lag(min(low, 3), 2)"}) {
        const auto full = eval(text, p);
        const auto part = eval(text, s);
        INFO(text);
        for (std::size_t t = 8; t < s.n_dates(); ++t) {
            for (std::size_t i = 0; i < p.n_instruments(); ++i) CHECK(part(t, i) == full(t + d, i));
        }
    }
}
