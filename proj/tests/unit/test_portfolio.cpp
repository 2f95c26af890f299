#include <doctest.h>

#include <cmath>

#include "factorlab/metrics.hpp"
#include "factorlab/portfolio.hpp"
#include "factorlab/rng.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace factorlab;
using namespace factorlab::portfolio;
using fixtures::day;

namespace {

BacktestConfig config(Mode mode, double fee = 0.0, double fraction = 0.10) {
    BacktestConfig c;
    c.mode = mode;
    c.fee_rate = fee;
    c.fraction = fraction;
    return c;
}

// Higher close implies higher next return: instrument i grows at 0.1% * i per day.
Panel momentum_panel(std::size_t N, std::size_t T) {
    std::vector<std::vector<double>> closes(T, std::vector<double>(N));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < N; ++i) closes[t][i] = (10.0 + double(i)) * std::pow(1.0 + 0.001 * double(i), double(t));
    }
    return fixtures::from_closes(closes);
}

std::vector<double> row_of(const Grid& g, std::size_t t) { return {g.row(t).begin(), g.row(t).end()}; }

}  // namespace

TEST_CASE("decile weights: ten values, long-short") {
    const std::vector<double> v = {3, 1, 4, 10, 5, 9, 2, 6, 8, 7};
    const auto w = decile_weights(v, Mode::long_short, 0.10).weights;
    CHECK(w[3] == 1.0);
    CHECK(w[1] == -1.0);
    double gross = 0;
    for (double x : w) gross += std::fabs(x);
    CHECK(gross == 2.0);
}

TEST_CASE("decile weights: 25 instruments long-only") {
    std::vector<double> v(25);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(i);
    const auto w = decile_weights(v, Mode::long_only, 0.10).weights;
    CHECK(w[24] == 0.5);
    CHECK(w[23] == 0.5);
    double sum = 0;
    for (double x : w) sum += x;
    CHECK(sum == 1.0);
}

TEST_CASE("decile weights: ties break by identifier") {
    const std::vector<double> v(5, 2.0);
    const auto w = decile_weights(v, Mode::long_short, 0.10).weights;
    CHECK(w == std::vector<double>{1.0, -1.0, 0.0, 0.0, 0.0});
}

TEST_CASE("decile weights: gaps, empties and bad fractions") {
    const double nan = std::nan("");
    CHECK(decile_weights(std::vector<double>{nan, nan}, Mode::long_only).flat());
    CHECK(decile_weights(std::vector<double>{nan, 1.0}, Mode::long_short).flat());
    CHECK(decile_weights(std::vector<double>{nan, 1.0}, Mode::long_only).weights == std::vector<double>{0, 1});
    CHECK_THROWS(decile_weights(std::vector<double>{1.0}, Mode::long_only, 0.0));
    CHECK_THROWS(decile_weights(std::vector<double>{1.0}, Mode::long_only, 0.6));
}

TEST_CASE("weight vector invariants on random sections") {
    auto rng = Xoshiro256::stream(1, 2);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t N = 2 + rng.next() % 40;
        std::vector<double> v(N);
        for (auto& x : v) x = std::floor(rng.uniform(0, 6));
        const double fraction = rng.uniform(0.01, 0.5);
        for (Mode m : {Mode::long_short, Mode::long_only}) {
            const auto w = decile_weights(v, m, fraction).weights;
            double pos = 0, neg = 0;
            for (double x : w) (x > 0 ? pos : neg) += x;
            CHECK(std::abs(pos - 1.0) <= 1e-9);
            if (m == Mode::long_short) CHECK(std::abs(neg + 1.0) <= 1e-9);
            else CHECK(neg == 0.0);
        }
    }
}

TEST_CASE("raising a top-decile value keeps weights") {
    std::vector<double> v = {5, 1, 9, 3, 7, 2, 8, 4, 6, 0};
    const auto before = decile_weights(v, Mode::long_short, 0.2).weights;
    v[2] = 100;
    CHECK(decile_weights(v, Mode::long_short, 0.2).weights == before);
}

TEST_CASE("backtest matches a brute-force decile oracle") {
    const auto p = fixtures::synthetic(31, 10, 12);
    const auto spec = dsl::parse("crank(close)", "rank_close");
    const Grid f = dsl::evaluate(spec, p).values;
    const Grid& ret = p.column(Field::ret);
    for (double fraction : {0.1, 0.2, 0.5}) {
        for (Mode m : {Mode::long_short, Mode::long_only}) {
            const auto res = backtest_single(spec, p, config(m, 0.0, fraction));
            REQUIRE(res.returns.size() == p.n_dates() - 1);
            for (std::size_t t = 0; t + 1 < p.n_dates(); ++t) {
                const double want =
                    oracle::decile_return(row_of(f, t), row_of(ret, t + 1), m == Mode::long_short, fraction);
                CHECK(std::abs(res.returns[t] - want) <= 1e-12);
                CHECK(res.dates[t] == p.calendar()[t + 1]);
            }
        }
    }
}

TEST_CASE("constant factor trades the two smallest identifiers") {
    const auto p = fixtures::synthetic(32, 10, 6);
    const auto res = backtest_single(dsl::parse("1.0", "const"), p, config(Mode::long_short));
    const Grid& ret = p.column(Field::ret);
    for (std::size_t t = 0; t < res.returns.size(); ++t) CHECK(res.returns[t] == ret(t + 1, 0) - ret(t + 1, 1));
}

TEST_CASE("fee accounting and turnover") {
    const auto p = fixtures::synthetic(33, 20, 40);
    const auto spec = dsl::parse("czs(diff(close))", "rev");
    SUBCASE("zero fee twin is identical") {
        const auto r = backtest_single(spec, p, config(Mode::long_short, 0.0));
        CHECK(r.fee_returns == r.returns);
        CHECK(r.fee_wealth == r.wealth);
    }
    SUBCASE("fee identity and bounds") {
        for (Mode m : {Mode::long_short, Mode::long_only}) {
            const auto r = backtest_single(spec, p, config(m, 0.001));
            double gross = 0;
            for (double w : r.weights.front().weights) gross += std::fabs(w);
            CHECK(r.turnover.front() == gross);
            for (std::size_t t = 0; t < r.returns.size(); ++t) {
                CHECK(r.fee_returns[t] == r.returns[t] - 0.001 * r.turnover[t]);
                CHECK(r.turnover[t] >= 0.0);
                CHECK(r.turnover[t] <= (m == Mode::long_short ? 4.0 : 2.0) + 1e-12);
            }
            CHECK(r.wealth.back() == doctest::Approx(metrics::wealth_curve(r.returns).back()).epsilon(1e-14));
        }
    }
    SUBCASE("fee monotonicity") {
        double last = INFINITY;
        for (double fee : {0.0, 0.00025, 0.001}) {
            const auto r = backtest_single(spec, p, config(Mode::long_short, fee));
            const double ar = metrics::annualized_return(r.fee_returns);
            CHECK(ar <= last);
            last = ar;
        }
    }
}

TEST_CASE("warm-up days are skipped and missing next returns contribute zero") {
    const double nan = std::nan("");
    const auto p = fixtures::from_closes({{10, 20, 30}, {11, 19, 33}, {12, nan, 30}, {13, 20, 31}});
    const auto res = backtest_single(dsl::parse("diff(close)", "d"), p, config(Mode::long_only, 0.0, 0.4));
    REQUIRE(res.dates.size() == 2);
    CHECK(res.dates.front() == day(2));
    // at day 1 diff is {1, -1, 3}: long instrument 2, return 30/33 - 1
    CHECK(res.returns[0] == doctest::Approx(30.0 / 33.0 - 1.0));
    // at day 2 diff is {1, gap, -3}: long instrument 0
    CHECK(res.returns[1] == doctest::Approx(13.0 / 12.0 - 1.0));
}

TEST_CASE("held instrument lacking the next return is flagged") {
    const double nan = std::nan("");
    const auto p = fixtures::from_closes({{10, 30}, {11, nan}, {12, 31}});
    const auto res = backtest_single(dsl::parse("close", "c"), p, config(Mode::long_only, 0.0));
    REQUIRE(res.returns.size() == 2);
    CHECK(res.unrealizable[0] == 1);
    CHECK(res.returns[0] == 0.0);
}

TEST_CASE("factor without signals") {
    const auto p = fixtures::from_closes({{10, 30}, {11, 31}, {12, 31}});
    CHECK_THROWS_WITH_AS(backtest_single(dsl::parse("mean(close, 10)", "x"), p, config(Mode::long_only)),
                         "factor produced no signals", NoSignals);
}

TEST_CASE("negating the factor negates long-short returns") {
    const auto p = fixtures::synthetic(34, 20, 30);
    const auto a = backtest_single(dsl::parse("close * volume", "x"), p, config(Mode::long_short));
    const auto b = backtest_single(dsl::parse("close * volume", "x"), p, config(Mode::long_short), -1);
    const auto c = backtest_single(dsl::parse("-(close * volume)", "x"), p, config(Mode::long_short));
    REQUIRE(a.returns.size() == b.returns.size());
    for (std::size_t t = 0; t < a.returns.size(); ++t) {
        CHECK(b.returns[t] == -a.returns[t]);
        CHECK(c.returns[t] == b.returns[t]);
    }
}

TEST_CASE("static polarity") {
    const auto p = momentum_panel(10, 30);
    const Date a = p.calendar().front(), b = p.calendar().back();
    CHECK(static_polarity(dsl::parse("crank(close)"), p, a, b).sign == +1);
    CHECK(static_polarity(dsl::parse("-crank(close)"), p, a, b).sign == -1);

    const auto flat = fixtures::from_closes(std::vector<std::vector<double>>(6, std::vector<double>(10, 50.0)));
    const auto zero = static_polarity(dsl::parse("crank(volume)"), flat, flat.calendar().front(), flat.calendar().back());
    CHECK(zero.sign == +1);
    CHECK_FALSE(zero.warning);

    const auto none = static_polarity(dsl::parse("mean(close, 50)", "slow"), p, a, b);
    CHECK(none.sign == +1);
    CHECK(none.warning);
}

TEST_CASE("dynamic polarity on a six-day fixture") {
    // Long A, short B every day; B is flat so the base return is A's return.
    // A returns: +10%, -20%, +5%, +10%, +2%; compounded wealth 1.10, 0.88, 0.924, 1.0164, ...
    const auto p = fixtures::from_closes(
        {{100, 100}, {110, 100}, {88, 100}, {92.4, 100}, {101.64, 100}, {103.6728, 100}});
    Grid factor(6, 2);
    for (std::size_t t = 0; t < 6; ++t) factor(t, 0) = 1.0, factor(t, 1) = 0.0;
    const auto signs = dynamic_polarity_schedule(factor, p, Mode::long_short);
    CHECK(signs == std::vector<int>{+1, +1, +1, -1, -1, +1});

    const auto spec = dsl::parse("close", "x");
    CHECK(dynamic_polarity(spec, p, day(0), Mode::long_short) == +1);
}

TEST_CASE("dynamic polarity with a winning base is always positive") {
    const auto p = momentum_panel(10, 20);
    const Grid f = dsl::evaluate(dsl::parse("crank(close)"), p).values;
    for (Mode base : {Mode::long_short, Mode::long_only}) {
        for (int s : dynamic_polarity_schedule(f, p, base)) CHECK(s == +1);
    }
}

TEST_CASE("composite score") {
    const auto p = fixtures::synthetic(35, 8, 10);
    const Grid a = dsl::evaluate(dsl::parse("close"), p).values;
    const Grid na = dsl::evaluate(dsl::parse("-close"), p).values;
    const Grid b = dsl::evaluate(dsl::parse("volume"), p).values;
    const std::size_t t = 4;

    const std::vector<CompositeTerm> single = {{&a, {}}};
    const auto s = composite_score(single, t);
    const auto z = oracle::zscore(row_of(a, t));
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(z[i]).epsilon(1e-14));

    const std::vector<CompositeTerm> cancel = {{&a, {}}, {&na, {}}};
    for (double v : composite_score(cancel, t)) CHECK(std::abs(v) <= 1e-15);

    const std::vector<int> minus(p.n_dates(), -1);
    const std::vector<CompositeTerm> pos = {{&a, {}}, {&b, {}}};
    const std::vector<CompositeTerm> neg = {{&a, minus}, {&b, minus}};
    const auto x = composite_score(pos, t), y = composite_score(neg, t);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == -x[i]);
}

TEST_CASE("composite skips gap terms per instrument") {
    const double nan = std::nan("");
    Grid a(1, 3), b(1, 3);
    a(0, 0) = 1, a(0, 1) = 2, a(0, 2) = 3;
    b(0, 0) = nan, b(0, 1) = 5, b(0, 2) = 1;
    const std::vector<CompositeTerm> terms = {{&a, {}}, {&b, {}}};
    const auto c = composite_score(terms, 0);
    CHECK(c[0] == doctest::Approx(-1.224744871391589));
    CHECK(c[1] == doctest::Approx(0.5));
    CHECK(c[2] == doctest::Approx((1.224744871391589 - 1.0) / 2));
}

TEST_CASE("single-entry multi reproduces the single-factor backtest") {
    const auto p = fixtures::synthetic(36, 15, 40);
    for (const char* text : {"czs(diff(close))", "-mean(ret, 5)"}) {
        const auto spec = dsl::parse(text, "x");
        const auto sign = static_polarity(spec, p, p.calendar().front(), p.calendar().back()).sign;
        for (Mode m : {Mode::long_short, Mode::long_only}) {
            MultiConfig mc;
            mc.trade = config(m, 0.00025);
            const std::vector<dsl::FactorSpec> cat = {spec};
            const auto multi = backtest_multi(cat, p, mc).backtest;
            const auto single = backtest_single(spec, p, config(m, 0.00025), sign);
            CHECK(multi.returns == single.returns);
            CHECK(multi.fee_returns == single.fee_returns);
            CHECK(multi.turnover == single.turnover);
        }
    }
}

TEST_CASE("three-factor multi matches a brute-force oracle") {
    const auto p = fixtures::synthetic(37, 12, 4);
    const std::vector<dsl::FactorSpec> cat = {dsl::parse("close", "a"), dsl::parse("volume / amount", "b"),
                                              dsl::parse("high - low", "c")};
    const Grid& ret = p.column(Field::ret);

    // Independent signs: the whole panel is the training window.
    std::vector<int> signs;
    std::vector<Grid> raw;
    for (const auto& spec : cat) {
        raw.push_back(dsl::evaluate(spec, p).values);
        double wealth = 1.0;
        for (std::size_t t = 0; t + 1 < p.n_dates(); ++t) {
            wealth *= 1.0 + oracle::decile_return(row_of(raw.back(), t), row_of(ret, t + 1), true, 0.10);
        }
        signs.push_back(wealth >= 1.0 ? 1 : -1);
    }

    for (Mode m : {Mode::long_short, Mode::long_only}) {
        MultiConfig mc;
        mc.trade = config(m, 0.0);
        const auto res = backtest_multi(cat, p, mc);
        for (std::size_t k = 0; k < cat.size(); ++k) CHECK(res.signs[k].front() == signs[k]);
        REQUIRE(res.backtest.returns.size() == p.n_dates() - 1);
        for (std::size_t t = 0; t + 1 < p.n_dates(); ++t) {
            std::vector<double> comp(p.n_instruments(), 0.0);
            for (std::size_t k = 0; k < cat.size(); ++k) {
                const auto z = oracle::zscore(row_of(raw[k], t));
                for (std::size_t i = 0; i < comp.size(); ++i) comp[i] += signs[k] * z[i] / 3.0;
            }
            const double want = oracle::decile_return(comp, row_of(ret, t + 1), m == Mode::long_short, 0.10);
            CHECK(std::abs(res.backtest.returns[t] - want) <= 1e-12);
        }
    }
}

TEST_CASE("dynamic multi equals static when the base never loses") {
    const auto p = momentum_panel(12, 25);
    const std::vector<dsl::FactorSpec> cat = {dsl::parse("crank(close)", "m")};
    MultiConfig st;
    st.trade = config(Mode::long_short, 0.00025);
    const auto a = backtest_multi(cat, p, st).backtest;
    for (Mode base : {Mode::long_short, Mode::long_only}) {
        MultiConfig dy = st;
        dy.polarity = PolarityMode::dynamic_sign;
        dy.polarity_base = base;
        const auto b = backtest_multi(cat, p, dy).backtest;
        CHECK(a.returns == b.returns);
        CHECK(a.fee_returns == b.fee_returns);
    }
}

TEST_CASE("zero-volatility panel gives zero annualized return") {
    synth::SynthConfig c;
    c.seed = 3;
    c.n_instruments = 10;
    c.n_days = 30;
    c.daily_vol = 0.0;
    const auto p = synth::generate_panel(c);
    const auto r = backtest_single(dsl::parse("czs(volume)", "v"), p, config(Mode::long_short, 0.0));
    CHECK(metrics::annualized_return(r.returns) == 0.0);
}

TEST_CASE("backtest window") {
    const auto p = fixtures::synthetic(38, 10, 20);
    auto c = config(Mode::long_short);
    c.start = p.calendar()[5];
    c.end = p.calendar()[10];
    const auto r = backtest_single(dsl::parse("close"), p, c);
    REQUIRE(r.dates.size() == 5);
    CHECK(r.dates.front() == p.calendar()[6]);
    CHECK(r.dates.back() == p.calendar()[10]);
}
