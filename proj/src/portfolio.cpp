#include "factorlab/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "factorlab/metrics.hpp"

namespace factorlab::portfolio {

std::string_view mode_name(Mode m) { return m == Mode::long_short ? "long_short" : "long_only"; }

std::optional<Mode> mode_from_name(std::string_view s) {
    if (s == "long_short") return Mode::long_short;
    if (s == "long_only") return Mode::long_only;
    return std::nullopt;
}

bool WeightVector::flat() const {
    return std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; });
}

WeightVector decile_weights(std::span<const double> values, Mode mode, double fraction) {
    if (!(fraction > 0.0 && fraction <= 0.5)) throw std::invalid_argument("decile fraction must be in (0, 0.5]");
    WeightVector wv;
    wv.weights.assign(values.size(), 0.0);

    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!is_gap(values[i])) live.push_back(i);
    }
    const std::size_t N = live.size();
    if (N == 0 || (mode == Mode::long_short && N < 2)) return wv;
    const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(N))));

    // Index order is identifier order, so a stable sort breaks ties by identifier.
    std::vector<std::size_t> desc = live;
    std::stable_sort(desc.begin(), desc.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) wv.weights[desc[k]] = w;

    if (mode == Mode::long_short) {
        std::vector<std::size_t> asc = live;
        std::stable_sort(asc.begin(), asc.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        std::size_t taken = 0;
        for (std::size_t k = 0; k < asc.size() && taken < n; ++k) {
            if (wv.weights[asc[k]] > 0.0) continue;
            wv.weights[asc[k]] = -w;
            ++taken;
        }
    }
    return wv;
}

BacktestResult backtest_scores(const Grid& scores, const Panel& panel, const BacktestConfig& config) {
    if (config.fee_rate < 0.0) throw std::invalid_argument("fee_rate must be >= 0");
    const Grid& ret = panel.column(Field::ret);
    const auto& cal = panel.calendar();
    const std::size_t N = panel.n_instruments();

    BacktestResult res;
    res.mode = config.mode;
    res.fee_rate = config.fee_rate;

    std::vector<double> prev(N, 0.0);
    double wealth = 1.0, fee_wealth = 1.0;
    bool started = false;
    bool any_in_window = false;
    for (std::size_t t = 0; t + 1 < cal.size(); ++t) {
        if (config.start && cal[t] < *config.start) continue;
        if (config.end && cal[t + 1] > *config.end) break;
        any_in_window = true;

        WeightVector wv = decile_weights(scores.row(t), config.mode, config.fraction);
        wv.date = cal[t];
        if (!started) {
            if (wv.flat()) continue;
            started = true;
        }

        double r = 0.0, turnover = 0.0;
        std::size_t missing = 0;
        for (std::size_t i = 0; i < N; ++i) {
            const double w = wv.weights[i];
            turnover += std::fabs(w - prev[i]);
            if (w == 0.0) continue;
            const double ri = ret(t + 1, i);
            if (is_gap(ri)) ++missing;
            else r += w * ri;
        }
        const double fee_r = r - config.fee_rate * turnover;

        wealth *= 1.0 + r;
        fee_wealth *= 1.0 + fee_r;
        res.dates.push_back(cal[t + 1]);
        res.returns.push_back(r);
        res.fee_returns.push_back(fee_r);
        res.wealth.push_back(wealth);
        res.fee_wealth.push_back(fee_wealth);
        res.turnover.push_back(turnover);
        res.unrealizable.push_back(missing);
        prev = wv.weights;
        res.weights.push_back(std::move(wv));
        if (r <= -1.0 || fee_r <= -1.0) {
            res.blown_up = true;
            break;
        }
    }
    if (!started && any_in_window) throw NoSignals();
    if (!any_in_window) throw std::invalid_argument("backtest window contains no tradable date pair");
    return res;
}

BacktestResult backtest_single(const dsl::FactorSpec& spec, const Panel& panel, const BacktestConfig& config,
                               int sign) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("polarity sign must be +1 or -1");
    Grid scores = dsl::evaluate(spec, panel).values;
    if (sign < 0) {
        for (std::size_t t = 0; t < scores.n_dates(); ++t) {
            for (double& v : scores.row(t)) v = -v;
        }
    }
    auto res = backtest_scores(scores, panel, config);
    std::ostringstream d;
    d << "single:" << spec.name << " " << mode_name(config.mode) << " sign=" << sign << " fee=" << config.fee_rate;
    res.descriptor = d.str();
    return res;
}

PolarityResult static_polarity(const dsl::FactorSpec& spec, const Panel& panel, Date train_start, Date train_end,
                               double fraction) {
    const Panel train = slice(panel, train_start, train_end);
    if (train.empty()) throw std::invalid_argument("static_polarity: empty training window");
    BacktestConfig cfg;
    cfg.mode = Mode::long_short;
    cfg.fraction = fraction;
    cfg.fee_rate = 0.0;
    try {
        const auto res = backtest_single(spec, train, cfg);
        if (res.blown_up) return {-1, "long-short training backtest blew up"};
        return {metrics::annualized_return(res.returns) >= 0.0 ? +1 : -1, std::nullopt};
    } catch (const NoSignals&) {
        return {+1, "no signals for '" + spec.name + "' in training window; polarity defaults to +1"};
    } catch (const std::invalid_argument&) {
        return {+1, "training window for '" + spec.name + "' has no tradable date pair; polarity defaults to +1"};
    }
}

std::vector<int> dynamic_polarity_schedule(const Grid& factor, const Panel& panel, Mode base, double fraction) {
    const std::size_t T = panel.n_dates();
    std::vector<int> signs(T, +1);
    BacktestConfig cfg;
    cfg.mode = base;
    cfg.fraction = fraction;
    cfg.fee_rate = 0.0;
    BacktestResult res;
    try {
        res = backtest_scores(factor, panel, cfg);
    } catch (const NoSignals&) {
        return signs;
    } catch (const std::invalid_argument&) {
        return signs;
    }

    // Compounded wealth realized through each calendar index.
    std::vector<double> wealth_through(T, 1.0);
    std::size_t k = 0;
    double w = 1.0;
    for (std::size_t t = 0; t < T; ++t) {
        while (k < res.dates.size() && res.dates[k] == panel.calendar()[t]) w = res.wealth[k++];
        wealth_through[t] = w;
    }
    // A fee-free blow-up leaves wealth <= 0, so the sign stays -1 afterwards.
    for (std::size_t t = 1; t < T; ++t) signs[t] = wealth_through[t - 1] - 1.0 >= 0.0 ? +1 : -1;
    return signs;
}

int dynamic_polarity(const dsl::FactorSpec& spec, const Panel& panel, Date t, Mode base, double fraction) {
    const auto idx = panel.date_index(t);
    if (!idx) throw std::invalid_argument("dynamic_polarity: date " + t.iso() + " not in calendar");
    const Grid values = dsl::evaluate(spec, panel).values;
    return dynamic_polarity_schedule(values, panel, base, fraction)[*idx];
}

std::vector<double> composite_score(std::span<const CompositeTerm> terms, std::size_t t) {
    if (terms.empty()) throw std::invalid_argument("composite_score: no factors");
    const std::size_t N = terms.front().factor->n_instruments();
    std::vector<double> sum(N, 0.0);
    std::vector<std::size_t> count(N, 0);
    std::vector<double> z;
    for (const auto& term : terms) {
        const auto row = term.factor->row(t);
        z.assign(row.begin(), row.end());
        dsl::zscore_section(z);
        const double s = term.signs.empty() ? 1.0 : static_cast<double>(term.signs[t]);
        for (std::size_t i = 0; i < N; ++i) {
            if (is_gap(z[i])) continue;
            sum[i] += s * z[i];
            ++count[i];
        }
    }
    std::vector<double> out(N, kGap);
    for (std::size_t i = 0; i < N; ++i) {
        if (count[i]) out[i] = sum[i] / static_cast<double>(count[i]);
    }
    return out;
}

Grid composite_scores(std::span<const CompositeTerm> terms) {
    if (terms.empty()) throw std::invalid_argument("composite_score: no factors");
    const auto& shape = *terms.front().factor;
    Grid out(shape.n_dates(), shape.n_instruments());
    for (std::size_t t = 0; t < shape.n_dates(); ++t) {
        const auto row = composite_score(terms, t);
        std::copy(row.begin(), row.end(), out.row(t).begin());
    }
    return out;
}

MultiResult backtest_multi(std::span<const dsl::FactorSpec> catalog, const Panel& panel, const MultiConfig& config) {
    if (catalog.empty()) throw std::invalid_argument("backtest_multi: empty catalog");
    const Date train_start = config.train_start.value_or(panel.calendar().front());
    const Date train_end = config.train_end.value_or(panel.calendar().back());

    std::vector<Grid> values;
    values.reserve(catalog.size());
    for (const auto& spec : catalog) values.push_back(dsl::evaluate(spec, panel).values);

    MultiResult out;
    std::vector<CompositeTerm> terms;
    for (std::size_t k = 0; k < catalog.size(); ++k) {
        std::vector<int> signs;
        if (config.polarity == PolarityMode::static_sign) {
            const int s = static_polarity(catalog[k], panel, train_start, train_end, config.trade.fraction).sign;
            signs.assign(panel.n_dates(), s);
        } else {
            signs = dynamic_polarity_schedule(values[k], panel, config.polarity_base, config.trade.fraction);
        }
        out.signs.push_back(signs);
        terms.push_back(CompositeTerm{&values[k], std::move(signs)});
    }
    const Grid scores = composite_scores(terms);
    out.backtest = backtest_scores(scores, panel, config.trade);

    std::ostringstream d;
    d << "multi:" << catalog.size() << " factors "
      << (config.polarity == PolarityMode::static_sign ? "static"
                                                        : "dynamic/" + std::string(mode_name(config.polarity_base)))
      << " " << mode_name(config.trade.mode) << " fee=" << config.trade.fee_rate;
    out.backtest.descriptor = d.str();
    return out;
}

}  // namespace factorlab::portfolio
