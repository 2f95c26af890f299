#include <algorithm>
#include <numeric>

#include "factorlab/dsl.hpp"
#include "factorlab/rng.hpp"

namespace factorlab::dsl {

// ---------------------------------------------------------------------------
// Cross-sectional kernels

void zscore_section(std::span<double> values) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        if (is_gap(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
        ++n;
    }
    if (n == 0) return;
    if (lo == hi) {
        for (double& v : values) {
            if (!is_gap(v)) v = 0.0;
        }
        return;
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) {
        if (!is_gap(v)) ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    for (double& v : values) {
        v = is_gap(v) ? kGap : (v - mean) / sd;
    }
}

void rank_section(std::span<double> values) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!is_gap(values[k])) idx.push_back(k);
        else values[k] = kGap;
    }
    const std::size_t n = idx.size();
    if (n == 0) return;
    if (n == 1) {
        values[idx[0]] = 0.5;
        return;
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> out(n);
    std::size_t k = 0;
    while (k < n) {
        std::size_t end = k + 1;
        while (end < n && values[idx[end]] == values[idx[k]]) ++end;
        // zero-based midpoint position of the tie block
        const double mid = 0.5 * static_cast<double>(k + end - 1);
        for (std::size_t j = k; j < end; ++j) out[j] = mid / static_cast<double>(n - 1);
        k = end;
    }
    for (std::size_t j = 0; j < n; ++j) values[idx[j]] = out[j];
}

namespace {

double finite_or_gap(double v) { return std::isfinite(v) ? v : kGap; }

double window_stat(RollOp op, std::span<const double> x, std::span<const double> y) {
    const auto w = static_cast<double>(x.size());
    switch (op) {
        case RollOp::sum: return std::accumulate(x.begin(), x.end(), 0.0);
        case RollOp::mean: return std::accumulate(x.begin(), x.end(), 0.0) / w;
        case RollOp::min: return *std::min_element(x.begin(), x.end());
        case RollOp::max: return *std::max_element(x.begin(), x.end());
        case RollOp::std: {
            if (x.size() < 2) return kGap;
            const double m = std::accumulate(x.begin(), x.end(), 0.0) / w;
            double ss = 0.0;
            for (double v : x) ss += (v - m) * (v - m);
            return std::sqrt(ss / (w - 1.0));
        }
        case RollOp::corr: {
            const double mx = std::accumulate(x.begin(), x.end(), 0.0) / w;
            const double my = std::accumulate(y.begin(), y.end(), 0.0) / w;
            double sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) {
                const double dx = x[k] - mx, dy = y[k] - my;
                sxx += dx * dx;
                syy += dy * dy;
                sxy += dx * dy;
            }
            if (sxx == 0.0 || syy == 0.0) return kGap;
            return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
        }
    }
    return kGap;
}

class Evaluator {
public:
    explicit Evaluator(const Panel& p) : panel_(p), T_(p.n_dates()), N_(p.n_instruments()) {}

    Grid eval(const Expr& e) {
        using K = Expr::Kind;
        switch (e.kind) {
            case K::literal: {
                Grid g(T_, N_);
                for_traded([&](std::size_t t, std::size_t i) { g(t, i) = e.value; });
                return g;
            }
            case K::column: return panel_.column(e.column);
            case K::unary: return unary(e.unary_op, eval(e.args[0]));
            case K::binary: return binary(e.binary_op, eval(e.args[0]), eval(e.args[1]));
            case K::rolling: {
                Grid x = eval(e.args[0]);
                Grid y = e.roll_op == RollOp::corr ? eval(e.args[1]) : Grid{};
                return rolling(e.roll_op, x, y, e.param);
            }
            case K::lag: return lag(eval(e.args[0]), e.param);
            case K::diff: {
                Grid x = eval(e.args[0]);
                Grid lagged = lag(x, 1);
                return binary(BinaryOp::sub, std::move(x), std::move(lagged));
            }
            case K::cross: {
                Grid x = eval(e.args[0]);
                for (std::size_t t = 0; t < T_; ++t) {
                    if (e.cross_op == CrossOp::zscore) zscore_section(x.row(t));
                    else rank_section(x.row(t));
                }
                return x;
            }
        }
        return Grid(T_, N_);
    }

    void mask(Grid& g) const {
        for (std::size_t t = 0; t < T_; ++t) {
            for (std::size_t i = 0; i < N_; ++i) {
                if (!panel_.trades(t, i) || is_gap(g(t, i))) g(t, i) = kGap;
            }
        }
    }

private:
    template <typename F>
    void for_traded(F&& f) const {
        for (std::size_t i = 0; i < N_; ++i) {
            for (std::size_t t : panel_.traded_dates(i)) f(t, i);
        }
    }

    static Grid unary(UnaryOp op, Grid x) {
        for (std::size_t t = 0; t < x.n_dates(); ++t) {
            for (double& v : x.row(t)) {
                if (is_gap(v)) continue;
                switch (op) {
                    case UnaryOp::neg: v = -v; break;
                    case UnaryOp::abs: v = std::fabs(v); break;
                    case UnaryOp::sign: v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); break;
                    case UnaryOp::log: v = v > 0.0 ? std::log(v) : kGap; break;
                }
            }
        }
        return x;
    }

    static Grid binary(BinaryOp op, Grid a, const Grid& b) {
        for (std::size_t t = 0; t < a.n_dates(); ++t) {
            auto ra = a.row(t);
            auto rb = b.row(t);
            for (std::size_t i = 0; i < ra.size(); ++i) {
                const double x = ra[i], y = rb[i];
                if (is_gap(x) || is_gap(y)) {
                    ra[i] = kGap;
                    continue;
                }
                switch (op) {
                    case BinaryOp::add: ra[i] = finite_or_gap(x + y); break;
                    case BinaryOp::sub: ra[i] = finite_or_gap(x - y); break;
                    case BinaryOp::mul: ra[i] = finite_or_gap(x * y); break;
                    case BinaryOp::div: ra[i] = y == 0.0 ? kGap : finite_or_gap(x / y); break;
                }
            }
        }
        return a;
    }

    // Trailing windows over each instrument's own traded dates.
    Grid rolling(RollOp op, const Grid& x, const Grid& y, int window) const {
        Grid out(T_, N_);
        if (window < 1) return out;
        const auto w = static_cast<std::size_t>(window);
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < N_; ++i) {
            const auto dates = panel_.traded_dates(i);
            for (std::size_t k = w - 1; k < dates.size(); ++k) {
                xs.clear();
                ys.clear();
                bool complete = true;
                for (std::size_t j = k + 1 - w; j <= k && complete; ++j) {
                    const double vx = x(dates[j], i);
                    const double vy = op == RollOp::corr ? y(dates[j], i) : 0.0;
                    complete = !is_gap(vx) && !is_gap(vy);
                    xs.push_back(vx);
                    ys.push_back(vy);
                }
                if (complete) out(dates[k], i) = finite_or_gap(window_stat(op, xs, ys));
            }
        }
        return out;
    }

    // Value k traded observations earlier (later when k < 0).
    Grid lag(const Grid& x, int k) const {
        Grid out(T_, N_);
        for (std::size_t i = 0; i < N_; ++i) {
            const auto dates = panel_.traded_dates(i);
            const auto m = static_cast<std::ptrdiff_t>(dates.size());
            for (std::ptrdiff_t pos = 0; pos < m; ++pos) {
                const std::ptrdiff_t src = pos - k;
                if (src >= 0 && src < m) out(dates[pos], i) = x(dates[src], i);
            }
        }
        return out;
    }

    const Panel& panel_;
    std::size_t T_, N_;
};

void collect_temporal(const Expr& e, CheckReport& report) {
    using K = Expr::Kind;
    if (e.kind == K::lag || e.kind == K::rolling || e.kind == K::diff) {
        TemporalNode node;
        node.node = print(e);
        if (e.kind == K::diff) {
            node.horizon = 1;
        } else {
            node.horizon = e.param;
            node.legal = e.kind == K::lag ? e.param >= 0 : e.param >= 1;
        }
        if (!node.legal) report.pass = false;
        report.nodes.push_back(std::move(node));
    }
    for (const auto& a : e.args) collect_temporal(a, report);
}

}  // namespace

std::vector<TemporalNode> CheckReport::offenders() const {
    std::vector<TemporalNode> out;
    std::copy_if(nodes.begin(), nodes.end(), std::back_inserter(out), [](const auto& n) { return !n.legal; });
    return out;
}

CheckReport check_lookahead(const Expr& e) {
    CheckReport report;
    collect_temporal(e, report);
    return report;
}

Grid evaluate_unchecked(const Expr& e, const Panel& panel) {
    Evaluator ev(panel);
    Grid g = ev.eval(e);
    ev.mask(g);
    return g;
}

FactorSeries evaluate(const FactorSpec& spec, const Panel& panel) {
    const auto report = check_lookahead(spec.expr);
    if (!report.pass) {
        throw LookaheadError("factor '" + spec.name + "' reads future data: " + report.offenders().front().node);
    }
    return FactorSeries{spec.name, evaluate_unchecked(spec.expr, panel)};
}

bool perturbation_no_lookahead_test(const Expr& e, const Panel& panel, Date cut, std::uint64_t seed) {
    auto rows = panel.rows();
    for (std::size_t k = 0; k < rows.size(); ++k) {
        auto& r = rows[k];
        if (r.date <= cut) continue;
        auto rng = Xoshiro256::stream(seed, k);
        auto scale = [&] { return rng.uniform(0.5, 1.5); };
        r.open *= scale();
        r.close *= scale();
        r.high = std::max({r.high * scale(), r.open, r.close});
        r.low = std::min({r.low * scale(), r.open, r.close});
        r.spot *= scale();
        r.basis = r.basis * scale() + rng.normal();
        r.premium = r.premium * scale() + rng.normal();
        r.volume *= scale();
        r.amount *= scale();
        if (!is_gap(r.replay)) r.replay += rng.normal();
    }
    const Panel perturbed = Panel::build(std::move(rows));

    const Grid before = evaluate_unchecked(e, panel);
    const Grid after = evaluate_unchecked(e, perturbed);
    for (std::size_t t = 0; t < panel.n_dates() && panel.calendar()[t] <= cut; ++t) {
        const auto a = before.row(t);
        const auto b = after.row(t);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const bool ga = is_gap(a[i]), gb = is_gap(b[i]);
            if (ga != gb || (!ga && a[i] != b[i])) return false;
        }
    }
    return true;
}

}  // namespace factorlab::dsl
