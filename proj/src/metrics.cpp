#include "factorlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace factorlab::metrics {

namespace {

double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_std(std::span<const double> x, double mean) {
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

double annualized_return(std::span<const double> returns, Annualization kind, double periods_per_year) {
    if (returns.empty()) throw std::invalid_argument("annualized_return: empty return series");
    for (double r : returns) {
        if (!(r > -1.0)) throw BlowUpError("daily return <= -1 in annualized_return");
    }
    if (kind == Annualization::arithmetic) return mean_of(returns) * periods_per_year;
    double log_growth = 0.0;
    for (double r : returns) log_growth += std::log1p(r);
    return std::expm1(log_growth * periods_per_year / static_cast<double>(returns.size()));
}

std::optional<double> sharpe_ratio(std::span<const double> returns, double periods_per_year) {
    if (returns.size() < 2) return std::nullopt;
    const double m = mean_of(returns);
    const double sd = sample_std(returns, m);
    // Constant series leave rounding residue in sd; treat that as zero variance.
    if (!(sd > 1e-12 * std::fabs(m))) return std::nullopt;
    return m / sd * std::sqrt(periods_per_year);
}

double max_drawdown(std::span<const double> wealth) {
    double peak = -std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (double w : wealth) {
        peak = std::max(peak, w);
        if (peak > 0.0) worst = std::max(worst, 1.0 - w / peak);
    }
    return std::clamp(worst, 0.0, 1.0);
}

std::vector<double> wealth_curve(std::span<const double> returns) {
    std::vector<double> w;
    w.reserve(returns.size() + 1);
    w.push_back(1.0);
    for (double r : returns) w.push_back(w.back() * (1.0 + r));
    return w;
}

PerformanceSummary summarize(std::span<const double> returns, Annualization kind) {
    PerformanceSummary s;
    s.n_days = returns.size();
    s.annualized_return = annualized_return(returns, kind);
    s.sharpe_ratio = sharpe_ratio(returns);
    s.max_drawdown = max_drawdown(wealth_curve(returns));
    return s;
}

std::string PerformanceSummary::to_json() const {
    nlohmann::json j = {{"annualized_return", annualized_return},
                        {"sharpe_ratio", optional_json(sharpe_ratio)},
                        {"max_drawdown", max_drawdown},
                        {"n_days", n_days}};
    return j.dump();
}

std::vector<double> midpoint_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t k = 0;
    while (k < n) {
        std::size_t end = k + 1;
        while (end < n && x[idx[end]] == x[idx[k]]) ++end;
        const double mid = 0.5 * static_cast<double>(k + 1 + end);
        for (std::size_t j = k; j < end; ++j) ranks[idx[j]] = mid;
        k = end;
    }
    return ranks;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) return std::nullopt;
    const auto rx = midpoint_ranks(x);
    const auto ry = midpoint_ranks(y);
    const double mx = mean_of(rx), my = mean_of(ry);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < rx.size(); ++k) {
        const double dx = rx[k] - mx, dy = ry[k] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

IcSummary ic_series(const Grid& factor, const Panel& panel) {
    const Grid& ret = panel.column(Field::ret);
    IcSummary out;
    std::vector<double> fx, ry;
    for (std::size_t t = 0; t + 1 < panel.n_dates(); ++t) {
        fx.clear();
        ry.clear();
        for (std::size_t i = 0; i < panel.n_instruments(); ++i) {
            const double f = factor(t, i), r = ret(t + 1, i);
            if (is_gap(f) || is_gap(r)) continue;
            fx.push_back(f);
            ry.push_back(r);
        }
        if (fx.size() < 3) continue;
        if (auto ic = spearman(fx, ry)) {
            out.dates.push_back(panel.calendar()[t]);
            out.ic_series.push_back(*ic);
        }
    }
    if (out.ic_series.empty()) throw InsufficientOverlap("insufficient overlap between factor and next-day returns");
    out.ic_mean = mean_of(out.ic_series);
    if (out.ic_series.size() >= 2) {
        const double sd = sample_std(out.ic_series, out.ic_mean);
        if (sd > 0.0) out.ir = out.ic_mean / sd;
    }
    return out;
}

std::string IcSummary::to_json() const {
    nlohmann::json j = {{"ic_mean", ic_mean}, {"ir", optional_json(ir)}, {"n_dates", ic_series.size()}};
    return j.dump();
}

}  // namespace factorlab::metrics
