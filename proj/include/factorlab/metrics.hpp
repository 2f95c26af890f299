#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "factorlab/date.hpp"
#include "factorlab/grid.hpp"
#include "factorlab/panel.hpp"

namespace factorlab::metrics {

inline constexpr double kTradingDaysPerYear = 252.0;

/// A daily return <= -1 wiped out the position; compounding is undefined.
class BlowUpError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InsufficientOverlap : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Annualization { geometric, arithmetic };

/// (prod(1 + r))^(252 / T) - 1, or mean * 252 for the arithmetic variant.
double annualized_return(std::span<const double> returns, Annualization kind = Annualization::geometric,
                         double periods_per_year = kTradingDaysPerYear);

/// mean / sample_std * sqrt(252) with zero risk-free rate. nullopt when the
/// sample std vanishes (relative to the mean) or fewer than two returns.
std::optional<double> sharpe_ratio(std::span<const double> returns, double periods_per_year = kTradingDaysPerYear);

/// Largest peak-to-trough loss as a fraction of the running peak.
double max_drawdown(std::span<const double> wealth);

/// Wealth curve [1, W_1, ..., W_T] from daily returns.
std::vector<double> wealth_curve(std::span<const double> returns);

struct PerformanceSummary {
    double annualized_return = 0.0;
    std::optional<double> sharpe_ratio;
    double max_drawdown = 0.0;
    std::size_t n_days = 0;

    std::string to_json() const;
};

PerformanceSummary summarize(std::span<const double> returns, Annualization kind = Annualization::geometric);

/// Midpoint ranks (1-based) ignoring nothing; callers pass complete vectors.
std::vector<double> midpoint_ranks(std::span<const double> x);

/// Spearman rank correlation; nullopt when either side is constant.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct IcSummary {
    double ic_mean = 0.0;
    std::optional<double> ir;
    std::vector<Date> dates;
    std::vector<double> ic_series;

    std::string to_json() const;
};

/// Per date t: Spearman between factor(., t) and r(., t') for the next
/// calendar date t', over instruments with both defined (>= 3 required and
/// neither side constant). Throws InsufficientOverlap when no date qualifies.
IcSummary ic_series(const Grid& factor, const Panel& panel);

}  // namespace factorlab::metrics
