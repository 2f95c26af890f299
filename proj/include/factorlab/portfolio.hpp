#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "factorlab/dsl.hpp"
#include "factorlab/grid.hpp"
#include "factorlab/panel.hpp"

namespace factorlab::portfolio {

enum class Mode { long_short, long_only };
enum class PolarityMode { static_sign, dynamic_sign };

std::string_view mode_name(Mode m);
std::optional<Mode> mode_from_name(std::string_view s);

/// Fee per unit of one-sided turnover (0.025%).
inline constexpr double kDefaultFeeRate = 0.00025;

struct WeightVector {
    Date date;
    std::vector<double> weights;  // indexed by panel instrument order

    bool flat() const;
};

/// Equal-weight decile legs over the non-gap entries of one cross-section.
/// n = max(1, floor(fraction * N)); ties broken by instrument index (identifier
/// order) ascending. Long-short needs N >= 2, otherwise the day is flat.
WeightVector decile_weights(std::span<const double> values, Mode mode, double fraction = 0.10);

struct BacktestConfig {
    Mode mode = Mode::long_short;
    double fraction = 0.10;
    double fee_rate = kDefaultFeeRate;
    std::optional<Date> start;  // trading window; both ends inclusive
    std::optional<Date> end;
};

struct BacktestResult {
    std::vector<Date> dates;  // realization date t' of each daily return
    std::vector<double> returns;
    std::vector<double> wealth;
    std::vector<double> fee_returns;
    std::vector<double> fee_wealth;
    std::vector<double> turnover;
    std::vector<WeightVector> weights;  // formation date t of each return
    std::vector<std::size_t> unrealizable;  // held instruments lacking r(i, t')
    bool blown_up = false;

    Mode mode = Mode::long_short;
    double fee_rate = 0.0;
    std::string descriptor;
};

class NoSignals : public std::runtime_error {
public:
    NoSignals() : std::runtime_error("factor produced no signals") {}
};

/// Daily re-ranked decile portfolio on a score grid aligned with the panel.
/// The series starts at the first formation date with a non-flat portfolio.
BacktestResult backtest_scores(const Grid& scores, const Panel& panel, const BacktestConfig& config);

/// Evaluates the spec (lookahead-checked) and backtests sign * factor.
BacktestResult backtest_single(const dsl::FactorSpec& spec, const Panel& panel, const BacktestConfig& config,
                               int sign = +1);

struct PolarityResult {
    int sign = +1;
    std::optional<std::string> warning;
};

/// +1 iff the fee-free long-short backtest over the training window has
/// annualized return >= 0.
PolarityResult static_polarity(const dsl::FactorSpec& spec, const Panel& panel, Date train_start, Date train_end,
                               double fraction = 0.10);

/// Sign per calendar date: +1 iff the +1-polarity base strategy's compounded
/// return realized through the previous calendar date is >= 0. First date +1.
std::vector<int> dynamic_polarity_schedule(const Grid& factor, const Panel& panel, Mode base, double fraction = 0.10);

int dynamic_polarity(const dsl::FactorSpec& spec, const Panel& panel, Date t, Mode base, double fraction = 0.10);

struct CompositeTerm {
    const Grid* factor = nullptr;  // raw factor values
    std::vector<int> signs;        // one per calendar date
};

/// mean_k sign_k(t) * czs(factor_k)(i, t), skipping gap terms per instrument.
std::vector<double> composite_score(std::span<const CompositeTerm> terms, std::size_t t);
Grid composite_scores(std::span<const CompositeTerm> terms);

struct MultiConfig {
    PolarityMode polarity = PolarityMode::static_sign;
    Mode polarity_base = Mode::long_short;
    BacktestConfig trade;
    std::optional<Date> train_start;  // static polarity window; defaults to the whole panel
    std::optional<Date> train_end;
};

struct MultiResult {
    BacktestResult backtest;
    std::vector<std::vector<int>> signs;  // per factor, per calendar date
};

MultiResult backtest_multi(std::span<const dsl::FactorSpec> catalog, const Panel& panel, const MultiConfig& config);

}  // namespace factorlab::portfolio
