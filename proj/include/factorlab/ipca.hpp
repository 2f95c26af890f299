#pragma once

// Instrumented PCA (restricted model, no alpha characteristic):
//
//   r_{i,t+1} = z_{i,t}' Gamma f_{t+1} + e
//
// estimated by alternating least squares with Gamma'Gamma = I after every sweep.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "factorlab/date.hpp"
#include "factorlab/panel.hpp"

namespace factorlab::ipca {

/// One date's instrumented cross-section: Z is N_t x L, r holds r(i, t').
struct CrossSection {
    Date date;         // characteristic date t
    Date return_date;  // t', the next calendar date
    std::vector<std::size_t> instruments;
    Eigen::MatrixXd Z;
    Eigen::VectorXd r;
};

struct InstrumentMatrixSeries {
    std::vector<std::string> characteristics;
    std::vector<CrossSection> sections;
    std::vector<std::string> warnings;

    std::size_t n_characteristics() const { return characteristics.size(); }
};

class IpcaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per date and characteristic, the fractional cross-sectional rank minus 0.5.
/// Rows are instruments with every characteristic defined at t and a return
/// at t'. Dates with fewer than `min_instruments` rows are dropped with a warning.
InstrumentMatrixSeries build_instruments(const Panel& panel, std::span<const Field> characteristics,
                                         std::size_t min_instruments = 2);

/// The nine raw schema columns.
std::vector<Field> default_characteristics();

struct FitOptions {
    double tol = 1e-6;
    int max_iter = 1000;
    double monotonicity_tol = 1e-9;
    double ridge = 1e-10;
};

struct Convergence {
    int iterations = 0;
    double final_delta = 0.0;
    bool converged = false;
    std::vector<double> ssr_history;  // pooled SSR after each full sweep
};

struct FactorReturns {
    std::vector<Date> dates;  // return dates t'
    Eigen::MatrixXd values;   // dates x K
    std::vector<std::string> warnings;
};

struct IpcaModel {
    int K = 0;
    std::vector<std::string> characteristics;
    Eigen::MatrixXd gamma;  // L x K, orthonormal columns
    FactorReturns factor_returns;
    Convergence convergence;
    double total_r2 = 0.0;
    std::vector<std::string> warnings;

    std::string to_json() const;
};

IpcaModel fit_ipca(const InstrumentMatrixSeries& data, int K, const FitOptions& options = {});

/// Per-date cross-sectional regression with Gamma frozen. Range filters on the
/// return date; empty optional bounds mean unbounded.
FactorReturns oos_factor_returns(const IpcaModel& model, const InstrumentMatrixSeries& data,
                                 std::optional<Date> start = std::nullopt, std::optional<Date> end = std::nullopt);

/// max |z' Gamma f - r| over the given sections, using the supplied factor returns.
double max_abs_residual(const Eigen::MatrixXd& gamma, const FactorReturns& f, const InstrumentMatrixSeries& data);

/// Principal angles (radians) between the column spaces of two L x K bases.
Eigen::VectorXd principal_angles(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

enum class StdErrors { classical, hc0 };

struct AlphaReport {
    double alpha_daily = 0.0;
    double alpha_annualized = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;
    std::string stars;  // "***", "**", "*" or empty
    std::vector<double> betas;
    std::size_t n_obs = 0;
    bool exact_fit = false;  // residual variance below numerical resolution
};

/// Two-sided significance stars at 1% / 5% / 10%.
std::string stars_for(double p_value);

/// OLS of portfolio returns on an intercept and the factor returns, aligned on
/// date. Throws IpcaError("degenerate factor returns") on collinear regressors.
AlphaReport alpha_regression(std::span<const Date> dates, std::span<const double> returns, const FactorReturns& factors,
                             StdErrors errors = StdErrors::classical);

}  // namespace factorlab::ipca
