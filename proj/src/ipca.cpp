#include "factorlab/ipca.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "factorlab/dsl.hpp"
#include "factorlab/metrics.hpp"

namespace factorlab::ipca {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<Field> default_characteristics() { return {kRawFields.begin(), kRawFields.end()}; }

InstrumentMatrixSeries build_instruments(const Panel& panel, std::span<const Field> characteristics,
                                         std::size_t min_instruments) {
    InstrumentMatrixSeries out;
    for (Field f : characteristics) {
        if (f == Field::replay) throw std::invalid_argument("replay is not an admissible characteristic");
        out.characteristics.emplace_back(field_name(f));
    }
    const std::size_t L = characteristics.size();
    const Grid& ret = panel.column(Field::ret);
    std::vector<double> section;
    for (std::size_t t = 0; t + 1 < panel.n_dates(); ++t) {
        CrossSection cs;
        cs.date = panel.calendar()[t];
        cs.return_date = panel.calendar()[t + 1];
        for (std::size_t i = 0; i < panel.n_instruments(); ++i) {
            if (!panel.trades(t, i) || is_gap(ret(t + 1, i))) continue;
            bool complete = true;
            for (Field f : characteristics) complete = complete && !is_gap(panel.column(f)(t, i));
            if (complete) cs.instruments.push_back(i);
        }
        if (cs.instruments.size() < std::max<std::size_t>(min_instruments, 1)) {
            out.warnings.push_back("dropped " + cs.date.iso() + ": " + std::to_string(cs.instruments.size()) +
                                   " instrument(s)");
            continue;
        }
        const auto n = static_cast<Eigen::Index>(cs.instruments.size());
        cs.Z.resize(n, static_cast<Eigen::Index>(L));
        cs.r.resize(n);
        for (std::size_t l = 0; l < L; ++l) {
            const Grid& col = panel.column(characteristics[l]);
            section.clear();
            for (std::size_t i : cs.instruments) section.push_back(col(t, i));
            dsl::rank_section(section);
            for (Eigen::Index k = 0; k < n; ++k) cs.Z(k, static_cast<Eigen::Index>(l)) = section[k] - 0.5;
        }
        for (Eigen::Index k = 0; k < n; ++k) cs.r(k) = ret(t + 1, cs.instruments[k]);
        out.sections.push_back(std::move(cs));
    }
    return out;
}

namespace {

struct Moments {
    MatrixXd ZtZ;  // L x L
    VectorXd Ztr;  // L
};

// Solves (G' Z'Z G) f = G' Z'r. Returns nullopt when the system is rank deficient.
std::optional<VectorXd> solve_factor(const MatrixXd& gamma, const Moments& m) {
    const MatrixXd A = gamma.transpose() * m.ZtZ * gamma;
    const VectorXd b = gamma.transpose() * m.Ztr;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    if (qr.rank() < A.rows()) return std::nullopt;
    return VectorXd(qr.solve(b));
}

void canonicalize_signs(MatrixXd& gamma, MatrixXd* f) {
    for (Eigen::Index k = 0; k < gamma.cols(); ++k) {
        const double scale = gamma.col(k).cwiseAbs().maxCoeff();
        for (Eigen::Index l = 0; l < gamma.rows(); ++l) {
            if (std::fabs(gamma(l, k)) <= 1e-12 * scale) continue;
            if (gamma(l, k) < 0.0) {
                gamma.col(k) *= -1.0;
                if (f) f->col(k) *= -1.0;
            }
            break;
        }
    }
}

double pooled_ssr(const MatrixXd& gamma, const MatrixXd& f, const InstrumentMatrixSeries& data) {
    double ssr = 0.0;
    for (std::size_t t = 0; t < data.sections.size(); ++t) {
        const auto& cs = data.sections[t];
        ssr += (cs.r - cs.Z * (gamma * f.row(static_cast<Eigen::Index>(t)).transpose())).squaredNorm();
    }
    return ssr;
}

}  // namespace

IpcaModel fit_ipca(const InstrumentMatrixSeries& data, int K, const FitOptions& options) {
    const auto L = static_cast<Eigen::Index>(data.n_characteristics());
    if (K < 1) throw IpcaError("K must be >= 1");
    if (K > L) throw IpcaError("K must not exceed the number of characteristics");
    const auto T = static_cast<Eigen::Index>(data.sections.size());
    if (T < K) throw IpcaError("insufficient dates: need at least K usable dates");

    IpcaModel model;
    model.K = K;
    model.characteristics = data.characteristics;

    std::vector<Moments> moments(static_cast<std::size_t>(T));
    MatrixXd managed(L, T);
    double total_ss = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        const auto& cs = data.sections[static_cast<std::size_t>(t)];
        auto& m = moments[static_cast<std::size_t>(t)];
        m.ZtZ = cs.Z.transpose() * cs.Z;
        m.Ztr = cs.Z.transpose() * cs.r;
        managed.col(t) = m.Ztr / static_cast<double>(cs.Z.rows());
        total_ss += cs.r.squaredNorm();
    }

    Eigen::JacobiSVD<MatrixXd> svd(managed, Eigen::ComputeThinU);
    MatrixXd gamma = svd.matrixU().leftCols(K);
    canonicalize_signs(gamma, nullptr);

    MatrixXd f(T, K);
    bool ridge_warned = false;
    auto factor_step = [&](const MatrixXd& g) {
        for (Eigen::Index t = 0; t < T; ++t) {
            const auto& m = moments[static_cast<std::size_t>(t)];
            auto sol = solve_factor(g, m);
            if (!sol) {
                const MatrixXd A = g.transpose() * m.ZtZ * g + options.ridge * MatrixXd::Identity(K, K);
                sol = A.ldlt().solve(g.transpose() * m.Ztr);
                if (!ridge_warned) {
                    model.warnings.push_back("singular factor normal equations; ridge fallback applied");
                    ridge_warned = true;
                }
            }
            f.row(t) = sol->transpose();
        }
    };

    const Eigen::Index P = L * K;
    for (int iter = 1; iter <= options.max_iter; ++iter) {
        factor_step(gamma);

        // Pooled regression of r on (f kron z): vec(Gamma) column-major.
        MatrixXd A = MatrixXd::Zero(P, P);
        VectorXd b = VectorXd::Zero(P);
        for (Eigen::Index t = 0; t < T; ++t) {
            const auto& m = moments[static_cast<std::size_t>(t)];
            const VectorXd ft = f.row(t).transpose();
            for (Eigen::Index j = 0; j < K; ++j) {
                b.segment(j * L, L) += ft(j) * m.Ztr;
                for (Eigen::Index k = 0; k < K; ++k) A.block(j * L, k * L, L, L) += ft(j) * ft(k) * m.ZtZ;
            }
        }
        Eigen::LLT<MatrixXd> llt(A);
        VectorXd vec_gamma;
        if (llt.info() == Eigen::Success) {
            vec_gamma = llt.solve(b);
        } else {
            model.warnings.push_back("singular Gamma normal equations at sweep " + std::to_string(iter) +
                                     "; ridge fallback applied");
            vec_gamma = (A + options.ridge * MatrixXd::Identity(P, P)).ldlt().solve(b);
        }
        MatrixXd next = Eigen::Map<MatrixXd>(vec_gamma.data(), L, K);

        // Orthonormalize and rotate f so that fitted values are unchanged.
        Eigen::HouseholderQR<MatrixXd> qr(next);
        MatrixXd Q = qr.householderQ() * MatrixXd::Identity(L, K);
        const MatrixXd R = qr.matrixQR().topLeftCorner(K, K).triangularView<Eigen::Upper>();
        f = f * R.transpose();
        canonicalize_signs(Q, &f);

        const double ssr = pooled_ssr(Q, f, data);
        auto& hist = model.convergence.ssr_history;
        if (!hist.empty() && ssr > hist.back() + options.monotonicity_tol) {
            throw IpcaError("ALS residual increased at sweep " + std::to_string(iter));
        }
        hist.push_back(ssr);

        const double delta = (Q - gamma).cwiseAbs().maxCoeff();
        gamma = std::move(Q);
        model.convergence.iterations = iter;
        model.convergence.final_delta = delta;
        if (delta < options.tol) {
            model.convergence.converged = true;
            break;
        }
    }

    model.gamma = gamma;
    model.factor_returns = oos_factor_returns(model, data);
    for (auto& w : model.factor_returns.warnings) model.warnings.push_back(w);
    if (model.factor_returns.dates.size() == data.sections.size()) {
        model.total_r2 = 1.0 - pooled_ssr(gamma, model.factor_returns.values, data) / total_ss;
    } else {
        double ssr = 0.0, ss = 0.0;
        std::size_t k = 0;
        for (const auto& cs : data.sections) {
            if (k < model.factor_returns.dates.size() && model.factor_returns.dates[k] == cs.return_date) {
                const VectorXd ft = model.factor_returns.values.row(static_cast<Eigen::Index>(k)).transpose();
                ssr += (cs.r - cs.Z * gamma * ft).squaredNorm();
                ss += cs.r.squaredNorm();
                ++k;
            }
        }
        model.total_r2 = ss > 0.0 ? 1.0 - ssr / ss : 0.0;
    }
    return model;
}

FactorReturns oos_factor_returns(const IpcaModel& model, const InstrumentMatrixSeries& data, std::optional<Date> start,
                                 std::optional<Date> end) {
    FactorReturns out;
    std::vector<VectorXd> rows;
    for (const auto& cs : data.sections) {
        if (start && cs.return_date < *start) continue;
        if (end && cs.return_date > *end) continue;
        Moments m{cs.Z.transpose() * cs.Z, cs.Z.transpose() * cs.r};
        auto f = solve_factor(model.gamma, m);
        if (!f) {
            out.warnings.push_back("dropped " + cs.return_date.iso() + ": rank-deficient Gamma'Z'ZGamma");
            continue;
        }
        out.dates.push_back(cs.return_date);
        rows.push_back(std::move(*f));
    }
    out.values.resize(static_cast<Eigen::Index>(rows.size()), model.K);
    for (std::size_t t = 0; t < rows.size(); ++t) out.values.row(static_cast<Eigen::Index>(t)) = rows[t].transpose();
    return out;
}

double max_abs_residual(const MatrixXd& gamma, const FactorReturns& f, const InstrumentMatrixSeries& data) {
    std::map<Date, Eigen::Index> row_of;
    for (std::size_t k = 0; k < f.dates.size(); ++k) row_of[f.dates[k]] = static_cast<Eigen::Index>(k);
    double worst = 0.0;
    for (const auto& cs : data.sections) {
        auto it = row_of.find(cs.return_date);
        if (it == row_of.end()) continue;
        const VectorXd fitted = cs.Z * (gamma * f.values.row(it->second).transpose());
        worst = std::max(worst, (fitted - cs.r).cwiseAbs().maxCoeff());
    }
    return worst;
}

VectorXd principal_angles(const MatrixXd& a, const MatrixXd& b) {
    const MatrixXd qa = Eigen::HouseholderQR<MatrixXd>(a).householderQ() * MatrixXd::Identity(a.rows(), a.cols());
    const MatrixXd qb = Eigen::HouseholderQR<MatrixXd>(b).householderQ() * MatrixXd::Identity(b.rows(), b.cols());
    // Sines of the angles from the component of qb outside span(qa): accurate
    // for tiny angles, where acos of the cosines would lose all precision.
    const MatrixXd outside = qb - qa * (qa.transpose() * qb);
    Eigen::JacobiSVD<MatrixXd> svd(outside);
    VectorXd s = svd.singularValues();
    for (Eigen::Index k = 0; k < s.size(); ++k) s(k) = std::asin(std::clamp(s(k), 0.0, 1.0));
    return s;
}

std::string stars_for(double p) {
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    if (p < 0.10) return "*";
    return "";
}

AlphaReport alpha_regression(std::span<const Date> dates, std::span<const double> returns, const FactorReturns& factors,
                             StdErrors errors) {
    if (dates.size() != returns.size()) throw std::invalid_argument("alpha_regression: dates/returns size mismatch");
    const Eigen::Index K = factors.values.cols();
    std::map<Date, Eigen::Index> row_of;
    for (std::size_t k = 0; k < factors.dates.size(); ++k) row_of[factors.dates[k]] = static_cast<Eigen::Index>(k);

    std::vector<std::pair<double, Eigen::Index>> aligned;
    for (std::size_t k = 0; k < dates.size(); ++k) {
        auto it = row_of.find(dates[k]);
        if (it != row_of.end()) aligned.emplace_back(returns[k], it->second);
    }
    const auto n = static_cast<Eigen::Index>(aligned.size());
    const Eigen::Index p = K + 1;
    if (n < K + 2) throw IpcaError("alpha_regression: need at least K + 2 aligned dates");

    MatrixXd X(n, p);
    VectorXd y(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        y(k) = aligned[static_cast<std::size_t>(k)].first;
        X(k, 0) = 1.0;
        X.row(k).tail(K) = factors.values.row(aligned[static_cast<std::size_t>(k)].second);
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
    if (qr.rank() < p) throw IpcaError("degenerate factor returns");
    const VectorXd beta = qr.solve(y);
    const VectorXd resid = y - X * beta;

    AlphaReport rep;
    rep.n_obs = static_cast<std::size_t>(n);
    rep.alpha_daily = beta(0);
    rep.alpha_annualized = beta(0) * metrics::kTradingDaysPerYear;
    for (Eigen::Index k = 1; k < p; ++k) rep.betas.push_back(beta(k));

    const MatrixXd XtX_inv = (X.transpose() * X).inverse();
    const double dof = static_cast<double>(n - p);
    const double sigma2 = resid.squaredNorm() / dof;
    double var_alpha = 0.0;
    if (errors == StdErrors::classical) {
        var_alpha = sigma2 * XtX_inv(0, 0);
    } else {
        const MatrixXd meat = X.transpose() * resid.cwiseAbs2().asDiagonal() * X;
        var_alpha = (XtX_inv * meat * XtX_inv)(0, 0);
    }

    // A residual at rounding level makes alpha / se meaningless noise: report
    // an exact fit and decide significance from alpha against that resolution.
    const double rms_y = std::sqrt(y.squaredNorm() / static_cast<double>(n));
    if (std::sqrt(sigma2) <= 1e-12 * rms_y) {
        rep.exact_fit = true;
        if (std::fabs(rep.alpha_daily) <= 1e-10 * rms_y) {
            rep.t_stat = 0.0;
            rep.p_value = 1.0;
        } else {
            rep.t_stat = std::copysign(std::numeric_limits<double>::infinity(), rep.alpha_daily);
            rep.p_value = 0.0;
        }
    } else {
        rep.t_stat = rep.alpha_daily / std::sqrt(var_alpha);
        const double a = std::fabs(rep.t_stat);
        if (n > 120) {
            rep.p_value = 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal_distribution<>(), a));
        } else {
            rep.p_value = 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<>(dof), a));
        }
    }
    rep.stars = stars_for(rep.p_value);
    return rep;
}

std::string IpcaModel::to_json() const {
    nlohmann::json j;
    j["K"] = K;
    j["characteristics"] = characteristics;
    nlohmann::json g = nlohmann::json::array();
    for (Eigen::Index l = 0; l < gamma.rows(); ++l) {
        std::vector<double> row(gamma.cols());
        for (Eigen::Index k = 0; k < gamma.cols(); ++k) row[static_cast<std::size_t>(k)] = gamma(l, k);
        g.push_back(row);
    }
    j["gamma"] = g;
    nlohmann::json fr = nlohmann::json::array();
    for (std::size_t t = 0; t < factor_returns.dates.size(); ++t) {
        std::vector<double> row(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) row[static_cast<std::size_t>(k)] = factor_returns.values(static_cast<Eigen::Index>(t), k);
        fr.push_back({{"date", factor_returns.dates[t].iso()}, {"f", row}});
    }
    j["factor_returns"] = fr;
    j["convergence"] = {{"iterations", convergence.iterations},
                        {"final_delta", convergence.final_delta},
                        {"converged", convergence.converged}};
    j["total_r2"] = total_r2;
    j["warnings"] = warnings;
    return j.dump(2);
}

}  // namespace factorlab::ipca
