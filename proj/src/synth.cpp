#include "factorlab/synth.hpp"

#include <cmath>
#include <cstdio>

#include "factorlab/rng.hpp"

namespace factorlab::synth {

namespace {

Xoshiro256 stream(std::uint64_t seed, std::size_t instrument, StreamTag tag) {
    return Xoshiro256::stream(seed, instrument * 16 + static_cast<std::uint64_t>(tag));
}

std::string instrument_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "F%03zu", i);
    return buf;
}

}  // namespace

std::vector<Date> business_days(Date start, std::size_t n) {
    std::vector<Date> out;
    out.reserve(n);
    for (Date d = start; out.size() < n; d = d + 1) {
        if (d.weekday() < 5) out.push_back(d);
    }
    return out;
}

Panel generate_panel(const SynthConfig& c) {
    if (c.n_instruments < 1) throw std::invalid_argument("synth: n_instruments must be >= 1");
    if (c.n_days < 2) throw std::invalid_argument("synth: n_days must be >= 2");
    if (c.daily_vol < 0.0 || c.basis_vol < 0.0) throw std::invalid_argument("synth: volatilities must be >= 0");
    if (c.missing_rate < 0.0 || c.missing_rate >= 1.0) throw std::invalid_argument("synth: missing_rate in [0, 1)");

    const auto dates = business_days(c.start, c.n_days);
    std::vector<PanelRow> rows;
    rows.reserve(c.n_instruments * c.n_days);

    for (std::size_t i = 0; i < c.n_instruments; ++i) {
        auto price_rng = stream(c.seed, i, StreamTag::start_price);
        auto ret_rng = stream(c.seed, i, StreamTag::returns);
        auto high_rng = stream(c.seed, i, StreamTag::high);
        auto low_rng = stream(c.seed, i, StreamTag::low);
        auto basis_rng = stream(c.seed, i, StreamTag::basis);
        auto vol_rng = stream(c.seed, i, StreamTag::volume);
        auto amt_rng = stream(c.seed, i, StreamTag::amount);
        auto replay_rng = stream(c.seed, i, StreamTag::replay);
        auto miss_rng = stream(c.seed, i, StreamTag::missing);

        // Full daily path first; missing days are dropped afterwards so the
        // close series of traded days is still a geometric walk.
        std::vector<double> close(c.n_days);
        close[0] = 100.0 * std::exp(0.5 * price_rng.normal());
        for (std::size_t t = 1; t < c.n_days; ++t) {
            close[t] = close[t - 1] * std::exp(c.drift + c.daily_vol * ret_rng.normal());
        }
        std::vector<bool> keep(c.n_days, true);
        for (std::size_t t = 1; t < c.n_days; ++t) keep[t] = !(miss_rng.uniform() < c.missing_rate);

        const std::size_t first_row = rows.size();
        double prev_close = close[0];
        for (std::size_t t = 0; t < c.n_days; ++t) {
            // Draw every variate even on dropped days so streams stay aligned.
            const double uh = std::fabs(high_rng.normal()) * c.daily_vol * 0.5;
            const double ul = std::min(0.5, std::fabs(low_rng.normal()) * c.daily_vol * 0.5);
            const double b = c.basis_vol * basis_rng.normal();
            const double vz = vol_rng.normal();
            const double az = amt_rng.normal();
            if (!keep[t]) continue;

            PanelRow r;
            r.instrument = instrument_id(i);
            r.date = dates[t];
            r.close = close[t];
            r.open = prev_close;
            r.high = std::max(r.open, r.close) * (1.0 + uh);
            r.low = std::min(r.open, r.close) * (1.0 - ul);
            r.spot = r.close * (1.0 + b);
            r.basis = r.spot - r.close;
            r.premium = r.close - r.spot;
            r.volume = std::max(1.0, std::round(c.volume_scale * std::exp(0.5 * vz)));
            r.amount = r.volume * r.close * (1.0 + 0.001 * az);
            rows.push_back(std::move(r));
            prev_close = close[t];
        }

        if (c.signal_strength) {
            const double s = *c.signal_strength;
            for (std::size_t k = first_row; k + 1 < rows.size(); ++k) {
                const double next_ret = rows[k + 1].close / rows[k].close - 1.0;
                const double noise = c.daily_vol * replay_rng.normal();
                rows[k].replay = s == 1.0 ? next_ret : s * next_ret + (1.0 - s) * noise;
            }
        }
    }
    return Panel::build(std::move(rows));
}

Eigen::MatrixXd random_orthonormal(Eigen::Index L, Eigen::Index K, std::uint64_t seed) {
    Xoshiro256 rng(seed);
    Eigen::MatrixXd a(L, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        for (Eigen::Index l = 0; l < L; ++l) a(l, k) = rng.normal();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    return qr.householderQ() * Eigen::MatrixXd::Identity(L, K);
}

IpcaSynthetic generate_ipca_panel(std::uint64_t seed, const Eigen::MatrixXd& gamma0, std::size_t n_instruments,
                                  std::size_t n_days, double noise_std, double factor_scale) {
    const Eigen::Index L = gamma0.rows(), K = gamma0.cols();
    const Eigen::MatrixXd gram = gamma0.transpose() * gamma0;
    if (!gram.isIdentity(1e-10)) throw std::invalid_argument("generate_ipca_panel: gamma0 columns must be orthonormal");
    if (noise_std < 0.0) throw std::invalid_argument("generate_ipca_panel: noise_std must be >= 0");

    IpcaSynthetic out;
    out.gamma0 = gamma0;
    out.factors.resize(static_cast<Eigen::Index>(n_days), K);
    for (Eigen::Index l = 0; l < L; ++l) out.data.characteristics.push_back("z" + std::to_string(l));

    auto z_rng = Xoshiro256::stream(seed, 0);
    auto f_rng = Xoshiro256::stream(seed, 1);
    auto e_rng = Xoshiro256::stream(seed, 2);
    const auto dates = business_days(Date::from_ymd(2018, 1, 2), n_days + 1);
    const auto N = static_cast<Eigen::Index>(n_instruments);
    for (std::size_t t = 0; t < n_days; ++t) {
        ipca::CrossSection cs;
        cs.date = dates[t];
        cs.return_date = dates[t + 1];
        cs.Z.resize(N, L);
        for (Eigen::Index i = 0; i < N; ++i) {
            cs.instruments.push_back(static_cast<std::size_t>(i));
            for (Eigen::Index l = 0; l < L; ++l) cs.Z(i, l) = z_rng.uniform(-0.5, 0.5);
        }
        Eigen::VectorXd f(K);
        for (Eigen::Index k = 0; k < K; ++k) f(k) = factor_scale * f_rng.normal();
        out.factors.row(static_cast<Eigen::Index>(t)) = f.transpose();
        cs.r = cs.Z * (gamma0 * f);
        if (noise_std > 0.0) {
            for (Eigen::Index i = 0; i < N; ++i) cs.r(i) += noise_std * e_rng.normal();
        }
        out.data.sections.push_back(std::move(cs));
    }
    return out;
}

}  // namespace factorlab::synth
