#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "factorlab/ipca.hpp"
#include "factorlab/panel.hpp"

namespace factorlab::synth {

struct SynthConfig {
    std::uint64_t seed = 42;
    std::size_t n_instruments = 20;
    std::size_t n_days = 250;
    double daily_vol = 0.02;
    double drift = 0.0;
    double basis_vol = 0.01;
    double volume_scale = 10000.0;
    double missing_rate = 0.0;  // probability an instrument-day after the first is absent
    Date start = Date::from_ymd(2018, 1, 2);
    /// Writes replay(i, t) = s * r(i, t') + (1 - s) * noise into the auxiliary
    /// replay column when set.
    std::optional<double> signal_strength;
};

/// Stream ids: instrument * 16 + column tag. Each (seed, stream) pair drives an
/// independent xoshiro256** sequence.
enum class StreamTag : std::uint64_t { start_price = 0, returns = 1, high = 2, low = 3, basis = 4, volume = 5,
                                       amount = 6, replay = 7, missing = 8 };

/// Weekdays from `start`, `n` of them.
std::vector<Date> business_days(Date start, std::size_t n);

Panel generate_panel(const SynthConfig& config);

struct IpcaSynthetic {
    ipca::InstrumentMatrixSeries data;
    Eigen::MatrixXd gamma0;   // L x K
    Eigen::MatrixXd factors;  // T x K, row t pairs with data.sections[t]
};

/// Random L x K matrix with orthonormal columns.
Eigen::MatrixXd random_orthonormal(Eigen::Index L, Eigen::Index K, std::uint64_t seed);

/// Exact-model data: Z uniform on [-0.5, 0.5], f ~ N(0, factor_scale^2),
/// r = Z gamma0 f + noise_std * N(0, 1).
IpcaSynthetic generate_ipca_panel(std::uint64_t seed, const Eigen::MatrixXd& gamma0, std::size_t n_instruments,
                                  std::size_t n_days, double noise_std, double factor_scale = 0.05);

}  // namespace factorlab::synth
