#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace factorlab {

/// Marker for a missing cell (warm-up, untraded day, undefined arithmetic).
inline constexpr double kGap = std::numeric_limits<double>::quiet_NaN();

inline bool is_gap(double v) { return !std::isfinite(v); }

/// Dense date x instrument matrix, row-major by date. Gaps are NaN.
class Grid {
public:
    Grid() = default;
    Grid(std::size_t n_dates, std::size_t n_instruments, double fill = kGap)
        : dates_(n_dates), instruments_(n_instruments), data_(n_dates * n_instruments, fill) {}

    std::size_t n_dates() const { return dates_; }
    std::size_t n_instruments() const { return instruments_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t t, std::size_t i) { return data_[t * instruments_ + i]; }
    double operator()(std::size_t t, std::size_t i) const { return data_[t * instruments_ + i]; }

    std::span<double> row(std::size_t t) { return {data_.data() + t * instruments_, instruments_}; }
    std::span<const double> row(std::size_t t) const {
        return {data_.data() + t * instruments_, instruments_};
    }

    const std::vector<double>& values() const { return data_; }

    /// Cell-wise equality that treats two gaps as equal; bit-level otherwise.
    bool same_as(const Grid& other) const {
        if (dates_ != other.dates_ || instruments_ != other.instruments_) return false;
        for (std::size_t k = 0; k < data_.size(); ++k) {
            const bool ga = is_gap(data_[k]), gb = is_gap(other.data_[k]);
            if (ga != gb || (!ga && data_[k] != other.data_[k])) return false;
        }
        return true;
    }

private:
    std::size_t dates_ = 0;
    std::size_t instruments_ = 0;
    std::vector<double> data_;
};

}  // namespace factorlab
