#pragma once

// Brute-force reference computations, written independently of the library.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace oracle {

struct Member {
    double value;
    std::size_t id;
};

/// Equal-weight top-minus-bottom (or top only) mean of next returns. Ids with a
/// missing next return count as zero. Returns NaN for a flat day.
inline double decile_return(const std::vector<double>& values, const std::vector<double>& next_ret, bool long_short,
                            double fraction) {
    std::vector<Member> live;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::isfinite(values[i])) live.push_back({values[i], i});
    }
    if (live.empty() || (long_short && live.size() < 2)) return std::nan("");
    std::size_t n = static_cast<std::size_t>(std::floor(fraction * double(live.size())));
    if (n == 0) n = 1;

    auto top = live;
    std::sort(top.begin(), top.end(), [](const Member& a, const Member& b) {
        return a.value != b.value ? a.value > b.value : a.id < b.id;
    });
    std::vector<bool> is_long(values.size(), false);
    double long_sum = 0;
    for (std::size_t k = 0; k < n; ++k) {
        is_long[top[k].id] = true;
        if (std::isfinite(next_ret[top[k].id])) long_sum += next_ret[top[k].id];
    }
    if (!long_short) return long_sum / double(n);

    auto bottom = live;
    std::sort(bottom.begin(), bottom.end(), [](const Member& a, const Member& b) {
        return a.value != b.value ? a.value < b.value : a.id < b.id;
    });
    double short_sum = 0;
    std::size_t taken = 0;
    for (const auto& m : bottom) {
        if (taken == n) break;
        if (is_long[m.id]) continue;
        if (std::isfinite(next_ret[m.id])) short_sum += next_ret[m.id];
        ++taken;
    }
    return long_sum / double(n) - short_sum / double(n);
}

inline std::vector<double> zscore(const std::vector<double>& x) {
    double s = 0, n = 0;
    for (double v : x) {
        if (std::isfinite(v)) s += v, n += 1;
    }
    std::vector<double> out(x.size(), std::nan(""));
    if (n == 0) return out;
    const double mean = s / n;
    double ss = 0;
    for (double v : x) {
        if (std::isfinite(v)) ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / n);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) continue;
        out[i] = sd > 0 ? (x[i] - mean) / sd : 0.0;
    }
    return out;
}

/// Ranks 1..n with tied values sharing the average rank.
inline std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double below = 0, equal = 0;
        for (double y : x) {
            if (y < x[i]) below += 1;
            if (y == x[i]) equal += 1;
        }
        out[i] = below + (equal + 1) / 2.0;
    }
    return out;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = double(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        sab += (a[k] - ma) * (b[k] - mb);
        saa += (a[k] - ma) * (a[k] - ma);
        sbb += (b[k] - mb) * (b[k] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    return pearson(ranks(a), ranks(b));
}

/// Solves (X'X) beta = X'y by Gauss-Jordan with partial pivoting.
inline std::vector<double> normal_equations(const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
    const std::size_t p = X.front().size();
    std::vector<std::vector<double>> A(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t r = 0; r < X.size(); ++r) {
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = 0; b < p; ++b) A[a][b] += X[r][a] * X[r][b];
            A[a][p] += X[r][a] * y[r];
        }
    }
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < p; ++r) {
            if (std::fabs(A[r][c]) > std::fabs(A[piv][c])) piv = r;
        }
        std::swap(A[c], A[piv]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == c) continue;
            const double f = A[r][c] / A[c][c];
            for (std::size_t k = c; k <= p; ++k) A[r][k] -= f * A[c][k];
        }
    }
    std::vector<double> beta(p);
    for (std::size_t c = 0; c < p; ++c) beta[c] = A[c][p] / A[c][c];
    return beta;
}

}  // namespace oracle
