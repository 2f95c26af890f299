#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "factorlab/panel.hpp"
#include "factorlab/synth.hpp"

namespace fixtures {

using factorlab::Date;
using factorlab::Panel;
using factorlab::PanelRow;

inline Date day(int k) { return Date::from_ymd(2020, 1, 6) + k; }

inline std::string name(std::size_t i) {
    std::string s = "I";
    if (i < 10) s += '0';
    return s + std::to_string(i);
}

inline PanelRow row(const std::string& inst, Date d, double close, double volume = 100.0) {
    PanelRow r;
    r.instrument = inst;
    r.date = d;
    r.close = close;
    r.open = close;
    r.high = close * 1.01;
    r.low = close * 0.99;
    r.spot = close * 1.002;
    r.basis = r.spot - r.close;
    r.premium = r.close - r.spot;
    r.volume = volume;
    r.amount = volume * close;
    return r;
}

/// closes[t][i]; NaN marks an absent instrument-day.
inline Panel from_closes(const std::vector<std::vector<double>>& closes) {
    std::vector<PanelRow> rows;
    for (std::size_t t = 0; t < closes.size(); ++t) {
        for (std::size_t i = 0; i < closes[t].size(); ++i) {
            if (std::isnan(closes[t][i])) continue;
            rows.push_back(row(name(i), day(static_cast<int>(t)), closes[t][i], 100.0 + 7.0 * i + t));
        }
    }
    return Panel::build(std::move(rows));
}

inline Panel synthetic(std::uint64_t seed, std::size_t n_instruments, std::size_t n_days) {
    factorlab::synth::SynthConfig c;
    c.seed = seed;
    c.n_instruments = n_instruments;
    c.n_days = n_days;
    return factorlab::synth::generate_panel(c);
}

}  // namespace fixtures
