#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "factorlab/dsl.hpp"
#include "factorlab/factors.hpp"
#include "factorlab/ipca.hpp"
#include "factorlab/metrics.hpp"
#include "factorlab/panel.hpp"
#include "factorlab/portfolio.hpp"
#include "factorlab/synth.hpp"

namespace py = pybind11;
using namespace factorlab;

namespace {

py::array_t<double> grid_to_numpy(const Grid& g) {
    py::array_t<double> a({g.n_dates(), g.n_instruments()});
    auto m = a.mutable_unchecked<2>();
    for (std::size_t t = 0; t < g.n_dates(); ++t) {
        for (std::size_t i = 0; i < g.n_instruments(); ++i) m(t, i) = g(t, i);
    }
    return a;
}

Grid numpy_to_grid(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array (dates x instruments)");
    auto m = a.unchecked<2>();
    Grid g(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    for (py::ssize_t t = 0; t < a.shape(0); ++t) {
        for (py::ssize_t i = 0; i < a.shape(1); ++i) g(t, i) = m(t, i);
    }
    return g;
}

std::vector<std::string> iso_dates(const std::vector<Date>& dates) {
    std::vector<std::string> out;
    out.reserve(dates.size());
    for (const auto& d : dates) out.push_back(d.iso());
    return out;
}

std::optional<Date> opt_date(const std::optional<std::string>& s) {
    if (!s) return std::nullopt;
    auto d = Date::parse(*s);
    if (!d) throw std::invalid_argument("expected YYYY-MM-DD, got '" + *s + "'");
    return d;
}

Date req_date(const std::string& s) { return *opt_date(s); }

portfolio::Mode to_mode(const std::string& s) {
    auto m = portfolio::mode_from_name(s);
    if (!m) throw std::invalid_argument("mode must be 'long_short' or 'long_only'");
    return *m;
}

py::dict backtest_dict(const portfolio::BacktestResult& r) {
    py::dict d;
    d["dates"] = iso_dates(r.dates);
    d["returns"] = r.returns;
    d["wealth"] = r.wealth;
    d["fee_returns"] = r.fee_returns;
    d["fee_wealth"] = r.fee_wealth;
    d["turnover"] = r.turnover;
    d["blown_up"] = r.blown_up;
    d["descriptor"] = r.descriptor;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "factorlab core: factor DSL, decile backtests, performance metrics and IPCA";

    py::register_exception<PanelError>(m, "PanelError", PyExc_ValueError);
    py::register_exception<dsl::ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<dsl::LookaheadError>(m, "LookaheadError", PyExc_ValueError);
    py::register_exception<portfolio::NoSignals>(m, "NoSignals", PyExc_RuntimeError);
    py::register_exception<ipca::IpcaError>(m, "IpcaError", PyExc_RuntimeError);

    py::class_<Panel>(m, "Panel")
        .def_property_readonly("n_dates", &Panel::n_dates)
        .def_property_readonly("n_instruments", &Panel::n_instruments)
        .def_property_readonly("n_rows", &Panel::n_rows)
        .def_property_readonly("instruments", &Panel::instruments)
        .def_property_readonly("calendar", [](const Panel& p) { return iso_dates(p.calendar()); })
        .def("column", [](const Panel& p, const std::string& name) {
            auto f = field_from_name(name);
            if (!f) throw std::invalid_argument("unknown column '" + name + "'");
            return grid_to_numpy(p.column(*f));
        })
        .def("to_csv", [](const Panel& p) {
            std::ostringstream os;
            write_panel_csv(p, os);
            return os.str();
        });

    m.def("load_panel", [](const std::string& text) {
        std::istringstream in(text);
        return load_panel(in);
    }, py::arg("csv_text"), "Parse panel CSV text with the canonical header.");
    m.def("load_panel_file", [](const std::string& path) { return load_panel_file(path); }, py::arg("path"));
    m.def("slice", [](const Panel& p, const std::string& start, const std::string& end) {
        return slice(p, req_date(start), req_date(end));
    });

    m.def("generate_panel", [](std::uint64_t seed, std::size_t n_instruments, std::size_t n_days, double daily_vol,
                               double drift, std::optional<double> signal_strength) {
        synth::SynthConfig c;
        c.seed = seed;
        c.n_instruments = n_instruments;
        c.n_days = n_days;
        c.daily_vol = daily_vol;
        c.drift = drift;
        c.signal_strength = signal_strength;
        return synth::generate_panel(c);
    }, py::arg("seed") = 42, py::arg("n_instruments") = 20, py::arg("n_days") = 250, py::arg("daily_vol") = 0.02,
       py::arg("drift") = 0.0, py::arg("signal_strength") = py::none());

    m.def("parse", [](const std::string& text, bool allow_replay) {
        dsl::ParseOptions opt;
        opt.allow_replay = allow_replay;
        return dsl::print(dsl::parse_expression(text, opt));
    }, py::arg("expression"), py::arg("allow_replay") = false, "Parse and return the canonical form.");
    m.def("check_lookahead", [](const std::string& text) {
        const auto report = dsl::check_lookahead(dsl::parse_expression(text));
        py::list nodes;
        for (const auto& n : report.nodes) nodes.append(py::make_tuple(n.node, n.horizon, n.legal));
        return py::make_tuple(report.pass, nodes);
    });
    m.def("evaluate", [](const std::string& text, const Panel& p, bool allow_replay) {
        dsl::ParseOptions opt;
        opt.allow_replay = allow_replay;
        return grid_to_numpy(dsl::evaluate(dsl::parse(text, "factor", opt), p).values);
    }, py::arg("expression"), py::arg("panel"), py::arg("allow_replay") = false);

    m.def("builtin_catalog", [] {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& e : factors::builtin_catalog()) out.emplace_back(e.name, dsl::print(e.spec.expr));
        return out;
    });

    m.def("backtest_single", [](const std::string& text, const Panel& p, const std::string& mode, double fraction,
                                double fee_rate, int sign) {
        portfolio::BacktestConfig c;
        c.mode = to_mode(mode);
        c.fraction = fraction;
        c.fee_rate = fee_rate;
        return backtest_dict(portfolio::backtest_single(dsl::parse(text, "factor"), p, c, sign));
    }, py::arg("expression"), py::arg("panel"), py::arg("mode") = "long_short", py::arg("fraction") = 0.10,
       py::arg("fee_rate") = portfolio::kDefaultFeeRate, py::arg("sign") = 1);

    m.def("backtest_multi", [](const std::vector<std::string>& exprs, const Panel& p, const std::string& polarity,
                               const std::string& base, const std::string& mode, double fraction, double fee_rate,
                               std::optional<std::string> train_start, std::optional<std::string> train_end) {
        std::vector<dsl::FactorSpec> specs;
        for (std::size_t k = 0; k < exprs.size(); ++k) specs.push_back(dsl::parse(exprs[k], "f" + std::to_string(k)));
        portfolio::MultiConfig c;
        if (polarity == "static") c.polarity = portfolio::PolarityMode::static_sign;
        else if (polarity == "dynamic") c.polarity = portfolio::PolarityMode::dynamic_sign;
        else throw std::invalid_argument("polarity must be 'static' or 'dynamic'");
        c.polarity_base = to_mode(base);
        c.trade.mode = to_mode(mode);
        c.trade.fraction = fraction;
        c.trade.fee_rate = fee_rate;
        c.train_start = opt_date(train_start);
        c.train_end = opt_date(train_end);
        return backtest_dict(portfolio::backtest_multi(specs, p, c).backtest);
    }, py::arg("expressions"), py::arg("panel"), py::arg("polarity") = "static", py::arg("base") = "long_short",
       py::arg("mode") = "long_short", py::arg("fraction") = 0.10, py::arg("fee_rate") = portfolio::kDefaultFeeRate,
       py::arg("train_start") = py::none(), py::arg("train_end") = py::none());

    m.def("decile_weights", [](const std::vector<double>& values, const std::string& mode, double fraction) {
        return portfolio::decile_weights(values, to_mode(mode), fraction).weights;
    }, py::arg("values"), py::arg("mode") = "long_short", py::arg("fraction") = 0.10);

    m.def("annualized_return", [](const std::vector<double>& r) { return metrics::annualized_return(r); });
    m.def("sharpe_ratio", [](const std::vector<double>& r) { return metrics::sharpe_ratio(r); });
    m.def("max_drawdown", [](const std::vector<double>& w) { return metrics::max_drawdown(w); });
    m.def("ic_series", [](const py::array_t<double>& factor, const Panel& p) {
        const auto s = metrics::ic_series(numpy_to_grid(factor), p);
        py::dict d;
        d["ic_mean"] = s.ic_mean;
        d["ir"] = s.ir;
        d["dates"] = iso_dates(s.dates);
        d["ic"] = s.ic_series;
        return d;
    });

    m.def("fit_ipca", [](const Panel& p, int K, double tol, int max_iter) {
        const auto chars = ipca::default_characteristics();
        const auto data = ipca::build_instruments(p, chars, static_cast<std::size_t>(K) + 1);
        ipca::FitOptions opt;
        opt.tol = tol;
        opt.max_iter = max_iter;
        const auto model = ipca::fit_ipca(data, K, opt);
        py::dict d;
        d["gamma"] = model.gamma;
        d["factor_dates"] = iso_dates(model.factor_returns.dates);
        d["factor_returns"] = model.factor_returns.values;
        d["converged"] = model.convergence.converged;
        d["iterations"] = model.convergence.iterations;
        d["total_r2"] = model.total_r2;
        return d;
    }, py::arg("panel"), py::arg("K") = 5, py::arg("tol") = 1e-6, py::arg("max_iter") = 1000);

    m.def("alpha_regression", [](const std::vector<std::string>& dates, const std::vector<double>& returns,
                                 const std::vector<std::string>& factor_dates, const Eigen::MatrixXd& factor_returns) {
        std::vector<Date> d;
        for (const auto& s : dates) d.push_back(req_date(s));
        ipca::FactorReturns f;
        for (const auto& s : factor_dates) f.dates.push_back(req_date(s));
        f.values = factor_returns;
        const auto rep = ipca::alpha_regression(d, returns, f);
        py::dict out;
        out["alpha_annualized"] = rep.alpha_annualized;
        out["t_stat"] = rep.t_stat;
        out["p_value"] = rep.p_value;
        out["stars"] = rep.stars;
        out["betas"] = rep.betas;
        return out;
    });
}
