#include "factorlab/run.hpp"

#include <array>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "factorlab/ipca.hpp"

namespace factorlab::run {

namespace fs = std::filesystem;
using portfolio::Mode;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto pos = s.find(',', start);
        const auto item = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (!item.empty()) out.emplace_back(item);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double to_double(const std::string& key, std::string_view v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + std::string(v) + "'");
    return out;
}

template <typename Int>
Int to_int(const std::string& key, std::string_view v) {
    Int out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + std::string(v) + "'");
    return out;
}

Date to_date(const std::string& key, std::string_view v) {
    auto d = Date::parse(v);
    if (!d) throw ConfigError(key + ": expected YYYY-MM-DD, got '" + std::string(v) + "'");
    return *d;
}

bool to_bool(const std::string& key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + std::string(v) + "'");
}

/// Maps exceptions onto exit codes.
template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const std::ios_base::failure& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const PanelError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

fs::path out_dir(const RunConfig& c) {
    const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
    fs::create_directories(dir);
    return dir;
}

void check_ranges(const RunConfig& c) {
    if (c.train_start && c.train_end && *c.train_end < *c.train_start) throw ConfigError("train_end precedes train_start");
    if (c.backtest_start && c.backtest_end && *c.backtest_end < *c.backtest_start) {
        throw ConfigError("backtest_end precedes backtest_start");
    }
}

portfolio::BacktestConfig trade_config(const RunConfig& c, Mode mode, double fee_rate) {
    portfolio::BacktestConfig b;
    b.mode = mode;
    b.fraction = c.fraction;
    b.fee_rate = fee_rate;
    b.start = c.backtest_start;
    b.end = c.backtest_end;
    return b;
}

std::string csv_line(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) s += ',';
        s += cells[k];
    }
    s += '\n';
    return s;
}

std::string safe_name(const std::string& name) {
    std::string s = name;
    for (char& ch : s) {
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-')) ch = '_';
    }
    return s;
}

// Wide CSV of curves keyed by date; blank cells where a series has no value.
std::string wide_curves(const std::vector<std::string>& names,
                        const std::vector<std::pair<const std::vector<Date>*, const std::vector<double>*>>& series) {
    std::map<Date, std::vector<std::string>> rows;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& [dates, values] = series[k];
        for (std::size_t t = 0; t < dates->size(); ++t) {
            auto& row = rows[(*dates)[t]];
            row.resize(series.size());
            row[k] = format_number((*values)[t]);
        }
    }
    std::string s = "date";
    for (const auto& n : names) s += "," + n;
    s += '\n';
    for (auto& [date, row] : rows) {
        row.resize(series.size());
        s += date.iso();
        for (const auto& cell : row) s += "," + cell;
        s += '\n';
    }
    return s;
}

int sign_for(const RunConfig& c, const dsl::FactorSpec& spec, const Panel& panel, std::ostream& err) {
    if (!c.apply_static_sign) return +1;
    const auto p = portfolio::static_polarity(spec, panel, c.train_start.value_or(panel.calendar().front()),
                                              c.train_end.value_or(panel.calendar().back()), c.fraction);
    if (p.warning) err << "warning: " << *p.warning << "\n";
    return p.sign;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& raw) {
    const std::string_view v = trim(raw);
    if (key == "data") data = v;
    else if (key == "schema") schema = v;
    else if (key == "catalog") catalog = v;
    else if (key == "out") out = v;
    else if (key == "seed") seed = synth.seed = to_int<std::uint64_t>(key, v);
    else if (key == "mode") {
        if (v == "both") modes = {Mode::long_short, Mode::long_only};
        else if (auto m = portfolio::mode_from_name(v)) modes = {*m};
        else throw ConfigError("mode: expected long_short, long_only or both");
    } else if (key == "fraction") fraction = to_double(key, v);
    else if (key == "fee_rate") fee_rate = to_double(key, v);
    else if (key == "apply_static_sign") apply_static_sign = to_bool(key, v);
    else if (key == "train_start") train_start = to_date(key, v);
    else if (key == "train_end") train_end = to_date(key, v);
    else if (key == "backtest_start") backtest_start = to_date(key, v);
    else if (key == "backtest_end") backtest_end = to_date(key, v);
    else if (key == "k") {
        ks.clear();
        for (const auto& item : split_list(v)) ks.push_back(to_int<int>(key, item));
        if (ks.empty()) throw ConfigError("k: empty list");
    } else if (key == "characteristics") {
        characteristics.clear();
        for (const auto& item : split_list(v)) {
            auto f = field_from_name(item);
            if (!f || *f == Field::replay) throw ConfigError("characteristics: unknown column '" + item + "'");
            characteristics.push_back(*f);
        }
    } else if (key == "tol") tol = to_double(key, v);
    else if (key == "max_iter") max_iter = to_int<int>(key, v);
    else if (key == "n_instruments") synth.n_instruments = to_int<std::size_t>(key, v);
    else if (key == "n_days") synth.n_days = to_int<std::size_t>(key, v);
    else if (key == "daily_vol") synth.daily_vol = to_double(key, v);
    else if (key == "drift") synth.drift = to_double(key, v);
    else if (key == "basis_vol") synth.basis_vol = to_double(key, v);
    else if (key == "volume_scale") synth.volume_scale = to_double(key, v);
    else if (key == "missing_rate") synth.missing_rate = to_double(key, v);
    else if (key == "signal_strength") synth.signal_strength = to_double(key, v);
    else if (key == "start") synth.start = to_date(key, v);
    else if (key == "allow_replay") allow_replay = to_bool(key, v);
    else throw ConfigError("unknown configuration key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        kv.emplace_back(std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1))));
    }
    return kv;
}

void apply_config_file(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open config file " + path);
    for (const auto& [k, v] : parse_config(in)) config.set(k, v);
}

std::string format_metric(std::optional<double> v) {
    if (!v || !std::isfinite(*v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *v);
    return buf;
}

std::vector<std::string> performance_cells(const portfolio::BacktestResult& r) {
    std::vector<std::string> cells;
    for (const auto* series : {&r.returns, &r.fee_returns}) {
        std::optional<double> ann;
        try {
            ann = metrics::annualized_return(*series);
        } catch (const metrics::BlowUpError&) {
            ann = std::nullopt;
        }
        cells.push_back(format_metric(ann));
        cells.push_back(format_metric(metrics::sharpe_ratio(*series)));
        cells.push_back(format_metric(metrics::max_drawdown(metrics::wealth_curve(*series))));
    }
    return cells;
}

factors::Catalog resolve_catalog(const RunConfig& c) {
    if (c.catalog.empty() || c.catalog == "builtin") return factors::builtin_catalog();
    dsl::ParseOptions opt;
    opt.allow_replay = c.allow_replay;
    return factors::load_catalog(c.catalog, opt);
}

Panel resolve_panel(const RunConfig& c) {
    if (c.data.empty()) throw ConfigError("no data file given (--data)");
    if (!fs::exists(c.data)) throw std::ios_base::failure("data file not found: " + c.data);
    const Schema schema = c.schema.empty() ? Schema{} : Schema::from_file(c.schema);
    return load_panel_file(c.data, schema);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::ios_base::failure("cannot write " + tmp.string());
        out << contents;
        out.flush();
        if (!out) throw std::ios_base::failure("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

int cmd_validate(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (c.data.empty()) throw ConfigError("no data file given (--data)");
        std::ifstream in(c.data);
        if (!in) throw std::ios_base::failure("cannot open data file " + c.data);
        const Schema schema = c.schema.empty() ? Schema{} : Schema::from_file(c.schema);
        const auto result = read_panel_csv(in, schema);
        out << result.report.to_text();
        out << result.report.to_json() << "\n";
        return result.report.accepted() ? 0 : 1;
    });
}

int cmd_synth(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Panel panel = synth::generate_panel(c.synth);
        std::ostringstream os;
        write_panel_csv(panel, os);
        if (c.out.empty()) {
            out << os.str();
        } else {
            write_file_atomic(c.out, os.str());
            out << "wrote " << panel.n_rows() << " rows to " << c.out << "\n";
        }
        return 0;
    });
}

int cmd_dump_builtins(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        std::ostringstream os;
        factors::write_catalog(factors::builtin_catalog(), os);
        if (c.out.empty()) out << os.str();
        else write_file_atomic(c.out, os.str());
        return 0;
    });
}

int cmd_ic(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto catalog = resolve_catalog(c);
        if (catalog.empty()) throw ConfigError("no factors");
        const Panel panel = resolve_panel(c);
        std::string csv = csv_line({"factor", "ic_mean", "ir"});
        for (const auto& e : catalog) {
            const auto values = dsl::evaluate(e.spec, panel).values;
            const auto ic = metrics::ic_series(values, panel);
            csv += csv_line({e.name, format_metric(ic.ic_mean), format_metric(ic.ir)});
        }
        const auto path = (out_dir(c) / "ic.csv").string();
        write_file_atomic(path, csv);
        out << "wrote " << path << "\n";
        return 0;
    });
}

int cmd_backtest(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        check_ranges(c);
        const auto catalog = resolve_catalog(c);
        if (catalog.empty()) throw ConfigError("no factors");
        const Panel panel = resolve_panel(c);
        const auto dir = out_dir(c);

        for (Mode mode : c.modes) {
            const std::string tag(portfolio::mode_name(mode));
            std::string summary = csv_line(kBacktestColumns);
            std::vector<std::string> names;
            std::vector<portfolio::BacktestResult> results;
            for (const auto& e : catalog) {
                const int sign = sign_for(c, e.spec, panel, err);
                auto res = portfolio::backtest_single(e.spec, panel, trade_config(c, mode, c.fee_rate), sign);
                auto cells = performance_cells(res);
                cells.insert(cells.begin(), e.name);
                summary += csv_line(cells);

                std::string daily = csv_line({"date", "return", "return_fee", "turnover", "wealth", "wealth_fee"});
                for (std::size_t t = 0; t < res.dates.size(); ++t) {
                    daily += csv_line({res.dates[t].iso(), format_number(res.returns[t]), format_number(res.fee_returns[t]),
                                       format_number(res.turnover[t]), format_number(res.wealth[t]),
                                       format_number(res.fee_wealth[t])});
                }
                write_file_atomic((dir / ("returns_" + tag + "_" + safe_name(e.name) + ".csv")).string(), daily);
                names.push_back(e.name);
                names.push_back(e.name + "_fee");
                results.push_back(std::move(res));
            }
            std::vector<std::pair<const std::vector<Date>*, const std::vector<double>*>> curves;
            for (const auto& r : results) {
                curves.emplace_back(&r.dates, &r.wealth);
                curves.emplace_back(&r.dates, &r.fee_wealth);
            }
            write_file_atomic((dir / ("wealth_" + tag + ".csv")).string(), wide_curves(names, curves));
            const auto path = (dir / ("backtest_" + tag + ".csv")).string();
            write_file_atomic(path, summary);
            out << "wrote " << path << "\n";
        }
        return 0;
    });
}

int cmd_multi(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        check_ranges(c);
        const auto catalog = resolve_catalog(c);
        if (catalog.empty()) throw ConfigError("no factors");
        const Panel panel = resolve_panel(c);
        const auto dir = out_dir(c);

        std::vector<dsl::FactorSpec> specs;
        for (const auto& e : catalog) specs.push_back(e.spec);

        struct Approach {
            std::string name;
            portfolio::PolarityMode polarity;
            Mode base;
        };
        const std::vector<Approach> approaches = {
            {"static", portfolio::PolarityMode::static_sign, Mode::long_short},
            {"dynamic_long_short", portfolio::PolarityMode::dynamic_sign, Mode::long_short},
            {"dynamic_long_only", portfolio::PolarityMode::dynamic_sign, Mode::long_only},
        };

        std::vector<std::string> header = {"approach", "strategy"};
        header.insert(header.end(), kBacktestColumns.begin() + 1, kBacktestColumns.end());
        std::string summary = csv_line(header);
        std::vector<std::string> names;
        std::vector<portfolio::BacktestResult> results;
        for (const auto& a : approaches) {
            for (Mode mode : {Mode::long_only, Mode::long_short}) {
                portfolio::MultiConfig mc;
                mc.polarity = a.polarity;
                mc.polarity_base = a.base;
                mc.trade = trade_config(c, mode, c.fee_rate);
                mc.train_start = c.train_start;
                mc.train_end = c.train_end;
                auto res = portfolio::backtest_multi(specs, panel, mc).backtest;
                auto cells = performance_cells(res);
                cells.insert(cells.begin(), std::string(portfolio::mode_name(mode)));
                cells.insert(cells.begin(), a.name);
                summary += csv_line(cells);
                const std::string col = a.name + "_" + std::string(portfolio::mode_name(mode));
                names.push_back(col);
                names.push_back(col + "_fee");
                results.push_back(std::move(res));
            }
        }
        std::vector<std::pair<const std::vector<Date>*, const std::vector<double>*>> curves;
        for (const auto& r : results) {
            curves.emplace_back(&r.dates, &r.wealth);
            curves.emplace_back(&r.dates, &r.fee_wealth);
        }
        write_file_atomic((dir / "multi_wealth.csv").string(), wide_curves(names, curves));
        const auto path = (dir / "multi.csv").string();
        write_file_atomic(path, summary);
        out << "wrote " << path << "\n";
        return 0;
    });
}

int cmd_ipca(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        check_ranges(c);
        const auto catalog = resolve_catalog(c);
        if (catalog.empty()) throw ConfigError("no factors");
        const Panel panel = resolve_panel(c);
        const auto dir = out_dir(c);

        int max_k = 1;
        for (int k : c.ks) max_k = std::max(max_k, k);
        const auto all = ipca::build_instruments(panel, c.characteristics, static_cast<std::size_t>(max_k) + 1);
        for (const auto& w : all.warnings) err << "warning: " << w << "\n";

        ipca::InstrumentMatrixSeries train;
        train.characteristics = all.characteristics;
        for (const auto& cs : all.sections) {
            if (c.train_start && cs.return_date < *c.train_start) continue;
            if (c.train_end && cs.return_date > *c.train_end) continue;
            train.sections.push_back(cs);
        }

        // Portfolio returns are fee-free; the alpha is a statement about the signal.
        std::vector<std::pair<std::string, std::array<portfolio::BacktestResult, 2>>> portfolios;
        for (const auto& e : catalog) {
            const int sign = sign_for(c, e.spec, panel, err);
            portfolios.emplace_back(
                e.name, std::array<portfolio::BacktestResult, 2>{
                            portfolio::backtest_single(e.spec, panel, trade_config(c, Mode::long_short, 0.0), sign),
                            portfolio::backtest_single(e.spec, panel, trade_config(c, Mode::long_only, 0.0), sign)});
        }

        std::string r2 = csv_line({"K", "total_r2", "converged", "iterations"});
        for (int K : c.ks) {
            ipca::FitOptions opt;
            opt.tol = c.tol;
            opt.max_iter = c.max_iter;
            const auto model = ipca::fit_ipca(train, K, opt);
            for (const auto& w : model.warnings) err << "warning: " << w << "\n";
            write_file_atomic((dir / ("ipca_model_K" + std::to_string(K) + ".json")).string(), model.to_json() + "\n");
            r2 += csv_line({std::to_string(K), format_metric(model.total_r2), model.convergence.converged ? "true" : "false",
                            std::to_string(model.convergence.iterations)});

            const auto test = ipca::oos_factor_returns(model, all, c.backtest_start, c.backtest_end);
            for (const auto& w : test.warnings) err << "warning: " << w << "\n";

            std::string table = csv_line({"factor", "long_short", "long_only"});
            std::string detail = csv_line({"factor", "strategy", "alpha_annualized", "t_stat", "p_value", "stars", "n_obs"});
            for (const auto& [name, pair] : portfolios) {
                std::vector<std::string> row = {name};
                for (std::size_t s = 0; s < 2; ++s) {
                    const auto& res = pair[s];
                    const auto rep = ipca::alpha_regression(res.dates, res.returns, test);
                    row.push_back(format_metric(rep.alpha_annualized) + rep.stars);
                    detail += csv_line({name, std::string(portfolio::mode_name(res.mode)), format_metric(rep.alpha_annualized),
                                        format_metric(rep.t_stat), format_metric(rep.p_value), rep.stars,
                                        std::to_string(rep.n_obs)});
                }
                table += csv_line(row);
            }
            write_file_atomic((dir / ("ipca_alpha_K" + std::to_string(K) + ".csv")).string(), table);
            write_file_atomic((dir / ("ipca_alpha_detail_K" + std::to_string(K) + ".csv")).string(), detail);
        }
        write_file_atomic((dir / "ipca_r2.csv").string(), r2);
        out << "wrote IPCA outputs to " << dir.string() << "\n";
        return 0;
    });
}

}  // namespace factorlab::run
