#pragma once

// Verb implementations behind the `factorlab` command-line tool. Each verb is a
// thin shell over the library: it loads inputs, calls the library, and
// serializes results. Exit codes: 0 success, 1 domain failure, 2 I/O failure.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "factorlab/factors.hpp"
#include "factorlab/metrics.hpp"
#include "factorlab/portfolio.hpp"
#include "factorlab/synth.hpp"

namespace factorlab::run {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string data;
    std::string schema;
    std::string catalog;  // empty: builtin catalog
    std::string out;
    std::uint64_t seed = 42;

    // backtest / multi
    std::vector<portfolio::Mode> modes = {portfolio::Mode::long_short, portfolio::Mode::long_only};
    double fraction = 0.10;
    double fee_rate = portfolio::kDefaultFeeRate;
    bool apply_static_sign = false;
    std::optional<Date> train_start, train_end;
    std::optional<Date> backtest_start, backtest_end;

    // ipca
    std::vector<int> ks = {5};
    std::vector<Field> characteristics = ipca::default_characteristics();
    double tol = 1e-6;
    int max_iter = 1000;

    // synth
    synth::SynthConfig synth;

    bool allow_replay = false;

    /// Applies one `key = value` setting; throws ConfigError on unknown keys
    /// or malformed values.
    void set(const std::string& key, const std::string& value);
};

/// Flat ordered `key = value` document, '#' comments.
std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in);
void apply_config_file(RunConfig& config, const std::string& path);

/// Column layout of backtest_<mode>.csv.
inline const std::vector<std::string> kBacktestColumns = {
    "factor", "annualized_return", "sharpe_ratio", "max_drawdown",
    "annualized_return_fee", "sharpe_ratio_fee", "max_drawdown_fee"};

/// 6 significant digits; "NA" for undefined values.
std::string format_metric(std::optional<double> v);

/// Raw triple then fee-adjusted triple, formatted for CSV.
std::vector<std::string> performance_cells(const portfolio::BacktestResult& result);

factors::Catalog resolve_catalog(const RunConfig& config);
Panel resolve_panel(const RunConfig& config);

/// Write-to-temp-then-rename.
void write_file_atomic(const std::string& path, const std::string& contents);

int cmd_validate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_dump_builtins(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_ic(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_backtest(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_multi(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_ipca(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace factorlab::run
