// factorlab command-line tool.
//
//   factorlab <verb> [--data F] [--schema F] [--catalog F] [--out P] [--config F] [--seed N] [--set key=value ...]
//
// Settings resolve in order: defaults, --config file, then flags.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "factorlab/run.hpp"

namespace {

using Verb = int (*)(const factorlab::run::RunConfig&, std::ostream&, std::ostream&);

struct Flags {
    std::string config;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::vector<std::string> sets;
};

void add_global_flags(CLI::App& app, Flags& flags) {
    auto opt = [&](const char* name, const char* key, const char* help) {
        app.add_option_function<std::string>(
            name, [&flags, key](const std::string& v) { flags.overrides.emplace_back(key, v); }, help);
    };
    opt("--data", "data", "panel CSV");
    opt("--schema", "schema", "schema mapping file (canonical = header)");
    opt("--catalog", "catalog", "factor catalog file, or 'builtin'");
    opt("--out", "out", "output directory (file path for synth and dump-builtins)");
    opt("--seed", "seed", "seed for synthetic data");
    opt("--mode", "mode", "long_short | long_only | both");
    opt("--fee-rate", "fee_rate", "fee per unit of one-sided turnover");
    opt("--fraction", "fraction", "decile fraction");
    opt("--k", "k", "IPCA factor counts, comma separated");
    app.add_option("--config", flags.config, "flat key = value configuration file");
    app.add_option("--set", flags.sets, "extra key=value setting (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"factorlab: futures factor research engine"};
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, std::pair<std::string, Verb>>> verbs = {
        {"validate", {"validate a panel file", &factorlab::run::cmd_validate}},
        {"synth", {"write a seeded synthetic panel", &factorlab::run::cmd_synth}},
        {"dump-builtins", {"print the builtin factor catalog", &factorlab::run::cmd_dump_builtins}},
        {"ic", {"Spearman IC mean and IR per factor", &factorlab::run::cmd_ic}},
        {"backtest", {"single-factor decile backtests", &factorlab::run::cmd_backtest}},
        {"multi", {"static and dynamic multi-factor backtests", &factorlab::run::cmd_multi}},
        {"ipca", {"fit IPCA and report factor alphas", &factorlab::run::cmd_ipca}},
    };

    Flags flags;
    Verb chosen = nullptr;
    for (const auto& [name, entry] : verbs) {
        auto* sub = app.add_subcommand(name, entry.first);
        add_global_flags(*sub, flags);
        sub->callback([&chosen, fn = entry.second] { chosen = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    factorlab::run::RunConfig config;
    try {
        if (!flags.config.empty()) factorlab::run::apply_config_file(config, flags.config);
        for (const auto& [k, v] : flags.overrides) config.set(k, v);
        for (const auto& kv : flags.sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw factorlab::run::ConfigError("--set expects key=value");
            config.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return chosen(config, std::cout, std::cerr);
}
