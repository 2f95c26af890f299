#include "factorlab/factors.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace factorlab::factors {

namespace {

using dsl::CrossOp;
using dsl::Expr;
using dsl::RollOp;

Expr col(Field f) { return Expr::col(f); }
Expr czs(Expr x) { return Expr::cross(CrossOp::zscore, std::move(x)); }
Expr mean(Expr x, int w) { return Expr::rolling(RollOp::mean, std::move(x), w); }
Expr stdev(Expr x, int w) { return Expr::rolling(RollOp::std, std::move(x), w); }
Expr corr(Expr x, Expr y, int w) { return Expr::corr(std::move(x), std::move(y), w); }
Expr lag(Expr x, int k) { return Expr::lag(std::move(x), k); }
Expr diff(Expr x) { return Expr::diff(std::move(x)); }

CatalogEntry entry(std::string name, Expr e, std::string provenance, std::map<std::string, int> params) {
    return CatalogEntry{name, dsl::FactorSpec{name, std::move(e)}, std::move(provenance), std::move(params)};
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

Catalog builtin_catalog(const BuiltinWindows& w) {
    const Expr close = col(Field::close), ret = col(Field::ret), volume = col(Field::volume);
    const Expr amount = col(Field::amount), basis = col(Field::basis), spot = col(Field::spot);
    const Expr high = col(Field::high), low = col(Field::low);

    Catalog c;
    // Momentum (short minus long MA), volatility of returns, price-volume sentiment.
    c.push_back(entry("IMVSI",
                      czs(mean(close, w.ma_short) - mean(close, w.ma_long)) + czs(stdev(ret, w.volatility)) +
                          czs(corr(diff(close), volume, w.corr_long)),
                      "momentum + volatility + sentiment composite; volatility term sign is a calibration choice",
                      {{"ma_short", w.ma_short}, {"ma_long", w.ma_long}, {"volatility", w.volatility},
                       {"corr", w.corr_long}}));
    // Range/volume oscillation and relative volume.
    c.push_back(entry("ALOWS",
                      czs(corr((high - low) / close, volume, w.corr_short)) + czs(volume / mean(volume, w.volume_mean)),
                      "liquidity from price-range and volume oscillations",
                      {{"corr", w.corr_short}, {"volume_mean", w.volume_mean}}));
    // Standardized price shock, volume anomaly, price-volume correlation.
    c.push_back(entry("MRSI",
                      czs(diff(close) / lag(close, 1) / stdev(ret, w.volatility)) +
                          czs((volume - mean(volume, w.volume_mean)) / stdev(volume, w.volume_mean)) +
                          czs(corr(diff(close), volume, w.corr_short)),
                      "extreme price movements and volume anomalies",
                      {{"volatility", w.volatility}, {"volume_mean", w.volume_mean}, {"corr", w.corr_short}}));
    c.push_back(entry("FSI", czs(basis / spot), "futures-spot relationship through the basis", {}));
    c.push_back(entry("MMLI", czs(mean(diff(close), w.momentum_ma)) + czs(volume / amount),
                      "rolling mean of daily price changes plus volume-to-amount liquidity",
                      {{"momentum_ma", w.momentum_ma}}));
    c.push_back(entry("FMAT",
                      czs(diff(close) / lag(close, 1)) + czs(basis / spot) + czs(amount / mean(amount, w.amount_mean)),
                      "daily price dynamics, basis and liquidity", {{"amount_mean", w.amount_mean}}));
    return c;
}

Catalog parse_catalog(std::istream& in, const dsl::ParseOptions& options) {
    Catalog catalog;
    std::set<std::string, std::less<>> names;
    std::string line;
    std::size_t lineno = 0;
    std::string first_offender, offenders;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = line;
        s = trim(s.substr(0, s.find('#')));  // '#' never occurs in an expression
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) {
            throw CatalogError("line " + std::to_string(lineno), "expected 'name = expression'");
        }
        const std::string name(trim(s.substr(0, eq)));
        if (name.empty()) throw CatalogError("line " + std::to_string(lineno), "empty factor name");
        if (!names.insert(name).second) throw CatalogError(name, "duplicate name");

        dsl::FactorSpec spec;
        try {
            spec = dsl::parse(s.substr(eq + 1), name, options);
        } catch (const dsl::ParseError& e) {
            throw CatalogError(name, e.what());
        }
        const auto report = dsl::check_lookahead(spec);
        if (!report.pass) {
            if (offenders.empty()) first_offender = name;
            offenders += (offenders.empty() ? "" : "; ") + name + " at " + report.offenders().front().node;
            continue;
        }
        catalog.push_back(CatalogEntry{name, std::move(spec), "catalog file line " + std::to_string(lineno), {}});
    }
    if (!offenders.empty()) throw CatalogError(first_offender, "lookahead check failed: " + offenders);
    return catalog;
}

Catalog load_catalog(const std::string& path, const dsl::ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open catalog file " + path);
    return parse_catalog(in, options);
}

void write_catalog(const Catalog& catalog, std::ostream& out) {
    for (const auto& e : catalog) {
        if (!e.provenance.empty()) out << "# " << e.provenance << "\n";
        out << e.name << " = " << dsl::print(e.spec.expr) << "\n";
    }
}

}  // namespace factorlab::factors
