#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "factorlab/dsl.hpp"

namespace factorlab::factors {

struct CatalogEntry {
    std::string name;
    dsl::FactorSpec spec;
    std::string provenance;
    std::map<std::string, int> parameters;  // named window lengths
};

using Catalog = std::vector<CatalogEntry>;

/// Window lengths used by the builtin reconstructions; every builtin reads its
/// windows from here so alternate readings are one edit away.
struct BuiltinWindows {
    int ma_short = 5;
    int ma_long = 20;
    int volatility = 20;
    int corr_long = 20;
    int corr_short = 10;
    int volume_mean = 20;
    int momentum_ma = 7;
    int amount_mean = 20;
};

/// IMVSI, ALOWS, MRSI, FSI, MMLI, FMAT as single DSL expressions.
Catalog builtin_catalog(const BuiltinWindows& windows = {});

class CatalogError : public std::runtime_error {
public:
    CatalogError(const std::string& entry, const std::string& what)
        : std::runtime_error("catalog entry '" + entry + "': " + what), entry_(entry) {}
    const std::string& entry() const { return entry_; }

private:
    std::string entry_;
};

/// `name = expression` per line, `#` comments, blank lines ignored. Entries are
/// parsed and lookahead-checked; the first failure throws naming the entry.
Catalog parse_catalog(std::istream& in, const dsl::ParseOptions& options = {});
Catalog load_catalog(const std::string& path, const dsl::ParseOptions& options = {});

/// Normative serialization through the canonical printer.
void write_catalog(const Catalog& catalog, std::ostream& out);

}  // namespace factorlab::factors
