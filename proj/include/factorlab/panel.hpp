#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "factorlab/date.hpp"
#include "factorlab/grid.hpp"

namespace factorlab {

/// Numeric panel columns. `ret` is derived; `replay` is an optional auxiliary
/// column used by perfect-foresight test fixtures.
enum class Field { basis, spot, premium, open, high, low, close, volume, amount, ret, replay };

inline constexpr std::array<Field, 9> kRawFields = {
    Field::basis, Field::spot, Field::premium, Field::open,  Field::high,
    Field::low,   Field::close, Field::volume, Field::amount};

std::string_view field_name(Field f);
std::optional<Field> field_from_name(std::string_view name);

struct PanelRow {
    std::string instrument;
    Date date;
    double basis = 0.0;
    double spot = 0.0;
    double premium = 0.0;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double volume = 0.0;
    double amount = 0.0;
    double replay = kGap;

    double get(Field f) const;
    void set(Field f, double v);
};

struct ValidationIssue {
    std::size_t line = 0;  // 1-based source line, 0 when not read from text
    std::string instrument;
    std::string date;
    std::string rule;
};

struct ValidationReport {
    std::vector<ValidationIssue> errors;
    std::vector<ValidationIssue> warnings;

    bool accepted() const { return errors.empty(); }
    std::string to_text() const;
    std::string to_json() const;
};

/// Row-level invariant checks plus gap / short-history warnings.
ValidationReport validate_rows(std::span<const PanelRow> rows, std::span<const std::size_t> lines = {});

class PanelError : public std::runtime_error {
public:
    explicit PanelError(const std::string& what, ValidationReport report = {})
        : std::runtime_error(what), report_(std::move(report)) {}
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

/// Mapped column is absent from the header.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Canonical column name -> header name in the source file.
class Schema {
public:
    Schema();  // identity mapping over the canonical names

    static Schema parse(std::istream& in);  // `canonical = header` lines, '#' comments
    static Schema from_file(const std::string& path);

    const std::string& header_for(std::string_view canonical) const;
    void map(std::string_view canonical, std::string header);

    static const std::vector<std::string>& canonical_columns();

private:
    std::map<std::string, std::string, std::less<>> mapping_;
};

/// Immutable date x instrument panel. Instruments are sorted by identifier,
/// so instrument index order is identifier order.
class Panel {
public:
    Panel() = default;

    /// Validates rows and builds the panel; throws PanelError on any violation.
    static Panel build(std::vector<PanelRow> rows);

    bool empty() const { return calendar_.empty(); }
    std::size_t n_dates() const { return calendar_.size(); }
    std::size_t n_instruments() const { return instruments_.size(); }
    std::size_t n_rows() const { return n_rows_; }

    const std::vector<Date>& calendar() const { return calendar_; }
    const std::vector<std::string>& instruments() const { return instruments_; }
    std::optional<std::size_t> date_index(Date d) const;

    bool trades(std::size_t t, std::size_t i) const { return present_[t * instruments_.size() + i] != 0; }

    /// Calendar indices on which instrument i has a row, ascending.
    std::span<const std::size_t> traded_dates(std::size_t i) const { return traded_[i]; }

    const Grid& column(Field f) const;
    bool has_replay() const { return has_replay_; }

    /// Rows sorted by (instrument, date).
    std::vector<PanelRow> rows() const;

private:
    std::vector<Date> calendar_;
    std::vector<std::string> instruments_;
    std::vector<char> present_;
    std::vector<std::vector<std::size_t>> traded_;
    std::array<Grid, 11> columns_;
    std::size_t n_rows_ = 0;
    bool has_replay_ = false;
};

/// Simple close-to-close return per instrument's own traded dates; gap at each
/// instrument's first traded date.
Grid compute_returns(const Panel& panel);

struct ReadResult {
    std::vector<PanelRow> rows;
    std::vector<std::size_t> lines;
    ValidationReport report;
};

/// Parses delimited text into rows and validates them without throwing on
/// data errors. Throws SchemaError when a mapped column is missing.
ReadResult read_panel_csv(std::istream& in, const Schema& schema = {});

/// read_panel_csv + Panel::build; throws PanelError citing line and rule.
Panel load_panel(std::istream& in, const Schema& schema = {});
Panel load_panel_file(const std::string& path, const Schema& schema = {});

/// Canonical serialization: canonical header, rows by (instrument, date),
/// shortest round-trip number formatting.
void write_panel_csv(const Panel& panel, std::ostream& out);

/// Rows with start <= date <= end, returns recomputed inside the window.
Panel slice(const Panel& panel, Date start, Date end);

/// Shortest decimal representation that parses back to the same double.
std::string format_number(double v);

}  // namespace factorlab
