#include "factorlab/panel.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace factorlab {

namespace {

constexpr std::size_t kShortHistory = 20;

constexpr std::array<std::string_view, 11> kFieldNames = {
    "basis", "spot", "premium", "open", "high", "low", "close", "volume", "amount", "ret", "replay"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

std::optional<double> parse_decimal(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

void check_row(const PanelRow& r, std::size_t line, std::vector<ValidationIssue>& errors) {
    auto fail = [&](std::string rule) {
        errors.push_back({line, r.instrument, r.date.iso(), std::move(rule)});
    };
    if (r.instrument.empty()) fail("instrument identifier is empty");
    if (!(r.high >= std::max(r.open, r.close))) fail("high >= max(open, close)");
    if (!(r.low <= std::min(r.open, r.close))) fail("low <= min(open, close)");
    if (!(r.low <= r.high)) fail("low <= high");
    if (!(r.close > 0.0)) fail("close > 0");
    if (!(r.spot > 0.0)) fail("spot > 0");
    if (!(r.volume >= 0.0)) fail("volume >= 0");
    if (!(r.amount >= 0.0)) fail("amount >= 0");
}

}  // namespace

std::string_view field_name(Field f) { return kFieldNames[static_cast<std::size_t>(f)]; }

std::optional<Field> field_from_name(std::string_view name) {
    for (std::size_t k = 0; k < kFieldNames.size(); ++k) {
        if (kFieldNames[k] == name) return static_cast<Field>(k);
    }
    return std::nullopt;
}

double PanelRow::get(Field f) const {
    switch (f) {
        case Field::basis: return basis;
        case Field::spot: return spot;
        case Field::premium: return premium;
        case Field::open: return open;
        case Field::high: return high;
        case Field::low: return low;
        case Field::close: return close;
        case Field::volume: return volume;
        case Field::amount: return amount;
        case Field::replay: return replay;
        case Field::ret: break;
    }
    return kGap;
}

void PanelRow::set(Field f, double v) {
    switch (f) {
        case Field::basis: basis = v; break;
        case Field::spot: spot = v; break;
        case Field::premium: premium = v; break;
        case Field::open: open = v; break;
        case Field::high: high = v; break;
        case Field::low: low = v; break;
        case Field::close: close = v; break;
        case Field::volume: volume = v; break;
        case Field::amount: amount = v; break;
        case Field::replay: replay = v; break;
        case Field::ret: break;
    }
}

// ---------------------------------------------------------------------------
// Validation

std::string ValidationReport::to_text() const {
    std::ostringstream os;
    os << (accepted() ? "ACCEPTED" : "REJECTED") << ": " << errors.size() << " error(s), "
       << warnings.size() << " warning(s)\n";
    auto emit = [&](const char* kind, const ValidationIssue& e) {
        os << kind;
        if (e.line) os << " line " << e.line;
        if (!e.instrument.empty()) os << " " << e.instrument;
        if (!e.date.empty()) os << " " << e.date;
        os << ": " << e.rule << "\n";
    };
    for (const auto& e : errors) emit("error", e);
    for (const auto& w : warnings) emit("warning", w);
    return os.str();
}

std::string ValidationReport::to_json() const {
    auto issues = [](const std::vector<ValidationIssue>& v) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& e : v) {
            arr.push_back({{"line", e.line}, {"instrument", e.instrument}, {"date", e.date}, {"rule", e.rule}});
        }
        return arr;
    };
    nlohmann::json j = {{"accepted", accepted()}, {"errors", issues(errors)}, {"warnings", issues(warnings)}};
    return j.dump(2);
}

ValidationReport validate_rows(std::span<const PanelRow> rows, std::span<const std::size_t> lines) {
    ValidationReport report;
    auto line_of = [&](std::size_t k) { return k < lines.size() ? lines[k] : std::size_t{0}; };

    std::vector<std::size_t> order(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        order[k] = k;
        check_row(rows[k], line_of(k), report.errors);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (rows[a].instrument != rows[b].instrument) return rows[a].instrument < rows[b].instrument;
        return rows[a].date < rows[b].date;
    });
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto& a = rows[order[k - 1]];
        const auto& b = rows[order[k]];
        if (a.instrument == b.instrument && a.date == b.date) {
            report.errors.push_back({line_of(order[k]), b.instrument, b.date.iso(),
                                     "duplicate (instrument, date); first seen on line " +
                                         std::to_string(line_of(order[k - 1]))});
        }
    }

    // Warnings: untraded calendar days inside an instrument's span, short histories.
    std::vector<Date> calendar;
    calendar.reserve(rows.size());
    for (const auto& r : rows) calendar.push_back(r.date);
    std::sort(calendar.begin(), calendar.end());
    calendar.erase(std::unique(calendar.begin(), calendar.end()), calendar.end());

    std::size_t k = 0;
    while (k < order.size()) {
        std::size_t end = k;
        const auto& id = rows[order[k]].instrument;
        while (end < order.size() && rows[order[end]].instrument == id) ++end;
        const Date first = rows[order[k]].date;
        const Date last = rows[order[end - 1]].date;
        const auto span = static_cast<std::size_t>(
            std::upper_bound(calendar.begin(), calendar.end(), last) -
            std::lower_bound(calendar.begin(), calendar.end(), first));
        const std::size_t n = end - k;
        if (n < span) {
            report.warnings.push_back(
                {0, id, "", std::to_string(span - n) + " untraded calendar date(s) inside history (gaps)"});
        }
        if (n < kShortHistory) {
            report.warnings.push_back({0, id, "", "short history: " + std::to_string(n) + " row(s)"});
        }
        k = end;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Schema

const std::vector<std::string>& Schema::canonical_columns() {
    static const std::vector<std::string> kColumns = {"instrument", "date", "basis", "spot",
                                                      "premium",    "open", "high",  "low",
                                                      "close",      "volume", "amount"};
    return kColumns;
}

Schema::Schema() {
    for (const auto& c : canonical_columns()) mapping_[c] = c;
    mapping_["replay"] = "replay";
}

const std::string& Schema::header_for(std::string_view canonical) const {
    auto it = mapping_.find(canonical);
    if (it == mapping_.end()) throw SchemaError("unknown canonical column '" + std::string(canonical) + "'");
    return it->second;
}

void Schema::map(std::string_view canonical, std::string header) {
    auto it = mapping_.find(canonical);
    if (it == mapping_.end()) throw SchemaError("unknown canonical column '" + std::string(canonical) + "'");
    it->second = std::move(header);
}

Schema Schema::parse(std::istream& in) {
    Schema schema;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) {
            throw SchemaError("schema line " + std::to_string(lineno) + ": expected 'column = header'");
        }
        schema.map(trim(s.substr(0, eq)), std::string(trim(s.substr(eq + 1))));
    }
    return schema;
}

Schema Schema::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open schema file " + path);
    return parse(in);
}

// ---------------------------------------------------------------------------
// Panel

Panel Panel::build(std::vector<PanelRow> rows) {
    auto report = validate_rows(rows);
    if (!report.accepted()) {
        const auto& e = report.errors.front();
        throw PanelError("invalid row " + e.instrument + " " + e.date + ": " + e.rule, std::move(report));
    }

    Panel p;
    p.n_rows_ = rows.size();
    for (const auto& r : rows) {
        p.calendar_.push_back(r.date);
        p.instruments_.push_back(r.instrument);
        if (!is_gap(r.replay)) p.has_replay_ = true;
    }
    std::sort(p.calendar_.begin(), p.calendar_.end());
    p.calendar_.erase(std::unique(p.calendar_.begin(), p.calendar_.end()), p.calendar_.end());
    std::sort(p.instruments_.begin(), p.instruments_.end());
    p.instruments_.erase(std::unique(p.instruments_.begin(), p.instruments_.end()), p.instruments_.end());

    const std::size_t T = p.calendar_.size(), N = p.instruments_.size();
    for (auto& g : p.columns_) g = Grid(T, N);
    p.present_.assign(T * N, 0);
    p.traded_.assign(N, {});

    std::unordered_map<std::string, std::size_t> inst_index;
    for (std::size_t i = 0; i < N; ++i) inst_index.emplace(p.instruments_[i], i);

    for (const auto& r : rows) {
        const std::size_t t = static_cast<std::size_t>(
            std::lower_bound(p.calendar_.begin(), p.calendar_.end(), r.date) - p.calendar_.begin());
        const std::size_t i = inst_index.at(r.instrument);
        p.present_[t * N + i] = 1;
        for (Field f : kRawFields) p.columns_[static_cast<std::size_t>(f)](t, i) = r.get(f);
        p.columns_[static_cast<std::size_t>(Field::replay)](t, i) = r.replay;
    }
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < N; ++i) {
            if (p.present_[t * N + i]) p.traded_[i].push_back(t);
        }
    }
    p.columns_[static_cast<std::size_t>(Field::ret)] = compute_returns(p);
    return p;
}

std::optional<std::size_t> Panel::date_index(Date d) const {
    auto it = std::lower_bound(calendar_.begin(), calendar_.end(), d);
    if (it == calendar_.end() || *it != d) return std::nullopt;
    return static_cast<std::size_t>(it - calendar_.begin());
}

const Grid& Panel::column(Field f) const { return columns_[static_cast<std::size_t>(f)]; }

std::vector<PanelRow> Panel::rows() const {
    std::vector<PanelRow> out;
    out.reserve(n_rows_);
    for (std::size_t i = 0; i < instruments_.size(); ++i) {
        for (std::size_t t : traded_[i]) {
            PanelRow r;
            r.instrument = instruments_[i];
            r.date = calendar_[t];
            for (Field f : kRawFields) r.set(f, column(f)(t, i));
            r.replay = column(Field::replay)(t, i);
            out.push_back(std::move(r));
        }
    }
    return out;
}

Grid compute_returns(const Panel& panel) {
    const Grid& close = panel.column(Field::close);
    Grid ret(panel.n_dates(), panel.n_instruments());
    for (std::size_t i = 0; i < panel.n_instruments(); ++i) {
        const auto dates = panel.traded_dates(i);
        for (std::size_t k = 1; k < dates.size(); ++k) {
            ret(dates[k], i) = close(dates[k], i) / close(dates[k - 1], i) - 1.0;
        }
    }
    return ret;
}

// ---------------------------------------------------------------------------
// Text I/O

ReadResult read_panel_csv(std::istream& in, const Schema& schema) {
    ReadResult result;
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("input has no header row");
    const auto header = split_commas(line);

    auto find_column = [&](std::string_view canonical) -> std::optional<std::size_t> {
        const auto& name = schema.header_for(canonical);
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (header[k] == name) return k;
        }
        return std::nullopt;
    };

    std::vector<std::size_t> idx;
    for (const auto& c : Schema::canonical_columns()) {
        auto k = find_column(c);
        if (!k) throw SchemaError("missing mapped column '" + schema.header_for(c) + "' (for " + c + ")");
        idx.push_back(*k);
    }
    const auto replay_col = find_column("replay");

    std::size_t lineno = 1;
    std::vector<PanelRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);
        auto fail = [&](std::string rule) { result.report.errors.push_back({lineno, "", "", std::move(rule)}); };
        if (cells.size() != header.size()) {
            fail("expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
            continue;
        }
        PanelRow r;
        r.instrument = std::string(cells[idx[0]]);
        auto date = Date::parse(cells[idx[1]]);
        if (!date) {
            fail("unparseable date '" + std::string(cells[idx[1]]) + "'");
            continue;
        }
        r.date = *date;
        bool ok = true;
        for (std::size_t k = 2; k < idx.size(); ++k) {
            auto v = parse_decimal(cells[idx[k]]);
            if (!v) {
                fail("unparseable " + Schema::canonical_columns()[k] + " '" + std::string(cells[idx[k]]) + "'");
                ok = false;
                break;
            }
            r.set(*field_from_name(Schema::canonical_columns()[k]), *v);
        }
        if (!ok) continue;
        if (replay_col && !cells[*replay_col].empty()) {
            auto v = parse_decimal(cells[*replay_col]);
            if (!v) {
                fail("unparseable replay '" + std::string(cells[*replay_col]) + "'");
                continue;
            }
            r.replay = *v;
        }
        result.rows.push_back(std::move(r));
        result.lines.push_back(lineno);
    }

    auto row_report = validate_rows(result.rows, result.lines);
    result.report.errors.insert(result.report.errors.end(), row_report.errors.begin(), row_report.errors.end());
    result.report.warnings = std::move(row_report.warnings);
    std::stable_sort(result.report.errors.begin(), result.report.errors.end(),
                     [](const auto& a, const auto& b) { return a.line < b.line; });
    return result;
}

Panel load_panel(std::istream& in, const Schema& schema) {
    auto result = read_panel_csv(in, schema);
    if (!result.report.accepted()) {
        const auto& e = result.report.errors.front();
        std::string msg = "line " + std::to_string(e.line) + ": " + e.rule;
        throw PanelError(msg, std::move(result.report));
    }
    return Panel::build(std::move(result.rows));
}

Panel load_panel_file(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open data file " + path);
    return load_panel(in, schema);
}

std::string format_number(double v) {
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void write_panel_csv(const Panel& panel, std::ostream& out) {
    const auto& cols = Schema::canonical_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
    if (panel.has_replay()) out << ",replay";
    out << "\n";
    for (const auto& r : panel.rows()) {
        out << r.instrument << "," << r.date.iso();
        for (std::size_t k = 2; k < cols.size(); ++k) out << "," << format_number(r.get(*field_from_name(cols[k])));
        if (panel.has_replay()) {
            out << ",";
            if (!is_gap(r.replay)) out << format_number(r.replay);
        }
        out << "\n";
    }
}

Panel slice(const Panel& panel, Date start, Date end) {
    if (end < start) throw std::invalid_argument("slice: start must not be after end");
    std::vector<PanelRow> rows;
    for (auto& r : panel.rows()) {
        if (r.date >= start && r.date <= end) rows.push_back(std::move(r));
    }
    if (rows.empty()) return Panel{};
    return Panel::build(std::move(rows));
}

}  // namespace factorlab
