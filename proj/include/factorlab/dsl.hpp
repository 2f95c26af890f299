#pragma once

// Factor expression language.
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' NUMBER | '-' unary | primary
//   primary:= NUMBER | COLUMN | CALL | '(' expr ')'
//
// Columns: open high low close volume amount basis spot premium ret
// Calls:   abs sign log diff czs crank (1 arg); lag(x,k) mean std sum min max (x,w);
//          corr(x,y,w). Windows and lags are integer literals >= 1.
//
// `@lag`, `@mean`, ... is the raw-node escape: it accepts any integer offset so
// hand-built nodes (including illegal ones) survive a print/parse round trip.
// Such nodes are what check_lookahead exists to reject.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "factorlab/grid.hpp"
#include "factorlab/panel.hpp"

namespace factorlab::dsl {

enum class UnaryOp { neg, abs, sign, log };
enum class BinaryOp { add, sub, mul, div };
enum class RollOp { mean, std, sum, min, max, corr };
enum class CrossOp { zscore, rank };

struct Expr {
    enum class Kind { literal, column, unary, binary, rolling, lag, diff, cross };

    Kind kind = Kind::literal;
    double value = 0.0;
    Field column = Field::close;
    UnaryOp unary_op = UnaryOp::neg;
    BinaryOp binary_op = BinaryOp::add;
    RollOp roll_op = RollOp::mean;
    CrossOp cross_op = CrossOp::zscore;
    int param = 0;  // window length or lag offset
    std::vector<Expr> args;

    static Expr literal(double v);
    static Expr col(Field f);
    static Expr unary(UnaryOp op, Expr x);
    static Expr binary(BinaryOp op, Expr lhs, Expr rhs);
    static Expr rolling(RollOp op, Expr x, int window);
    static Expr corr(Expr x, Expr y, int window);
    static Expr lag(Expr x, int k);
    static Expr diff(Expr x);
    static Expr cross(CrossOp op, Expr x);

    bool operator==(const Expr&) const = default;
};

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr operator-(Expr a);

struct FactorSpec {
    std::string name;
    Expr expr;

    bool operator==(const FactorSpec&) const = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t position)
        : std::runtime_error(msg + " at position " + std::to_string(position)), position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

struct ParseOptions {
    /// Admit the auxiliary `replay` column (perfect-foresight fixtures only).
    bool allow_replay = false;
};

Expr parse_expression(std::string_view text, const ParseOptions& options = {});
FactorSpec parse(std::string_view text, std::string name = "", const ParseOptions& options = {});

/// Canonical printer; parse(print(e)) == e.
std::string print(const Expr& e);

struct TemporalNode {
    std::string node;   // canonical text of the node
    int horizon = 0;    // lag offset, or window length for rolling nodes
    bool legal = true;
};

struct CheckReport {
    bool pass = true;
    std::vector<TemporalNode> nodes;

    std::vector<TemporalNode> offenders() const;
};

/// Every lag offset must be >= 0 and every window >= 1; nothing else in the
/// grammar can reach past the evaluation date.
CheckReport check_lookahead(const Expr& e);
inline CheckReport check_lookahead(const FactorSpec& s) { return check_lookahead(s.expr); }

class LookaheadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FactorSeries {
    std::string name;
    Grid values;  // calendar x instruments, gaps NaN
};

/// Throws LookaheadError if the spec fails check_lookahead.
FactorSeries evaluate(const FactorSpec& spec, const Panel& panel);

/// Evaluates any AST, including ones that read the future. Test and audit use.
Grid evaluate_unchecked(const Expr& e, const Panel& panel);

/// Perturbs every raw value strictly after `cut` and checks the factor is
/// unchanged on all dates <= cut.
bool perturbation_no_lookahead_test(const Expr& e, const Panel& panel, Date cut, std::uint64_t seed);
inline bool perturbation_no_lookahead_test(const FactorSpec& s, const Panel& panel, Date cut,
                                           std::uint64_t seed) {
    return perturbation_no_lookahead_test(s.expr, panel, cut, seed);
}

/// Cross-sectional helpers shared with the metrics and IPCA modules.
/// Both ignore gaps and write gaps back in their place.
void zscore_section(std::span<double> values);
void rank_section(std::span<double> values);  // (k-1)/(n-1), midpoint ties, 0.5 when n = 1

}  // namespace factorlab::dsl
