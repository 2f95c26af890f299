#include <cctype>
#include <charconv>
#include <optional>

#include "factorlab/dsl.hpp"

namespace factorlab::dsl {

Expr Expr::literal(double v) {
    Expr e;
    e.kind = Kind::literal;
    e.value = v;
    return e;
}

Expr Expr::col(Field f) {
    Expr e;
    e.kind = Kind::column;
    e.column = f;
    return e;
}

Expr Expr::unary(UnaryOp op, Expr x) {
    Expr e;
    e.kind = Kind::unary;
    e.unary_op = op;
    e.args.push_back(std::move(x));
    return e;
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
    Expr e;
    e.kind = Kind::binary;
    e.binary_op = op;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
}

Expr Expr::rolling(RollOp op, Expr x, int window) {
    Expr e;
    e.kind = Kind::rolling;
    e.roll_op = op;
    e.param = window;
    e.args.push_back(std::move(x));
    return e;
}

Expr Expr::corr(Expr x, Expr y, int window) {
    Expr e = rolling(RollOp::corr, std::move(x), window);
    e.args.push_back(std::move(y));
    return e;
}

Expr Expr::lag(Expr x, int k) {
    Expr e;
    e.kind = Kind::lag;
    e.param = k;
    e.args.push_back(std::move(x));
    return e;
}

Expr Expr::diff(Expr x) {
    Expr e;
    e.kind = Kind::diff;
    e.args.push_back(std::move(x));
    return e;
}

Expr Expr::cross(CrossOp op, Expr x) {
    Expr e;
    e.kind = Kind::cross;
    e.cross_op = op;
    e.args.push_back(std::move(x));
    return e;
}

Expr operator+(Expr a, Expr b) { return Expr::binary(BinaryOp::add, std::move(a), std::move(b)); }
Expr operator-(Expr a, Expr b) { return Expr::binary(BinaryOp::sub, std::move(a), std::move(b)); }
Expr operator*(Expr a, Expr b) { return Expr::binary(BinaryOp::mul, std::move(a), std::move(b)); }
Expr operator/(Expr a, Expr b) { return Expr::binary(BinaryOp::div, std::move(a), std::move(b)); }
Expr operator-(Expr a) { return Expr::unary(UnaryOp::neg, std::move(a)); }

namespace {

constexpr std::string_view kRollNames[] = {"mean", "std", "sum", "min", "max", "corr"};

std::string_view unary_name(UnaryOp op) {
    switch (op) {
        case UnaryOp::abs: return "abs";
        case UnaryOp::sign: return "sign";
        case UnaryOp::log: return "log";
        case UnaryOp::neg: break;
    }
    return "-";
}

char binary_symbol(BinaryOp op) {
    switch (op) {
        case BinaryOp::add: return '+';
        case BinaryOp::sub: return '-';
        case BinaryOp::mul: return '*';
        case BinaryOp::div: return '/';
    }
    return '?';
}

int precedence(const Expr& e) {
    if (e.kind != Expr::Kind::binary) return 3;
    return (e.binary_op == BinaryOp::add || e.binary_op == BinaryOp::sub) ? 1 : 2;
}

struct Token {
    enum class Type { number, ident, symbol, end } type = Type::end;
    std::string_view text;
    std::size_t pos = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        Token tok;
        tok.pos = pos_;
        if (pos_ >= src_.size()) return tok;
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t end = pos_;
            while (end < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.')) ++end;
            if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
                std::size_t k = end + 1;
                if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
                if (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) {
                    while (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) ++k;
                    end = k;
                }
            }
            tok.type = Token::Type::number;
            tok.text = src_.substr(pos_, end - pos_);
            pos_ = end;
            return tok;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '@') {
            std::size_t end = pos_ + 1;
            while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_')) ++end;
            tok.type = Token::Type::ident;
            tok.text = src_.substr(pos_, end - pos_);
            pos_ = end;
            return tok;
        }
        if (std::string_view("+-*/(),").find(c) != std::string_view::npos) {
            tok.type = Token::Type::symbol;
            tok.text = src_.substr(pos_, 1);
            ++pos_;
            return tok;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
};

class Parser {
public:
    Parser(std::string_view src, const ParseOptions& opt) : lexer_(src), opt_(opt) { advance(); }

    Expr parse_all() {
        Expr e = parse_expr();
        if (cur_.type != Token::Type::end) throw ParseError("unexpected '" + std::string(cur_.text) + "'", cur_.pos);
        return e;
    }

private:
    void advance() { cur_ = lexer_.next(); }

    bool is_symbol(char c) const { return cur_.type == Token::Type::symbol && cur_.text[0] == c; }

    void expect(char c) {
        if (!is_symbol(c)) {
            const std::string found = cur_.type == Token::Type::end ? "end of input" : "'" + std::string(cur_.text) + "'";
            throw ParseError(std::string("expected '") + c + "', found " + found, cur_.pos);
        }
        advance();
    }

    Expr parse_expr() {
        Expr lhs = parse_term();
        while (is_symbol('+') || is_symbol('-')) {
            const auto op = is_symbol('+') ? BinaryOp::add : BinaryOp::sub;
            advance();
            lhs = Expr::binary(op, std::move(lhs), parse_term());
        }
        return lhs;
    }

    Expr parse_term() {
        Expr lhs = parse_unary();
        while (is_symbol('*') || is_symbol('/')) {
            const auto op = is_symbol('*') ? BinaryOp::mul : BinaryOp::div;
            advance();
            lhs = Expr::binary(op, std::move(lhs), parse_unary());
        }
        return lhs;
    }

    Expr parse_unary() {
        if (is_symbol('-')) {
            advance();
            if (cur_.type == Token::Type::number) return Expr::literal(-parse_number());
            return Expr::unary(UnaryOp::neg, parse_unary());
        }
        return parse_primary();
    }

    double parse_number() {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(cur_.text.data(), cur_.text.data() + cur_.text.size(), v);
        if (ec != std::errc() || ptr != cur_.text.data() + cur_.text.size()) {
            throw ParseError("malformed number '" + std::string(cur_.text) + "'", cur_.pos);
        }
        advance();
        return v;
    }

    // Integer window/lag argument. Raw-node calls accept any sign; a signed
    // argument elsewhere is read so the range error can name it.
    int parse_offset(bool raw, std::string_view what) {
        const std::size_t pos = cur_.pos;
        bool negative = false;
        if (is_symbol('-')) {
            negative = true;
            advance();
        }
        if (cur_.type != Token::Type::number) throw ParseError(std::string(what) + " must be an integer literal", pos);
        int v = 0;
        auto [ptr, ec] = std::from_chars(cur_.text.data(), cur_.text.data() + cur_.text.size(), v);
        if (ec != std::errc() || ptr != cur_.text.data() + cur_.text.size()) {
            throw ParseError(std::string(what) + " must be an integer literal", pos);
        }
        advance();
        if (negative) v = -v;
        if (!raw && v < 1) throw ParseError(std::string(what) + " must be >= 1", pos);
        return v;
    }

    std::vector<Expr> parse_args(std::string_view name, std::size_t pos, std::size_t n_expr, bool has_offset,
                                 bool raw, int& offset) {
        expect('(');
        std::vector<Expr> args;
        for (std::size_t k = 0; k < n_expr; ++k) {
            if (k) expect_arity(',', name, pos, n_expr + has_offset);
            args.push_back(parse_expr());
        }
        if (has_offset) {
            expect_arity(',', name, pos, n_expr + 1);
            offset = parse_offset(raw, name == "lag" ? "lag offset" : "window length");
        }
        expect_arity(')', name, pos, n_expr + has_offset);
        return args;
    }

    void expect_arity(char c, std::string_view name, std::size_t pos, std::size_t arity) {
        if (is_symbol(c)) {
            advance();
            return;
        }
        if (is_symbol(',') || is_symbol(')')) {
            throw ParseError("arity mismatch: " + std::string(name) + " takes " + std::to_string(arity) + " argument(s)",
                             pos);
        }
        expect(c);
    }

    Expr parse_primary() {
        if (cur_.type == Token::Type::number) return Expr::literal(parse_number());
        if (is_symbol('(')) {
            advance();
            Expr e = parse_expr();
            expect(')');
            return e;
        }
        if (cur_.type != Token::Type::ident) {
            if (cur_.type == Token::Type::end) throw ParseError("unexpected end of input", cur_.pos);
            throw ParseError("unexpected '" + std::string(cur_.text) + "'", cur_.pos);
        }

        const std::size_t pos = cur_.pos;
        std::string_view name = cur_.text;
        const bool raw = name.front() == '@';
        if (raw) name.remove_prefix(1);
        advance();

        if (!raw) {
            if (auto f = field_from_name(name); f && (*f != Field::replay || opt_.allow_replay)) {
                if (is_symbol('(')) throw ParseError("column '" + std::string(name) + "' is not callable", pos);
                return Expr::col(*f);
            }
        }

        int offset = 0;
        if (!raw) {
            std::optional<UnaryOp> uop;
            if (name == "abs") uop = UnaryOp::abs;
            if (name == "sign") uop = UnaryOp::sign;
            if (name == "log") uop = UnaryOp::log;
            if (uop) return Expr::unary(*uop, std::move(parse_args(name, pos, 1, false, false, offset)[0]));
            if (name == "diff") return Expr::diff(std::move(parse_args(name, pos, 1, false, false, offset)[0]));
            if (name == "czs") {
                return Expr::cross(CrossOp::zscore, std::move(parse_args(name, pos, 1, false, false, offset)[0]));
            }
            if (name == "crank") {
                return Expr::cross(CrossOp::rank, std::move(parse_args(name, pos, 1, false, false, offset)[0]));
            }
        }
        if (name == "lag") {
            auto args = parse_args(name, pos, 1, true, raw, offset);
            return Expr::lag(std::move(args[0]), offset);
        }
        for (std::size_t k = 0; k < std::size(kRollNames); ++k) {
            if (name != kRollNames[k]) continue;
            const auto op = static_cast<RollOp>(k);
            if (op == RollOp::corr) {
                auto args = parse_args(name, pos, 2, true, raw, offset);
                return Expr::corr(std::move(args[0]), std::move(args[1]), offset);
            }
            auto args = parse_args(name, pos, 1, true, raw, offset);
            return Expr::rolling(op, std::move(args[0]), offset);
        }
        throw ParseError("unknown identifier '" + std::string(raw ? "@" : "") + std::string(name) + "'", pos);
    }

    Lexer lexer_;
    const ParseOptions& opt_;
    Token cur_;
};

void print_into(const Expr& e, std::string& out);

void print_operand(const Expr& child, bool parens, std::string& out) {
    if (parens) out += '(';
    print_into(child, out);
    if (parens) out += ')';
}

void print_into(const Expr& e, std::string& out) {
    using K = Expr::Kind;
    switch (e.kind) {
        case K::literal:
            out += format_number(e.value);
            return;
        case K::column:
            out += field_name(e.column);
            return;
        case K::unary:
            if (e.unary_op == UnaryOp::neg) {
                // "-3" would read back as a negative literal, so literals get parens.
                const auto& x = e.args[0];
                out += '-';
                print_operand(x, x.kind == K::literal || x.kind == K::binary, out);
            } else {
                out += unary_name(e.unary_op);
                print_operand(e.args[0], true, out);
            }
            return;
        case K::binary: {
            const int p = precedence(e);
            const auto& lhs = e.args[0];
            const auto& rhs = e.args[1];
            print_operand(lhs, precedence(lhs) < p, out);
            out += ' ';
            out += binary_symbol(e.binary_op);
            out += ' ';
            print_operand(rhs, precedence(rhs) <= p, out);
            return;
        }
        case K::rolling:
        case K::lag: {
            if (e.param < 1) out += '@';
            out += e.kind == K::lag ? std::string_view("lag") : kRollNames[static_cast<std::size_t>(e.roll_op)];
            out += '(';
            for (const auto& a : e.args) {
                print_into(a, out);
                out += ", ";
            }
            out += std::to_string(e.param);
            out += ')';
            return;
        }
        case K::diff:
            out += "diff(";
            print_into(e.args[0], out);
            out += ')';
            return;
        case K::cross:
            out += e.cross_op == CrossOp::zscore ? "czs(" : "crank(";
            print_into(e.args[0], out);
            out += ')';
            return;
    }
}

}  // namespace

Expr parse_expression(std::string_view text, const ParseOptions& options) {
    return Parser(text, options).parse_all();
}

FactorSpec parse(std::string_view text, std::string name, const ParseOptions& options) {
    return FactorSpec{std::move(name), parse_expression(text, options)};
}

std::string print(const Expr& e) {
    std::string out;
    print_into(e, out);
    return out;
}

}  // namespace factorlab::dsl
