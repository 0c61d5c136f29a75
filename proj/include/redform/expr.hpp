#ifndef REDFORM_EXPR_HPP
#define REDFORM_EXPR_HPP

#include <cctype>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "field.hpp"

namespace redform {

// A symbolic expression tree: rational literals, named symbols, and the
// arithmetic operators.  Used for Hamiltonians and vector fields in the phase
// variables (where we need symbolic partial derivatives before evaluating
// along the phase curve) and as the parse target for every expression string
// in input documents and fixtures.
class MExpr {
 public:
    enum class Kind { Num, Sym, Add, Sub, Mul, Div, Neg, Pow };

    struct Node {
        Kind kind;
        QQ value;          // Num
        std::string name;  // Sym
        long exponent = 0; // Pow
        std::shared_ptr<const Node> a, b;
    };

    MExpr() : n_(number_node(0)) {}

    static MExpr number(const QQ& q) { return MExpr(number_node(q)); }
    static MExpr symbol(const std::string& s) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Sym;
        n->name = s;
        return MExpr(n);
    }

    bool is_number() const { return n_->kind == Kind::Num; }
    bool is_number(const QQ& q) const { return is_number() && n_->value == q; }

    MExpr operator+(const MExpr& o) const {
        if (is_number(0)) return o;
        if (o.is_number(0)) return *this;
        if (is_number() && o.is_number()) return number(n_->value + o.n_->value);
        return binary(Kind::Add, *this, o);
    }
    MExpr operator-(const MExpr& o) const {
        if (o.is_number(0)) return *this;
        if (is_number() && o.is_number()) return number(n_->value - o.n_->value);
        if (is_number(0)) return -o;
        return binary(Kind::Sub, *this, o);
    }
    MExpr operator*(const MExpr& o) const {
        if (is_number(0) || o.is_number(0)) return number(0);
        if (is_number(1)) return o;
        if (o.is_number(1)) return *this;
        if (is_number() && o.is_number()) return number(n_->value * o.n_->value);
        return binary(Kind::Mul, *this, o);
    }
    MExpr operator/(const MExpr& o) const {
        if (o.is_number(0)) throw DivisionByZero("expression literal");
        if (is_number(0)) return number(0);
        if (o.is_number(1)) return *this;
        if (is_number() && o.is_number()) return number(n_->value / o.n_->value);
        return binary(Kind::Div, *this, o);
    }
    MExpr operator-() const {
        if (is_number()) return number(-n_->value);
        if (n_->kind == Kind::Neg) return MExpr(n_->a);
        auto n = std::make_shared<Node>();
        n->kind = Kind::Neg;
        n->a = n_;
        return MExpr(n);
    }
    MExpr pow(long e) const {
        if (e == 1) return *this;
        if (e == 0) return number(1);
        if (is_number(0)) {
            if (e < 0) throw DivisionByZero("expression literal");
            return number(0);
        }
        auto n = std::make_shared<Node>();
        n->kind = Kind::Pow;
        n->exponent = e;
        n->a = n_;
        return MExpr(n);
    }

    // Partial derivative with respect to the named symbol.  Every other
    // symbol is treated as independent of it.
    MExpr diff(const std::string& var) const {
        const Node& n = *n_;
        switch (n.kind) {
            case Kind::Num: return number(0);
            case Kind::Sym: return number(n.name == var ? 1 : 0);
            case Kind::Add: return MExpr(n.a).diff(var) + MExpr(n.b).diff(var);
            case Kind::Sub: return MExpr(n.a).diff(var) - MExpr(n.b).diff(var);
            case Kind::Mul:
                return MExpr(n.a).diff(var) * MExpr(n.b) + MExpr(n.a) * MExpr(n.b).diff(var);
            case Kind::Div:
                return (MExpr(n.a).diff(var) * MExpr(n.b) -
                        MExpr(n.a) * MExpr(n.b).diff(var)) /
                       (MExpr(n.b) * MExpr(n.b));
            case Kind::Neg: return -MExpr(n.a).diff(var);
            case Kind::Pow:
                return number(QQ(n.exponent)) * MExpr(n.a).pow(n.exponent - 1) *
                       MExpr(n.a).diff(var);
        }
        throw ParseError("internal: unhandled expression node");
    }

    // Evaluate in k = C(x).  Symbols resolve through env first, then as
    // constants of the tower.
    FieldElement eval(const ConstantTower& tw,
                      const std::map<std::string, FieldElement>& env) const {
        const Node& n = *n_;
        switch (n.kind) {
            case Kind::Num: return FieldElement::from_rational(tw, n.value);
            case Kind::Sym: {
                auto it = env.find(n.name);
                if (it != env.end()) return it->second;
                if (auto c = tw.symbol(n.name)) return FieldElement::from_constant(*c);
                throw ParseError("unknown symbol '" + n.name + "'");
            }
            case Kind::Add: return MExpr(n.a).eval(tw, env) + MExpr(n.b).eval(tw, env);
            case Kind::Sub: return MExpr(n.a).eval(tw, env) - MExpr(n.b).eval(tw, env);
            case Kind::Mul: return MExpr(n.a).eval(tw, env) * MExpr(n.b).eval(tw, env);
            case Kind::Div: {
                FieldElement d = MExpr(n.b).eval(tw, env);
                if (d.is_zero()) throw DivisionByZero("expression evaluation");
                return MExpr(n.a).eval(tw, env) / d;
            }
            case Kind::Neg: return -MExpr(n.a).eval(tw, env);
            case Kind::Pow: return MExpr(n.a).eval(tw, env).pow(n.exponent);
        }
        throw ParseError("internal: unhandled expression node");
    }

    void collect_symbols(std::set<std::string>& out) const {
        const Node& n = *n_;
        if (n.kind == Kind::Sym) out.insert(n.name);
        if (n.a) MExpr(n.a).collect_symbols(out);
        if (n.b) MExpr(n.b).collect_symbols(out);
    }

    std::string str() const { return print(0); }

 private:
    explicit MExpr(std::shared_ptr<const Node> n) : n_(std::move(n)) {}

    static std::shared_ptr<const Node> number_node(const QQ& q) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Num;
        n->value = q;
        return n;
    }
    static MExpr binary(Kind k, const MExpr& a, const MExpr& b) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->a = a.n_;
        n->b = b.n_;
        return MExpr(n);
    }

    // prec: 0 sum, 1 product, 2 unary, 3 power-base
    std::string print(int prec) const {
        const Node& n = *n_;
        std::string s;
        int my = 3;
        switch (n.kind) {
            case Kind::Num:
                s = qq_str(n.value);
                my = (n.value < 0 || n.value.get_den() != 1) ? 1 : 3;
                break;
            case Kind::Sym:
                s = n.name;
                break;
            case Kind::Add:
                s = MExpr(n.a).print(0) + " + " + MExpr(n.b).print(1);
                my = 0;
                break;
            case Kind::Sub:
                s = MExpr(n.a).print(0) + " - " + MExpr(n.b).print(1);
                my = 0;
                break;
            case Kind::Mul:
                s = MExpr(n.a).print(1) + "*" + MExpr(n.b).print(2);
                my = 1;
                break;
            case Kind::Div:
                s = MExpr(n.a).print(1) + "/" + MExpr(n.b).print(2);
                my = 1;
                break;
            case Kind::Neg:
                s = "-" + MExpr(n.a).print(2);
                my = 1;
                break;
            case Kind::Pow:
                s = MExpr(n.a).print(3) + "^" +
                    (n.exponent < 0 ? "(" + std::to_string(n.exponent) + ")"
                                    : std::to_string(n.exponent));
                my = 2;
                break;
        }
        return my < prec ? "(" + s + ")" : s;
    }

    std::shared_ptr<const Node> n_;
};

// ---------------------------------------------------------------------------
// Parser: expr := term (('+'|'-') term)*
//         term := unary (('*'|'/') unary)*
//         unary := ('-'|'+') unary | primary
//         primary := atom ('^' signed-integer)?
//         atom := integer | identifier | '(' expr ')'
// ---------------------------------------------------------------------------

namespace detail {

class ExprParser {
 public:
    explicit ExprParser(const std::string& src) : s_(src) {}

    MExpr parse() {
        MExpr e = parse_sum();
        skip_ws();
        if (pos_ != s_.size())
            throw ParseError("unexpected '" + std::string(1, s_[pos_]) + "' at offset " +
                             std::to_string(pos_) + " in \"" + s_ + "\"");
        return e;
    }

 private:
    MExpr parse_sum() {
        MExpr e = parse_term();
        for (;;) {
            skip_ws();
            if (match('+'))
                e = e + parse_term();
            else if (match('-'))
                e = e - parse_term();
            else
                return e;
        }
    }
    MExpr parse_term() {
        MExpr e = parse_unary();
        for (;;) {
            skip_ws();
            if (match('*'))
                e = e * parse_unary();
            else if (match('/'))
                e = e / parse_unary();
            else
                return e;
        }
    }
    MExpr parse_unary() {
        skip_ws();
        if (match('-')) return -parse_unary();
        if (match('+')) return parse_unary();
        return parse_primary();
    }
    MExpr parse_primary() {
        MExpr base = parse_atom();
        skip_ws();
        if (match('^')) {
            skip_ws();
            bool neg = false, paren = match('(');
            skip_ws();
            if (match('-')) neg = true;
            skip_ws();
            std::string digits = take_digits();
            if (digits.empty()) throw ParseError("expected integer exponent in \"" + s_ + "\"");
            if (paren) {
                skip_ws();
                if (!match(')')) throw ParseError("unclosed exponent in \"" + s_ + "\"");
            }
            long e = std::stol(digits);
            base = base.pow(neg ? -e : e);
            skip_ws();
            if (pos_ < s_.size() && s_[pos_] == '^')
                throw ParseError("chained '^' needs parentheses in \"" + s_ + "\"");
        }
        return base;
    }
    MExpr parse_atom() {
        skip_ws();
        if (pos_ >= s_.size()) throw ParseError("unexpected end of expression in \"" + s_ + "\"");
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::string digits = take_digits();
            if (pos_ < s_.size() && s_[pos_] == '.')
                throw ParseError("decimal literals are not exact; use fractions: \"" + s_ + "\"");
            return MExpr::number(qq_parse_uint(digits));
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string name;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                name.push_back(s_[pos_++]);
            return MExpr::symbol(name);
        }
        if (match('(')) {
            MExpr e = parse_sum();
            skip_ws();
            if (!match(')')) throw ParseError("missing ')' in \"" + s_ + "\"");
            return e;
        }
        throw ParseError("unexpected '" + std::string(1, c) + "' at offset " +
                         std::to_string(pos_) + " in \"" + s_ + "\"");
    }

    std::string take_digits() {
        std::string d;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
            d.push_back(s_[pos_++]);
        return d;
    }
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool match(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    const std::string& s_;
    size_t pos_ = 0;
};

}  // namespace detail

inline MExpr parse_expression(const std::string& src) {
    return detail::ExprParser(src).parse();
}

// Parse a rational function of x over the given constant tower.
inline FieldElement parse_field_element(const ConstantTower& tw, const std::string& src) {
    std::map<std::string, FieldElement> env;
    env["x"] = FieldElement::variable(tw);
    return parse_expression(src).eval(tw, env);
}

inline CElem parse_constant(const ConstantTower& tw, const std::string& src) {
    FieldElement f = parse_expression(src).eval(tw, {});
    return f.constant();
}

}  // namespace redform

#endif  // REDFORM_EXPR_HPP
