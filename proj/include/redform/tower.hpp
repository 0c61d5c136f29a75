#ifndef REDFORM_TOWER_HPP
#define REDFORM_TOWER_HPP

#include <cctype>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "polyring.hpp"
#include "qpoly.hpp"
#include "qq.hpp"

namespace redform {

class ConstantTower;
struct SpecializedTower;

// Internal recursive representation of a constant.  A node at level 0 is a
// rational; at a parameter level it is num/den with polynomial coefficient
// vectors over the level below (empty den means 1); at an algebraic level it
// is a polynomial in the generator, reduced modulo the minimal polynomial
// (den unused).  Elements are kept at the lowest level that can represent
// them and lifted lazily, so pure rationals stay cheap in tall towers.
struct CNode {
    QQ q = 0;
    std::vector<CNode> num;
    std::vector<CNode> den;
};

namespace detail {

// Field operations on CNodes at one fixed level of one tower; satisfies the
// field-context interface of PolyOps, so every layer reuses the same
// polynomial kernel.
class LevelField {
 public:
    using Elem = CNode;
    LevelField(const ConstantTower* tw, int level) : tw_(tw), lv_(level) {}

    Elem zero() const { return CNode{}; }
    Elem one() const;
    bool is_zero(const Elem& a) const {
        return lv_ == 0 ? (a.q == 0 && a.num.empty()) : a.num.empty();
    }
    bool eq(const Elem& a, const Elem& b) const;
    Elem add(const Elem& a, const Elem& b) const;
    Elem sub(const Elem& a, const Elem& b) const { return add(a, neg(b)); }
    Elem mul(const Elem& a, const Elem& b) const;
    Elem neg(const Elem& a) const;
    Elem inv(const Elem& a) const;

 private:
    const ConstantTower* tw_;
    int lv_;
};

CNode normalize_fraction(const ConstantTower* tw, int lv, std::vector<CNode> n,
                         std::vector<CNode> d);

}  // namespace detail

// A constant of the tower: a tower pointer, the level its node lives at, and
// the node itself in canonical form.  Default-constructed elements are a
// universal zero that attaches to whichever tower it first meets.
class CElem {
 public:
    CElem() : tw_(nullptr), lv_(-1) {}

    const ConstantTower* tower() const { return tw_; }
    bool is_zero() const;
    bool is_one() const;
    std::optional<QQ> try_rational() const;

    CElem operator+(const CElem& o) const;
    CElem operator-(const CElem& o) const;
    CElem operator*(const CElem& o) const;
    CElem operator/(const CElem& o) const;
    CElem operator-() const;
    CElem inv() const;
    CElem pow(long e) const;
    bool operator==(const CElem& o) const;
    bool operator!=(const CElem& o) const { return !(*this == o); }

    std::string str() const;

    // Total order used for deterministic sorting of reported data.
    static int cmp(const CElem& a, const CElem& b);

 private:
    friend class ConstantTower;
    friend struct CElemAccess;
    CElem(const ConstantTower* tw, int lv, CNode v) : tw_(tw), lv_(lv), v_(std::move(v)) {}

    const ConstantTower* tw_;
    int lv_;
    CNode v_;
};

// The constant field C: rationals, then transcendental parameters (each an
// iterated rational-function layer), then algebraic generators (each with a
// monic minimal polynomial over everything below).  Parameters must all be
// declared before the first algebraic layer.
class ConstantTower {
 public:
    struct Layer {
        std::string name;
        std::vector<CNode> minpoly;  // monic, coefficients at the layer's base level
    };

    ConstantTower() = default;

    void add_parameter(const std::string& name) {
        if (!layers_.empty())
            throw ParseError("parameters must be declared before algebraic layers");
        check_fresh_name(name);
        params_.push_back(name);
    }

    // Minimal polynomial coefficients are given low..high as existing tower
    // elements; the polynomial is normalized to monic form.
    void add_algebraic_layer(const std::string& name, const std::vector<CElem>& minpoly);

    int num_params() const { return static_cast<int>(params_.size()); }
    int num_layers() const { return static_cast<int>(layers_.size()); }
    int height() const { return num_params() + num_layers(); }
    bool is_param_level(int lv) const { return lv >= 1 && lv <= num_params(); }
    const std::string& param_name(int i) const { return params_[static_cast<size_t>(i)]; }
    const Layer& layer(int i) const { return layers_[static_cast<size_t>(i)]; }

    const std::string& level_var_name(int lv) const {
        if (is_param_level(lv)) return params_[static_cast<size_t>(lv - 1)];
        return layers_[static_cast<size_t>(lv - num_params() - 1)].name;
    }

    // --- element factories ------------------------------------------------

    CElem zero() const { return CElem(this, 0, CNode{}); }
    CElem one() const { return rational(QQ(1)); }
    CElem rational(const QQ& q) const {
        CNode n;
        n.q = q;
        n.q.canonicalize();
        return CElem(this, 0, std::move(n));
    }
    CElem integer(long n) const { return rational(QQ(n)); }

    // Named symbol (parameter or generator); nullopt if unknown.
    std::optional<CElem> symbol(const std::string& name) const {
        for (int i = 0; i < num_params(); ++i)
            if (params_[static_cast<size_t>(i)] == name) return var_at_level(i + 1);
        for (int i = 0; i < num_layers(); ++i)
            if (layers_[static_cast<size_t>(i)].name == name)
                return var_at_level(num_params() + i + 1);
        return std::nullopt;
    }

    // --- parameter specialization ------------------------------------------
    //
    // Replaces every parameter by a rational value, producing a tower with
    // the same algebraic layers and no parameters.  Throws DivisionByZero if
    // a denominator (or minimal-polynomial coefficient) collapses at the
    // chosen point; callers retry with a different point.
    SpecializedTower specialize(const std::vector<QQ>& values) const;
    CElem map_into(const SpecializedTower& sp, const CElem& c) const;

    // --- internal helpers ---------------------------------------------------

    CNode lift_node_to(const CElem& c, int target_level) const {
        if (c.tw_ == nullptr) return CNode{};
        CNode n = c.v_;
        int lv = c.lv_;
        while (lv < target_level) {
            n = lift_one(std::move(n));
            ++lv;
        }
        if (lv != target_level) throw ParseError("internal: element level above lift target");
        return n;
    }

    static CNode lift_one(CNode n) {
        CNode up;
        bool zero = n.num.empty() && n.den.empty() && n.q == 0;
        if (!zero) up.num.push_back(std::move(n));
        return up;
    }

    CElem make(int lv, CNode n) const { return CElem(this, lv, std::move(n)); }

    std::string node_str(const CNode& n, int lv) const;
    std::string poly_str(const std::vector<CNode>& p, int lv_below, const std::string& var) const;

 private:
    void check_fresh_name(const std::string& name) const {
        if (name == "x") throw ParseError("'x' is reserved for the field variable");
        for (const auto& p : params_)
            if (p == name) throw ParseError("duplicate symbol '" + name + "'");
        for (const auto& l : layers_)
            if (l.name == name) throw ParseError("duplicate symbol '" + name + "'");
    }

    CElem var_at_level(int lv) const {
        detail::LevelField below(this, lv - 1);
        CNode n;
        n.num.push_back(below.zero());
        n.num.push_back(below.one());
        return CElem(this, lv, std::move(n));
    }

    CElem map_node(const SpecializedTower& sp, const CNode& n, int lv) const;

    std::vector<std::string> params_;
    std::vector<Layer> layers_;
};

// Result of ConstantTower::specialize: the parameter-free tower together
// with the rational values that were substituted.
struct SpecializedTower {
    ConstantTower tower;
    std::vector<QQ> values;
};

// ---------------------------------------------------------------------------
// LevelField implementation
// ---------------------------------------------------------------------------

namespace detail {

inline CNode LevelField::one() const {
    CNode n;
    if (lv_ == 0) {
        n.q = 1;
        return n;
    }
    LevelField below(tw_, lv_ - 1);
    n.num.push_back(below.one());
    return n;
}

inline bool node_struct_eq(const CNode& a, const CNode& b) {
    if (a.q != b.q) return false;
    if (a.num.size() != b.num.size() || a.den.size() != b.den.size()) return false;
    for (size_t i = 0; i < a.num.size(); ++i)
        if (!node_struct_eq(a.num[i], b.num[i])) return false;
    for (size_t i = 0; i < a.den.size(); ++i)
        if (!node_struct_eq(a.den[i], b.den[i])) return false;
    return true;
}

inline bool LevelField::eq(const Elem& a, const Elem& b) const {
    return node_struct_eq(a, b);  // canonical forms compare structurally
}

inline CNode LevelField::neg(const Elem& a) const {
    CNode r = a;
    if (lv_ == 0) {
        r.q = -r.q;
        return r;
    }
    LevelField below(tw_, lv_ - 1);
    for (auto& c : r.num) c = below.neg(c);
    return r;
}

inline CNode LevelField::add(const Elem& a, const Elem& b) const {
    if (lv_ == 0) {
        CNode r;
        r.q = a.q + b.q;
        return r;
    }
    LevelField below(tw_, lv_ - 1);
    PolyOps<LevelField> ops(below);
    if (tw_->is_param_level(lv_)) {
        std::vector<CNode> ad = a.den.empty() ? ops.one() : a.den;
        std::vector<CNode> bd = b.den.empty() ? ops.one() : b.den;
        std::vector<CNode> n = ops.add(ops.mul(a.num, bd), ops.mul(b.num, ad));
        std::vector<CNode> d = ops.mul(ad, bd);
        return normalize_fraction(tw_, lv_, std::move(n), std::move(d));
    }
    CNode r;
    r.num = ops.add(a.num, b.num);
    return r;
}

inline CNode LevelField::mul(const Elem& a, const Elem& b) const {
    if (lv_ == 0) {
        CNode r;
        r.q = a.q * b.q;
        return r;
    }
    LevelField below(tw_, lv_ - 1);
    PolyOps<LevelField> ops(below);
    if (tw_->is_param_level(lv_)) {
        std::vector<CNode> ad = a.den.empty() ? ops.one() : a.den;
        std::vector<CNode> bd = b.den.empty() ? ops.one() : b.den;
        return normalize_fraction(tw_, lv_, ops.mul(a.num, b.num), ops.mul(ad, bd));
    }
    const auto& mp = tw_->layer(lv_ - tw_->num_params() - 1).minpoly;
    CNode r;
    r.num = ops.rem(ops.mul(a.num, b.num), mp);
    return r;
}

inline CNode LevelField::inv(const Elem& a) const {
    if (is_zero(a)) throw DivisionByZero("constant inversion");
    if (lv_ == 0) {
        CNode r;
        r.q = 1 / a.q;
        return r;
    }
    LevelField below(tw_, lv_ - 1);
    PolyOps<LevelField> ops(below);
    if (tw_->is_param_level(lv_)) {
        std::vector<CNode> d = a.den.empty() ? ops.one() : a.den;
        return normalize_fraction(tw_, lv_, d, a.num);
    }
    const auto& layer = tw_->layer(lv_ - tw_->num_params() - 1);
    auto [g, s, t] = ops.ext_gcd(a.num, layer.minpoly);
    (void)t;
    if (ops.deg(g) != 0)
        throw NonInvertibleAlgebraic(layer.name, tw_->poly_str(g, lv_ - 1, layer.name));
    CNode r;
    r.num = ops.rem(s, layer.minpoly);
    return r;
}

inline CNode normalize_fraction(const ConstantTower* tw, int lv, std::vector<CNode> n,
                                std::vector<CNode> d) {
    LevelField below(tw, lv - 1);
    PolyOps<LevelField> ops(below);
    n = ops.trim(std::move(n));
    d = ops.trim(std::move(d));
    if (ops.is_zero(d)) throw DivisionByZero("parameter-field denominator");
    CNode r;
    if (ops.is_zero(n)) return r;
    std::vector<CNode> g;
    if (lv == 1) {
        // Innermost parameter level: coefficients are plain rationals, so the
        // heuristic evaluation gcd applies.  This is the hot path of every
        // fraction normalization in the tower.
        QPoly qn, qd;
        qn.reserve(n.size());
        qd.reserve(d.size());
        for (const auto& c : n) qn.push_back(c.q);
        for (const auto& c : d) qd.push_back(c.q);
        for (const QQ& c : qq_poly_gcd(qn, qd)) {
            CNode cn;
            cn.q = c;
            g.push_back(std::move(cn));
        }
    } else {
        g = ops.gcd(n, d);
    }
    if (ops.deg(g) > 0) {
        n = ops.quo(n, g);
        d = ops.quo(d, g);
    }
    CNode lead = ops.lc(d);
    if (!below.eq(lead, below.one())) {
        CNode li = below.inv(lead);
        n = ops.mul_scalar(n, li);
        d = ops.mul_scalar(d, li);
    }
    r.num = std::move(n);
    if (!(d.size() == 1 && below.eq(d[0], below.one()))) r.den = std::move(d);
    return r;
}

// Resolve tower and level for a binary operation, lifting the lower operand.
inline std::tuple<const ConstantTower*, int, CNode, CNode> align(const ConstantTower* atw, int alv,
                                                                 const CNode& av,
                                                                 const ConstantTower* btw, int blv,
                                                                 const CNode& bv) {
    const ConstantTower* tw = atw ? atw : btw;
    if (atw && btw && atw != btw) throw ParseError("mixing constants from different towers");
    if (!tw) return {nullptr, 0, av, bv};
    int lv = std::max(alv < 0 ? 0 : alv, blv < 0 ? 0 : blv);
    CNode an = av, bn = bv;
    for (int l = (alv < 0 ? 0 : alv); l < lv; ++l) an = ConstantTower::lift_one(std::move(an));
    for (int l = (blv < 0 ? 0 : blv); l < lv; ++l) bn = ConstantTower::lift_one(std::move(bn));
    return {tw, lv, std::move(an), std::move(bn)};
}

}  // namespace detail

// Controlled access to CElem internals for the other modules' low-level code.
struct CElemAccess {
    static const CNode& node(const CElem& c);
    static int level(const CElem& c);
    static CElem build(const ConstantTower* tw, int lv, CNode n);
};

inline const CNode& CElemAccess::node(const CElem& c) { return c.v_; }
inline int CElemAccess::level(const CElem& c) { return c.lv_; }
inline CElem CElemAccess::build(const ConstantTower* tw, int lv, CNode n) {
    return CElem(tw, lv, std::move(n));
}

namespace detail {

inline void flatten_coords_node(const ConstantTower& tw, const CNode& n, int lv,
                                std::vector<QQ>& out) {
    if (lv == 0) {
        out.push_back(n.q);
        return;
    }
    if (tw.is_param_level(lv))
        throw ParseError("rational coordinates require a parameter-free tower");
    const auto& mp = tw.layer(lv - tw.num_params() - 1).minpoly;
    const size_t deg = mp.size() - 1;
    size_t sub = 1;
    for (int j = 1; j < lv; ++j)
        sub *= tw.layer(j - tw.num_params() - 1).minpoly.size() - 1;
    for (size_t k = 0; k < deg; ++k) {
        if (k < n.num.size()) {
            flatten_coords_node(tw, n.num[k], lv - 1, out);
        } else {
            out.insert(out.end(), sub, QQ(0));
        }
    }
}

}  // namespace detail

// Coordinates of a constant over the rational vector-space basis of a
// parameter-free tower (products of generator powers, graded by level).  The
// vector has one slot per basis monomial of the full tower, zero-padded when
// the element lives at a lower level.
inline std::vector<QQ> tower_rational_coordinates(const CElem& c) {
    const ConstantTower* tw = c.tower();
    std::vector<QQ> out;
    if (tw == nullptr) {
        out.push_back(QQ(0));
        return out;
    }
    if (tw->num_params() != 0)
        throw ParseError("rational coordinates require a parameter-free tower");
    detail::flatten_coords_node(*tw, CElemAccess::node(c), CElemAccess::level(c), out);
    size_t total = 1;
    for (int j = 0; j < tw->num_layers(); ++j)
        total *= tw->layer(j).minpoly.size() - 1;
    out.resize(total, QQ(0));
    return out;
}

// ---------------------------------------------------------------------------
// ConstantTower member implementations that need LevelField
// ---------------------------------------------------------------------------

inline void ConstantTower::add_algebraic_layer(const std::string& name,
                                               const std::vector<CElem>& minpoly) {
    check_fresh_name(name);
    int base = height();
    detail::LevelField base_field(this, base);
    PolyOps<detail::LevelField> ops(base_field);
    std::vector<CNode> mp;
    for (const auto& c : minpoly) mp.push_back(lift_node_to(c, base));
    mp = ops.trim(std::move(mp));
    if (ops.deg(mp) < 1)
        throw ParseError("minimal polynomial of '" + name + "' must have degree >= 1");
    mp = ops.monic(mp);
    layers_.push_back(Layer{name, std::move(mp)});
}

// ---------------------------------------------------------------------------
// CElem implementation
// ---------------------------------------------------------------------------

inline bool CElem::is_zero() const {
    if (!tw_) return true;
    detail::LevelField f(tw_, lv_);
    return f.is_zero(v_);
}

inline bool CElem::is_one() const {
    if (!tw_) return false;
    detail::LevelField f(tw_, lv_);
    return f.eq(v_, f.one());
}

#define REDFORM_CELEM_BINOP(OPNAME, FIELDOP)                                        \
    inline CElem CElem::OPNAME(const CElem& o) const {                             \
        auto [tw, lv, an, bn] = detail::align(tw_, lv_, v_, o.tw_, o.lv_, o.v_);    \
        if (!tw) return CElem();                                                    \
        detail::LevelField f(tw, lv);                                               \
        return CElem(tw, lv, f.FIELDOP(an, bn));                                    \
    }

REDFORM_CELEM_BINOP(operator+, add)
REDFORM_CELEM_BINOP(operator-, sub)
REDFORM_CELEM_BINOP(operator*, mul)
#undef REDFORM_CELEM_BINOP

inline CElem CElem::operator-() const {
    if (!tw_) return CElem();
    detail::LevelField f(tw_, lv_);
    return CElem(tw_, lv_, f.neg(v_));
}

inline CElem CElem::inv() const {
    if (!tw_) throw DivisionByZero("constant inversion");
    detail::LevelField f(tw_, lv_);
    return CElem(tw_, lv_, f.inv(v_));
}

inline CElem CElem::operator/(const CElem& o) const {
    auto [tw, lv, an, bn] = detail::align(tw_, lv_, v_, o.tw_, o.lv_, o.v_);
    if (!tw) throw DivisionByZero("constant division");
    detail::LevelField f(tw, lv);
    return CElem(tw, lv, f.mul(an, f.inv(bn)));
}

inline CElem CElem::pow(long e) const {
    if (!tw_) {
        if (e <= 0) throw DivisionByZero("0^nonpositive");
        return CElem();
    }
    CElem base = e < 0 ? inv() : *this;
    long k = e < 0 ? -e : e;
    CElem r = tw_->one();
    while (k > 0) {
        if (k & 1) r = r * base;
        base = base * base;
        k >>= 1;
    }
    return r;
}

inline bool CElem::operator==(const CElem& o) const {
    auto [tw, lv, an, bn] = detail::align(tw_, lv_, v_, o.tw_, o.lv_, o.v_);
    if (!tw) return true;  // both are the universal zero
    return detail::node_struct_eq(an, bn);
}

inline std::optional<QQ> CElem::try_rational() const {
    if (!tw_) return QQ(0);
    const CNode* n = &v_;
    int lv = lv_;
    while (lv > 0) {
        if (!n->den.empty()) return std::nullopt;
        if (n->num.empty()) return QQ(0);
        if (n->num.size() > 1) return std::nullopt;
        n = &n->num[0];
        --lv;
    }
    return n->q;
}

inline int CElem::cmp(const CElem& a, const CElem& b) {
    auto [tw, lv, an, bn] = detail::align(a.tw_, a.lv_, a.v_, b.tw_, b.lv_, b.v_);
    (void)tw;
    (void)lv;
    struct Rec {
        static int node(const CNode& x, const CNode& y) {
            int c = ::cmp(x.q, y.q);
            if (c) return c < 0 ? -1 : 1;
            if (x.num.size() != y.num.size()) return x.num.size() < y.num.size() ? -1 : 1;
            if (x.den.size() != y.den.size()) return x.den.size() < y.den.size() ? -1 : 1;
            for (size_t i = 0; i < x.num.size(); ++i)
                if (int r = node(x.num[i], y.num[i])) return r;
            for (size_t i = 0; i < x.den.size(); ++i)
                if (int r = node(x.den[i], y.den[i])) return r;
            return 0;
        }
    };
    return Rec::node(an, bn);
}

// ---------------------------------------------------------------------------
// Printing (canonical, parseable by the expression grammar)
// ---------------------------------------------------------------------------

namespace detail {

inline bool str_is_atom(const std::string& s) {
    if (s.empty()) return false;
    for (char ch : s)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) return false;
    return true;
}

inline std::string parenthesize_unless_atom(const std::string& s) {
    return str_is_atom(s) ? s : "(" + s + ")";
}

// Join already-signed term strings into a sum, folding leading minus signs.
inline std::string join_terms(const std::vector<std::string>& terms) {
    if (terms.empty()) return "0";
    std::string out = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) {
        const std::string& t = terms[i];
        if (!t.empty() && t[0] == '-')
            out += " - " + t.substr(1);
        else
            out += " + " + t;
    }
    return out;
}

}  // namespace detail

inline std::string ConstantTower::poly_str(const std::vector<CNode>& p, int lv_below,
                                           const std::string& var) const {
    detail::LevelField below(this, lv_below);
    std::vector<std::string> terms;
    for (size_t i = p.size(); i-- > 0;) {
        if (below.is_zero(p[i])) continue;
        std::string cs = node_str(p[i], lv_below);
        std::string term;
        if (i == 0) {
            term = cs;
        } else {
            std::string pw = (i == 1) ? var : var + "^" + std::to_string(i);
            if (cs == "1") {
                term = pw;
            } else if (cs == "-1") {
                term = "-" + pw;
            } else if (detail::str_is_atom(cs) ||
                       (cs.size() > 1 && cs[0] == '-' && detail::str_is_atom(cs.substr(1)))) {
                term = cs + "*" + pw;
            } else {
                term = "(" + cs + ")*" + pw;
            }
        }
        terms.push_back(std::move(term));
    }
    return detail::join_terms(terms);
}

inline std::string ConstantTower::node_str(const CNode& n, int lv) const {
    if (lv <= 0) return qq_str(n.q);
    detail::LevelField f(this, lv);
    if (f.is_zero(n)) return "0";
    const std::string& var = level_var_name(lv);
    std::string ns = poly_str(n.num, lv - 1, var);
    if (n.den.empty()) return ns;
    std::string ds = poly_str(n.den, lv - 1, var);
    return detail::parenthesize_unless_atom(ns) + "/" + detail::parenthesize_unless_atom(ds);
}

inline std::string CElem::str() const {
    if (!tw_) return "0";
    return tw_->node_str(v_, lv_);
}

// ---------------------------------------------------------------------------
// Parameter specialization
// ---------------------------------------------------------------------------

inline CElem ConstantTower::map_node(const SpecializedTower& sp, const CNode& n, int lv) const {
    const int P = num_params();
    if (lv <= 0) return sp.tower.rational(n.q);
    if (lv <= P) {
        // Rational function of parameter lv: Horner-evaluate num and den.
        const QQ& val = sp.values[static_cast<size_t>(lv - 1)];
        CElem v = sp.tower.rational(val);
        auto horner = [&](const std::vector<CNode>& poly) {
            CElem r = sp.tower.zero();
            for (size_t i = poly.size(); i-- > 0;)
                r = r * v + map_node(sp, poly[i], lv - 1);
            return r;
        };
        CElem numv = horner(n.num);
        if (n.den.empty()) return numv;
        CElem denv = horner(n.den);
        if (denv.is_zero()) throw DivisionByZero("specialization hit a parameter pole");
        return numv / denv;
    }
    // Algebraic level: map coefficients, reassemble in the specialized tower.
    const std::string& gname = layers_[static_cast<size_t>(lv - P - 1)].name;
    CElem gen = *sp.tower.symbol(gname);
    CElem r = sp.tower.zero();
    for (size_t i = n.num.size(); i-- > 0;) r = r * gen + map_node(sp, n.num[i], lv - 1);
    return r;
}

inline SpecializedTower ConstantTower::specialize(const std::vector<QQ>& values) const {
    if (static_cast<int>(values.size()) != num_params())
        throw ParseError("specialization requires one value per parameter");
    SpecializedTower sp;
    sp.values = values;
    for (size_t li = 0; li < layers_.size(); ++li) {
        const int base_lv = num_params() + static_cast<int>(li);
        std::vector<CElem> coeffs;
        for (const auto& c : layers_[li].minpoly) coeffs.push_back(map_node(sp, c, base_lv));
        sp.tower.add_algebraic_layer(layers_[li].name, coeffs);
    }
    return sp;
}

inline CElem ConstantTower::map_into(const SpecializedTower& sp, const CElem& c) const {
    if (c.tower() == nullptr) return sp.tower.zero();
    return map_node(sp, CElemAccess::node(c), CElemAccess::level(c));
}

}  // namespace redform

#endif  // REDFORM_TOWER_HPP
