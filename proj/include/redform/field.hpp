#ifndef REDFORM_FIELD_HPP
#define REDFORM_FIELD_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tower.hpp"

namespace redform {

// Field context over CElem, for the shared polynomial kernel.
struct CField {
    using Elem = CElem;
    const ConstantTower* tw;
    explicit CField(const ConstantTower* t) : tw(t) {}

    Elem zero() const { return CElem(); }
    Elem one() const { return tw->one(); }
    bool is_zero(const Elem& a) const { return a.is_zero(); }
    bool eq(const Elem& a, const Elem& b) const { return a == b; }
    Elem add(const Elem& a, const Elem& b) const { return a + b; }
    Elem sub(const Elem& a, const Elem& b) const { return a - b; }
    Elem mul(const Elem& a, const Elem& b) const { return a * b; }
    Elem neg(const Elem& a) const { return -a; }
    Elem inv(const Elem& a) const { return a.inv(); }
};

using CPoly = std::vector<CElem>;  // dense polynomial in x over the constants

// An element of k = C(x): a reduced fraction of polynomials in x with
// coefficients in the constant tower.  Canonical form: denominator monic,
// gcd(num, den) = 1, zero is the empty numerator with denominator 1.
class FieldElement {
 public:
    FieldElement() : tw_(nullptr) {}

    static FieldElement from_constant(const CElem& c) {
        FieldElement f;
        f.tw_ = c.tower();
        if (!c.is_zero()) f.num_.push_back(c);
        if (f.tw_) f.den_.push_back(f.tw_->one());
        return f;
    }
    static FieldElement from_rational(const ConstantTower& tw, const QQ& q) {
        return from_constant(tw.rational(q));
    }
    static FieldElement variable(const ConstantTower& tw) {
        FieldElement f;
        f.tw_ = &tw;
        f.num_ = {tw.zero(), tw.one()};
        f.den_ = {tw.one()};
        return f;
    }
    static FieldElement from_fraction(const ConstantTower& tw, CPoly num, CPoly den) {
        FieldElement f;
        f.tw_ = &tw;
        f.num_ = std::move(num);
        f.den_ = std::move(den);
        f.reduce();
        return f;
    }

    const ConstantTower* tower() const { return tw_; }
    const CPoly& num() const { return num_; }
    const CPoly& den() const { return den_; }
    bool is_zero() const { return num_.empty(); }

    bool is_constant() const { return num_.size() <= 1 && den_.size() <= 1; }
    // The constant value; throws if not constant.
    CElem constant() const {
        if (!is_constant()) throw ParseError("field element is not constant: " + str());
        if (num_.empty()) return tw_ ? tw_->zero() : CElem();
        return num_[0] / den_[0];
    }

    FieldElement operator+(const FieldElement& o) const {
        auto [tw, a, b] = promote(o);
        if (!tw) return FieldElement();
        CField K(tw);
        PolyOps<CField> P(K);
        if (P.eq(a.den_, b.den_)) return build(tw, P.add(a.num_, b.num_), a.den_);
        return build(tw, P.add(P.mul(a.num_, b.den_), P.mul(b.num_, a.den_)),
                     P.mul(a.den_, b.den_));
    }
    FieldElement operator-(const FieldElement& o) const { return *this + (-o); }
    FieldElement operator*(const FieldElement& o) const {
        auto [tw, a, b] = promote(o);
        if (!tw) return FieldElement();
        CField K(tw);
        PolyOps<CField> P(K);
        return build(tw, P.mul(a.num_, b.num_), P.mul(a.den_, b.den_));
    }
    FieldElement operator/(const FieldElement& o) const { return *this * o.inv(); }
    FieldElement operator-() const {
        FieldElement r = *this;
        for (auto& c : r.num_) c = -c;
        return r;
    }
    FieldElement inv() const {
        if (is_zero()) throw DivisionByZero("field element inversion");
        FieldElement r;
        r.tw_ = tw_;
        r.num_ = den_;
        r.den_ = num_;
        r.reduce();
        return r;
    }
    FieldElement pow(long e) const {
        if (e < 0) return inv().pow(-e);
        FieldElement r = tw_ ? from_constant(tw_->one()) : FieldElement();
        FieldElement b = *this;
        long k = e;
        if (!tw_) {
            if (e == 0) throw ParseError("0^0 of an unattached zero");
            return FieldElement();
        }
        while (k > 0) {
            if (k & 1) r = r * b;
            b = b * b;
            k >>= 1;
        }
        return r;
    }

    bool operator==(const FieldElement& o) const {
        auto [tw, a, b] = promote(o);
        if (!tw) return true;
        CField K(tw);
        PolyOps<CField> P(K);
        return P.eq(a.num_, b.num_) && P.eq(a.den_, b.den_);
    }
    bool operator!=(const FieldElement& o) const { return !(*this == o); }

    // d/dx via the quotient rule.
    FieldElement derive() const {
        if (!tw_ || is_zero()) return FieldElement();
        CField K(tw_);
        PolyOps<CField> P(K);
        CPoly n = P.sub(P.mul(P.derive(num_), den_), P.mul(num_, P.derive(den_)));
        CPoly d = P.mul(den_, den_);
        return build(tw_, std::move(n), std::move(d));
    }

    // Evaluate at x = point (a constant); throws DivisionByZero at poles.
    CElem eval_at(const CElem& point) const {
        if (!tw_) return CElem();
        CField K(tw_);
        PolyOps<CField> P(K);
        CElem dn = P.eval(den_, point);
        if (dn.is_zero()) throw DivisionByZero("evaluation at a pole");
        return P.eval(num_, point) / dn;
    }

    std::string str() const;

    // Map parameters to rational values (same algebraic layers).
    FieldElement specialize_params(const ConstantTower& src, const SpecializedTower& sp) const {
        if (!tw_) return FieldElement();
        CPoly n, d;
        for (const auto& c : num_) n.push_back(src.map_into(sp, c));
        for (const auto& c : den_) d.push_back(src.map_into(sp, c));
        return from_fraction(sp.tower, std::move(n), std::move(d));
    }

 private:
    static FieldElement build(const ConstantTower* tw, CPoly n, CPoly d) {
        FieldElement f;
        f.tw_ = tw;
        f.num_ = std::move(n);
        f.den_ = std::move(d);
        f.reduce();
        return f;
    }

    std::tuple<const ConstantTower*, FieldElement, FieldElement> promote(
        const FieldElement& o) const {
        const ConstantTower* tw = tw_ ? tw_ : o.tw_;
        if (tw_ && o.tw_ && tw_ != o.tw_)
            throw ParseError("mixing field elements from different towers");
        FieldElement a = *this, b = o;
        if (!a.tw_ && tw) {
            a.tw_ = tw;
            a.den_ = {tw->one()};
        }
        if (!b.tw_ && tw) {
            b.tw_ = tw;
            b.den_ = {tw->one()};
        }
        return {tw, std::move(a), std::move(b)};
    }

    void reduce() {
        CField K(tw_);
        PolyOps<CField> P(K);
        num_ = P.trim(std::move(num_));
        den_ = P.trim(std::move(den_));
        if (P.is_zero(den_)) throw DivisionByZero("field element denominator");
        if (num_.empty()) {
            den_ = P.one();
            return;
        }
        // Common power of x first: in this engine almost every denominator is
        // c*x^k, so stripping the shared valuation usually finishes the job
        // without a polynomial gcd.
        size_t vn = 0, vd = 0;
        while (num_[vn].is_zero()) ++vn;
        while (den_[vd].is_zero()) ++vd;
        if (size_t v = std::min(vn, vd); v > 0) {
            num_.erase(num_.begin(), num_.begin() + static_cast<long>(v));
            den_.erase(den_.begin(), den_.begin() + static_cast<long>(v));
        }
        if (P.deg(den_) > 0 && P.deg(num_) > 0) {
            bool den_monomial = true;
            for (size_t j = 0; j + 1 < den_.size(); ++j)
                if (!den_[j].is_zero()) {
                    den_monomial = false;
                    break;
                }
            if (!den_monomial) {
                CPoly g = P.gcd(num_, den_);
                if (P.deg(g) > 0) {
                    num_ = P.quo(num_, g);
                    den_ = P.quo(den_, g);
                }
            }
        }
        CElem lead = den_.back();
        if (!lead.is_one()) {
            CElem li = lead.inv();
            num_ = P.mul_scalar(num_, li);
            den_ = P.mul_scalar(den_, li);
        }
    }

    const ConstantTower* tw_;
    CPoly num_, den_;
};

// Field context over FieldElement, again for the shared polynomial kernel
// (operators in D, minimal polynomials over k, adapted-coordinate algebra).
struct KField {
    using Elem = FieldElement;
    const ConstantTower* tw;
    explicit KField(const ConstantTower* t) : tw(t) {}

    Elem zero() const { return FieldElement(); }
    Elem one() const { return FieldElement::from_constant(tw->one()); }
    bool is_zero(const Elem& a) const { return a.is_zero(); }
    bool eq(const Elem& a, const Elem& b) const { return a == b; }
    Elem add(const Elem& a, const Elem& b) const { return a + b; }
    Elem sub(const Elem& a, const Elem& b) const { return a - b; }
    Elem mul(const Elem& a, const Elem& b) const { return a * b; }
    Elem neg(const Elem& a) const { return -a; }
    Elem inv(const Elem& a) const { return a.inv(); }
};

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string cpoly_str(const ConstantTower* tw, const CPoly& p) {
    std::vector<std::string> terms;
    for (size_t i = p.size(); i-- > 0;) {
        if (p[i].is_zero()) continue;
        std::string cs = p[i].str();
        std::string term;
        if (i == 0) {
            term = cs;
        } else {
            std::string pw = (i == 1) ? std::string("x") : "x^" + std::to_string(i);
            if (cs == "1") {
                term = pw;
            } else if (cs == "-1") {
                term = "-" + pw;
            } else if (str_is_atom(cs) ||
                       (cs.size() > 1 && cs[0] == '-' && str_is_atom(cs.substr(1)))) {
                term = cs + "*" + pw;
            } else {
                term = "(" + cs + ")*" + pw;
            }
        }
        terms.push_back(std::move(term));
    }
    (void)tw;
    return join_terms(terms);
}

}  // namespace detail

inline std::string FieldElement::str() const {
    if (!tw_ || num_.empty()) return "0";
    std::string ns = detail::cpoly_str(tw_, num_);
    bool den_is_one = den_.size() == 1 && den_[0].is_one();
    if (den_is_one) return ns;
    std::string ds = detail::cpoly_str(tw_, den_);
    return detail::parenthesize_unless_atom(ns) + "/" + detail::parenthesize_unless_atom(ds);
}

// ---------------------------------------------------------------------------
// Partial fractions
// ---------------------------------------------------------------------------

// One term n/q^e of a partial fraction decomposition, deg n < deg q.
struct PartialFractionTerm {
    CPoly factor;     // monic squarefree q
    int power = 1;    // e >= 1
    CPoly numerator;  // n, deg n < deg q
};

struct PartialFractions {
    CPoly polynomial;                        // polynomial part
    std::vector<PartialFractionTerm> terms;  // proper part, grouped by factor
};

// Decompose f into a polynomial part plus proper fractions over the powers of
// the monic squarefree factors of its denominator.  Recombining the result
// always returns f exactly (tested property).
inline PartialFractions partial_fractions(const FieldElement& f) {
    PartialFractions out;
    if (f.is_zero() || !f.tower()) return out;
    CField K(f.tower());
    PolyOps<CField> P(K);
    auto [polypart, r] = P.divmod(f.num(), f.den());
    out.polynomial = std::move(polypart);
    if (P.is_zero(r)) return out;

    // Split the denominator into coprime blocks q_i^{e_i} via Yun,
    // then peel the blocks off one at a time with an extended gcd.
    std::vector<CPoly> sf = P.squarefree_decomposition(f.den());
    struct Block {
        CPoly q;
        int e;
        CPoly qe;
    };
    std::vector<Block> blocks;
    for (size_t i = 0; i < sf.size(); ++i)
        if (P.deg(sf[i]) > 0)
            blocks.push_back(Block{sf[i], static_cast<int>(i) + 1,
                                   P.pow(sf[i], static_cast<long>(i) + 1)});

    CPoly rest_num = r;
    CPoly rest_den = f.den();
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
        const Block& B = blocks[bi];
        CPoly other = P.quo(rest_den, B.qe);
        CPoly local;
        if (P.deg(other) == 0) {
            local = P.mul_scalar(rest_num, K.inv(other.empty() ? K.one() : other[0]));
        } else {
            // 1 = s*qe + t*other  =>  rest/(qe*other) = (rest*t)/qe + (rest*s)/other
            auto [g, s, t] = P.ext_gcd(B.qe, other);
            if (P.deg(g) != 0) throw ParseError("internal: non-coprime squarefree blocks");
            local = P.rem(P.mul(rest_num, t), B.qe);
            rest_num = P.rem(P.mul(rest_num, s), other);
            rest_den = other;
        }
        // Expand local/q^e into base-q digits: local = sum d_j q^j.
        CPoly cur = local;
        std::vector<CPoly> digits;
        while (!P.is_zero(cur)) {
            auto [qq, rr] = P.divmod(cur, B.q);
            digits.push_back(rr);
            cur = std::move(qq);
        }
        for (size_t j = 0; j < digits.size(); ++j) {
            if (P.is_zero(digits[j])) continue;
            int e = B.e - static_cast<int>(j);
            if (e <= 0) throw ParseError("internal: partial fraction overflow");
            out.terms.push_back(PartialFractionTerm{B.q, e, digits[j]});
        }
    }
    return out;
}

inline FieldElement recombine(const ConstantTower& tw, const PartialFractions& pf) {
    CField K(&tw);
    PolyOps<CField> P(K);
    FieldElement acc = FieldElement::from_fraction(tw, pf.polynomial, P.one());
    for (const auto& t : pf.terms)
        acc = acc + FieldElement::from_fraction(tw, t.numerator, P.pow(t.factor, t.power));
    return acc;
}

}  // namespace redform

#endif  // REDFORM_FIELD_HPP
