#ifndef REDFORM_POLYRING_HPP
#define REDFORM_POLYRING_HPP

#include <tuple>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace redform {

// Dense univariate polynomial arithmetic over an arbitrary exact field.
//
// The field is supplied as a context object F providing
//   using Elem;
//   Elem zero() / one();
//   Elem add/sub/mul(a,b), neg(a), inv(a);
//   bool is_zero(a), eq(a,b);
// Polynomials are coefficient vectors, lowest degree first, with no trailing
// zero coefficients (the zero polynomial is the empty vector).  Everything
// here is used many levels deep (tower layers, rational functions in x,
// minimal polynomials over matrices), so it stays allocation-simple and
// deterministic.
template <class F>
struct PolyOps {
    using E = typename F::Elem;
    using P = std::vector<E>;

    const F& K;
    explicit PolyOps(const F& k) : K(k) {}

    P trim(P p) const {
        while (!p.empty() && K.is_zero(p.back())) p.pop_back();
        return p;
    }
    int deg(const P& p) const { return static_cast<int>(p.size()) - 1; }
    bool is_zero(const P& p) const { return p.empty(); }

    P zero() const { return {}; }
    P one() const { return {K.one()}; }
    P constant(const E& c) const {
        P p{c};
        return trim(std::move(p));
    }
    // The monomial c * X^k.
    P monomial(const E& c, int k) const {
        if (K.is_zero(c)) return {};
        P p(static_cast<size_t>(k) + 1, K.zero());
        p.back() = c;
        return p;
    }

    E coeff(const P& p, int k) const {
        if (k < 0 || k >= static_cast<int>(p.size())) return K.zero();
        return p[static_cast<size_t>(k)];
    }
    E lc(const P& p) const {
        if (p.empty()) throw DivisionByZero("leading coefficient of zero polynomial");
        return p.back();
    }

    bool eq(const P& a, const P& b) const {
        if (a.size() != b.size()) return false;
        for (size_t i = 0; i < a.size(); ++i)
            if (!K.eq(a[i], b[i])) return false;
        return true;
    }

    P add(const P& a, const P& b) const {
        P r(std::max(a.size(), b.size()), K.zero());
        for (size_t i = 0; i < a.size(); ++i) r[i] = a[i];
        for (size_t i = 0; i < b.size(); ++i) r[i] = K.add(r[i], b[i]);
        return trim(std::move(r));
    }
    P neg(const P& a) const {
        P r = a;
        for (auto& c : r) c = K.neg(c);
        return r;
    }
    P sub(const P& a, const P& b) const { return add(a, neg(b)); }

    P mul(const P& a, const P& b) const {
        if (a.empty() || b.empty()) return {};
        P r(a.size() + b.size() - 1, K.zero());
        for (size_t i = 0; i < a.size(); ++i) {
            if (K.is_zero(a[i])) continue;
            for (size_t j = 0; j < b.size(); ++j)
                r[i + j] = K.add(r[i + j], K.mul(a[i], b[j]));
        }
        return trim(std::move(r));
    }
    P mul_scalar(const P& a, const E& c) const {
        if (K.is_zero(c)) return {};
        P r = a;
        for (auto& e : r) e = K.mul(e, c);
        return trim(std::move(r));
    }

    // Euclidean division a = q*b + r, deg r < deg b.
    std::pair<P, P> divmod(const P& a, const P& b) const {
        if (b.empty()) throw DivisionByZero("polynomial division");
        P r = a, q;
        const E lb = K.inv(b.back());
        const int db = deg(b);
        while (deg(r) >= db) {
            int k = deg(r) - db;
            E c = K.mul(r.back(), lb);
            if (static_cast<int>(q.size()) < k + 1) q.resize(static_cast<size_t>(k) + 1, K.zero());
            q[static_cast<size_t>(k)] = K.add(q[static_cast<size_t>(k)], c);
            for (int i = 0; i <= db; ++i) {
                size_t ri = static_cast<size_t>(k + i);
                r[ri] = K.sub(r[ri], K.mul(c, b[static_cast<size_t>(i)]));
            }
            r = trim(std::move(r));
        }
        return {trim(std::move(q)), std::move(r)};
    }
    P rem(const P& a, const P& b) const { return divmod(a, b).second; }
    P quo(const P& a, const P& b) const { return divmod(a, b).first; }

    P monic(const P& a) const {
        if (a.empty()) return a;
        return mul_scalar(a, K.inv(a.back()));
    }

    // Monic gcd.  Coefficients live in a field, but the remainder sequence is
    // run as a subresultant PRS: pseudo-remainders with exact divisions by the
    // tracked leading-coefficient powers.  Plain Euclid squares coefficient
    // sizes at every step when the field is Q or a rational function field,
    // while subresultant remainders stay within resultant-sized bounds.
    P gcd(P a, P b) const {
        a = trim(std::move(a));
        b = trim(std::move(b));
        if (a.empty()) return monic(b);
        if (b.empty()) return monic(a);
        if (deg(a) < deg(b)) std::swap(a, b);
        E g = K.one(), h = K.one();
        for (;;) {
            long d = deg(a) - deg(b);
            P r = pseudo_rem(a, b);
            if (r.empty()) return monic(b);
            if (deg(r) == 0) return one();
            E div = K.mul(g, scalar_pow(h, d));
            a = std::move(b);
            b = mul_scalar(r, K.inv(div));
            g = a.back();
            if (d == 1)
                h = g;
            else if (d > 1)
                h = K.mul(scalar_pow(g, d), K.inv(scalar_pow(h, d - 1)));
        }
    }

    // prem(a, b) = rem(lc(b)^(deg a - deg b + 1) * a, b), computed without any
    // coefficient division.
    P pseudo_rem(const P& a, const P& b) const {
        const E lb = b.back();
        long db = deg(b);
        long e = deg(a) - db + 1;
        P r = a;
        while (!r.empty() && deg(r) >= db) {
            E lr = r.back();
            size_t k = static_cast<size_t>(deg(r) - db);
            P sb(k, K.zero());
            sb.insert(sb.end(), b.begin(), b.end());
            r = sub(mul_scalar(r, lb), mul_scalar(sb, lr));
            --e;
        }
        if (e > 0) r = mul_scalar(r, scalar_pow(lb, e));
        return r;
    }

    E scalar_pow(E base, long n) const {
        E acc = K.one();
        while (n > 0) {
            if (n & 1) acc = K.mul(acc, base);
            base = K.mul(base, base);
            n >>= 1;
        }
        return acc;
    }

    P lcm(const P& a, const P& b) const {
        if (a.empty() || b.empty()) return {};
        return monic(quo(mul(a, b), gcd(a, b)));
    }

    // Extended gcd: returns (g, s, t) with g = s*a + t*b, g monic.
    std::tuple<P, P, P> ext_gcd(const P& a, const P& b) const {
        P r0 = trim(a), r1 = trim(b);
        P s0 = one(), s1 = zero(), t0 = zero(), t1 = one();
        while (!r1.empty()) {
            auto [q, r] = divmod(r0, r1);
            r0 = std::move(r1);
            r1 = std::move(r);
            P s2 = sub(s0, mul(q, s1));
            s0 = std::move(s1);
            s1 = std::move(s2);
            P t2 = sub(t0, mul(q, t1));
            t0 = std::move(t1);
            t1 = std::move(t2);
        }
        if (r0.empty()) return {r0, s0, t0};
        E lcinv = K.inv(r0.back());
        return {mul_scalar(r0, lcinv), mul_scalar(s0, lcinv), mul_scalar(t0, lcinv)};
    }

    P derive(const P& a) const {
        if (a.size() <= 1) return {};
        P r(a.size() - 1, K.zero());
        for (size_t i = 1; i < a.size(); ++i) {
            E k = K.zero();
            for (size_t j = 0; j < i; ++j) k = K.add(k, K.one());  // i as field element
            r[i - 1] = K.mul(a[i], k);
        }
        return trim(std::move(r));
    }

    E eval(const P& a, const E& v) const {
        E r = K.zero();
        for (size_t i = a.size(); i-- > 0;) r = K.add(K.mul(r, v), a[i]);
        return r;
    }

    P pow(P a, long e) const {
        P r = one();
        while (e > 0) {
            if (e & 1) r = mul(r, a);
            a = mul(a, a);
            e >>= 1;
        }
        return r;
    }

    // Yun's squarefree decomposition: returns factors f_1, f_2, ... with
    // a = lc * prod f_i^i, each f_i monic squarefree, pairwise coprime
    // (f_i may be 1, returned as the empty slot convention: we return the
    // full list including degree-0 entries so multiplicity = index + 1).
    std::vector<P> squarefree_decomposition(const P& a) const {
        std::vector<P> out;
        P f = monic(a);
        if (deg(f) <= 0) return out;
        P fp = derive(f);
        P g = gcd(f, fp);
        if (deg(g) == 0) {
            out.push_back(f);
            return out;
        }
        P w = quo(f, g);
        P y = quo(fp, g);
        P z = sub(y, derive(w));
        while (!is_zero(z)) {
            P h = gcd(w, z);
            out.push_back(h);
            w = quo(w, h);
            y = quo(z, h);
            z = sub(y, derive(w));
        }
        out.push_back(w);
        return out;
    }
};

}  // namespace redform

#endif  // REDFORM_POLYRING_HPP
