#ifndef REDFORM_QPOLY_HPP
#define REDFORM_QPOLY_HPP

#include <optional>
#include <utility>
#include <vector>

#include "polyring.hpp"
#include "qq.hpp"

namespace redform {

// Dense polynomials over Q, low to high degree.  These are the innermost
// coefficient domain of every constant tower, so the gcds here are the hot
// path of all fraction normalization.
using QPoly = std::vector<QQ>;

struct QQField {
    using Elem = QQ;
    Elem zero() const { return QQ(0); }
    Elem one() const { return QQ(1); }
    bool is_zero(const Elem& a) const { return a == 0; }
    bool eq(const Elem& a, const Elem& b) const { return a == b; }
    Elem add(const Elem& a, const Elem& b) const { return a + b; }
    Elem sub(const Elem& a, const Elem& b) const { return a - b; }
    Elem mul(const Elem& a, const Elem& b) const { return a * b; }
    Elem neg(const Elem& a) const { return -a; }
    Elem inv(const Elem& a) const {
        if (a == 0) throw DivisionByZero("rational inversion");
        return 1 / a;
    }
};

namespace detail {

// Clear denominators and content: primitive Z[t] image with positive lead.
inline std::vector<mpz_class> zz_primitive(const QPoly& a) {
    mpz_class den_lcm = 1;
    for (const auto& c : a) {
        mpz_class d = c.get_den();
        den_lcm = den_lcm / gcd(den_lcm, d) * d;
    }
    std::vector<mpz_class> z;
    z.reserve(a.size());
    mpz_class content = 0;
    for (const auto& c : a) {
        mpz_class v = c.get_num() * (den_lcm / c.get_den());
        content = gcd(content, v);
        z.push_back(std::move(v));
    }
    if (content == 0) return {};
    if (z.back() < 0) content = -content;
    for (auto& v : z) v /= content;
    return z;
}

inline mpz_class zz_eval(const std::vector<mpz_class>& a, const mpz_class& xi) {
    mpz_class r = 0;
    for (size_t i = a.size(); i-- > 0;) r = r * xi + a[i];
    return r;
}

// Exact division in Z[t]; nullopt if not exact.
inline std::optional<std::vector<mpz_class>> zz_exact_div(const std::vector<mpz_class>& a,
                                                          const std::vector<mpz_class>& b) {
    if (b.empty()) return std::nullopt;
    if (a.empty()) return std::vector<mpz_class>{};
    if (a.size() < b.size()) return std::nullopt;
    std::vector<mpz_class> r = a;
    std::vector<mpz_class> q(a.size() - b.size() + 1);
    const mpz_class& lb = b.back();
    for (size_t k = q.size(); k-- > 0;) {
        mpz_class& lead = r[k + b.size() - 1];
        if (lead % lb != 0) return std::nullopt;
        mpz_class qc = lead / lb;
        for (size_t j = 0; j < b.size(); ++j) r[k + j] -= qc * b[j];
        q[k] = std::move(qc);
    }
    for (const auto& c : r)
        if (c != 0) return std::nullopt;
    return q;
}

inline mpz_class zz_height(const std::vector<mpz_class>& a) {
    mpz_class h = 0;
    for (const auto& c : a)
        if (cmp(h, abs(c)) < 0) h = abs(c);
    return h;
}

}  // namespace detail

// Heuristic gcd over Q[t] (GCDHEU): evaluate at a large integer, take the
// integer gcd, reconstruct a candidate from balanced digits, and certify by
// trial division.  Returns the monic gcd, or nullopt when the heuristic gives
// up (caller falls back to the subresultant PRS).
inline std::optional<QPoly> qq_poly_gcd_heuristic(const QPoly& a, const QPoly& b) {
    std::vector<mpz_class> za = detail::zz_primitive(a);
    std::vector<mpz_class> zb = detail::zz_primitive(b);
    if (za.empty() || zb.empty()) return std::nullopt;

    mpz_class ha = detail::zz_height(za), hb = detail::zz_height(zb);
    const bool a_smaller = za.size() <= zb.size();
    const size_t dmin = (a_smaller ? za.size() : zb.size()) - 1;
    const size_t max_deg = std::max(za.size(), zb.size());

    // Mignotte-style bound on the height of any divisor of the smaller-degree
    // input.  A candidate that passes trial division is provably *the* gcd
    // only once xi > 2*M + 2 (the cofactor then cannot evaluate to a unit),
    // so acceptance is gated on that; squaring xi gets there in a few rounds.
    mpz_class M = (a_smaller ? ha : hb) * (static_cast<long>(dmin) + 1);
    M <<= dmin;

    mpz_class xi = 2 * (cmp(ha, hb) < 0 ? ha : hb) + 2;
    if (xi < 4) xi = 4;
    for (int attempt = 0; attempt < 8; ++attempt) {
        if (mpz_sizeinbase(xi.get_mpz_t(), 2) * max_deg > 600000) return std::nullopt;
        if (xi > 2 * M + 2) {
            mpz_class ga = detail::zz_eval(za, xi), gb = detail::zz_eval(zb, xi);
            mpz_class g = gcd(ga, gb);
            // balanced xi-adic reconstruction
            std::vector<mpz_class> cand;
            mpz_class cur = g, half = xi / 2;
            while (cur != 0 && cand.size() <= max_deg) {
                mpz_class d = cur % xi;  // GMP: sign follows cur; normalize to [0, xi)
                if (d < 0) d += xi;
                if (d > half) d -= xi;
                cand.push_back(d);
                cur = (cur - d) / xi;
            }
            while (!cand.empty() && cand.back() == 0) cand.pop_back();
            if (!cand.empty() && cand.size() <= max_deg) {
                mpz_class content = 0;
                for (const auto& c : cand) content = gcd(content, c);
                if (cand.back() < 0) content = -content;
                for (auto& c : cand) c /= content;
                if (cand.size() == 1) return QPoly{QQ(1)};  // coprime: the common case
                if (detail::zz_exact_div(za, cand) && detail::zz_exact_div(zb, cand)) {
                    QPoly out;
                    out.reserve(cand.size());
                    QQ lead(cand.back());
                    for (const auto& c : cand) out.push_back(QQ(c) / lead);
                    return out;
                }
            }
        }
        xi = xi * xi + 1;
    }
    return std::nullopt;
}

// Monic gcd over Q[t]: heuristic first, subresultant PRS as the fallback.
inline QPoly qq_poly_gcd(const QPoly& a, const QPoly& b) {
    QQField K;
    PolyOps<QQField> P(K);
    QPoly ta = P.trim(a), tb = P.trim(b);
    if (ta.empty()) return P.monic(tb);
    if (tb.empty()) return P.monic(ta);
    if (P.deg(ta) == 0 || P.deg(tb) == 0) return P.one();
    if (auto g = qq_poly_gcd_heuristic(ta, tb)) return *g;
    return P.gcd(ta, tb);
}

}  // namespace redform

#endif  // REDFORM_QPOLY_HPP
