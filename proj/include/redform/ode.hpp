#ifndef REDFORM_ODE_HPP
#define REDFORM_ODE_HPP

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "matrix.hpp"

namespace redform {

// ===========================================================================
// Linear differential operators over k = C(x) and their rational solutions.
//
// The solver is Abramov's: bound a universal denominator u from the local
// indicial data at each singular factor of the leading coefficient,
// substitute y = z/u, bound deg z through the indicial polynomial at
// infinity, and finish with linear algebra over C.  All arithmetic is exact.
// Two search ranges are genuinely open-ended and are capped, with the cap
// recorded in SolveStats: exponent searches at non-linear singular factors
// (which would need integer roots of a resultant over the tower) and local
// indicial polynomials that vanish identically.
// ===========================================================================

// Sum c[i] * D^i, coefficients low to high.  Trailing zero coefficients are
// tolerated everywhere and trimmed on use.
struct DiffOperator {
    const ConstantTower* tw = nullptr;
    std::vector<FieldElement> c;
};

struct SolveOptions {
    long degree_cap = 50;
};

struct SolveStats {
    // A singular factor of degree >= 2 was handled by the capped exponent
    // scan, so pole orders beyond the cap would have been missed.
    bool denominator_scan_capped = false;
    // A local indicial polynomial vanished identically; the cap itself was
    // used as that factor's exponent.
    bool indicial_degenerate = false;

    void merge(const SolveStats& o) {
        denominator_scan_capped = denominator_scan_capped || o.denominator_scan_capped;
        indicial_degenerate = indicial_degenerate || o.indicial_degenerate;
    }
};

inline DiffOperator make_operator(const ConstantTower& tw, std::vector<FieldElement> c) {
    DiffOperator L;
    L.tw = &tw;
    L.c = std::move(c);
    return L;
}

// D - lambda, the homogeneous part of y' = lambda*y + ...
inline DiffOperator first_order_operator(const ConstantTower& tw, const FieldElement& lambda) {
    return make_operator(tw, {-lambda, FieldElement::from_constant(tw.one())});
}

inline long operator_order(const DiffOperator& L) {
    for (size_t i = L.c.size(); i-- > 0;)
        if (!L.c[i].is_zero()) return static_cast<long>(i);
    return -1;
}

inline FieldElement apply_operator(const DiffOperator& L, const FieldElement& y) {
    FieldElement acc;
    FieldElement d = y;
    for (size_t i = 0; i < L.c.size(); ++i) {
        if (i > 0) d = d.derive();
        if (!L.c[i].is_zero()) acc = acc + L.c[i] * d;
    }
    return acc;
}

// Operator composition (A compose B)(y) = A(B(y)), via the Leibniz rule
// D^i (b D^j) = sum_k C(i,k) b^(k) D^(i+j-k).
inline DiffOperator compose(const DiffOperator& A, const DiffOperator& B) {
    const ConstantTower* tw = A.tw ? A.tw : B.tw;
    long ra = operator_order(A), rb = operator_order(B);
    DiffOperator R;
    R.tw = tw;
    if (ra < 0 || rb < 0) return R;
    R.c.assign(static_cast<size_t>(ra + rb) + 1, FieldElement());

    // Derivative chains of B's coefficients up to order ra.
    std::vector<std::vector<FieldElement>> bd(static_cast<size_t>(rb) + 1);
    for (long j = 0; j <= rb; ++j) {
        bd[static_cast<size_t>(j)].push_back(B.c[static_cast<size_t>(j)]);
        for (long k = 1; k <= ra; ++k)
            bd[static_cast<size_t>(j)].push_back(bd[static_cast<size_t>(j)].back().derive());
    }

    for (long i = 0; i <= ra; ++i) {
        const FieldElement& ai = A.c[static_cast<size_t>(i)];
        if (ai.is_zero()) continue;
        // Binomial row C(i, k).
        QQ binom = 1;
        for (long k = 0; k <= i; ++k) {
            if (k > 0) binom = binom * QQ(i - k + 1) / QQ(k);
            for (long j = 0; j <= rb; ++j) {
                const FieldElement& bjk = bd[static_cast<size_t>(j)][static_cast<size_t>(k)];
                if (bjk.is_zero()) continue;
                FieldElement term = ai * bjk;
                if (binom != 1) term = term * FieldElement::from_rational(*tw, binom);
                size_t idx = static_cast<size_t>(i + j - k);
                R.c[idx] = R.c[idx] + term;
            }
        }
    }
    return R;
}

// ---------------------------------------------------------------------------
// C-linear spans of rational functions
// ---------------------------------------------------------------------------

namespace detail {

// Write each function as a numerator coefficient vector over the common
// denominator of the whole list; all C-linear questions become vector ones.
struct SpanCoords {
    CPoly common_den;
    std::vector<std::vector<CElem>> rows;  // one per function, equal length
};

inline SpanCoords span_coordinates(const ConstantTower& tw,
                                   const std::vector<FieldElement>& funcs) {
    CField K(&tw);
    PolyOps<CField> P(K);
    SpanCoords sc;
    sc.common_den = P.one();
    for (const auto& f : funcs)
        if (!f.is_zero()) sc.common_den = P.lcm(sc.common_den, f.den());
    size_t width = 0;
    std::vector<CPoly> nums;
    nums.reserve(funcs.size());
    for (const auto& f : funcs) {
        CPoly n;
        if (!f.is_zero()) n = P.mul(f.num(), P.quo(sc.common_den, f.den()));
        width = std::max(width, n.size());
        nums.push_back(std::move(n));
    }
    for (auto& n : nums) {
        n.resize(width, tw.zero());
        sc.rows.push_back(std::move(n));
    }
    return sc;
}

}  // namespace detail

// Canonical basis of the C-span of a list of rational functions (row-reduced
// numerators over the common denominator).
inline std::vector<FieldElement> function_span_basis(const ConstantTower& tw,
                                                     const std::vector<FieldElement>& funcs) {
    CField K(&tw);
    MatOps<CField> M(K);
    auto sc = detail::span_coordinates(tw, funcs);
    if (sc.rows.empty() || sc.rows[0].empty()) return {};
    std::vector<FieldElement> out;
    for (auto& row : M.rref_span(sc.rows))
        out.push_back(FieldElement::from_fraction(tw, CPoly(row.begin(), row.end()),
                                                  sc.common_den));
    return out;
}

// Coordinates of f in the C-span of funcs (in the given order), if f lies in
// that span.  Free coordinates are set to zero, so the answer is canonical.
inline std::optional<std::vector<CElem>> function_span_coords(
    const ConstantTower& tw, const std::vector<FieldElement>& funcs, const FieldElement& f) {
    CField K(&tw);
    MatOps<CField> M(K);
    std::vector<FieldElement> all = funcs;
    all.push_back(f);
    auto sc = detail::span_coordinates(tw, all);
    size_t width = sc.rows[0].size();
    if (width == 0) return std::vector<CElem>(funcs.size(), tw.zero());
    // Columns = funcs, rhs = f.
    Matrix<CElem> A = M.make(width, funcs.size());
    std::vector<CElem> rhs(width, tw.zero());
    for (size_t j = 0; j < funcs.size(); ++j)
        for (size_t i = 0; i < width; ++i) A.at(i, j) = sc.rows[j][i];
    for (size_t i = 0; i < width; ++i) rhs[i] = sc.rows[funcs.size()][i];
    return M.solve(A, rhs);
}

// Monic operator of minimal order annihilating the C-span of the given
// C-linearly independent functions: cofactor expansion of the Wronskian-style
// determinant det(f_1 ... f_s ; y) along the y column.
inline DiffOperator annihilator(const ConstantTower& tw, const std::vector<FieldElement>& f) {
    const size_t s = f.size();
    if (s == 0) throw ParseError("annihilator of an empty family");
    KField K(&tw);
    MatOps<KField> M(K);
    // derivs[d][i] = d-th derivative of f_i, d = 0..s.
    std::vector<std::vector<FieldElement>> derivs(s + 1);
    derivs[0] = f;
    for (size_t d = 1; d <= s; ++d) {
        derivs[d].reserve(s);
        for (size_t i = 0; i < s; ++i) derivs[d].push_back(derivs[d - 1][i].derive());
    }
    // Coefficient of D^j: (-1)^(s+j) * det of the rows {0..s} minus row j.
    std::vector<FieldElement> coeff(s + 1);
    for (size_t j = 0; j <= s; ++j) {
        Matrix<FieldElement> W = M.make(s, s);
        size_t r = 0;
        for (size_t d = 0; d <= s; ++d) {
            if (d == j) continue;
            for (size_t i = 0; i < s; ++i) W.at(r, i) = derivs[d][i];
            ++r;
        }
        FieldElement det = M.det(W);
        coeff[j] = ((s + j) % 2 == 0) ? det : -det;
    }
    if (coeff[s].is_zero())
        throw ParseError("annihilator requires C-independent functions");
    FieldElement leadinv = coeff[s].inv();
    for (auto& cj : coeff) cj = cj * leadinv;
    return make_operator(tw, std::move(coeff));
}

// ---------------------------------------------------------------------------
// Integer roots of polynomials over the constant tower
// ---------------------------------------------------------------------------

namespace detail {

// Falling factorial d(d-1)...(d-k+1) as a rational-coefficient polynomial in
// d (low to high); with flip, the analogue for (-d)(-d-1)...(-d-k+1).
inline std::vector<QQ> falling_factorial_poly(long k, bool flip) {
    std::vector<QQ> p{QQ(1)};
    for (long t = 0; t < k; ++t) {
        // multiply by (d - t) or (-d - t)
        std::vector<QQ> q(p.size() + 1, QQ(0));
        for (size_t i = 0; i < p.size(); ++i) {
            q[i] += p[i] * QQ(-t);
            q[i + 1] += flip ? -p[i] : p[i];
        }
        p = std::move(q);
    }
    return p;
}

inline QQ falling_factorial_value(long t, long k) {
    QQ v = 1;
    for (long j = 0; j < k; ++j) v *= QQ(t - j);
    return v;
}

}  // namespace detail

// Exact integer roots of a nonzero polynomial p (low to high) with
// constant-tower coefficients.  Candidates are proposed by specializing the
// parameters at rational points and applying the rational-root theorem to
// the first nonvanishing coordinate, then every candidate is verified
// symbolically, so the returned roots are exact.  The candidate scan covers
// divisors of magnitude <= 4*cap; roots beyond that band are outside the
// search range (callers compare against their own cap and throw).
inline std::vector<long> integer_roots(const ConstantTower& tw, std::vector<CElem> p,
                                       long cap) {
    while (!p.empty() && p.back().is_zero()) p.pop_back();
    if (p.empty()) throw ParseError("integer roots of the zero polynomial");
    std::vector<long> found;
    size_t low = 0;
    while (low < p.size() && p[low].is_zero()) ++low;
    if (low > 0) found.push_back(0);
    if (p.size() - low <= 1) return found;

    const long band = 4 * cap;
    for (int attempt = 0; attempt < 24; ++attempt) {
        std::vector<QQ> values;
        for (int j = 0; j < tw.num_params(); ++j)
            values.push_back(QQ(5 + 2 * attempt + 3 * j, 1 + (attempt % 2)));
        std::vector<std::vector<QQ>> coords;
        try {
            SpecializedTower sp = tw.specialize(values);
            for (size_t i = low; i < p.size(); ++i)
                coords.push_back(tower_rational_coordinates(tw.map_into(sp, p[i])));
        } catch (const Error&) {
            continue;  // parameter point hit a pole; try another
        }
        // First coordinate slot where the specialized polynomial is nonzero.
        size_t dim = coords[0].size();
        std::vector<QQ> pc;
        for (size_t slot = 0; slot < dim && pc.empty(); ++slot) {
            for (size_t i = 0; i < coords.size(); ++i)
                if (coords[i][slot] != 0) {
                    pc.resize(coords.size());
                    for (size_t t = 0; t < coords.size(); ++t) pc[t] = coords[t][slot];
                    break;
                }
        }
        if (pc.empty()) continue;  // degenerate specialization; try another

        // Clear denominators, strip the specialization's extra low zeros, and
        // read candidates off the trailing integer coefficient.
        mpz_class den_lcm = 1;
        for (const auto& q : pc) den_lcm = lcm(den_lcm, q.get_den());
        std::vector<mpz_class> zp;
        for (const auto& q : pc) {
            QQ cleared = q * QQ(den_lcm);
            zp.push_back(cleared.get_num());
        }
        size_t z0 = 0;
        while (z0 < zp.size() && zp[z0] == 0) ++z0;
        std::vector<long> cands = divisors_within(zp[z0], band);

        for (long d : cands) {
            for (long sgn : {1L, -1L}) {
                long r = sgn * d;
                CElem v = tw.zero();
                CElem xr = tw.integer(r);
                for (size_t i = p.size(); i-- > 0;) v = v * xr + p[i];
                if (v.is_zero()) found.push_back(r);
            }
        }
        std::sort(found.begin(), found.end());
        found.erase(std::unique(found.begin(), found.end()), found.end());
        return found;
    }
    throw CapExceeded("no nondegenerate parameter specialization found for integer-root search");
}

// ---------------------------------------------------------------------------
// Rational solutions (Abramov)
// ---------------------------------------------------------------------------

namespace detail {

// q-adic valuation: largest v with q^v | a, together with a / q^v.
inline std::pair<long, CPoly> valuation_at(const PolyOps<CField>& P, CPoly a, const CPoly& q) {
    long v = 0;
    while (true) {
        auto [quo, rem] = P.divmod(a, q);
        if (!P.is_zero(rem)) return {v, a};
        a = std::move(quo);
        ++v;
    }
}

inline CPoly pow_mod(const PolyOps<CField>& P, CPoly base, long e, const CPoly& mod) {
    CPoly acc = P.one();
    base = P.rem(base, mod);
    while (e > 0) {
        if (e & 1) acc = P.rem(P.mul(acc, base), mod);
        base = P.rem(P.mul(base, base), mod);
        e >>= 1;
    }
    return acc;
}

// Local indicial polynomial of the cleared operator at a squarefree factor q
// of the leading coefficient, as nu-degree -> x-polynomial mod q.  For a
// solution with a pole of order nu at a root alpha of q, each term P_i y^(i)
// has q-adic valuation v_i - i with leading part w_i(alpha) q'(alpha)^i *
// (-nu)(-nu-1)...(-nu-i+1); the total leading part at the minimal valuation
// must vanish, which is IND(nu) = 0 mod the relevant root.
inline std::vector<CPoly> local_indicial(const ConstantTower& tw, const PolyOps<CField>& P,
                                         const std::vector<CPoly>& Pc, const CPoly& q) {
    std::vector<long> val(Pc.size(), 0);
    std::vector<CPoly> wit(Pc.size());
    long mu = 0;
    bool have_mu = false;
    for (size_t i = 0; i < Pc.size(); ++i) {
        if (P.is_zero(Pc[i])) continue;
        auto [v, w] = valuation_at(P, Pc[i], q);
        val[i] = v;
        wit[i] = std::move(w);
        long key = v - static_cast<long>(i);
        if (!have_mu || key < mu) {
            mu = key;
            have_mu = true;
        }
    }
    CPoly qp = P.rem(P.derive(q), q);
    std::vector<CPoly> ind;
    for (size_t i = 0; i < Pc.size(); ++i) {
        if (P.is_zero(Pc[i]) || val[i] - static_cast<long>(i) != mu) continue;
        CPoly base = P.rem(wit[i], q);
        base = P.rem(P.mul(base, pow_mod(P, qp, static_cast<long>(i), q)), q);
        std::vector<QQ> ff = falling_factorial_poly(static_cast<long>(i), /*flip=*/true);
        if (ind.size() < ff.size()) ind.resize(ff.size());
        for (size_t k = 0; k < ff.size(); ++k) {
            if (ff[k] == 0) continue;
            CPoly term = P.mul_scalar(base, tw.rational(ff[k]));
            ind[k] = P.trim(P.add(ind[k], term));
        }
    }
    while (!ind.empty() && P.is_zero(ind.back())) ind.pop_back();
    return ind;
}

}  // namespace detail

// All rational solutions of L(y) = 0 as a canonical C-basis.  Throws
// CapExceeded when a certified pole order or degree bound exceeds
// opts.degree_cap; open-ended searches are capped and flagged in stats.
inline std::vector<FieldElement> rational_solutions(const DiffOperator& L,
                                                    const SolveOptions& opts = {},
                                                    SolveStats* stats = nullptr) {
    const ConstantTower& tw = *L.tw;
    CField K(&tw);
    PolyOps<CField> P(K);
    MatOps<CField> M(K);
    SolveStats local_stats;

    long r = operator_order(L);
    if (r < 0) throw ParseError("rational_solutions of the zero operator");
    if (r == 0) return {};

    // Clear denominators: Pc[i] in C[x].
    CPoly den = P.one();
    for (long i = 0; i <= r; ++i)
        if (!L.c[static_cast<size_t>(i)].is_zero())
            den = P.lcm(den, L.c[static_cast<size_t>(i)].den());
    std::vector<CPoly> Pc(static_cast<size_t>(r) + 1);
    for (long i = 0; i <= r; ++i) {
        const FieldElement& ci = L.c[static_cast<size_t>(i)];
        if (!ci.is_zero()) Pc[static_cast<size_t>(i)] = P.mul(ci.num(), P.quo(den, ci.den()));
    }

    // Universal denominator from the singular factors of the leading
    // coefficient (any pole of a rational solution sits at a root of it).
    CPoly u = P.one();
    if (P.deg(Pc[static_cast<size_t>(r)]) > 0) {
        for (const CPoly& qRaw : P.squarefree_decomposition(Pc[static_cast<size_t>(r)])) {
            if (P.deg(qRaw) <= 0) continue;
            CPoly q = P.monic(qRaw);
            std::vector<CPoly> ind = detail::local_indicial(tw, P, Pc, q);
            if (ind.empty()) {
                // Degenerate local data: every pole order is admissible a
                // priori; fall back to the cap and say so.
                u = P.mul(u, P.pow(q, opts.degree_cap));
                local_stats.indicial_degenerate = true;
                continue;
            }
            if (P.deg(q) == 1) {
                // The quotient C[x]/(q) is C itself: extract IND in C[nu]
                // and take its exact integer roots.
                std::vector<CElem> pnu;
                for (const CPoly& ck : ind) pnu.push_back(ck.empty() ? tw.zero() : ck[0]);
                long e = 0;
                for (long root : integer_roots(tw, pnu, opts.degree_cap))
                    if (root >= 1) e = std::max(e, root);
                if (e > opts.degree_cap)
                    throw CapExceeded("pole order " + std::to_string(e) +
                                      " exceeds the degree cap at a singular point");
                if (e > 0) u = P.mul(u, P.pow(q, e));
            } else {
                // Degree >= 2: exact root extraction would need a resultant
                // over the tower; scan admissible orders downward instead,
                // splitting q as factors claim their largest order.
                CPoly qq = q;
                for (long nu = opts.degree_cap; nu >= 1 && P.deg(qq) > 0; --nu) {
                    CElem nuval = tw.integer(nu);
                    CPoly ev;
                    for (size_t k = ind.size(); k-- > 0;)
                        ev = P.trim(P.add(P.mul_scalar(ev, nuval), ind[k]));
                    ev = P.rem(ev, qq);
                    CPoly g = P.is_zero(ev) ? qq : P.gcd(qq, ev);
                    if (P.deg(g) >= 1) {
                        u = P.mul(u, P.pow(g, nu));
                        qq = P.quo(qq, g);
                    }
                }
                local_stats.denominator_scan_capped = true;
            }
        }
    }

    // Substitute y = z/u and clear denominators again: Cc[k] z^(k) = 0.
    DiffOperator Lu = L;
    if (P.deg(u) > 0) {
        DiffOperator inv_u = make_operator(tw, {FieldElement::from_fraction(tw, P.one(), u)});
        Lu = compose(L, inv_u);
    }
    long ru = operator_order(Lu);
    CPoly uden = P.one();
    for (long k = 0; k <= ru; ++k)
        if (!Lu.c[static_cast<size_t>(k)].is_zero())
            uden = P.lcm(uden, Lu.c[static_cast<size_t>(k)].den());
    std::vector<CPoly> Cc(static_cast<size_t>(ru) + 1);
    for (long k = 0; k <= ru; ++k) {
        const FieldElement& ck = Lu.c[static_cast<size_t>(k)];
        if (!ck.is_zero()) Cc[static_cast<size_t>(k)] = P.mul(ck.num(), P.quo(uden, ck.den()));
    }

    // Degree bound at infinity: for z of degree d the coefficient of
    // x^(d+delta) in Lu(z) is IND_inf(d) * lc(z), so d must be a root.
    long delta = 0;
    bool have_delta = false;
    for (long k = 0; k <= ru; ++k) {
        if (P.is_zero(Cc[static_cast<size_t>(k)])) continue;
        long key = P.deg(Cc[static_cast<size_t>(k)]) - k;
        if (!have_delta || key > delta) {
            delta = key;
            have_delta = true;
        }
    }
    std::vector<CElem> indinf;
    for (long k = 0; k <= ru; ++k) {
        const CPoly& ck = Cc[static_cast<size_t>(k)];
        if (P.is_zero(ck) || P.deg(ck) - k != delta) continue;
        std::vector<QQ> ff = detail::falling_factorial_poly(k, /*flip=*/false);
        if (indinf.size() < ff.size()) indinf.resize(ff.size(), tw.zero());
        for (size_t j = 0; j < ff.size(); ++j)
            if (ff[j] != 0) indinf[j] = indinf[j] + ck.back() * tw.rational(ff[j]);
    }
    long dmax = -1;
    for (long root : integer_roots(tw, indinf, opts.degree_cap))
        if (root >= 0) dmax = std::max(dmax, root);
    if (stats) stats->merge(local_stats);
    if (dmax < 0) return {};
    if (dmax > opts.degree_cap)
        throw CapExceeded("numerator degree bound " + std::to_string(dmax) +
                          " exceeds the degree cap");

    // Undetermined coefficients for z = sum z_t x^t.
    size_t height = 0;
    for (long k = 0; k <= ru; ++k)
        height = std::max(height, Cc[static_cast<size_t>(k)].size());
    height += static_cast<size_t>(dmax);
    Matrix<CElem> A = M.make(height, static_cast<size_t>(dmax) + 1);
    for (long t = 0; t <= dmax; ++t) {
        for (long k = 0; k <= std::min<long>(t, ru); ++k) {
            const CPoly& ck = Cc[static_cast<size_t>(k)];
            if (P.is_zero(ck)) continue;
            QQ ff = detail::falling_factorial_value(t, k);
            if (ff == 0) continue;
            CElem scal = tw.rational(ff);
            for (size_t j = 0; j < ck.size(); ++j) {
                size_t row = static_cast<size_t>(t - k) + j;
                A.at(row, static_cast<size_t>(t)) = A.at(row, static_cast<size_t>(t)) + ck[j] * scal;
            }
        }
    }
    std::vector<FieldElement> out;
    for (const auto& zvec : M.kernel_basis(A)) {
        CPoly z(zvec.begin(), zvec.end());
        out.push_back(FieldElement::from_fraction(tw, std::move(z), u));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parametrized first-order equations  y' = lambda y + sum_i c_i b_i
// ---------------------------------------------------------------------------

// One solution of the parametrized equation: y = g works for the constant
// tuple c.  Tuples with c = 0 are solutions of the homogeneous equation.
struct ParamTuple {
    FieldElement g;
    std::vector<CElem> c;
};

struct FirstOrderFamily {
    std::vector<ParamTuple> genuine;  // c != 0, canonical echelon form in c
    std::vector<ParamTuple> trivial;  // c == 0, canonical basis of hom. solutions
    SolveStats stats;

    size_t s() const { return genuine.size(); }
};

// All rational solutions (g, c) of g' = lambda g + sum c_i b_i with constant
// c, found by annihilating the span of the b_i (Wronskian construction),
// composing with D - lambda, and solving the resulting single operator.  The
// genuine tuples (c != 0) come first, row-reduced on their c-parts; the
// homogeneous solutions that appear along the way are returned as trivial
// tuples.
inline FirstOrderFamily parametrized_first_order(const ConstantTower& tw,
                                                 const FieldElement& lambda,
                                                 const std::vector<FieldElement>& b,
                                                 const SolveOptions& opts = {}) {
    FirstOrderFamily fam;
    std::vector<FieldElement> basis = function_span_basis(tw, b);
    DiffOperator hom = first_order_operator(tw, lambda);

    if (basis.empty()) {
        for (auto& g : rational_solutions(hom, opts, &fam.stats))
            fam.trivial.push_back(ParamTuple{g, std::vector<CElem>(b.size(), tw.zero())});
        return fam;
    }

    DiffOperator L = compose(annihilator(tw, basis), hom);
    std::vector<FieldElement> sols = rational_solutions(L, opts, &fam.stats);

    // Each solution yields a tuple: z = g' - lambda g lies in span(b) because
    // it is a rational solution of the annihilator of that span.
    std::vector<ParamTuple> rows;
    for (const auto& g : sols) {
        FieldElement z = g.derive() - lambda * g;
        auto coords = function_span_coords(tw, b, z);
        if (!coords)
            throw ParseError("internal: inhomogeneity left the span of the right-hand sides");
        rows.push_back(ParamTuple{g, *coords});
    }

    // Row-reduce on the c-parts, applying the same operations to the g's, so
    // the genuine tuples are canonical and the rest are purely homogeneous.
    size_t done = 0;
    for (size_t col = 0; col < b.size() && done < rows.size(); ++col) {
        size_t piv = done;
        while (piv < rows.size() && rows[piv].c[col].is_zero()) ++piv;
        if (piv == rows.size()) continue;
        std::swap(rows[done], rows[piv]);
        CElem inv = rows[done].c[col].inv();
        for (auto& cj : rows[done].c) cj = cj * inv;
        rows[done].g = rows[done].g * FieldElement::from_constant(inv);
        for (size_t i = 0; i < rows.size(); ++i) {
            if (i == done || rows[i].c[col].is_zero()) continue;
            CElem f = rows[i].c[col];
            for (size_t j = 0; j < b.size(); ++j)
                rows[i].c[j] = rows[i].c[j] - f * rows[done].c[j];
            rows[i].g = rows[i].g - FieldElement::from_constant(f) * rows[done].g;
        }
        ++done;
    }
    fam.genuine.assign(rows.begin(), rows.begin() + static_cast<long>(done));
    std::vector<FieldElement> homs;
    for (size_t i = done; i < rows.size(); ++i)
        if (!rows[i].g.is_zero()) homs.push_back(rows[i].g);
    for (auto& g : function_span_basis(tw, homs))
        fam.trivial.push_back(ParamTuple{g, std::vector<CElem>(b.size(), tw.zero())});
    return fam;
}

// Particular rational solution of y' = lambda y + b, if one exists.
inline std::optional<FieldElement> first_order_rational_solution(const ConstantTower& tw,
                                                                 const FieldElement& lambda,
                                                                 const FieldElement& b,
                                                                 const SolveOptions& opts = {}) {
    if (b.is_zero()) return FieldElement::from_constant(tw.zero());
    FirstOrderFamily fam = parametrized_first_order(tw, lambda, {b}, opts);
    for (const auto& t : fam.genuine)
        if (!t.c[0].is_zero()) return t.g * FieldElement::from_constant(t.c[0].inv());
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Rational primitives (Hermite reduction)
// ---------------------------------------------------------------------------

// Antiderivative of f within C(x), if f integrates without logarithms: the
// polynomial part termwise, and each q-block of the partial fraction
// decomposition by Hermite reduction (q squarefree makes gcd(q, q') = 1).
// A nonzero order-1 remainder is a residue, i.e. a log term: no primitive.
inline std::optional<FieldElement> rational_primitive(const ConstantTower& tw,
                                                      const FieldElement& f) {
    CField K(&tw);
    PolyOps<CField> P(K);
    if (f.is_zero()) return FieldElement::from_constant(tw.zero());
    PartialFractions pf = partial_fractions(f);

    CPoly ip(pf.polynomial.size() + 1, tw.zero());
    for (size_t t = 0; t < pf.polynomial.size(); ++t)
        ip[t + 1] = pf.polynomial[t] / tw.integer(static_cast<long>(t) + 1);
    FieldElement F = FieldElement::from_fraction(tw, std::move(ip), P.one());

    // Group the proper terms by their (coprime) squarefree factors.
    for (size_t i = 0; i < pf.terms.size();) {
        const CPoly& q = pf.terms[i].factor;
        int emax = 0;
        std::vector<CPoly> num_at;  // index = power
        size_t j = i;
        for (; j < pf.terms.size() && P.eq(pf.terms[j].factor, q); ++j)
            emax = std::max(emax, pf.terms[j].power);
        num_at.assign(static_cast<size_t>(emax) + 1, CPoly{});
        for (size_t k = i; k < j; ++k)
            num_at[static_cast<size_t>(pf.terms[k].power)] = pf.terms[k].numerator;
        i = j;

        auto [g, s, t] = P.ext_gcd(q, P.derive(q));
        if (P.deg(g) != 0) throw ParseError("internal: squarefree factor with repeated root");
        // n/q^e = d/dx(-a/((e-1) q^(e-1))) + (b + a'/(e-1))/q^(e-1)
        // where n = a q' + b q, deg a < deg q.
        for (int e = emax; e >= 2; --e) {
            CPoly n = num_at[static_cast<size_t>(e)];
            if (P.is_zero(n)) continue;
            CPoly a = P.rem(P.mul(n, t), q);
            CPoly bq = P.quo(P.sub(n, P.mul(a, P.derive(q))), q);
            CElem einv = tw.one() / tw.integer(e - 1);
            F = F + FieldElement::from_fraction(
                        tw, P.mul_scalar(P.neg(a), einv),
                        P.pow(q, e - 1));
            CPoly carry = P.add(bq, P.mul_scalar(P.derive(a), einv));
            num_at[static_cast<size_t>(e - 1)] =
                P.trim(P.add(num_at[static_cast<size_t>(e - 1)], carry));
        }
        if (!P.is_zero(num_at[1])) return std::nullopt;
    }
    if (F.derive() != f) throw ParseError("internal: primitive verification failed");
    return F;
}

}  // namespace redform

#endif  // REDFORM_ODE_HPP
