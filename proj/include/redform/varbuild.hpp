#ifndef REDFORM_VARBUILD_HPP
#define REDFORM_VARBUILD_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "expr.hpp"
#include "matrix.hpp"

namespace redform {

// ---------------------------------------------------------------------------
// Variational builder: Hamiltonian vector fields, particular solutions, the
// variational hierarchy (VE_p) in block-triangular form, symmetric powers and
// the gauge action B = PAP^{-1} + P'P^{-1}.
//
// Convention for the hierarchy (matching the displayed VE^2 / VE^3): with
// eta = sum_k eps^k xi_k, each level closes as
//     xi_k' = sum_{kappa=1}^{k} d^kappa X . [mon_kappa(eta)]_{eps^k}
// where d^kappa X is contracted against degree-kappa monomials with the full
// multinomial weight kappa!/beta! (so the level-3 equation carries the
// coefficient 2 on d^2 X(xi_1, xi_2)).  The state of VE_p stacks the weight-p
// slots [mon_j(eta)]_p for j = p, p-1, ..., 1; Leibniz differentiation of a
// slot yields maps that depend only on the degrees (j, kappa), never on the
// weight, which is what makes the system block-recursive:
//     A_p = [[sym^p(A_1), 0], [S_p, A_{p-1}]].
// ---------------------------------------------------------------------------

using MatrixK = Matrix<FieldElement>;

struct HamiltonianSystem {
    size_t n = 0;                    // degrees of freedom
    MExpr H;                         // Hamiltonian (rational in the phase vars)
    std::vector<std::string> vars;   // q_1..q_n, p_1..p_n
    std::vector<MExpr> X;            // X_H components, ordered qdot then pdot
};

struct ParticularSolution {
    std::vector<FieldElement> phi;   // phi_1..phi_{2n}, functions of x
};

// Phase variables are recognized by name: q<i> / p<i>, 1-based, contiguous.
// Everything else in H must be a constant of the tower (checked at eval).
inline HamiltonianSystem build_vector_field(const MExpr& H) {
    std::set<std::string> syms;
    H.collect_symbols(syms);
    size_t n = 0;
    for (const auto& s : syms) {
        if (s.size() < 2 || (s[0] != 'q' && s[0] != 'p')) continue;
        bool digits = true;
        for (size_t i = 1; i < s.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(s[i]))) digits = false;
        if (!digits) continue;
        size_t idx = std::stoul(s.substr(1));
        if (idx == 0) throw MalformedHamiltonian("phase index 0 in '" + s + "'");
        n = std::max(n, idx);
    }
    if (n == 0) throw MalformedHamiltonian("no phase variables q<i>/p<i> found");

    HamiltonianSystem sys;
    sys.n = n;
    sys.H = H;
    for (size_t i = 1; i <= n; ++i) sys.vars.push_back("q" + std::to_string(i));
    for (size_t i = 1; i <= n; ++i) sys.vars.push_back("p" + std::to_string(i));

    // X_H = J grad H: qdot_i = dH/dp_i, pdot_i = -dH/dq_i.
    for (size_t i = 0; i < n; ++i) sys.X.push_back(H.diff(sys.vars[n + i]));
    for (size_t i = 0; i < n; ++i) sys.X.push_back(-H.diff(sys.vars[i]));
    return sys;
}

namespace detail {

inline std::map<std::string, FieldElement> curve_env(const HamiltonianSystem& sys,
                                                     const ParticularSolution& phi) {
    if (phi.phi.size() != 2 * sys.n)
        throw MalformedHamiltonian("curve has " + std::to_string(phi.phi.size()) +
                                   " components, expected " + std::to_string(2 * sys.n));
    std::map<std::string, FieldElement> env;
    for (size_t i = 0; i < 2 * sys.n; ++i) env[sys.vars[i]] = phi.phi[i];
    return env;
}

}  // namespace detail

// True iff phi' = X_H(phi) componentwise; on failure reports the first
// component where the identity breaks.
inline bool verify_curve(const ConstantTower& tw, const HamiltonianSystem& sys,
                         const ParticularSolution& phi,
                         size_t* witness_component = nullptr) {
    auto env = detail::curve_env(sys, phi);
    for (size_t i = 0; i < 2 * sys.n; ++i) {
        FieldElement resid = phi.phi[i].derive() - sys.X[i].eval(tw, env);
        if (!resid.is_zero()) {
            if (witness_component) *witness_component = i;
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Monomial bookkeeping.  Exponent vectors over `dim` variables, degree p,
// ordered graded-lexicographically with variable 1 heaviest:
//   dim 2, p 2  ->  (2,0), (1,1), (0,2).
// ---------------------------------------------------------------------------

using ExpVec = std::vector<int>;

inline std::vector<ExpVec> monomials(size_t dim, int degree) {
    std::vector<ExpVec> out;
    ExpVec cur(dim, 0);
    // Recursive descent in lex order: place the largest remaining exponent on
    // the earliest variable first.
    auto rec = [&](auto&& self, size_t pos, int rem) -> void {
        if (pos + 1 == dim) {
            cur[pos] = rem;
            out.push_back(cur);
            return;
        }
        for (int e = rem; e >= 0; --e) {
            cur[pos] = e;
            self(self, pos + 1, rem - e);
        }
    };
    if (dim == 0) return out;
    rec(rec, 0, degree);
    return out;
}

inline size_t monomial_count(size_t dim, int degree) {
    // C(dim + degree - 1, degree)
    size_t num = 1, den = 1;
    for (int i = 0; i < degree; ++i) {
        num *= dim + static_cast<size_t>(degree) - 1 - static_cast<size_t>(i);
        den *= static_cast<size_t>(i) + 1;
    }
    return num / den;
}

namespace detail {

struct ExpVecLess {
    bool operator()(const ExpVec& a, const ExpVec& b) const { return a < b; }
};

inline std::map<ExpVec, size_t, ExpVecLess> monomial_index(const std::vector<ExpVec>& basis) {
    std::map<ExpVec, size_t, ExpVecLess> ix;
    for (size_t t = 0; t < basis.size(); ++t) ix[basis[t]] = t;
    return ix;
}

}  // namespace detail

// d_p = sum_{i=1}^{p} C(2n + i - 1, 2n - 1): total size of the VE_p state.
inline size_t lve_dimension(size_t two_n, int p) {
    size_t d = 0;
    for (int j = 1; j <= p; ++j) d += monomial_count(two_n, j);
    return d;
}

// ---------------------------------------------------------------------------
// The 2n x 2n first variational matrix A_1 = d_phi X_H.
// ---------------------------------------------------------------------------

inline MatrixK first_variational(const ConstantTower& tw, const HamiltonianSystem& sys,
                                 const ParticularSolution& phi) {
    auto env = detail::curve_env(sys, phi);
    KField K(&tw);
    MatOps<KField> M(K);
    MatrixK A = M.make(2 * sys.n, 2 * sys.n);
    for (size_t i = 0; i < 2 * sys.n; ++i)
        for (size_t j = 0; j < 2 * sys.n; ++j)
            A.at(i, j) = sys.X[i].diff(sys.vars[j]).eval(tw, env);
    return A;
}

// ---------------------------------------------------------------------------
// Symmetric powers.  sym_power(A, p) is the derivation induced on degree-p
// monomials by u' = A u:  (u^beta)' = sum_{i,j} beta_i A_ij u^{beta - e_i + e_j}.
// sym_power_gauge(P, p) is the substitution map u^beta -> (P u)^beta.
// The row loop is the data-parallel kernel; the serial variant is the
// reference the equality tests pin the parallel one against.
// ---------------------------------------------------------------------------

namespace detail {

// Fills row t of the symmetric-power derivation:
//   (u^beta)' = sum_{i,j} beta_i A_ij u^{beta - e_i + e_j},  beta = basis[t].
template <class F>
void sym_power_row(const MatOps<F>& M, const Matrix<typename F::Elem>& A,
                   const std::vector<ExpVec>& basis,
                   const std::map<ExpVec, size_t, ExpVecLess>& ix,
                   Matrix<typename F::Elem>& out, size_t t) {
    const auto& K = M.field();
    const ExpVec& beta = basis[t];
    const size_t dim = beta.size();
    for (size_t i = 0; i < dim; ++i) {
        if (beta[i] == 0) continue;
        typename F::Elem bi = K.zero();
        for (int c = 0; c < beta[i]; ++c) bi = K.add(bi, K.one());
        for (size_t j = 0; j < dim; ++j) {
            if (K.is_zero(A.at(i, j))) continue;
            ExpVec target = beta;
            --target[i];
            ++target[j];
            size_t c = ix.at(target);
            out.at(t, c) = K.add(out.at(t, c), K.mul(bi, A.at(i, j)));
        }
    }
}

// Fills row t of the substitution map:  mon_p(P u)_beta = (P u)^beta expanded
// over u-monomials, beta = basis[t].
template <class F>
void sym_gauge_row(const MatOps<F>& M, const Matrix<typename F::Elem>& P,
                   const std::vector<ExpVec>& basis,
                   const std::map<ExpVec, size_t, ExpVecLess>& ix,
                   Matrix<typename F::Elem>& out, size_t t) {
    const auto& K = M.field();
    const ExpVec& beta = basis[t];
    const size_t dim = beta.size();
    // Expand prod_i (P u)_i^{beta_i} as a polynomial in u.
    std::map<ExpVec, typename F::Elem, ExpVecLess> poly;
    poly[ExpVec(dim, 0)] = K.one();
    for (size_t i = 0; i < dim; ++i) {
        for (int c = 0; c < beta[i]; ++c) {
            std::map<ExpVec, typename F::Elem, ExpVecLess> next;
            for (const auto& [mono, coef] : poly) {
                for (size_t j = 0; j < dim; ++j) {
                    if (K.is_zero(P.at(i, j))) continue;
                    ExpVec m2 = mono;
                    ++m2[j];
                    auto it = next.find(m2);
                    typename F::Elem add = K.mul(coef, P.at(i, j));
                    if (it == next.end())
                        next.emplace(std::move(m2), std::move(add));
                    else
                        it->second = K.add(it->second, add);
                }
            }
            poly = std::move(next);
        }
    }
    for (const auto& [mono, coef] : poly)
        if (!K.is_zero(coef)) out.at(t, ix.at(mono)) = coef;
}

}  // namespace detail

template <class F>
Matrix<typename F::Elem> sym_power_serial(const MatOps<F>& M,
                                          const Matrix<typename F::Elem>& A, int p) {
    auto basis = monomials(A.rows, p);
    auto ix = detail::monomial_index(basis);
    auto out = M.make(basis.size(), basis.size());
    for (size_t t = 0; t < basis.size(); ++t)
        detail::sym_power_row(M, A, basis, ix, out, t);
    return out;
}

template <class F>
Matrix<typename F::Elem> sym_power(const MatOps<F>& M, const Matrix<typename F::Elem>& A,
                                   int p) {
    auto basis = monomials(A.rows, p);
    auto ix = detail::monomial_index(basis);
    auto out = M.make(basis.size(), basis.size());
#ifdef _OPENMP
    const long nb = static_cast<long>(basis.size());
#pragma omp parallel for schedule(dynamic)
    for (long t = 0; t < nb; ++t)
        detail::sym_power_row(M, A, basis, ix, out, static_cast<size_t>(t));
#else
    for (size_t t = 0; t < basis.size(); ++t)
        detail::sym_power_row(M, A, basis, ix, out, t);
#endif
    return out;
}

template <class F>
Matrix<typename F::Elem> sym_power_gauge_serial(const MatOps<F>& M,
                                                const Matrix<typename F::Elem>& P, int p) {
    if (M.field().is_zero(M.det(P))) throw SingularGauge("sym_power_gauge");
    auto basis = monomials(P.rows, p);
    auto ix = detail::monomial_index(basis);
    auto out = M.make(basis.size(), basis.size());
    for (size_t t = 0; t < basis.size(); ++t)
        detail::sym_gauge_row(M, P, basis, ix, out, t);
    return out;
}

template <class F>
Matrix<typename F::Elem> sym_power_gauge(const MatOps<F>& M,
                                         const Matrix<typename F::Elem>& P, int p) {
    if (M.field().is_zero(M.det(P))) throw SingularGauge("sym_power_gauge");
    auto basis = monomials(P.rows, p);
    auto ix = detail::monomial_index(basis);
    auto out = M.make(basis.size(), basis.size());
#ifdef _OPENMP
    const long nb = static_cast<long>(basis.size());
#pragma omp parallel for schedule(dynamic)
    for (long t = 0; t < nb; ++t)
        detail::sym_gauge_row(M, P, basis, ix, out, static_cast<size_t>(t));
#else
    for (size_t t = 0; t < basis.size(); ++t)
        detail::sym_gauge_row(M, P, basis, ix, out, t);
#endif
    return out;
}

// ---------------------------------------------------------------------------
// Gauge action B = P A P^{-1} + P' P^{-1} on K-matrices.
// ---------------------------------------------------------------------------

inline MatrixK derive_matrix(const MatrixK& A) {
    MatrixK d = A;
    for (auto& e : d.a) e = e.derive();
    return d;
}

inline MatrixK gauge_apply(const ConstantTower& tw, const MatrixK& P, const MatrixK& A) {
    KField K(&tw);
    MatOps<KField> M(K);
    auto Pi = M.inverse(P);
    if (!Pi) throw SingularGauge("gauge_apply");
    return M.add(M.mul(M.mul(P, A), *Pi), M.mul(derive_matrix(P), *Pi));
}

// Variant reusing a precomputed inverse (the reducer's hot path, where the
// inverse of I - G is I + G and inverting again would be wasteful).
inline MatrixK gauge_apply_with_inverse(const ConstantTower& tw, const MatrixK& P,
                                        const MatrixK& Pinv, const MatrixK& A) {
    KField K(&tw);
    MatOps<KField> M(K);
    if (!M.eq(M.mul(P, Pinv), M.identity(P.rows))) throw SingularGauge("stale inverse");
    return M.add(M.mul(M.mul(P, A), Pinv), M.mul(derive_matrix(P), Pinv));
}

// ---------------------------------------------------------------------------
// The variational hierarchy VE_p as a block lower-triangular system.
// ---------------------------------------------------------------------------

struct BlockSystem {
    int order = 1;
    MatrixK matrix;                   // d_p x d_p
    std::vector<size_t> slot_sizes;   // sizes of the degree-p, ..., degree-1 slots
    std::vector<size_t> slot_offsets; // row/col offset of each slot
};

namespace detail {

// Multilinear derivative tensor of order kappa along the curve, with the
// multinomial normalization T[i, beta] = (kappa!/beta!) d^beta X_i (phi):
// contracting T against mon_kappa(u) gives d^kappa X(u, ..., u).
struct DerivativeTensors {
    std::vector<std::vector<ExpVec>> bases;           // bases[k] = monomials of degree k
    std::vector<Matrix<FieldElement>> T;              // T[k]: 2n x |bases[k]|
};

inline DerivativeTensors derivative_tensors(const ConstantTower& tw,
                                            const HamiltonianSystem& sys,
                                            const ParticularSolution& phi, int pmax) {
    auto env = curve_env(sys, phi);
    const size_t dim = 2 * sys.n;
    KField K(&tw);
    MatOps<KField> M(K);

    DerivativeTensors out;
    out.bases.resize(pmax + 1);
    out.T.resize(pmax + 1);

    // Partial derivatives d^beta X_i by extending from degree k-1 parents:
    // diff the parent whose trailing variables beyond beta's first nonzero
    // slot are untouched, so each exponent vector is produced exactly once.
    std::map<ExpVec, std::vector<MExpr>, ExpVecLess> derivs;
    derivs[ExpVec(dim, 0)] = sys.X;
    for (int k = 1; k <= pmax; ++k) {
        out.bases[k] = monomials(dim, k);
        for (const auto& beta : out.bases[k]) {
            size_t first = 0;
            while (beta[first] == 0) ++first;
            ExpVec parent = beta;
            --parent[first];
            const auto& pd = derivs.at(parent);
            std::vector<MExpr> cur;
            cur.reserve(dim);
            for (size_t i = 0; i < dim; ++i) cur.push_back(pd[i].diff(sys.vars[first]));
            derivs.emplace(beta, std::move(cur));
        }
    }

    for (int k = 1; k <= pmax; ++k) {
        const auto& basis = out.bases[k];
        out.T[k] = M.make(dim, basis.size());
        for (size_t t = 0; t < basis.size(); ++t) {
            const ExpVec& beta = basis[t];
            // multinomial kappa!/beta!
            QQ mult(1);
            for (long f = 2; f <= k; ++f) mult *= QQ(f);
            for (int e : beta)
                for (long f = 2; f <= e; ++f) mult /= QQ(f);
            FieldElement mke = FieldElement::from_rational(tw, mult);
            const auto& pd = derivs.at(beta);
            for (size_t i = 0; i < dim; ++i) {
                FieldElement v = pd[i].eval(tw, env);
                if (!v.is_zero()) out.T[k].at(i, t) = mke * v;
            }
        }
    }
    return out;
}

// Slot map S_{j,kappa}: degree-(j-1+kappa) monomials -> degree-j monomials,
// from Leibniz differentiation of u^alpha with one factor replaced by the
// kappa-th Taylor term:  S[alpha, delta] = sum_i alpha_i T[kappa][i, delta - alpha + e_i].
inline MatrixK slot_map(const ConstantTower& tw, const DerivativeTensors& dt, size_t dim,
                        int j, int kappa) {
    KField K(&tw);
    MatOps<KField> M(K);
    auto rows = monomials(dim, j);
    auto cols = monomials(dim, j - 1 + kappa);
    auto colix = monomial_index(dt.bases[kappa]);
    MatrixK S = M.make(rows.size(), cols.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        const ExpVec& alpha = rows[r];
        for (size_t c = 0; c < cols.size(); ++c) {
            const ExpVec& delta = cols[c];
            FieldElement acc;
            for (size_t i = 0; i < dim; ++i) {
                if (alpha[i] == 0) continue;
                ExpVec gamma = delta;
                bool ok = true;
                for (size_t v = 0; v < dim; ++v) {
                    gamma[v] -= alpha[v];
                    if (v == i) ++gamma[v];
                    if (gamma[v] < 0) ok = false;
                }
                if (!ok) continue;
                const FieldElement& tv = dt.T[kappa].at(i, colix.at(gamma));
                if (tv.is_zero()) continue;
                acc = acc + FieldElement::from_rational(tw, QQ(alpha[i])) * tv;
            }
            if (!acc.is_zero()) S.at(r, c) = acc;
        }
    }
    return S;
}

}  // namespace detail

inline BlockSystem build_lve(const ConstantTower& tw, const HamiltonianSystem& sys,
                             const ParticularSolution& phi, int p,
                             const BlockSystem* lower_data = nullptr) {
    if (p < 1) throw MalformedHamiltonian("variational order must be >= 1");
    const size_t dim = 2 * sys.n;
    KField K(&tw);
    MatOps<KField> M(K);

    BlockSystem out;
    out.order = p;
    if (p == 1) {
        out.matrix = first_variational(tw, sys, phi);
        out.slot_sizes = {dim};
        out.slot_offsets = {0};
        return out;
    }

    BlockSystem lower;
    if (lower_data) {
        if (lower_data->order != p - 1)
            throw MalformedHamiltonian("lower_data has order " +
                                       std::to_string(lower_data->order) + ", expected " +
                                       std::to_string(p - 1));
        lower = *lower_data;
    } else {
        lower = build_lve(tw, sys, phi, p - 1);
    }

    const size_t top = monomial_count(dim, p);
    const size_t d = top + lower.matrix.rows;
    out.matrix = M.make(d, d);
    out.slot_sizes.push_back(top);
    out.slot_offsets.push_back(0);
    for (size_t s = 0; s < lower.slot_sizes.size(); ++s) {
        out.slot_sizes.push_back(lower.slot_sizes[s]);
        out.slot_offsets.push_back(top + lower.slot_offsets[s]);
    }

    MatrixK A1 = (lower.order == 1)
                     ? lower.matrix
                     : M.block(lower.matrix, lower.matrix.rows - dim,
                               lower.matrix.cols - dim, dim, dim);
    M.set_block(out.matrix, 0, 0, sym_power(M, A1, p));
    M.set_block(out.matrix, top, top, lower.matrix);

    // The new forcing column: slot j receives S_{j, p-j+1} . mon_p(xi_1).
    auto dt = detail::derivative_tensors(tw, sys, phi, p);
    size_t row0 = top;
    for (int j = p - 1; j >= 1; --j) {
        MatrixK S = detail::slot_map(tw, dt, dim, j, p - j + 1);
        M.set_block(out.matrix, row0, 0, S);
        row0 += S.rows;
    }
    return out;
}

}  // namespace redform

#endif  // REDFORM_VARBUILD_HPP
