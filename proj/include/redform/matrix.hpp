#ifndef REDFORM_MATRIX_HPP
#define REDFORM_MATRIX_HPP

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "field.hpp"

namespace redform {

// Dense matrix over an arbitrary exact coefficient type.
template <class E>
struct Matrix {
    size_t rows = 0, cols = 0;
    std::vector<E> a;

    Matrix() = default;
    Matrix(size_t r, size_t c, const E& fill) : rows(r), cols(c), a(r * c, fill) {}

    E& at(size_t i, size_t j) { return a[i * cols + j]; }
    const E& at(size_t i, size_t j) const { return a[i * cols + j]; }
};

// Exact linear algebra over a field context F (same protocol as PolyOps).
// The multiplication kernel is OpenMP-parallel over output rows; mul_serial
// is the reference implementation the tests compare against.
template <class F>
class MatOps {
 public:
    using E = typename F::Elem;
    using Mat = Matrix<E>;
    using Vec = std::vector<E>;

    explicit MatOps(const F& field) : K(field) {}
    const F& field() const { return K; }

    Mat make(size_t r, size_t c) const { return Mat(r, c, K.zero()); }
    Mat identity(size_t n) const {
        Mat m = make(n, n);
        for (size_t i = 0; i < n; ++i) m.at(i, i) = K.one();
        return m;
    }

    bool eq(const Mat& x, const Mat& y) const {
        if (x.rows != y.rows || x.cols != y.cols) return false;
        for (size_t i = 0; i < x.a.size(); ++i)
            if (!K.eq(x.a[i], y.a[i])) return false;
        return true;
    }
    bool is_zero(const Mat& x) const {
        for (const auto& e : x.a)
            if (!K.is_zero(e)) return false;
        return true;
    }

    Mat add(const Mat& x, const Mat& y) const {
        Mat r = x;
        for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = K.add(r.a[i], y.a[i]);
        return r;
    }
    Mat sub(const Mat& x, const Mat& y) const {
        Mat r = x;
        for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = K.sub(r.a[i], y.a[i]);
        return r;
    }
    Mat neg(const Mat& x) const {
        Mat r = x;
        for (auto& e : r.a) e = K.neg(e);
        return r;
    }
    Mat scalar_mul(const E& c, const Mat& x) const {
        Mat r = x;
        for (auto& e : r.a) e = K.mul(c, e);
        return r;
    }

    Mat mul_serial(const Mat& x, const Mat& y) const {
        Mat r = make(x.rows, y.cols);
        for (size_t i = 0; i < x.rows; ++i) mul_row(x, y, r, i);
        return r;
    }

    Mat mul(const Mat& x, const Mat& y) const {
#ifdef _OPENMP
        Mat r = make(x.rows, y.cols);
        const long n = static_cast<long>(x.rows);
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < n; ++i) mul_row(x, y, r, static_cast<size_t>(i));
        return r;
#else
        return mul_serial(x, y);
#endif
    }

    Vec mul_vec(const Mat& x, const Vec& v) const {
        Vec r(x.rows, K.zero());
        for (size_t i = 0; i < x.rows; ++i) {
            E acc = K.zero();
            for (size_t j = 0; j < x.cols; ++j) {
                if (K.is_zero(x.at(i, j)) || K.is_zero(v[j])) continue;
                acc = K.add(acc, K.mul(x.at(i, j), v[j]));
            }
            r[i] = std::move(acc);
        }
        return r;
    }

    Mat commutator(const Mat& x, const Mat& y) const { return sub(mul(x, y), mul(y, x)); }

    Mat transpose(const Mat& x) const {
        Mat r = make(x.cols, x.rows);
        for (size_t i = 0; i < x.rows; ++i)
            for (size_t j = 0; j < x.cols; ++j) r.at(j, i) = x.at(i, j);
        return r;
    }

    Mat block(const Mat& x, size_t i0, size_t j0, size_t r, size_t c) const {
        Mat out = make(r, c);
        for (size_t i = 0; i < r; ++i)
            for (size_t j = 0; j < c; ++j) out.at(i, j) = x.at(i0 + i, j0 + j);
        return out;
    }
    void set_block(Mat& x, size_t i0, size_t j0, const Mat& b) const {
        for (size_t i = 0; i < b.rows; ++i)
            for (size_t j = 0; j < b.cols; ++j) x.at(i0 + i, j0 + j) = b.at(i, j);
    }

    // Reduced row echelon form in place; returns the pivot columns.
    // Deterministic: leftmost pivot column, topmost nonzero row.
    std::vector<size_t> rref(Mat& m) const {
        std::vector<size_t> pivots;
        size_t r = 0;
        for (size_t c = 0; c < m.cols && r < m.rows; ++c) {
            size_t p = r;
            while (p < m.rows && K.is_zero(m.at(p, c))) ++p;
            if (p == m.rows) continue;
            if (p != r)
                for (size_t j = 0; j < m.cols; ++j) std::swap(m.at(p, j), m.at(r, j));
            E li = K.inv(m.at(r, c));
            for (size_t j = c; j < m.cols; ++j) m.at(r, j) = K.mul(li, m.at(r, j));
            for (size_t i = 0; i < m.rows; ++i) {
                if (i == r || K.is_zero(m.at(i, c))) continue;
                E f = m.at(i, c);
                for (size_t j = c; j < m.cols; ++j)
                    m.at(i, j) = K.sub(m.at(i, j), K.mul(f, m.at(r, j)));
            }
            pivots.push_back(c);
            ++r;
        }
        return pivots;
    }

    size_t rank(Mat m) const { return rref(m).size(); }

    E det(Mat m) const {
        if (m.rows != m.cols) throw ParseError("determinant of a non-square matrix");
        E d = K.one();
        for (size_t c = 0; c < m.cols; ++c) {
            size_t p = c;
            while (p < m.rows && K.is_zero(m.at(p, c))) ++p;
            if (p == m.rows) return K.zero();
            if (p != c) {
                for (size_t j = c; j < m.cols; ++j) std::swap(m.at(p, j), m.at(c, j));
                d = K.neg(d);
            }
            d = K.mul(d, m.at(c, c));
            E li = K.inv(m.at(c, c));
            for (size_t i = c + 1; i < m.rows; ++i) {
                if (K.is_zero(m.at(i, c))) continue;
                E f = K.mul(li, m.at(i, c));
                for (size_t j = c; j < m.cols; ++j)
                    m.at(i, j) = K.sub(m.at(i, j), K.mul(f, m.at(c, j)));
            }
        }
        return d;
    }

    // Canonical basis of the right kernel, ordered by free column index.
    std::vector<Vec> kernel_basis(Mat m) const {
        std::vector<size_t> piv = rref(m);
        std::vector<bool> is_piv(m.cols, false);
        for (size_t c : piv) is_piv[c] = true;
        std::vector<Vec> out;
        for (size_t c = 0; c < m.cols; ++c) {
            if (is_piv[c]) continue;
            Vec v(m.cols, K.zero());
            v[c] = K.one();
            for (size_t r = 0; r < piv.size(); ++r) v[piv[r]] = K.neg(m.at(r, c));
            out.push_back(std::move(v));
        }
        return out;
    }

    // One solution of A x = b (free variables set to zero), if consistent.
    std::optional<Vec> solve(const Mat& A, const Vec& b) const {
        Mat aug = make(A.rows, A.cols + 1);
        for (size_t i = 0; i < A.rows; ++i) {
            for (size_t j = 0; j < A.cols; ++j) aug.at(i, j) = A.at(i, j);
            aug.at(i, A.cols) = b[i];
        }
        std::vector<size_t> piv = rref(aug);
        if (!piv.empty() && piv.back() == A.cols) return std::nullopt;
        Vec x(A.cols, K.zero());
        for (size_t r = 0; r < piv.size(); ++r) x[piv[r]] = aug.at(r, A.cols);
        return x;
    }

    std::optional<Mat> inverse(const Mat& A) const {
        Mat aug = make(A.rows, 2 * A.cols);
        for (size_t i = 0; i < A.rows; ++i) {
            for (size_t j = 0; j < A.cols; ++j) aug.at(i, j) = A.at(i, j);
            aug.at(i, A.cols + i) = K.one();
        }
        std::vector<size_t> piv = rref(aug);
        if (piv.size() != A.rows) return std::nullopt;
        for (size_t r = 0; r < piv.size(); ++r)
            if (piv[r] != r) return std::nullopt;
        return block(aug, 0, A.cols, A.rows, A.cols);
    }

    // Characteristic polynomial (monic, low-to-high coefficients) by the
    // Faddeev-LeVerrier recurrence; needs characteristic zero.
    std::vector<E> charpoly(const Mat& M) const {
        const size_t n = M.rows;
        std::vector<E> c(n + 1, K.zero());
        c[n] = K.one();
        Mat Mk = make(n, n);  // zero; step computes M*(Mk + c_k I)
        for (size_t k = 1; k <= n; ++k) {
            Mat t = Mk;
            for (size_t i = 0; i < n; ++i)
                t.at(i, i) = K.add(t.at(i, i), c[n - k + 1]);
            Mk = mul(M, t);
            E tr = K.zero();
            for (size_t i = 0; i < n; ++i) tr = K.add(tr, Mk.at(i, i));
            E kk = K.one();
            for (size_t j = 1; j < k; ++j) kk = K.add(kk, K.one());
            c[n - k] = K.neg(K.mul(tr, K.inv(kk)));
        }
        return c;
    }

    // Minimal polynomial via per-vector Krylov annihilators and their lcm.
    std::vector<E> minimal_polynomial(const Mat& M) const {
        const size_t n = M.rows;
        PolyOps<F> P(K);
        std::vector<E> L = P.one();
        for (size_t s = 0; s < n; ++s) {
            if (P.deg(L) == static_cast<long>(n)) break;
            Vec e(n, K.zero());
            e[s] = K.one();
            // Skip vectors already annihilated by the current lcm.
            if (vec_is_zero(apply_poly(M, L, e))) continue;
            std::vector<E> p = krylov_annihilator(M, e);
            L = P.lcm(L, p);
        }
        return L;
    }

    // p(M) v for a polynomial p (low-to-high), via Horner on vectors.
    Vec apply_poly(const Mat& M, const std::vector<E>& p, const Vec& v) const {
        Vec acc(v.size(), K.zero());
        for (size_t i = p.size(); i-- > 0;) {
            acc = mul_vec(M, acc);
            for (size_t j = 0; j < v.size(); ++j)
                acc[j] = K.add(acc[j], K.mul(p[i], v[j]));
        }
        return acc;
    }

    bool vec_is_zero(const Vec& v) const {
        for (const auto& e : v)
            if (!K.is_zero(e)) return false;
        return true;
    }

    // --- canonical vector-space utilities (RREF row spans) ---

    // Canonical basis (RREF rows) of the span of the given vectors.
    std::vector<Vec> rref_span(const std::vector<Vec>& vecs) const {
        if (vecs.empty()) return {};
        Mat m = make(vecs.size(), vecs[0].size());
        for (size_t i = 0; i < vecs.size(); ++i)
            for (size_t j = 0; j < vecs[i].size(); ++j) m.at(i, j) = vecs[i][j];
        size_t rk = rref(m).size();
        std::vector<Vec> out;
        out.reserve(rk);
        for (size_t i = 0; i < rk; ++i) {
            Vec v(m.cols, K.zero());
            for (size_t j = 0; j < m.cols; ++j) v[j] = m.at(i, j);
            out.push_back(std::move(v));
        }
        return out;
    }

    bool in_span(const std::vector<Vec>& basis, const Vec& v) const {
        Vec w = v;
        reduce_against(basis, w);
        return vec_is_zero(w);
    }

    // Reduce v against RREF rows in place (basis rows must be in RREF).
    void reduce_against(const std::vector<Vec>& basis, Vec& v) const {
        for (const auto& row : basis) {
            size_t lead = 0;
            while (lead < row.size() && K.is_zero(row[lead])) ++lead;
            if (lead == row.size() || K.is_zero(v[lead])) continue;
            E f = v[lead];
            for (size_t j = lead; j < v.size(); ++j)
                v[j] = K.sub(v[j], K.mul(f, row[j]));
        }
    }

    // Coordinates of v in the given (not necessarily RREF) basis, if any.
    std::optional<Vec> coords_in_basis(const std::vector<Vec>& basis, const Vec& v) const {
        if (basis.empty()) return std::nullopt;
        Mat m = make(v.size(), basis.size());
        for (size_t j = 0; j < basis.size(); ++j)
            for (size_t i = 0; i < v.size(); ++i) m.at(i, j) = basis[j][i];
        return solve(m, v);
    }

 private:
    size_t lead_of(const Vec& v) const {
        size_t l = 0;
        while (l < v.size() && K.is_zero(v[l])) ++l;
        return l;
    }

    // Minimal monic p with p(M) e = 0: reduce the Krylov sequence e, Me, ...
    // into echelon form while tracking combinations; the first dependence is
    // the annihilator (monic by construction).
    std::vector<E> krylov_annihilator(const Mat& M, const Vec& e) const {
        const size_t n = M.rows;
        std::vector<Vec> reds, combos;
        Vec cur = e;
        for (size_t step = 0; step <= n; ++step) {
            Vec red = cur;
            Vec combo(n + 1, K.zero());
            combo[step] = K.one();
            for (;;) {
                size_t l = lead_of(red);
                if (l == red.size()) break;
                size_t hit = reds.size();
                for (size_t t = 0; t < reds.size(); ++t)
                    if (lead_of(reds[t]) == l) {
                        hit = t;
                        break;
                    }
                if (hit == reds.size()) break;
                E f = K.mul(red[l], K.inv(reds[hit][l]));
                for (size_t j = l; j < red.size(); ++j)
                    red[j] = K.sub(red[j], K.mul(f, reds[hit][j]));
                for (size_t j = 0; j <= step; ++j)
                    combo[j] = K.sub(combo[j], K.mul(f, combos[hit][j]));
            }
            if (vec_is_zero(red))
                return std::vector<E>(combo.begin(),
                                      combo.begin() + static_cast<long>(step) + 1);
            reds.push_back(std::move(red));
            combos.push_back(std::move(combo));
            cur = mul_vec(M, cur);
        }
        throw ParseError("internal: Krylov sequence did not terminate");
    }

    void mul_row(const Mat& x, const Mat& y, Mat& r, size_t i) const {
        for (size_t k = 0; k < x.cols; ++k) {
            const E& xi = x.at(i, k);
            if (K.is_zero(xi)) continue;
            for (size_t j = 0; j < y.cols; ++j) {
                const E& yj = y.at(k, j);
                if (K.is_zero(yj)) continue;
                r.at(i, j) = K.add(r.at(i, j), K.mul(xi, yj));
            }
        }
    }

    F K;
};

// ---------------------------------------------------------------------------
// Joint generalized eigenspaces of a family of pairwise-commuting constant
// maps Psi = sum_i g_i(x) Psi_i.  Eigenvalue candidates come from the caller
// (in the intended pipeline: differences of diagonal entries of the reduced
// diagonal, per the remark after Lemma 3) and are verified by kernel
// computations; missing eigenvalues are recovered from linear factors of the
// residual minimal polynomial, and any higher-degree residual is reported as
// EigenvalueOutsideTower so the user can extend the tower and rerun.
// ---------------------------------------------------------------------------

struct FlagSpace {
    FieldElement lambda;                          // sum_i g_i mu_i, in k
    std::vector<CElem> mu;                        // per-map constant eigenvalues
    // levels[l] = canonical basis of E^{(l+1)}; cumulative, so the last level
    // spans the whole joint generalized eigenspace.
    std::vector<std::vector<std::vector<CElem>>> levels;
};

struct AdjointDecomposition {
    std::vector<FieldElement> weights;            // g_i
    std::vector<Matrix<CElem>> maps;              // Psi_i in the ambient basis
    std::vector<FlagSpace> spaces;
};

namespace detail {

// All eigenvalues of M found from `candidates` plus linear residual factors,
// each with its generalized kernel (cumulative kernel chain of (M - mu)^l).
struct EigenData {
    CElem mu;
    std::vector<std::vector<std::vector<CElem>>> chain;  // chain[l] = basis of ker (M-mu)^{l+1}
};

inline std::vector<EigenData> constant_eigendata(const ConstantTower& tw,
                                                 const Matrix<CElem>& M,
                                                 std::vector<CElem> candidates) {
    CField K(&tw);
    MatOps<CField> ops(K);
    const size_t n = M.rows;
    candidates.push_back(tw.zero());

    std::vector<EigenData> out;
    std::vector<CElem> seen;
    size_t total = 0;
    auto try_mu = [&](const CElem& mu) {
        for (const auto& s : seen)
            if (s == mu) return;
        seen.push_back(mu);
        Matrix<CElem> D = M;
        for (size_t i = 0; i < n; ++i) D.at(i, i) = D.at(i, i) - mu;
        EigenData ed;
        ed.mu = mu;
        Matrix<CElem> Dp = ops.identity(n);
        size_t prev = 0;
        for (size_t l = 0; l < n; ++l) {
            Dp = ops.mul(Dp, D);
            auto ker = ops.kernel_basis(Dp);
            if (ker.size() == prev) break;
            ed.chain.push_back(ops.rref_span(ker));
            prev = ker.size();
        }
        if (!ed.chain.empty()) {
            total += ed.chain.back().size();
            out.push_back(std::move(ed));
        }
    };
    for (const auto& mu : candidates) try_mu(mu);

    if (total < n) {
        // Residual factor of the minimal polynomial after peeling the
        // verified eigenvalues; its linear factors yield in-tower roots.
        PolyOps<CField> P(K);
        CPoly f = ops.minimal_polynomial(M);
        for (const auto& ed : out) {
            CPoly lin = {-(ed.mu), tw.one()};
            for (size_t l = 0; l < ed.chain.size(); ++l) {
                auto [q, r] = P.divmod(f, lin);
                if (!P.is_zero(r)) break;  // multiplicity below flag depth: stop
                f = q;
            }
        }
        while (P.deg(f) >= 1 && total < n) {
            if (P.deg(f) > 1)
                throw EigenvalueOutsideTower(cpoly_str(&tw, f));
            CElem root = -(f[0] / f[1]);
            size_t before = total;
            try_mu(root);
            if (total == before)
                throw EigenvalueOutsideTower(cpoly_str(&tw, f));
            // Peel the new root's full multiplicity, exposing further factors.
            CPoly lin = {-root, tw.one()};
            for (size_t l = 0; l < out.back().chain.size(); ++l) {
                auto [q, r] = P.divmod(f, lin);
                if (!P.is_zero(r)) break;
                f = q;
            }
        }
        if (total < n)
            throw EigenvalueOutsideTower("generalized eigenspaces do not exhaust the space");
    }
    return out;
}

// Intersection of two RREF-spanned subspaces (column coordinates in C^n).
inline std::vector<std::vector<CElem>> span_intersection(
    const ConstantTower& tw, const std::vector<std::vector<CElem>>& U,
    const std::vector<std::vector<CElem>>& V) {
    CField K(&tw);
    MatOps<CField> ops(K);
    if (U.empty() || V.empty()) return {};
    const size_t n = U[0].size();
    // Solve u = v with u in span U, v in span V: kernel of [U^T | -V^T].
    Matrix<CElem> A = ops.make(n, U.size() + V.size());
    for (size_t j = 0; j < U.size(); ++j)
        for (size_t i = 0; i < n; ++i) A.at(i, j) = U[j][i];
    for (size_t j = 0; j < V.size(); ++j)
        for (size_t i = 0; i < n; ++i) A.at(i, U.size() + j) = K.neg(V[j][i]);
    auto ker = ops.kernel_basis(A);
    std::vector<std::vector<CElem>> vecs;
    for (const auto& kv : ker) {
        std::vector<CElem> w(n, K.zero());
        for (size_t j = 0; j < U.size(); ++j)
            for (size_t i = 0; i < n; ++i) w[i] = K.add(w[i], K.mul(kv[j], U[j][i]));
        vecs.push_back(std::move(w));
    }
    return ops.rref_span(vecs);
}

// Rows annihilating the span of Q (functionals vanishing on it).
inline std::vector<std::vector<CElem>> span_annihilator(const ConstantTower& tw, size_t n,
                                                        const std::vector<std::vector<CElem>>& Q) {
    CField K(&tw);
    MatOps<CField> ops(K);
    Matrix<CElem> M = ops.make(Q.size(), n);
    for (size_t i = 0; i < Q.size(); ++i)
        for (size_t j = 0; j < n; ++j) M.at(i, j) = Q[i][j];
    return ops.kernel_basis(M);  // vectors z with Q z = 0, i.e. z orthogonal rows
}

}  // namespace detail

inline AdjointDecomposition joint_characteristic_spaces(
    const ConstantTower& tw, const std::vector<Matrix<CElem>>& maps,
    const std::vector<FieldElement>& weights,
    const std::vector<std::vector<CElem>>& candidates = {}) {
    if (maps.empty() || maps.size() != weights.size())
        throw ParseError("joint_characteristic_spaces needs matching maps and weights");
    CField K(&tw);
    MatOps<CField> ops(K);
    const size_t n = maps[0].rows;
    for (size_t i = 0; i < maps.size(); ++i)
        for (size_t j = i + 1; j < maps.size(); ++j)
            if (!ops.is_zero(ops.commutator(maps[i], maps[j])))
                throw NonCommuting(static_cast<int>(i), static_cast<int>(j));

    AdjointDecomposition out;
    out.weights = weights;
    out.maps = maps;

    // Split the space into joint generalized eigenspaces map by map.
    struct Piece {
        std::vector<CElem> mu;
        std::vector<std::vector<CElem>> basis;
    };
    std::vector<Piece> pieces(1);
    pieces[0].basis = ops.rref_span([&] {
        std::vector<std::vector<CElem>> id;
        for (size_t i = 0; i < n; ++i) {
            std::vector<CElem> e(n, K.zero());
            e[i] = K.one();
            id.push_back(std::move(e));
        }
        return id;
    }());
    for (size_t i = 0; i < maps.size(); ++i) {
        auto eig = detail::constant_eigendata(
            tw, maps[i], i < candidates.size() ? candidates[i] : std::vector<CElem>{});
        std::vector<Piece> next;
        for (const auto& pc : pieces) {
            size_t covered = 0;
            for (const auto& ed : eig) {
                Piece np;
                np.mu = pc.mu;
                np.mu.push_back(ed.mu);
                np.basis = detail::span_intersection(tw, pc.basis, ed.chain.back());
                covered += np.basis.size();
                if (!np.basis.empty()) next.push_back(std::move(np));
            }
            if (covered != pc.basis.size())
                throw EigenvalueOutsideTower(
                    "joint refinement lost dimensions (map " + std::to_string(i) + ")");
        }
        pieces = std::move(next);
    }

    // Flags within each joint piece, w.r.t. the commuting nilpotents
    // D_i = Psi_i - mu_i: level l+1 holds v with D_i v in level l for all i.
    for (const auto& pc : pieces) {
        FlagSpace fs;
        fs.mu = pc.mu;
        FieldElement lam;
        for (size_t i = 0; i < maps.size(); ++i)
            lam = lam + weights[i] * FieldElement::from_constant(pc.mu[i]);
        fs.lambda = lam;

        const size_t t = pc.basis.size();
        // Restriction matrices of D_i to the piece (invariance is forced by
        // commutation; coords failure would mean the piece is not invariant).
        std::vector<Matrix<CElem>> R;
        for (size_t i = 0; i < maps.size(); ++i) {
            Matrix<CElem> D = maps[i];
            for (size_t s = 0; s < n; ++s) D.at(s, s) = D.at(s, s) - pc.mu[i];
            Matrix<CElem> Ri = ops.make(t, t);
            for (size_t j = 0; j < t; ++j) {
                auto img = ops.mul_vec(D, pc.basis[j]);
                auto co = ops.coords_in_basis(pc.basis, img);
                if (!co) throw ParseError("internal: joint piece not invariant");
                for (size_t s = 0; s < t; ++s) Ri.at(s, j) = (*co)[s];
            }
            R.push_back(std::move(Ri));
        }
        std::vector<std::vector<std::vector<CElem>>> levels;
        std::vector<std::vector<CElem>> cur;  // empty = level 0
        while (cur.size() < t) {
            auto Z = detail::span_annihilator(tw, t, cur);
            if (cur.empty()) {
                Z.clear();
                for (size_t s = 0; s < t; ++s) {
                    std::vector<CElem> e(t, K.zero());
                    e[s] = K.one();
                    Z.push_back(std::move(e));
                }
            }
            Matrix<CElem> stack = ops.make(Z.size() * R.size(), t);
            for (size_t i = 0; i < R.size(); ++i)
                for (size_t zr = 0; zr < Z.size(); ++zr)
                    for (size_t c = 0; c < t; ++c) {
                        CElem acc = K.zero();
                        for (size_t s = 0; s < t; ++s)
                            acc = K.add(acc, K.mul(Z[zr][s], R[i].at(s, c)));
                        stack.at(i * Z.size() + zr, c) = acc;
                    }
            auto ker = ops.kernel_basis(stack);
            auto nxt = ops.rref_span(ker);
            if (nxt.size() == cur.size())
                throw ParseError("internal: flag chain stalled before exhausting the piece");
            cur = std::move(nxt);
            // Back to ambient coordinates.
            std::vector<std::vector<CElem>> amb;
            for (const auto& w : cur) {
                std::vector<CElem> v(n, K.zero());
                for (size_t j = 0; j < t; ++j)
                    for (size_t s = 0; s < n; ++s)
                        v[s] = K.add(v[s], K.mul(w[j], pc.basis[j][s]));
                amb.push_back(std::move(v));
            }
            levels.push_back(ops.rref_span(amb));
        }
        fs.levels = std::move(levels);
        out.spaces.push_back(std::move(fs));
    }

    // Canonical order: by per-map eigenvalue strings, lexicographically.
    std::sort(out.spaces.begin(), out.spaces.end(), [](const FlagSpace& a, const FlagSpace& b) {
        for (size_t i = 0; i < a.mu.size() && i < b.mu.size(); ++i) {
            std::string sa = a.mu[i].str(), sb = b.mu[i].str();
            if (sa != sb) return sa < sb;
        }
        return false;
    });
    return out;
}

// ---------------------------------------------------------------------------
// exp/log of block-nilpotent gauges (Lemma lem1): for B supported on the
// strictly-lower off-diagonal block (rows >= split, cols < split), B^2 = 0,
// so exp(B) = Id + B and log(Id + B) = B.
// ---------------------------------------------------------------------------

inline void check_lower_block_support(const Matrix<FieldElement>& B, size_t split) {
    for (size_t i = 0; i < B.rows; ++i)
        for (size_t j = 0; j < B.cols; ++j)
            if (!B.at(i, j).is_zero() && !(i >= split && j < split))
                throw NotOffDiagonal("entry (" + std::to_string(i) + "," +
                                     std::to_string(j) + ") outside the lower-left block");
}

inline Matrix<FieldElement> nilpotent_exp(const ConstantTower& tw,
                                          const Matrix<FieldElement>& B, size_t split) {
    check_lower_block_support(B, split);
    KField K(&tw);
    MatOps<KField> ops(K);
    return ops.add(ops.identity(B.rows), B);
}

inline Matrix<FieldElement> nilpotent_log(const ConstantTower& tw,
                                          const Matrix<FieldElement>& P, size_t split) {
    KField K(&tw);
    MatOps<KField> ops(K);
    Matrix<FieldElement> B = ops.sub(P, ops.identity(P.rows));
    check_lower_block_support(B, split);
    return B;
}

}  // namespace redform

#endif  // REDFORM_MATRIX_HPP
