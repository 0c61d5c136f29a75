#ifndef REDFORM_ERRORS_HPP
#define REDFORM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace redform {

// Base class for all structured errors raised by the engine.  The CLI maps
// subclasses onto process exit codes, so every throw site should pick the
// most specific class below rather than std::runtime_error.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- exact_fields ---------------------------------------------------------

struct DivisionByZero : Error {
    explicit DivisionByZero(const std::string& ctx)
        : Error("division by zero: " + ctx) {}
};

// Inversion failed inside an algebraic layer whose minimal polynomial turned
// out to be reducible; carries the discovered nontrivial factor.
struct NonInvertibleAlgebraic : Error {
    std::string factor;
    NonInvertibleAlgebraic(const std::string& layer, const std::string& fac)
        : Error("non-invertible element in algebraic layer '" + layer +
                "': minimal polynomial has factor " + fac),
          factor(fac) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

// --- matrix_kernel ---------------------------------------------------------

struct NonCommuting : Error {
    int i, j;
    NonCommuting(int a, int b)
        : Error("maps " + std::to_string(a) + " and " + std::to_string(b) +
                " do not commute"),
          i(a), j(b) {}
};

// A constant eigenvalue of the adjoint maps lies outside the declared
// constant tower; carries the residual (root-free over the tower) factor of
// the minimal polynomial as a witness.
struct EigenvalueOutsideTower : Error {
    std::string residual_factor;
    explicit EigenvalueOutsideTower(const std::string& fac)
        : Error("adjoint eigenvalue outside the constant tower; residual "
                "minimal-polynomial factor " + fac),
          residual_factor(fac) {}
};

struct NotOffDiagonal : Error {
    explicit NotOffDiagonal(const std::string& msg)
        : Error("matrix is not nilpotent/off-diagonal: " + msg) {}
};

// --- variational_builder ---------------------------------------------------

struct MalformedHamiltonian : Error {
    explicit MalformedHamiltonian(const std::string& msg)
        : Error("malformed Hamiltonian: " + msg) {}
};

struct SingularGauge : Error {
    explicit SingularGauge(const std::string& msg)
        : Error("gauge matrix is singular: " + msg) {}
};

// --- lie_analysis ----------------------------------------------------------

struct DiagonalNotAbelian : Error {
    explicit DiagonalNotAbelian(const std::string& witness)
        : Error("diagonal part generates a non-abelian algebra: " + witness) {}
};

struct UpperBlockNonzero : Error {
    explicit UpperBlockNonzero(const std::string& msg)
        : Error("strictly upper block part is nonzero: " + msg) {}
};

// --- reducer ----------------------------------------------------------------

struct Ve1NotReduced : Error {
    explicit Ve1NotReduced(const std::string& msg)
        : Error("supplied first-order gauge does not put VE1 in reduced form: " + msg) {}
};

// Degree/size cap exceeded during a bound computation (reported in run
// metadata; maps to the same exit code as EigenvalueOutsideTower).
struct CapExceeded : Error {
    explicit CapExceeded(const std::string& msg) : Error("cap exceeded: " + msg) {}
};

}  // namespace redform

#endif  // REDFORM_ERRORS_HPP
