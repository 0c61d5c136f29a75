#ifndef REDFORM_QQ_HPP
#define REDFORM_QQ_HPP

#include <gmpxx.h>

#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace redform {

// Exact rationals.  All base-field arithmetic goes through GMP; nothing in
// the engine ever touches floating point.
using QQ = mpq_class;

inline QQ qq_of(long n) { return QQ(n); }

inline QQ qq_of(long num, long den) {
    if (den == 0) throw DivisionByZero("rational literal");
    QQ q(num, den);
    q.canonicalize();
    return q;
}

inline bool qq_is_integer(const QQ& q) { return q.get_den() == 1; }

inline std::string qq_str(const QQ& q) { return q.get_str(); }

// Parse a decimal integer literal (no sign); throws on empty/overflowing-free
// via GMP's arbitrary precision.
inline QQ qq_parse_uint(const std::string& digits) {
    return QQ(mpz_class(digits, 10));
}

// All divisors d of |n| with |d| <= bound, both signs, used for integer-root
// candidate generation via the rational root theorem.
inline std::vector<long> divisors_within(const mpz_class& n, long bound) {
    std::vector<long> out;
    mpz_class a = abs(n);
    if (a == 0) return out;
    for (long d = 1; d <= bound; ++d) {
        if (mpz_divisible_ui_p(a.get_mpz_t(), static_cast<unsigned long>(d))) {
            out.push_back(d);
            out.push_back(-d);
        }
    }
    return out;
}

}  // namespace redform

#endif  // REDFORM_QQ_HPP
