#pragma once

// Exact verifier for 2x2 feasibility instances. The sixteen deterministic
// quadruples (every hypothetical variable fixed to one of its two values) are
// the vertices of the polytope of admissible joint tables; the observed tables
// pass iff they are a convex mixture of those vertices. Membership is decided
// with an exact rational simplex, so no tolerance is involved.

#include <sft/lft.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sft {

using Rational = boost::multiprecision::cpp_rational;

/// Recovers the small-denominator rational a double stands for (e.g. 0.8811 ->
/// 8811/10000) by continued fractions; stops at the first convergent within
/// 1e-13 of x. Exact for values whose denominator is below about 1e6.
inline Rational to_rational(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("to_rational: non-finite value");
    const bool negative = x < 0;
    const double target = std::abs(x);
    boost::multiprecision::cpp_int h_prev = 0, h = 1, k_prev = 1, k = 0;
    double r = target;
    for (int it = 0; it < 64; ++it) {
        const double a = std::floor(r);
        const auto ai = static_cast<std::int64_t>(a);
        const boost::multiprecision::cpp_int h_next = ai * h + h_prev;
        const boost::multiprecision::cpp_int k_next = ai * k + k_prev;
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
        const double approx = static_cast<double>(h) / static_cast<double>(k);
        if (std::abs(target - approx) <= 1e-13 || k > 1000000000000LL) break;
        const double frac = r - a;
        if (frac <= 0) break;
        r = 1.0 / frac;
    }
    Rational q(h, k);
    return negative ? Rational(-q) : q;
}

namespace detail {

/// True iff {V lambda = p, lambda >= 0} has a solution, decided exactly.
inline bool exact_feasible(const std::vector<std::vector<Rational>>& v, const std::vector<Rational>& p) {
    const std::size_t rows = v.size();
    const std::size_t cols = rows ? v[0].size() : 0;
    const std::size_t width = cols + rows + 1;
    std::vector<std::vector<Rational>> t(rows + 1, std::vector<Rational>(width, Rational(0)));
    std::vector<std::size_t> basis(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const bool flip = p[r] < 0;
        for (std::size_t c = 0; c < cols; ++c) t[r][c] = flip ? Rational(-v[r][c]) : v[r][c];
        t[r][cols + r] = 1;
        t[r][width - 1] = flip ? Rational(-p[r]) : p[r];
        basis[r] = cols + r;
    }
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < rows; ++r) t[rows][c] -= t[r][c];
    for (std::size_t r = 0; r < rows; ++r) t[rows][width - 1] -= t[r][width - 1];

    for (;;) {
        std::size_t enter = cols;
        for (std::size_t c = 0; c < cols; ++c)
            if (t[rows][c] < 0) {
                enter = c;
                break;
            }
        if (enter == cols) break;
        std::size_t leave = rows;
        Rational best;
        for (std::size_t r = 0; r < rows; ++r) {
            if (t[r][enter] <= 0) continue;
            const Rational ratio = t[r][width - 1] / t[r][enter];
            if (leave == rows || ratio < best || (ratio == best && basis[r] < basis[leave])) {
                leave = r;
                best = ratio;
            }
        }
        if (leave == rows) throw NumericalError("exact oracle: unbounded artificial objective");
        const Rational piv = t[leave][enter];
        for (auto& x : t[leave]) x /= piv;
        for (std::size_t r = 0; r <= rows; ++r) {
            if (r == leave || t[r][enter] == 0) continue;
            const Rational f = t[r][enter];
            for (std::size_t c = 0; c < width; ++c) t[r][c] -= f * t[leave][c];
        }
        basis[leave] = enter;
    }
    return t[rows][width - 1] == 0;
}

} // namespace detail

/// Exact feasibility of four 2x2 tables (probabilities read via to_rational).
inline bool exhaustive_lft_oracle(const FactorialTables& tables) {
    for (const auto& t : tables)
        if (t.m() != 2 || t.n() != 2 || t.probs.size() != 4)
            throw std::invalid_argument("exhaustive_lft_oracle handles 2x2 tables only");

    // Observed point: 16 cell probabilities plus the convexity coordinate.
    std::vector<Rational> p;
    p.reserve(17);
    for (const auto& t : tables)
        for (double x : t.probs) p.push_back(to_rational(x));
    p.push_back(1);

    // One column per deterministic quadruple (h_alpha1, h_alpha2, h_beta1, h_beta2).
    std::vector<std::vector<Rational>> v(17, std::vector<Rational>(16, Rational(0)));
    for (unsigned mask = 0; mask < 16; ++mask) {
        const unsigned h[4] = {(mask >> 3) & 1u, (mask >> 2) & 1u, (mask >> 1) & 1u, mask & 1u};
        for (unsigned c = 0; c < 4; ++c) {
            const unsigned a = h[c / 2];
            const unsigned b = h[2 + c % 2];
            v[c * 4 + a * 2 + b][mask] = 1;
        }
        v[16][mask] = 1;
    }
    return detail::exact_feasible(v, p);
}

} // namespace sft
