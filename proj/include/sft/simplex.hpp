#pragma once

#include <sft/errors.hpp>

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace sft {

template <std::floating_point Real>
struct PhaseOneResult {
    /// Minimum total artificial slack.
    Real objective = 0;
    /// Basic solution of A x = b, x >= 0 at the optimum (exact only if objective is 0).
    std::vector<Real> x;
    std::size_t pivots = 0;
};

template <std::floating_point Real>
struct PhaseOneOptions {
    Real pivot_tolerance = Real(1e-12);
    std::size_t max_pivots = 100000;
};

/// Phase-one simplex for {A x = b, x >= 0}: minimises the sum of one
/// artificial variable per row, pivoting with Bland's rule so the result is
/// deterministic. `a` is row-major rows x cols. Artificials that leave the
/// basis are not allowed back in.
template <std::floating_point Real>
PhaseOneResult<Real> phase_one(std::span<const Real> a, std::size_t rows, std::size_t cols, std::span<const Real> b,
                               PhaseOneOptions<Real> opt = {}) {
    if (a.size() != rows * cols || b.size() != rows) throw std::invalid_argument("phase_one: dimension mismatch");

    const std::size_t width = cols + rows + 1;
    const std::size_t rhs = width - 1;
    std::vector<Real> t((rows + 1) * width, Real(0));
    auto cell = [&](std::size_t r, std::size_t c) -> Real& { return t[r * width + c]; };
    std::vector<std::size_t> basis(rows);

    for (std::size_t r = 0; r < rows; ++r) {
        const Real sign = b[r] < 0 ? Real(-1) : Real(1);
        for (std::size_t c = 0; c < cols; ++c) cell(r, c) = sign * a[r * cols + c];
        cell(r, cols + r) = Real(1);
        cell(r, rhs) = sign * b[r];
        basis[r] = cols + r;
    }
    // Reduced costs of the artificial objective: minus the column sums.
    const std::size_t obj = rows;
    for (std::size_t c = 0; c < cols; ++c) {
        Real s = 0;
        for (std::size_t r = 0; r < rows; ++r) s += cell(r, c);
        cell(obj, c) = -s;
    }
    {
        Real s = 0;
        for (std::size_t r = 0; r < rows; ++r) s += cell(r, rhs);
        cell(obj, rhs) = -s;
    }

    PhaseOneResult<Real> out;
    const Real tol = opt.pivot_tolerance;
    for (;;) {
        std::size_t enter = cols;
        for (std::size_t c = 0; c < cols; ++c) {
            if (cell(obj, c) < -tol) {
                enter = c;
                break;
            }
        }
        if (enter == cols) break;

        std::size_t leave = rows;
        Real best = 0;
        for (std::size_t r = 0; r < rows; ++r) {
            const Real coef = cell(r, enter);
            if (coef <= tol) continue;
            const Real ratio = cell(r, rhs) / coef;
            if (leave == rows || ratio < best - tol || (std::abs(ratio - best) <= tol && basis[r] < basis[leave])) {
                leave = r;
                best = ratio;
            }
        }
        if (leave == rows) throw NumericalError("phase_one: unbounded direction in artificial objective");

        const Real piv = cell(leave, enter);
        for (std::size_t c = 0; c < width; ++c) cell(leave, c) /= piv;
        for (std::size_t r = 0; r <= rows; ++r) {
            if (r == leave) continue;
            const Real f = cell(r, enter);
            if (f == 0) continue;
            for (std::size_t c = 0; c < width; ++c) cell(r, c) -= f * cell(leave, c);
            cell(r, enter) = 0;
        }
        basis[leave] = enter;
        if (++out.pivots > opt.max_pivots) throw NumericalError("phase_one: pivot limit exceeded");
    }

    out.objective = -cell(obj, rhs);
    out.x.assign(cols, Real(0));
    for (std::size_t r = 0; r < rows; ++r)
        if (basis[r] < cols) out.x[basis[r]] = cell(r, rhs);
    return out;
}

} // namespace sft
