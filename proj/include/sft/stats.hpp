#pragma once

// Empirical distribution estimators and two-sample Kolmogorov-Smirnov tests.

#include <sft/detail/text.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace sft {

enum class CurveKind { Cdf, Survival, CumHazard, LogCdf };

/// Right-continuous step function given by its values at the jump points.
struct EmpiricalCurve {
    std::vector<double> grid;
    std::vector<double> values;
    CurveKind kind = CurveKind::Cdf;

    /// Value before the first grid point.
    double initial_value() const noexcept {
        switch (kind) {
        case CurveKind::Cdf: return 0.0;
        case CurveKind::Survival: return 1.0;
        case CurveKind::CumHazard: return 0.0;
        case CurveKind::LogCdf: return -std::numeric_limits<double>::infinity();
        }
        return 0.0;
    }

    double at(double t) const {
        const auto it = std::upper_bound(grid.begin(), grid.end(), t);
        if (it == grid.begin()) return initial_value();
        return values[static_cast<std::size_t>(it - grid.begin()) - 1];
    }

    std::size_t size() const noexcept { return grid.size(); }
};

/// Sorted unique values with their multiplicities.
struct TiedSample {
    std::vector<double> values;
    std::vector<std::size_t> counts;
    std::size_t n = 0;
};

inline TiedSample tie_sample(std::span<const double> samples) {
    if (samples.empty()) throw std::invalid_argument("empirical estimator needs a nonempty sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    for (double v : sorted)
        if (!std::isfinite(v)) throw std::invalid_argument("samples must be finite");
    std::sort(sorted.begin(), sorted.end());
    TiedSample out;
    out.n = sorted.size();
    for (double v : sorted) {
        if (out.values.empty() || v != out.values.back()) {
            out.values.push_back(v);
            out.counts.push_back(1);
        } else {
            ++out.counts.back();
        }
    }
    return out;
}

/// F(t) = fraction of samples <= t, at each distinct sample value.
inline EmpiricalCurve ecdf(std::span<const double> samples) {
    const auto ts = tie_sample(samples);
    EmpiricalCurve c{ts.values, {}, CurveKind::Cdf};
    c.values.reserve(ts.values.size());
    std::size_t cum = 0;
    const auto n = static_cast<double>(ts.n);
    for (auto k : ts.counts) {
        cum += k;
        c.values.push_back(static_cast<double>(cum) / n);
    }
    return c;
}

/// S(t) = 1 - F(t) on the same grid.
inline EmpiricalCurve survival(std::span<const double> samples) {
    auto c = ecdf(samples);
    for (auto& v : c.values) v = 1.0 - v;
    c.kind = CurveKind::Survival;
    return c;
}

/// Nelson-Aalen cumulative hazard: sum of d_i / n_i over event times <= t,
/// d_i the ties at t_i and n_i the number still at risk just before t_i.
inline EmpiricalCurve nelson_aalen(std::span<const double> samples) {
    const auto ts = tie_sample(samples);
    EmpiricalCurve c{ts.values, {}, CurveKind::CumHazard};
    c.values.reserve(ts.values.size());
    std::size_t at_risk = ts.n;
    double h = 0;
    for (auto d : ts.counts) {
        h += static_cast<double>(d) / static_cast<double>(at_risk);
        at_risk -= d;
        c.values.push_back(h);
    }
    return c;
}

/// K(t) = ln F(t). Every grid point of the ECDF has F > 0, so the grid is the
/// ECDF grid; K is -infinity before the first sample.
inline EmpiricalCurve log_cdf(std::span<const double> samples) {
    auto c = ecdf(samples);
    for (auto& v : c.values) v = std::log(v);
    c.kind = CurveKind::LogCdf;
    return c;
}

/// Two-column CSV (t_ms, value).
inline void write_curve_csv(std::ostream& out, const EmpiricalCurve& c, std::string_view value_name = "value") {
    out << "t_ms," << value_name << '\n';
    for (std::size_t i = 0; i < c.grid.size(); ++i)
        out << detail::format_double(c.grid[i]) << ',' << detail::format_double(c.values[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

enum class KsSided {
    TwoSided,
    /// Statistic sup(F_y - F_x): evidence that S_x >= S_y.
    GreaterFirst,
    /// Statistic sup(F_x - F_y): evidence that S_y >= S_x.
    GreaterSecond,
};

struct KsResult {
    double statistic = 0;
    double p_value = 1;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    KsSided sided = KsSided::TwoSided;
};

/// Kolmogorov survival function Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
/// Small lambda uses the equivalent theta-function form, where the alternating
/// series converges too slowly.
inline double kolmogorov_q(double lambda) {
    if (!(lambda > 0)) return 1.0;
    double q = 0;
    if (lambda < 1.18) {
        const double pi = std::numbers::pi;
        const double y = std::exp(-pi * pi / (8.0 * lambda * lambda));
        double s = 0;
        for (int k = 1; k <= 50; ++k) {
            const double term = std::pow(y, static_cast<double>((2 * k - 1) * (2 * k - 1)));
            s += term;
            if (term < 1e-300 || term < s * 1e-17) break;
        }
        q = 1.0 - std::sqrt(2.0 * pi) / lambda * s;
    } else {
        double sign = 1;
        for (int k = 1; k <= 100; ++k) {
            const double term = std::exp(-2.0 * k * k * lambda * lambda);
            q += sign * term;
            sign = -sign;
            if (term < 1e-17) break;
        }
        q *= 2.0;
    }
    return std::clamp(q, 0.0, 1.0);
}

struct KsExtremes {
    double x_above_y = 0; ///< sup(F_x - F_y), clipped at 0
    double y_above_x = 0; ///< sup(F_y - F_x), clipped at 0
};

/// Walks the merged sorted samples once; differences are evaluated after
/// every tie group, i.e. at each point of the union grid.
inline KsExtremes ks_extremes(std::span<const double> x, std::span<const double> y) {
    std::vector<double> xs(x.begin(), x.end()), ys(y.begin(), y.end());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    const auto n1 = static_cast<double>(xs.size());
    const auto n2 = static_cast<double>(ys.size());
    std::size_t i = 0, j = 0;
    KsExtremes e;
    while (i < xs.size() || j < ys.size()) {
        double t;
        if (j == ys.size() || (i < xs.size() && xs[i] <= ys[j])) t = xs[i];
        else t = ys[j];
        while (i < xs.size() && xs[i] == t) ++i;
        while (j < ys.size() && ys[j] == t) ++j;
        const double d = static_cast<double>(i) / n1 - static_cast<double>(j) / n2;
        e.x_above_y = std::max(e.x_above_y, d);
        e.y_above_x = std::max(e.y_above_x, -d);
    }
    return e;
}

/// Two-sample KS test with asymptotic p-values (Kolmogorov series for the
/// two-sided test, exp(-2 D^2 n1 n2 / (n1 + n2)) for one-sided tests).
inline KsResult ks_two_sample(std::span<const double> x, std::span<const double> y, KsSided sided = KsSided::TwoSided) {
    if (x.empty() || y.empty()) throw std::invalid_argument("ks_two_sample needs two nonempty samples");
    const auto e = ks_extremes(x, y);
    KsResult r;
    r.n1 = x.size();
    r.n2 = y.size();
    r.sided = sided;
    const double ne = static_cast<double>(r.n1) * static_cast<double>(r.n2) / static_cast<double>(r.n1 + r.n2);
    switch (sided) {
    case KsSided::TwoSided:
        r.statistic = std::max(e.x_above_y, e.y_above_x);
        r.p_value = kolmogorov_q(r.statistic * std::sqrt(ne));
        break;
    case KsSided::GreaterFirst:
        r.statistic = e.y_above_x;
        r.p_value = std::clamp(std::exp(-2.0 * r.statistic * r.statistic * ne), 0.0, 1.0);
        break;
    case KsSided::GreaterSecond:
        r.statistic = e.x_above_y;
        r.p_value = std::clamp(std::exp(-2.0 * r.statistic * r.statistic * ne), 0.0, 1.0);
        break;
    }
    return r;
}

inline double mean_of(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty sample");
    double s = 0;
    for (double v : xs) s += v;
    return s / static_cast<double>(xs.size());
}

} // namespace sft
