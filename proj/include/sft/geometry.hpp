#pragma once

// Floral test shape and the trackball-to-amplitude update shared with the
// browser task runner, plus golden vectors for cross-checking the two.

#include <sft/detail/text.hpp>
#include <sft/errors.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace sft {

struct Point {
    double x = 0;
    double y = 0;
};

inline constexpr std::size_t kShapePoints = 100;

namespace detail {

/// cos(pi * n / d) with the argument reduced in integers first, so quarter
/// turns give exact 0 and +-1.
inline double cos_pi_ratio(long n, long d) {
    n %= 2 * d;
    if (n < 0) n += 2 * d;
    if (n > d) n = 2 * d - n;
    double sign = 1;
    if (2 * n > d) {
        n = d - n;
        sign = -1;
    }
    if (2 * n == d) return 0.0;
    return sign * std::cos(std::numbers::pi * static_cast<double>(n) / static_cast<double>(d));
}

inline double sin_pi_ratio(long n, long d) { return cos_pi_ratio(d - 2 * n, 2 * d); }

} // namespace detail

/// Shape outline for amplitudes (a, b): point delta = 0..99 at polar angle
/// .02*pi*delta with radius 70 + a cos(.06*pi*delta) + b cos(.1*pi*delta).
inline std::array<Point, kShapePoints> floral_shape_points(double a, double b) {
    std::array<Point, kShapePoints> pts{};
    for (std::size_t d = 0; d < kShapePoints; ++d) {
        const auto delta = static_cast<long>(d);
        const double radius = 70 + a * detail::cos_pi_ratio(3 * delta, 50) + b * detail::cos_pi_ratio(delta, 10);
        pts[d] = {detail::cos_pi_ratio(delta, 50) * radius, detail::sin_pi_ratio(delta, 50) * radius};
    }
    return pts;
}

inline int sign_of(int v) { return (v > 0) - (v < 0); }

/// One pointer step: each nonzero axis moves its amplitude 1/100 of the way
/// toward 70 minus the other amplitude's magnitude.
inline std::pair<double, double> apply_trackball_delta(double a, double b, int dx, int dy) {
    const double a_new = a + sign_of(dx) * (70 - a - std::abs(b)) / 100;
    const double b_new = b + sign_of(dy) * (70 - std::abs(a) - b) / 100;
    return {a_new, b_new};
}

struct TrackballStart {
    double a;
    double b;
    int dx;
    int dy;
    std::size_t steps;
};

inline const std::vector<double>& golden_amplitudes() {
    static const std::vector<double> v{-30, -15, 0, 15, 30};
    return v;
}

inline const std::vector<TrackballStart>& golden_trackball_starts() {
    static const std::vector<TrackballStart> v{
        {0, 0, 1, 0, 1},    {-35, 0, 1, 0, 1},   {10, -5, 0, -1, 1}, {35, 0, 1, 0, 1},
        {0, 0, 1, 1, 20},   {-30, 20, -1, 1, 20}, {25, -25, 1, -1, 20}, {0, 0, -1, 0, 50},
    };
    return v;
}

namespace detail {

inline std::string golden_number(double v) { return format_double(v == 0 ? 0.0 : v); }

} // namespace detail

/// a,b,delta,x,y for every amplitude pair of the golden grid.
inline void write_shape_golden(std::ostream& out) {
    out << "a,b,delta,x,y\n";
    for (double a : golden_amplitudes())
        for (double b : golden_amplitudes()) {
            const auto pts = floral_shape_points(a, b);
            for (std::size_t d = 0; d < pts.size(); ++d)
                out << detail::golden_number(a) << ',' << detail::golden_number(b) << ',' << d << ','
                    << detail::golden_number(pts[d].x) << ',' << detail::golden_number(pts[d].y) << '\n';
        }
}

/// sequence,step,a,b,dx,dy,a_new,b_new for repeated steps from each start.
inline void write_trackball_golden(std::ostream& out) {
    out << "sequence,step,a,b,dx,dy,a_new,b_new\n";
    const auto& starts = golden_trackball_starts();
    for (std::size_t s = 0; s < starts.size(); ++s) {
        double a = starts[s].a, b = starts[s].b;
        for (std::size_t k = 0; k < starts[s].steps; ++k) {
            const auto [an, bn] = apply_trackball_delta(a, b, starts[s].dx, starts[s].dy);
            out << s << ',' << k << ',' << detail::golden_number(a) << ',' << detail::golden_number(b) << ','
                << starts[s].dx << ',' << starts[s].dy << ',' << detail::golden_number(an) << ','
                << detail::golden_number(bn) << '\n';
            a = an;
            b = bn;
        }
    }
}

/// Writes shape_points.csv and trackball_steps.csv into `dir` (created if needed).
inline void write_golden(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "'");
    const auto emit = [&](const char* name, void (*fn)(std::ostream&)) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw IoError("cannot write '" + (dir / name).string() + "'");
        fn(out);
        if (!out) throw IoError("write failed for '" + (dir / name).string() + "'");
    };
    emit("shape_points.csv", write_shape_golden);
    emit("trackball_steps.csv", write_trackball_golden);
}

} // namespace sft
