#pragma once

// Workload capacity coefficients C_AND (log-CDF form) and C_OR (cumulative
// hazard form), with bootstrap percentile bands and a capacity verdict.

#include <sft/detail/text.hpp>
#include <sft/parallel.hpp>
#include <sft/rng.hpp>
#include <sft/stats.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace sft {

enum class StoppingRule { AND, OR };

inline std::string_view to_string(StoppingRule r) { return r == StoppingRule::AND ? "AND" : "OR"; }

struct CapacityInput {
    std::vector<double> double_rts;
    std::vector<double> single_alpha_rts;
    std::vector<double> single_beta_rts;
    StoppingRule rule = StoppingRule::OR;

    void validate() const {
        for (const auto* s : {&double_rts, &single_alpha_rts, &single_beta_rts}) {
            if (s->empty()) throw std::invalid_argument("capacity needs nonempty double and single-channel samples");
            for (double t : *s)
                if (!std::isfinite(t) || !(t > 0)) throw std::invalid_argument("RTs must be finite and positive");
        }
    }
};

enum class CapacityVerdict { Super, Unlimited, Limited, Mixed };

inline std::string_view to_string(CapacityVerdict v) {
    switch (v) {
    case CapacityVerdict::Super: return "Super";
    case CapacityVerdict::Unlimited: return "Unlimited";
    case CapacityVerdict::Limited: return "Limited";
    case CapacityVerdict::Mixed: return "Mixed";
    }
    return "Mixed";
}

struct CapacityBand {
    std::vector<double> lo;
    std::vector<double> hi;
};

struct CapacityCurve {
    StoppingRule rule = StoppingRule::OR;
    std::vector<double> grid;
    std::vector<double> c;
    std::optional<CapacityBand> band;
    std::optional<CapacityVerdict> verdict;
    std::size_t n_boot = 0;
};

class NoCommonSupport : public std::domain_error {
public:
    NoCommonSupport() : std::domain_error("no common support") {}
};

namespace detail {

inline std::vector<double> union_grid(const CapacityInput& in) {
    std::vector<double> g;
    for (const auto* s : {&in.double_rts, &in.single_alpha_rts, &in.single_beta_rts}) g.insert(g.end(), s->begin(), s->end());
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

} // namespace detail

/// C_AND(t) = (K_alpha + K_beta) / K_alphabeta with K = ln F, on the union
/// grid where all three F > 0 and F_alphabeta < 1.
inline CapacityCurve capacity_and(const CapacityInput& in) {
    in.validate();
    const auto kd = log_cdf(in.double_rts);
    const auto ka = log_cdf(in.single_alpha_rts);
    const auto kb = log_cdf(in.single_beta_rts);
    CapacityCurve out;
    out.rule = StoppingRule::AND;
    for (double t : detail::union_grid(in)) {
        const double d = kd.at(t), a = ka.at(t), b = kb.at(t);
        if (!std::isfinite(d) || !std::isfinite(a) || !std::isfinite(b) || d == 0) continue;
        out.grid.push_back(t);
        out.c.push_back((a + b) / d);
    }
    if (out.grid.empty()) throw NoCommonSupport();
    return out;
}

/// C_OR(t) = H_alphabeta / (H_alpha + H_beta) with Nelson-Aalen cumulative
/// hazards, on the union grid where the denominator is positive.
inline CapacityCurve capacity_or(const CapacityInput& in) {
    in.validate();
    const auto hd = nelson_aalen(in.double_rts);
    const auto ha = nelson_aalen(in.single_alpha_rts);
    const auto hb = nelson_aalen(in.single_beta_rts);
    CapacityCurve out;
    out.rule = StoppingRule::OR;
    for (double t : detail::union_grid(in)) {
        const double den = ha.at(t) + hb.at(t);
        if (!(den > 0)) continue;
        out.grid.push_back(t);
        out.c.push_back(hd.at(t) / den);
    }
    if (out.grid.empty()) throw NoCommonSupport();
    return out;
}

inline CapacityCurve capacity_curve(const CapacityInput& in) {
    return in.rule == StoppingRule::AND ? capacity_and(in) : capacity_or(in);
}

namespace detail {

/// A sample reduced to its distinct values, with a map from sorted position
/// to distinct-value index so that a bootstrap draw is a vector of counts.
struct CountedSample {
    std::vector<double> values;
    std::vector<std::size_t> counts;
    std::vector<std::uint32_t> position_to_value;
    std::size_t n = 0;

    explicit CountedSample(const std::vector<double>& xs) {
        const auto ts = tie_sample(xs);
        values = ts.values;
        counts = ts.counts;
        n = ts.n;
        position_to_value.reserve(n);
        for (std::size_t u = 0; u < counts.size(); ++u)
            for (std::size_t k = 0; k < counts[u]; ++k) position_to_value.push_back(static_cast<std::uint32_t>(u));
    }

    /// Index of the last distinct value <= t, or -1.
    std::ptrdiff_t locate(double t) const {
        return static_cast<std::ptrdiff_t>(std::upper_bound(values.begin(), values.end(), t) - values.begin()) - 1;
    }

    std::vector<std::size_t> resample(Engine& eng) const {
        std::vector<std::size_t> c(values.size(), 0);
        for (std::size_t k = 0; k < n; ++k) ++c[position_to_value[uniform_below(eng, n)]];
        return c;
    }

    /// F at each distinct value for the given counts.
    std::vector<double> cdf(const std::vector<std::size_t>& c) const {
        std::vector<double> f(c.size());
        std::size_t cum = 0;
        for (std::size_t u = 0; u < c.size(); ++u) {
            cum += c[u];
            f[u] = static_cast<double>(cum) / static_cast<double>(n);
        }
        return f;
    }

    /// Nelson-Aalen H at each distinct value for the given counts.
    std::vector<double> hazard(const std::vector<std::size_t>& c) const {
        std::vector<double> h(c.size());
        std::size_t at_risk = n;
        double acc = 0;
        for (std::size_t u = 0; u < c.size(); ++u) {
            if (c[u] > 0) {
                acc += static_cast<double>(c[u]) / static_cast<double>(at_risk);
                at_risk -= c[u];
            }
            h[u] = acc;
        }
        return h;
    }
};

inline double quantile_sorted(const std::vector<double>& xs, double q) {
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

} // namespace detail

/// Classifies a banded curve: Super if the lower band exceeds 1 on at least
/// half the grid, Limited if the upper band is below 1 on at least half,
/// Unlimited if the band contains 1 on at least half, otherwise Mixed.
inline CapacityVerdict verdict_from_band(const CapacityBand& band) {
    const std::size_t g = band.lo.size();
    std::size_t above = 0, below = 0, straddle = 0;
    for (std::size_t i = 0; i < g; ++i) {
        if (band.lo[i] > 1) ++above;
        else if (band.hi[i] < 1) ++below;
        else ++straddle;
    }
    const auto half = [g](std::size_t k) { return 2 * k >= g; };
    if (half(above)) return CapacityVerdict::Super;
    if (half(below)) return CapacityVerdict::Limited;
    if (half(straddle)) return CapacityVerdict::Unlimited;
    return CapacityVerdict::Mixed;
}

/// Nonparametric bootstrap (each of the three samples resampled with
/// replacement; replicate b uses substream b of `seed`) giving a pointwise 95%
/// percentile band on the curve's grid, widened if needed to contain the
/// estimate, plus the verdict.
inline CapacityCurve capacity_verdict(const CapacityInput& in, CapacityCurve curve, std::size_t n_boot = 2000,
                                      std::uint64_t seed = 0, unsigned threads = 0) {
    in.validate();
    if (n_boot < 1) throw std::invalid_argument("capacity_verdict needs n_boot >= 1");
    if (curve.rule != in.rule) throw std::invalid_argument("curve and input disagree on the stopping rule");
    const detail::CountedSample sd(in.double_rts), sa(in.single_alpha_rts), sb(in.single_beta_rts);
    const std::size_t g = curve.grid.size();
    std::vector<std::ptrdiff_t> id(g), ia(g), ib(g);
    for (std::size_t k = 0; k < g; ++k) {
        id[k] = sd.locate(curve.grid[k]);
        ia[k] = sa.locate(curve.grid[k]);
        ib[k] = sb.locate(curve.grid[k]);
    }

    CapacityBand band;
    band.lo.resize(g);
    band.hi.resize(g);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    // The replicate x grid matrix is built in chunks to bound memory; each
    // chunk regenerates the same replicates from their substreams.
    const std::size_t chunk = std::max<std::size_t>(1, 4000000 / n_boot);
    std::vector<double> vals;
    for (std::size_t begin = 0; begin < g; begin += chunk) {
        const std::size_t end = std::min(g, begin + chunk);
        const std::size_t width = end - begin;
        vals.assign(n_boot * width, nan);
        parallel_for(n_boot, threads, [&](std::size_t b) {
            auto eng = make_engine(seed, b);
            const auto cd = sd.resample(eng);
            const auto ca = sa.resample(eng);
            const auto cb = sb.resample(eng);
            double* row = vals.data() + b * width;
            if (in.rule == StoppingRule::OR) {
                const auto hd = sd.hazard(cd), ha = sa.hazard(ca), hb = sb.hazard(cb);
                for (std::size_t k = begin; k < end; ++k) {
                    const double den = (ia[k] >= 0 ? ha[ia[k]] : 0.0) + (ib[k] >= 0 ? hb[ib[k]] : 0.0);
                    if (den > 0) row[k - begin] = (id[k] >= 0 ? hd[id[k]] : 0.0) / den;
                }
            } else {
                const auto fd = sd.cdf(cd), fa = sa.cdf(ca), fb = sb.cdf(cb);
                for (std::size_t k = begin; k < end; ++k) {
                    const double d = id[k] >= 0 ? fd[id[k]] : 0.0;
                    const double a = ia[k] >= 0 ? fa[ia[k]] : 0.0;
                    const double bb = ib[k] >= 0 ? fb[ib[k]] : 0.0;
                    if (d > 0 && d < 1 && a > 0 && bb > 0) row[k - begin] = (std::log(a) + std::log(bb)) / std::log(d);
                }
            }
        });
        std::vector<double> col;
        col.reserve(n_boot);
        for (std::size_t k = begin; k < end; ++k) {
            col.clear();
            for (std::size_t b = 0; b < n_boot; ++b) {
                const double v = vals[b * width + (k - begin)];
                if (std::isfinite(v)) col.push_back(v);
            }
            double lo = curve.c[k], hi = curve.c[k];
            if (!col.empty()) {
                std::sort(col.begin(), col.end());
                lo = std::min(lo, detail::quantile_sorted(col, 0.025));
                hi = std::max(hi, detail::quantile_sorted(col, 0.975));
            }
            band.lo[k] = lo;
            band.hi[k] = hi;
        }
    }
    curve.verdict = verdict_from_band(band);
    curve.band = std::move(band);
    curve.n_boot = n_boot;
    return curve;
}

inline void write_capacity_csv(std::ostream& out, const CapacityCurve& c) {
    out << "t_ms,c,lo,hi\n";
    for (std::size_t k = 0; k < c.grid.size(); ++k) {
        out << detail::format_double(c.grid[k]) << ',' << detail::format_double(c.c[k]) << ',';
        if (c.band) out << detail::format_double(c.band->lo[k]) << ',' << detail::format_double(c.band->hi[k]);
        else out << ',';
        out << '\n';
    }
}

inline nlohmann::ordered_json to_json(const CapacityCurve& c) {
    nlohmann::ordered_json j;
    j["rule"] = std::string(to_string(c.rule));
    j["grid_points"] = c.grid.size();
    j["n_boot"] = c.n_boot;
    j["verdict"] = c.verdict ? nlohmann::ordered_json(std::string(to_string(*c.verdict))) : nlohmann::ordered_json(nullptr);
    if (!c.c.empty()) {
        auto sorted = c.c;
        std::sort(sorted.begin(), sorted.end());
        j["median_c"] = detail::quantile_sorted(sorted, 0.5);
    }
    return j;
}

} // namespace sft
