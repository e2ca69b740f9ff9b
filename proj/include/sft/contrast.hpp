#pragma once

// Stochastic dominance, survivor / mean interaction contrasts, permutation
// significance, and architecture classification for a 2x2 salience design.

#include <sft/detail/text.hpp>
#include <sft/parallel.hpp>
#include <sft/rng.hpp>
#include <sft/stats.hpp>
#include <sft/trial_store.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sft {

/// RT samples of the four factorial conditions, ordered 11, 12, 21, 22.
struct ConditionRts {
    std::array<std::vector<double>, 4> rts;

    void validate() const {
        for (std::size_t c = 0; c < 4; ++c) {
            if (rts[c].empty())
                throw std::invalid_argument("condition " + std::string(to_string(kFactorialConditions[c])) + " has no RTs");
            for (double t : rts[c])
                if (!std::isfinite(t) || !(t > 0)) throw std::invalid_argument("RTs must be finite and positive");
        }
    }
};

inline ConditionRts condition_rts(const ConditionMap& parts) {
    ConditionRts out;
    for (std::size_t c = 0; c < 4; ++c) out.rts[c] = rts_of(parts.at(kFactorialConditions[c]));
    return out;
}

// ---------------------------------------------------------------------------
// Stochastic dominance

struct DominanceTest {
    /// e.g. "S11>=S21"
    std::string label;
    std::size_t slower = 0;
    std::size_t faster = 0;
    /// One-tailed test for S_slower >= S_faster (evidence of the ordering).
    KsResult forward;
    /// One-tailed test for S_faster > S_slower (evidence of a violation).
    KsResult reverse;
    bool pass = true;
};

struct DominanceReport {
    std::array<DominanceTest, 4> tests;
    double alpha_sig = 0.05;
    double threshold = 0.0125;
    bool pass = true;
};

/// Tests the four survival orderings implied by selective influence plus
/// level ordering: S11 >= S21, S12 >= S22, S11 >= S12, S21 >= S22. Passes iff
/// every reverse-direction p-value exceeds alpha_sig / 4.
inline DominanceReport dominance_battery(const ConditionRts& rts, double alpha_sig = 0.05) {
    rts.validate();
    if (!(alpha_sig > 0 && alpha_sig < 1)) throw std::invalid_argument("alpha_sig must lie in (0, 1)");
    constexpr std::array<std::array<std::size_t, 2>, 4> pairs{{{0, 2}, {1, 3}, {0, 1}, {2, 3}}};
    constexpr std::array<const char*, 4> digits{"11", "12", "21", "22"};
    DominanceReport r;
    r.alpha_sig = alpha_sig;
    r.threshold = alpha_sig / 4.0;
    for (std::size_t k = 0; k < 4; ++k) {
        auto& t = r.tests[k];
        t.slower = pairs[k][0];
        t.faster = pairs[k][1];
        t.label = std::string("S") + digits[t.slower] + ">=S" + digits[t.faster];
        t.forward = ks_two_sample(rts.rts[t.slower], rts.rts[t.faster], KsSided::GreaterFirst);
        t.reverse = ks_two_sample(rts.rts[t.slower], rts.rts[t.faster], KsSided::GreaterSecond);
        t.pass = t.reverse.p_value > r.threshold;
        r.pass = r.pass && t.pass;
    }
    return r;
}

// ---------------------------------------------------------------------------
// SIC / MIC

struct SicProfile {
    /// Merged sorted unique RTs of all four conditions.
    std::vector<double> grid;
    std::vector<double> sic;
    double mic = 0;
    double d_plus = 0;
    double d_minus = 0;
    std::optional<double> p_d_plus;
    std::optional<double> p_d_minus;
    std::optional<double> p_mic;
    std::size_t n_perm = 0;
};

/// SIC(t) = S11 - S12 - S21 + S22 on the merged grid, MIC from the condition
/// means, D+ / D- the largest positive / negative SIC excursions.
inline SicProfile sic_mic(const ConditionRts& rts) {
    rts.validate();
    SicProfile p;
    for (const auto& r : rts.rts) p.grid.insert(p.grid.end(), r.begin(), r.end());
    std::sort(p.grid.begin(), p.grid.end());
    p.grid.erase(std::unique(p.grid.begin(), p.grid.end()), p.grid.end());

    std::array<EmpiricalCurve, 4> s;
    for (std::size_t c = 0; c < 4; ++c) s[c] = survival(rts.rts[c]);
    p.sic.reserve(p.grid.size());
    for (double t : p.grid) {
        const double v = s[0].at(t) - s[1].at(t) - s[2].at(t) + s[3].at(t);
        p.sic.push_back(v);
        p.d_plus = std::max(p.d_plus, v);
        p.d_minus = std::max(p.d_minus, -v);
    }
    p.mic = mean_of(rts.rts[0]) - mean_of(rts.rts[1]) - mean_of(rts.rts[2]) + mean_of(rts.rts[3]);
    return p;
}

/// Left Riemann sum of SIC over the merged grid. SIC is a step function that
/// vanishes before the first and after the last RT, so this equals MIC up to
/// rounding.
inline double sic_area(const SicProfile& p) {
    double area = 0;
    for (std::size_t i = 0; i + 1 < p.grid.size(); ++i) area += p.sic[i] * (p.grid[i + 1] - p.grid[i]);
    return area;
}

namespace detail {

/// All RTs sorted once; a relabelling of this array is one permutation draw.
struct PooledRts {
    std::vector<double> values;
    std::vector<std::uint8_t> labels;
    /// 1 where values[i] is the last element of its tie group.
    std::vector<std::uint8_t> group_end;
    std::array<double, 4> n{};
};

inline PooledRts pool(const ConditionRts& rts) {
    std::vector<std::pair<double, std::uint8_t>> all;
    for (std::uint8_t c = 0; c < 4; ++c)
        for (double t : rts.rts[c]) all.emplace_back(t, c);
    std::sort(all.begin(), all.end());
    PooledRts p;
    p.values.reserve(all.size());
    p.labels.reserve(all.size());
    for (const auto& [t, c] : all) {
        p.values.push_back(t);
        p.labels.push_back(c);
    }
    p.group_end.assign(all.size(), 0);
    for (std::size_t i = 0; i < all.size(); ++i)
        p.group_end[i] = (i + 1 == all.size() || p.values[i + 1] != p.values[i]) ? 1 : 0;
    for (std::size_t c = 0; c < 4; ++c) p.n[c] = static_cast<double>(rts.rts[c].size());
    return p;
}

struct ContrastStats {
    double d_plus = 0;
    double d_minus = 0;
    double mic = 0;
};

/// One pass over the pooled sample. Survival values are formed as
/// 1 - count / n, the same arithmetic as the empirical estimators.
inline ContrastStats contrast_stats(const PooledRts& p, const std::vector<std::uint8_t>& labels) {
    std::array<std::size_t, 4> cnt{};
    std::array<double, 4> sum{};
    ContrastStats out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto l = labels[i];
        ++cnt[l];
        sum[l] += p.values[i];
        if (p.group_end[i]) {
            const double s0 = 1.0 - static_cast<double>(cnt[0]) / p.n[0];
            const double s1 = 1.0 - static_cast<double>(cnt[1]) / p.n[1];
            const double s2 = 1.0 - static_cast<double>(cnt[2]) / p.n[2];
            const double s3 = 1.0 - static_cast<double>(cnt[3]) / p.n[3];
            const double v = s0 - s1 - s2 + s3;
            out.d_plus = std::max(out.d_plus, v);
            out.d_minus = std::max(out.d_minus, -v);
        }
    }
    out.mic = sum[0] / p.n[0] - sum[1] / p.n[1] - sum[2] / p.n[2] + sum[3] / p.n[3];
    return out;
}

} // namespace detail

/// SIC/MIC with label-permutation p-values. Each permutation redraws the four
/// groups (original sizes) from the pooled RTs without replacement, using
/// substream i of `seed`; results do not depend on `threads`.
/// p(D+) and p(D-) are one-sided, p(MIC) compares |MIC|.
inline SicProfile permutation_significance(const ConditionRts& rts, std::size_t n_perm = 10000,
                                           std::uint64_t seed = 0, unsigned threads = 0) {
    if (n_perm < 100) throw std::invalid_argument("permutation_significance needs n_perm >= 100");
    auto profile = sic_mic(rts);
    const auto pooled = detail::pool(rts);
    const auto observed = detail::contrast_stats(pooled, pooled.labels);

    std::vector<detail::ContrastStats> draws(n_perm);
    parallel_for(n_perm, threads, [&](std::size_t i) {
        auto labels = pooled.labels;
        auto eng = make_engine(seed, i);
        shuffle_in_place(std::span<std::uint8_t>(labels), eng);
        draws[i] = detail::contrast_stats(pooled, labels);
    });

    std::size_t ge_plus = 0, ge_minus = 0, ge_mic = 0;
    for (const auto& d : draws) {
        ge_plus += d.d_plus >= observed.d_plus;
        ge_minus += d.d_minus >= observed.d_minus;
        ge_mic += std::abs(d.mic) >= std::abs(observed.mic);
    }
    const auto n = static_cast<double>(n_perm);
    profile.p_d_plus = static_cast<double>(ge_plus) / n;
    profile.p_d_minus = static_cast<double>(ge_minus) / n;
    profile.p_mic = static_cast<double>(ge_mic) / n;
    profile.n_perm = n_perm;
    return profile;
}

// ---------------------------------------------------------------------------
// Classification

enum class ArchitectureLabel { SerialOR, SerialAND, ParallelOR, ParallelAND, Coactive, Uncertain, Undiagnostic };

inline std::string_view to_string(ArchitectureLabel a) {
    switch (a) {
    case ArchitectureLabel::SerialOR: return "SerialOR";
    case ArchitectureLabel::SerialAND: return "SerialAND";
    case ArchitectureLabel::ParallelOR: return "ParallelOR";
    case ArchitectureLabel::ParallelAND: return "ParallelAND";
    case ArchitectureLabel::Coactive: return "Coactive";
    case ArchitectureLabel::Uncertain: return "Uncertain";
    case ArchitectureLabel::Undiagnostic: return "Undiagnostic";
    }
    return "Uncertain";
}

struct ArchitectureCall {
    ArchitectureLabel label = ArchitectureLabel::Uncertain;
    bool sig_d_plus = false;
    bool sig_d_minus = false;
    bool sig_mic = false;
    /// -1, 0 or +1.
    int mic_sign = 0;
    std::string note;
};

/// Maps the significance pattern of (D+, D-, MIC) and the sign of MIC to an
/// architecture. sig(x) means p(x) <= alpha_sft.
inline ArchitectureCall classify_architecture(const SicProfile& p, double alpha_sft = 0.33) {
    if (!p.p_d_plus || !p.p_d_minus || !p.p_mic)
        throw std::invalid_argument("classify_architecture needs p-values (run permutation_significance)");
    if (!(alpha_sft > 0 && alpha_sft < 1)) throw std::invalid_argument("alpha_sft must lie in (0, 1)");
    ArchitectureCall c;
    c.sig_d_plus = *p.p_d_plus <= alpha_sft;
    c.sig_d_minus = *p.p_d_minus <= alpha_sft;
    c.sig_mic = *p.p_mic <= alpha_sft;
    c.mic_sign = p.mic > 0 ? 1 : (p.mic < 0 ? -1 : 0);
    using L = ArchitectureLabel;
    if (!c.sig_d_plus && !c.sig_d_minus && !c.sig_mic) {
        c.label = L::Undiagnostic;
        c.note = "flat SIC and null MIC: serial OR is indistinguishable from insufficient power";
    } else if (c.sig_d_minus && !c.sig_d_plus && c.sig_mic && c.mic_sign < 0) {
        c.label = L::ParallelAND;
    } else if (c.sig_d_plus && !c.sig_d_minus && c.sig_mic && c.mic_sign > 0) {
        c.label = L::ParallelOR;
    } else if (c.sig_d_plus && c.sig_d_minus && c.sig_mic && c.mic_sign > 0) {
        c.label = L::Coactive;
    } else if (c.sig_d_plus && c.sig_d_minus && !c.sig_mic) {
        c.label = L::Uncertain;
        c.note = "two-signed SIC with null MIC: serial AND or an underpowered coactive process";
    } else {
        c.label = L::Uncertain;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Export

inline void write_sic_csv(std::ostream& out, const SicProfile& p) {
    out << "t_ms,sic\n";
    for (std::size_t i = 0; i < p.grid.size(); ++i)
        out << detail::format_double(p.grid[i]) << ',' << detail::format_double(p.sic[i]) << '\n';
}

inline nlohmann::ordered_json to_json(const KsResult& k) {
    return {{"statistic", k.statistic}, {"p_value", k.p_value}, {"n1", k.n1}, {"n2", k.n2}};
}

inline nlohmann::ordered_json to_json(const DominanceReport& r) {
    nlohmann::ordered_json j;
    j["alpha_sig"] = r.alpha_sig;
    j["threshold"] = r.threshold;
    auto tests = nlohmann::ordered_json::array();
    for (const auto& t : r.tests)
        tests.push_back({{"ordering", t.label}, {"forward", to_json(t.forward)}, {"reverse", to_json(t.reverse)},
                         {"pass", t.pass}});
    j["tests"] = std::move(tests);
    j["pass"] = r.pass;
    return j;
}

inline nlohmann::ordered_json to_json(const SicProfile& p, const std::optional<ArchitectureCall>& call = std::nullopt) {
    const auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
        return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    nlohmann::ordered_json j;
    j["d_plus"] = p.d_plus;
    j["p_d_plus"] = opt(p.p_d_plus);
    j["d_minus"] = p.d_minus;
    j["p_d_minus"] = opt(p.p_d_minus);
    j["mic"] = p.mic;
    j["p_mic"] = opt(p.p_mic);
    j["n_perm"] = p.n_perm;
    if (call) {
        j["architecture"] = std::string(to_string(call->label));
        j["sig_d_plus"] = call->sig_d_plus;
        j["sig_d_minus"] = call->sig_d_minus;
        j["sig_mic"] = call->sig_mic;
        if (!call->note.empty()) j["note"] = call->note;
    }
    return j;
}

/// One row: D+ (p)  D- (p)  MIC (p)  architecture.
inline std::string format_sic_row(const SicProfile& p, const ArchitectureCall& c) {
    const auto pv = [](const std::optional<double>& v) { return v ? detail::format_fixed(*v, 3) : std::string("-"); };
    std::ostringstream os;
    os << "D+ " << detail::format_fixed(p.d_plus, 3) << " (" << pv(p.p_d_plus) << ")  D- "
       << detail::format_fixed(p.d_minus, 3) << " (" << pv(p.p_d_minus) << ")  MIC " << detail::format_fixed(p.mic, 2)
       << " (" << pv(p.p_mic) << ")  " << to_string(c.label);
    return os.str();
}

inline std::string format_dominance_report(const DominanceReport& r) {
    std::ostringstream os;
    for (const auto& t : r.tests)
        os << t.label << "  forward D=" << detail::format_fixed(t.forward.statistic, 3) << " p="
           << detail::format_fixed(t.forward.p_value, 3) << "  reverse D=" << detail::format_fixed(t.reverse.statistic, 3)
           << " p=" << detail::format_fixed(t.reverse.p_value, 3) << (t.pass ? "" : "  violated") << '\n';
    os << "stochastic dominance: " << (r.pass ? "holds" : "violated") << '\n';
    return os.str();
}

} // namespace sft
