#pragma once

// Generative model for factorial RT experiments: gamma-distributed channel
// durations composed by a serial, parallel or coactive architecture, noisy
// final responses, and piecewise-linear trajectories.

#include <sft/detail/text.hpp>
#include <sft/parallel.hpp>
#include <sft/rng.hpp>
#include <sft/trial_store.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sft {

enum class Architecture { SerialOR, SerialAND, ParallelOR, ParallelAND, Coactive };

inline std::string_view to_string(Architecture a) {
    switch (a) {
    case Architecture::SerialOR: return "serial-or";
    case Architecture::SerialAND: return "serial-and";
    case Architecture::ParallelOR: return "parallel-or";
    case Architecture::ParallelAND: return "parallel-and";
    case Architecture::Coactive: return "coactive";
    }
    return "coactive";
}

inline std::optional<Architecture> parse_architecture(std::string_view s) {
    for (auto a : {Architecture::SerialOR, Architecture::SerialAND, Architecture::ParallelOR, Architecture::ParallelAND,
                   Architecture::Coactive})
        if (s == to_string(a)) return a;
    return std::nullopt;
}

struct ArchitectureModel {
    Architecture architecture = Architecture::ParallelAND;
    /// Gamma shape k.
    unsigned channel_shape = 4;
    /// Rates (1/ms) at level 1 and level 2; level 1 is the slower one.
    std::array<double, 2> rate_alpha{0.01, 0.03};
    std::array<double, 2> rate_beta{0.01, 0.03};
    /// Probability that channel alpha is the one executed under SerialOR.
    double serial_or_p = 0.5;
    double base_ms = 200;
    /// Alpha's rate is multiplied by (1 + si_violation) when beta is at level 2, and vice versa.
    double si_violation = 0;
    /// SD of a normal term added to both channel durations (common source); 0 disables it.
    double shared_sd = 0;

    void validate() const {
        if (channel_shape < 1) throw std::invalid_argument("channel_shape must be >= 1");
        for (const auto* r : {&rate_alpha, &rate_beta}) {
            if (!((*r)[0] > 0) || !std::isfinite((*r)[1])) throw std::invalid_argument("rates must be finite and positive");
            if (!((*r)[0] < (*r)[1])) throw std::invalid_argument("level-1 rate must be below level-2 rate");
        }
        if (!(serial_or_p >= 0 && serial_or_p <= 1)) throw std::invalid_argument("serial_or_p must lie in [0,1]");
        if (!(base_ms >= 0) || !std::isfinite(base_ms)) throw std::invalid_argument("base_ms must be finite and >= 0");
        if (!(si_violation >= 0) || !std::isfinite(si_violation)) throw std::invalid_argument("si_violation must be >= 0");
        if (!(shared_sd >= 0) || !std::isfinite(shared_sd)) throw std::invalid_argument("shared_sd must be >= 0");
    }
};

struct ResponseModel {
    double noise_sd = 10.0;
    /// Added to A when beta is at level 2, and to B when alpha is at level 2.
    double violation_shift = 0;

    void validate() const {
        if (!(noise_sd > 0) || !std::isfinite(noise_sd)) throw std::invalid_argument("noise_sd must be positive");
        if (!std::isfinite(violation_shift)) throw std::invalid_argument("violation_shift must be finite");
    }
};

struct Design {
    std::array<double, 2> alpha_range{20, 80};
    std::array<double, 2> beta_range{20, 80};
    /// Values below the split are level 1.
    double split_alpha = 50;
    double split_beta = 50;
    std::size_t n_trials = 1000;
    /// Probability a trial is single-channel; those split evenly between alpha and beta.
    double single_channel_fraction = 0;
    /// Double-channel trial i is placed in factorial cell i mod 4 instead of by uniform draws over the full range.
    bool balanced_conditions = false;
    bool record_trajectories = true;
    double sample_every_ms = 10;
    std::string experiment_id = "sim";
    std::string subject_id = "s01";

    void validate() const {
        if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
        const auto check = [](const std::array<double, 2>& r, double split, const char* name) {
            if (!std::isfinite(r[0]) || !std::isfinite(r[1]) || !(r[0] < split && split < r[1]))
                throw std::invalid_argument(std::string("invalid design range for ") + name);
            if (r[0] <= 0 && r[1] >= 0) throw std::invalid_argument(std::string(name) + " range must exclude the 0 sentinel");
        };
        check(alpha_range, split_alpha, "alpha");
        check(beta_range, split_beta, "beta");
        if (!(single_channel_fraction >= 0 && single_channel_fraction <= 1))
            throw std::invalid_argument("single_channel_fraction must lie in [0,1]");
        if (!(sample_every_ms > 0) || !std::isfinite(sample_every_ms))
            throw std::invalid_argument("sample_every_ms must be positive");
    }
};

/// Activity window of one coordinate, in ms from trial onset.
struct ChannelWindow {
    double start = 0;
    double end = 0;
};

/// Samples a trajectory at 0, step, 2*step, ... and at rt. Each coordinate moves
/// linearly from `from` to `to` over its window and is constant elsewhere.
/// Window edges are rounded up to the sampling grid (and clipped to rt), so
/// windows that touch never change in the same sample interval.
inline std::vector<TrajectorySample> synthesize_trajectory(ChannelWindow alpha, ChannelWindow beta, double rt_ms,
                                                           std::array<double, 2> from, std::array<double, 2> to,
                                                           double sample_every_ms = 10) {
    if (!(rt_ms > 0) || !(sample_every_ms > 0)) throw std::invalid_argument("rt and sampling period must be positive");
    for (const auto& w : {alpha, beta})
        if (!(w.start >= 0 && w.start <= w.end && w.end <= rt_ms))
            throw std::invalid_argument("channel window must lie within [0, rt]");
    const auto snap = [&](double t) { return std::min(rt_ms, std::ceil(t / sample_every_ms) * sample_every_ms); };
    const auto value = [&](const ChannelWindow& w, double x0, double x1, double t) {
        const double s = snap(w.start), e = snap(w.end);
        if (t <= s) return x0;
        if (t >= e) return x1;
        return x0 + (x1 - x0) * (t - s) / (e - s);
    };
    std::vector<TrajectorySample> out;
    const auto ticks = static_cast<std::size_t>(std::floor(rt_ms / sample_every_ms));
    out.reserve(ticks + 2);
    for (std::size_t i = 0; i <= ticks; ++i) {
        const double t = static_cast<double>(i) * sample_every_ms;
        if (t > rt_ms) break;
        out.push_back({t, value(alpha, from[0], to[0], t), value(beta, from[1], to[1], t)});
    }
    if (out.back().t_ms < rt_ms) out.push_back({rt_ms, to[0], to[1]});
    return out;
}

namespace detail {

struct TrialDraw {
    TrialRecord record;
    ChannelWindow alpha_window;
    ChannelWindow beta_window;
};

inline TrialDraw simulate_trial(const ArchitectureModel& m, const ResponseModel& resp, const Design& d, std::size_t i,
                                Engine& eng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    TrialRecord r;
    r.experiment_id = d.experiment_id;
    r.subject_id = d.subject_id;
    r.trial_index = i;

    const double u_channel = unit(eng);
    const double u_side = unit(eng);
    if (u_channel < d.single_channel_fraction) r.channels = u_side < 0.5 ? Channels::SingleAlpha : Channels::SingleBeta;

    const auto draw_factor = [&](const std::array<double, 2>& range, double split, int level) {
        if (level == 1) return std::uniform_real_distribution<double>(range[0], split)(eng);
        if (level == 2) return std::uniform_real_distribution<double>(split, range[1])(eng);
        return std::uniform_real_distribution<double>(range[0], range[1])(eng);
    };
    int want_a = 0, want_b = 0;
    if (d.balanced_conditions && r.channels == Channels::Double) {
        want_a = static_cast<int>(i % 4) / 2 + 1;
        want_b = static_cast<int>(i % 4) % 2 + 1;
    }
    const double alpha = draw_factor(d.alpha_range, d.split_alpha, want_a);
    const double beta = draw_factor(d.beta_range, d.split_beta, want_b);
    const bool has_a = r.channels != Channels::SingleBeta;
    const bool has_b = r.channels != Channels::SingleAlpha;
    r.alpha = has_a ? alpha : 0;
    r.beta = has_b ? beta : 0;
    const int la = has_a ? (alpha < d.split_alpha ? 1 : 2) : 0;
    const int lb = has_b ? (beta < d.split_beta ? 1 : 2) : 0;

    double ra = has_a ? m.rate_alpha[la - 1] : 0;
    double rb = has_b ? m.rate_beta[lb - 1] : 0;
    if (lb == 2) ra *= 1 + m.si_violation;
    if (la == 2) rb *= 1 + m.si_violation;

    const auto k = static_cast<double>(m.channel_shape);
    const auto gamma = [&](double rate) { return std::gamma_distribution<double>(k, 1.0 / rate)(eng); };
    double ta = has_a ? gamma(ra) : 0;
    double tb = has_b ? gamma(rb) : 0;
    const double tc = r.channels == Channels::Double && m.architecture == Architecture::Coactive ? gamma(ra + rb) : 0;
    const double shared = m.shared_sd > 0 ? std::normal_distribution<double>(0.0, m.shared_sd)(eng) : 0.0;
    const bool serial_alpha_first = unit(eng) < m.serial_or_p;
    ta = std::max(0.0, ta + shared);
    tb = std::max(0.0, tb + shared);

    TrialDraw out;
    double decision = 0;
    if (r.channels == Channels::SingleAlpha) {
        decision = ta;
        out.alpha_window = {0, ta};
    } else if (r.channels == Channels::SingleBeta) {
        decision = tb;
        out.beta_window = {0, tb};
    } else {
        switch (m.architecture) {
        case Architecture::SerialOR:
            decision = serial_alpha_first ? ta : tb;
            break;
        case Architecture::SerialAND: decision = ta + tb; break;
        case Architecture::ParallelOR: decision = std::min(ta, tb); break;
        case Architecture::ParallelAND: decision = std::max(ta, tb); break;
        case Architecture::Coactive: decision = std::max(0.0, tc + shared); break;
        }
    }
    r.rt_ms = m.base_ms + decision;
    if (!(r.rt_ms > 0)) r.rt_ms = std::numeric_limits<double>::min();

    if (r.channels == Channels::Double) {
        const double rt = r.rt_ms;
        switch (m.architecture) {
        case Architecture::SerialOR:
            if (serial_alpha_first) {
                out.alpha_window = {0, ta};
                out.beta_window = {ta, rt};
            } else {
                out.beta_window = {0, tb};
                out.alpha_window = {tb, rt};
            }
            break;
        case Architecture::SerialAND:
            out.alpha_window = {0, ta};
            out.beta_window = {ta, ta + tb};
            break;
        case Architecture::ParallelOR:
            out.alpha_window = out.beta_window = {0, decision};
            break;
        case Architecture::ParallelAND:
            out.alpha_window = {0, ta};
            out.beta_window = {0, tb};
            break;
        case Architecture::Coactive:
            out.alpha_window = out.beta_window = {0, decision};
            break;
        }
    }

    std::normal_distribution<double> noise(0.0, resp.noise_sd);
    const double ea = noise(eng);
    const double eb = noise(eng);
    r.a_final = has_a ? alpha + ea + (lb == 2 ? resp.violation_shift : 0.0) : 0;
    r.b_final = has_b ? beta + eb + (la == 2 ? resp.violation_shift : 0.0) : 0;
    out.record = std::move(r);
    return out;
}

} // namespace detail

/// Simulated experiment; trial i draws from substream i of `seed`, so the
/// result is byte-identical for any thread count.
inline TrialSet simulate_dataset(const ArchitectureModel& model, const ResponseModel& response, const Design& design,
                                 std::uint64_t seed, unsigned threads = 1) {
    model.validate();
    response.validate();
    design.validate();
    std::vector<TrialRecord> records(design.n_trials);
    parallel_for(design.n_trials, threads, [&](std::size_t i) {
        auto eng = make_engine(seed, i);
        auto draw = detail::simulate_trial(model, response, design, i, eng);
        if (design.record_trajectories) {
            draw.record.trajectory = synthesize_trajectory(draw.alpha_window, draw.beta_window, draw.record.rt_ms,
                                                           {0, 0}, {draw.record.a_final, draw.record.b_final},
                                                           design.sample_every_ms);
        }
        records[i] = std::move(draw.record);
    });

    Provenance p;
    p.meta["source"] = "simulator";
    p.meta["architecture"] = std::string(to_string(model.architecture));
    p.meta["channel_shape"] = std::to_string(model.channel_shape);
    p.meta["rate_alpha"] = detail::format_double(model.rate_alpha[0]) + "," + detail::format_double(model.rate_alpha[1]);
    p.meta["rate_beta"] = detail::format_double(model.rate_beta[0]) + "," + detail::format_double(model.rate_beta[1]);
    p.meta["serial_or_p"] = detail::format_double(model.serial_or_p);
    p.meta["base_ms"] = detail::format_double(model.base_ms);
    p.meta["si_violation"] = detail::format_double(model.si_violation);
    p.meta["shared_sd"] = detail::format_double(model.shared_sd);
    p.meta["noise_sd"] = detail::format_double(response.noise_sd);
    p.meta["violation_shift"] = detail::format_double(response.violation_shift);
    p.meta["n_trials"] = std::to_string(design.n_trials);
    p.meta["single_channel_fraction"] = detail::format_double(design.single_channel_fraction);
    p.meta["balanced_conditions"] = design.balanced_conditions ? "true" : "false";
    p.meta["seed"] = std::to_string(seed);
    return TrialSet(std::move(records), std::move(p));
}

} // namespace sft
