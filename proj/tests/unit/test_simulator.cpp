#include <sft/capacity.hpp>
#include <sft/lft.hpp>
#include <sft/simulator.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace sft;
using Catch::Approx;

namespace {

Design balanced(std::size_t n) {
    Design d;
    d.n_trials = n;
    d.balanced_conditions = true;
    d.record_trajectories = false;
    return d;
}

std::array<ResponseSample, 4> responses(const TrialSet& s) {
    const auto parts = partition_by_condition(s, 50, 50, {});
    std::array<ResponseSample, 4> out;
    for (std::size_t c = 0; c < 4; ++c) out[c] = responses_of(parts.at(kFactorialConditions[c]));
    return out;
}

// Indices of sample intervals in which coordinate `a` (or b) changes.
std::vector<bool> moving(const std::vector<TrajectorySample>& tr, bool alpha) {
    std::vector<bool> out;
    for (std::size_t i = 1; i < tr.size(); ++i)
        out.push_back(alpha ? tr[i].a != tr[i - 1].a : tr[i].b != tr[i - 1].b);
    return out;
}

} // namespace

TEST_CASE("architecture names round-trip") {
    for (auto a : {Architecture::SerialOR, Architecture::SerialAND, Architecture::ParallelOR, Architecture::ParallelAND,
                   Architecture::Coactive})
        CHECK(parse_architecture(to_string(a)) == a);
    CHECK(parse_architecture("parallel-and") == Architecture::ParallelAND);
    CHECK_FALSE(parse_architecture("sequential"));
}

TEST_CASE("serial AND with unit shape has mean 2/lambda") {
    ArchitectureModel m;
    m.architecture = Architecture::SerialAND;
    m.channel_shape = 1;
    m.rate_alpha = {0.02, 0.05};
    m.rate_beta = {0.02, 0.05};
    const auto set = simulate_dataset(m, {}, balanced(40000), 3);
    const auto parts = partition_by_condition(set, 50, 50, {});
    const auto rts = rts_of(parts.at(Condition::A1B1));
    REQUIRE(rts.size() == 10000);
    double mean = 0;
    for (double t : rts) mean += t - m.base_ms;
    mean /= static_cast<double>(rts.size());
    const double se = std::sqrt(2.0) / 0.02 / std::sqrt(10000.0);
    CHECK(std::abs(mean - 2 / 0.02) < 3 * se);
}

TEST_CASE("balanced design fills the four cells equally") {
    const auto set = simulate_dataset({}, {}, balanced(1000), 1);
    const auto parts = partition_by_condition(set, 50, 50, {});
    for (auto c : kFactorialConditions) CHECK(parts.at(c).size() == 250);
}

TEST_CASE("single-channel fraction is binomial") {
    Design d = balanced(4000);
    d.single_channel_fraction = 0.5;
    const auto set = simulate_dataset({}, {}, d, 2);
    std::size_t singles = 0, alpha_only = 0;
    for (const auto& r : set.records()) {
        if (r.channels == Channels::Double) continue;
        ++singles;
        if (r.channels == Channels::SingleAlpha) {
            ++alpha_only;
            CHECK(r.beta == 0);
            CHECK(r.b_final == 0);
        } else {
            CHECK(r.alpha == 0);
        }
    }
    const double sd = std::sqrt(4000 * 0.25);
    CHECK(std::abs(static_cast<double>(singles) - 2000) < 4 * sd);
    CHECK(std::abs(static_cast<double>(alpha_only) - singles / 2.0) < 4 * std::sqrt(singles * 0.25));
}

TEST_CASE("simulation is deterministic and thread-count independent") {
    Design d;
    d.n_trials = 600;
    d.single_channel_fraction = 0.3;
    ArchitectureModel m;
    m.architecture = Architecture::Coactive;
    m.shared_sd = 15;
    const auto a = simulate_dataset(m, {}, d, 99, 1);
    const auto b = simulate_dataset(m, {}, d, 99, 4);
    CHECK(a.records() == b.records());
    CHECK(a.provenance() == b.provenance());
    CHECK(a.provenance().meta.at("architecture") == "coactive");
    CHECK(a.provenance().meta.at("seed") == "99");
    const auto c = simulate_dataset(m, {}, d, 100, 1);
    CHECK_FALSE(a.records() == c.records());
}

TEST_CASE("serial AND trajectories never move both coordinates in one interval") {
    ArchitectureModel m;
    m.architecture = Architecture::SerialAND;
    Design d;
    d.n_trials = 200;
    const auto set = simulate_dataset(m, {}, d, 4);
    for (const auto& r : set.records()) {
        REQUIRE(r.trajectory);
        const auto ma = moving(*r.trajectory, true), mb = moving(*r.trajectory, false);
        for (std::size_t i = 0; i < ma.size(); ++i) CHECK_FALSE((ma[i] && mb[i]));
    }
}

TEST_CASE("parallel AND trajectories move both coordinates together") {
    Design d;
    d.n_trials = 50;
    const auto set = simulate_dataset({}, {}, d, 5);
    std::size_t overlapping = 0;
    for (const auto& r : set.records()) {
        const auto ma = moving(*r.trajectory, true), mb = moving(*r.trajectory, false);
        bool both = false;
        for (std::size_t i = 0; i < ma.size(); ++i) both = both || (ma[i] && mb[i]);
        overlapping += both;
    }
    CHECK(overlapping == set.size());
}

TEST_CASE("trajectories sample every 10 ms and end at the final responses") {
    Design d;
    d.n_trials = 100;
    d.single_channel_fraction = 0.5;
    const auto set = simulate_dataset({}, {}, d, 6);
    for (const auto& r : set.records()) {
        const auto& tr = *r.trajectory;
        CHECK(tr.front().t_ms == 0);
        for (std::size_t i = 1; i + 1 < tr.size(); ++i) CHECK(tr[i].t_ms - tr[i - 1].t_ms == Approx(10));
        CHECK(tr.back().t_ms == r.rt_ms);
        CHECK(tr.back().a == r.a_final);
        CHECK(tr.back().b == r.b_final);
    }
}

TEST_CASE("synthesize_trajectory is linear within windows") {
    const auto tr = synthesize_trajectory({0, 40}, {40, 80}, 95, {0, 0}, {40, 80});
    REQUIRE(tr.size() == 11);
    CHECK(tr[2].a == Approx(20));
    CHECK(tr[2].b == 0);
    CHECK(tr[4].a == 40);
    CHECK(tr[6].b == Approx(40));
    CHECK(tr.back().t_ms == 95);
    CHECK_THROWS_AS(synthesize_trajectory({0, 100}, {0, 10}, 95, {0, 0}, {1, 1}), std::invalid_argument);
}

TEST_CASE("identical parallel OR channels have unit capacity") {
    ArchitectureModel m;
    m.architecture = Architecture::ParallelOR;
    m.rate_alpha = {0.02, 0.03};
    m.rate_beta = {0.02, 0.03};
    Design d = balanced(24000);
    d.single_channel_fraction = 0.5;
    const auto set = simulate_dataset(m, {}, d, 7);
    CapacityInput in;
    in.rule = StoppingRule::OR;
    for (const auto& r : set.records()) {
        const bool slow = (r.alpha == 0 || r.alpha < 50) && (r.beta == 0 || r.beta < 50);
        if (!slow) continue;
        if (r.channels == Channels::Double) in.double_rts.push_back(r.rt_ms);
        else if (r.channels == Channels::SingleAlpha) in.single_alpha_rts.push_back(r.rt_ms);
        else in.single_beta_rts.push_back(r.rt_ms);
    }
    const auto c = capacity_or(in);
    auto sorted = c.c;
    std::sort(sorted.begin(), sorted.end());
    CHECK(detail::quantile_sorted(sorted, 0.5) == Approx(1.0).margin(0.1));
}

TEST_CASE("intact selective influence rarely fails marginal selectivity", "[property]") {
    int fails = 0;
    const int runs = 100;
    for (int s = 0; s < runs; ++s) fails += marginal_selectivity_battery(responses(simulate_dataset({}, {}, balanced(1200), 50 + s))).pass ? 0 : 1;
    CHECK(fails <= 10);
}

TEST_CASE("a response shift breaks marginal selectivity") {
    ResponseModel resp;
    resp.violation_shift = 8;
    const auto set = simulate_dataset({}, resp, balanced(2000), 8);
    CHECK_FALSE(marginal_selectivity_battery(responses(set)).pass);
}

TEST_CASE("si_violation speeds the other channel") {
    ArchitectureModel m;
    m.si_violation = 2;
    const auto base = simulate_dataset({}, {}, balanced(8000), 9);
    const auto hit = simulate_dataset(m, {}, balanced(8000), 9);
    const auto mean_rt = [](const TrialSet& s, Condition c) {
        const auto rts = rts_of(partition_by_condition(s, 50, 50, {}).at(c));
        return mean_of(rts);
    };
    CHECK(mean_rt(hit, Condition::A2B2) < mean_rt(base, Condition::A2B2) - 10);
    CHECK(mean_rt(hit, Condition::A1B1) == mean_rt(base, Condition::A1B1));
}

TEST_CASE("model and design validation") {
    ArchitectureModel m;
    m.rate_alpha = {0.03, 0.01};
    CHECK_THROWS_AS(simulate_dataset(m, {}, {}, 1), std::invalid_argument);
    Design d;
    d.alpha_range = {-10, 80};
    CHECK_THROWS_AS(simulate_dataset({}, {}, d, 1), std::invalid_argument);
    d = Design{};
    d.split_beta = 90;
    CHECK_THROWS_AS(simulate_dataset({}, {}, d, 1), std::invalid_argument);
    ResponseModel r;
    r.noise_sd = 0;
    CHECK_THROWS_AS(simulate_dataset({}, r, {}, 1), std::invalid_argument);
}
