#include "helpers.hpp"

#include <sft/capacity.hpp>

#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

using namespace sft;
using Catch::Approx;

namespace {

CapacityInput identical(StoppingRule rule) {
    CapacityInput in;
    in.double_rts = test::exp_sample(200, 0.01, 100, 1);
    in.single_alpha_rts = in.double_rts;
    in.single_beta_rts = in.double_rts;
    in.rule = rule;
    return in;
}

// Unlimited-capacity OR benchmark: double = min of fresh independent draws.
CapacityInput or_race(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::exponential_distribution<double> d(0.01);
    CapacityInput in;
    in.rule = StoppingRule::OR;
    for (std::size_t i = 0; i < n; ++i) {
        in.single_alpha_rts.push_back(d(eng));
        in.single_beta_rts.push_back(d(eng));
        in.double_rts.push_back(std::min(d(eng), d(eng)));
    }
    return in;
}

std::size_t nearest(const std::vector<double>& grid, double t) {
    const auto it = std::lower_bound(grid.begin(), grid.end(), t);
    if (it == grid.end()) return grid.size() - 1;
    return static_cast<std::size_t>(it - grid.begin());
}

} // namespace

TEST_CASE("identical samples give C_AND = 2 and C_OR = 1/2") {
    const auto cand = capacity_and(identical(StoppingRule::AND));
    REQUIRE_FALSE(cand.grid.empty());
    for (double c : cand.c) CHECK(c == 2.0);
    const auto cor = capacity_or(identical(StoppingRule::OR));
    REQUIRE_FALSE(cor.grid.empty());
    for (double c : cor.c) CHECK(c == 0.5);
}

TEST_CASE("C_AND grid stops below the largest double RT") {
    auto in = identical(StoppingRule::AND);
    const auto c = capacity_and(in);
    const double max_double = *std::max_element(in.double_rts.begin(), in.double_rts.end());
    CHECK(c.grid.back() < max_double);
    CHECK(c.grid.front() >= *std::min_element(in.double_rts.begin(), in.double_rts.end()));
}

TEST_CASE("C_AND matches hand-computed log-CDF ratios") {
    CapacityInput in;
    in.rule = StoppingRule::AND;
    in.double_rts = {10, 20, 30, 40};
    in.single_alpha_rts = {5, 15};
    in.single_beta_rts = {5, 25};
    const auto c = capacity_and(in);
    // At t = 10: F_ab = 1/4, F_a = 1/2, F_b = 1/2.
    REQUIRE(c.grid.front() == 10);
    CHECK(c.c.front() == Approx(2 * std::log(0.5) / std::log(0.25)));
    // At t = 30: F_ab = 3/4, F_a = 1, F_b = 1; the singles are complete, so C = 0 < 1.
    const auto k = nearest(c.grid, 30);
    CHECK(c.grid[k] == 30);
    CHECK(c.c[k] == 0.0);
}

TEST_CASE("fast single channels make C_AND limited") {
    CapacityInput in;
    in.rule = StoppingRule::AND;
    in.double_rts = test::exp_sample(400, 0.01, 300, 2);
    in.single_alpha_rts = test::exp_sample(400, 0.01, 150, 3);
    in.single_beta_rts = test::exp_sample(400, 0.01, 150, 4);
    const auto c = capacity_and(in);
    std::size_t below = 0;
    for (double v : c.c) below += v < 1;
    CHECK(below == c.c.size());
    const auto v = capacity_verdict(in, c, 200, 9, 1);
    CHECK(*v.verdict == CapacityVerdict::Limited);
}

TEST_CASE("double equal to one single sample gives C_OR below 1") {
    CapacityInput in;
    in.rule = StoppingRule::OR;
    in.double_rts = test::exp_sample(300, 0.01, 0, 5);
    in.single_alpha_rts = in.double_rts;
    in.single_beta_rts = test::exp_sample(300, 0.01, 0, 6);
    const auto c = capacity_or(in);
    for (std::size_t k = 0; k < c.grid.size(); ++k)
        if (c.grid[k] >= *std::min_element(in.single_beta_rts.begin(), in.single_beta_rts.end())) CHECK(c.c[k] < 1);
}

TEST_CASE("capacity without common support is an error") {
    CapacityInput in;
    in.rule = StoppingRule::AND;
    in.double_rts = {1, 2, 3};
    in.single_alpha_rts = {10, 11};
    in.single_beta_rts = {20};
    CHECK_THROWS_AS(capacity_and(in), NoCommonSupport);
    CHECK_THROWS_WITH(capacity_and(in), "no common support");
    in.single_alpha_rts.clear();
    CHECK_THROWS_AS(capacity_or(in), std::invalid_argument);
}

TEST_CASE("C_OR is invariant under a monotone time transform", "[property]") {
    auto in = or_race(300, 11);
    for (auto* s : {&in.double_rts, &in.single_alpha_rts, &in.single_beta_rts})
        for (auto& t : *s) t += 1;
    const auto base = capacity_or(in);
    auto tr = in;
    for (auto* s : {&tr.double_rts, &tr.single_alpha_rts, &tr.single_beta_rts})
        for (auto& t : *s) t = std::sqrt(t) * 3 + std::log(t);
    const auto moved = capacity_or(tr);
    REQUIRE(moved.grid.size() == base.grid.size());
    for (std::size_t k = 0; k < base.grid.size(); ++k) {
        CHECK(moved.grid[k] == Approx(std::sqrt(base.grid[k]) * 3 + std::log(base.grid[k])));
        CHECK(moved.c[k] == base.c[k]);
    }
}

TEST_CASE("counted bootstrap estimators reproduce the direct curves") {
    const auto in = or_race(250, 13);
    const detail::CountedSample sd(in.double_rts), sa(in.single_alpha_rts), sb(in.single_beta_rts);
    const auto hd = sd.hazard(sd.counts), ha = sa.hazard(sa.counts), hb = sb.hazard(sb.counts);
    const auto curve = capacity_or(in);
    for (std::size_t k = 0; k < curve.grid.size(); ++k) {
        const double t = curve.grid[k];
        const auto id = sd.locate(t), ia = sa.locate(t), ib = sb.locate(t);
        const double den = (ia >= 0 ? ha[ia] : 0.0) + (ib >= 0 ? hb[ib] : 0.0);
        CHECK((id >= 0 ? hd[id] : 0.0) / den == Approx(curve.c[k]).epsilon(1e-12));
    }
    auto and_in = in;
    and_in.rule = StoppingRule::AND;
    const auto fd = sd.cdf(sd.counts), fa = sa.cdf(sa.counts), fb = sb.cdf(sb.counts);
    const auto ac = capacity_and(and_in);
    for (std::size_t k = 0; k < ac.grid.size(); ++k) {
        const double t = ac.grid[k];
        const double v = (std::log(fa[sa.locate(t)]) + std::log(fb[sb.locate(t)])) / std::log(fd[sd.locate(t)]);
        CHECK(v == Approx(ac.c[k]).epsilon(1e-12));
    }
}

TEST_CASE("bootstrap bands are deterministic, thread independent and bracket c") {
    const auto in = or_race(300, 17);
    const auto curve = capacity_or(in);
    const auto a = capacity_verdict(in, curve, 300, 5, 1);
    const auto b = capacity_verdict(in, curve, 300, 5, 4);
    REQUIRE(a.band);
    CHECK(a.band->lo == b.band->lo);
    CHECK(a.band->hi == b.band->hi);
    CHECK(*a.verdict == *b.verdict);
    CHECK(a.n_boot == 300);
    for (std::size_t k = 0; k < curve.grid.size(); ++k) {
        CHECK(a.band->lo[k] <= a.c[k]);
        CHECK(a.c[k] <= a.band->hi[k]);
    }
    CHECK_THROWS_AS(capacity_verdict(in, capacity_and([&] {
                                         auto x = in;
                                         x.rule = StoppingRule::AND;
                                         return x;
                                     }()),
                                     10),
                    std::invalid_argument);
}

TEST_CASE("verdict thresholds") {
    CapacityBand band;
    band.lo = {1.1, 1.2, 0.5, 0.9};
    band.hi = {1.5, 1.6, 0.8, 1.2};
    CHECK(verdict_from_band(band) == CapacityVerdict::Super);
    band.lo = {0.5, 0.6, 0.9, 1.1};
    band.hi = {0.8, 0.9, 1.2, 1.3};
    CHECK(verdict_from_band(band) == CapacityVerdict::Limited);
    band.lo = {0.5, 0.9, 0.9, 1.1};
    band.hi = {0.8, 1.2, 1.2, 1.3};
    CHECK(verdict_from_band(band) == CapacityVerdict::Unlimited);
    band.lo = {0.5, 0.9, 1.1, 1.1, 0.4};
    band.hi = {0.8, 1.2, 1.3, 1.3, 0.6};
    CHECK(verdict_from_band(band) == CapacityVerdict::Mixed);
}

TEST_CASE("OR race benchmark is unlimited and coactive-like pooling is super") {
    const auto in = or_race(2000, 19);
    const auto v = capacity_verdict(in, capacity_or(in), 300, 1, 0);
    CHECK(*v.verdict == CapacityVerdict::Unlimited);

    auto fast = in;
    for (auto& t : fast.double_rts) t *= 0.4;
    const auto s = capacity_verdict(fast, capacity_or(fast), 300, 1, 0);
    CHECK(*s.verdict == CapacityVerdict::Super);
}

TEST_CASE("band at the median time covers 1 in about 95% of benchmark runs", "[property]") {
    const int runs = 500;
    int covered = 0;
    for (int r = 0; r < runs; ++r) {
        const auto in = or_race(300, 1000 + r);
        auto full = capacity_or(in);
        std::vector<double> pooled = in.double_rts;
        pooled.insert(pooled.end(), in.single_alpha_rts.begin(), in.single_alpha_rts.end());
        pooled.insert(pooled.end(), in.single_beta_rts.begin(), in.single_beta_rts.end());
        std::sort(pooled.begin(), pooled.end());
        const auto k = nearest(full.grid, detail::quantile_sorted(pooled, 0.5));
        CapacityCurve one;
        one.rule = StoppingRule::OR;
        one.grid = {full.grid[k]};
        one.c = {full.c[k]};
        const auto banded = capacity_verdict(in, one, 400, 77 + r, 1);
        covered += banded.band->lo[0] <= 1 && 1 <= banded.band->hi[0];
    }
    const double rate = static_cast<double>(covered) / runs;
    INFO("coverage " << rate);
    CHECK(rate >= 0.92);
    CHECK(rate <= 0.98);
}

TEST_CASE("capacity exports") {
    const auto in = identical(StoppingRule::OR);
    const auto c = capacity_or(in);
    std::ostringstream os;
    write_capacity_csv(os, c);
    CHECK(os.str().rfind("t_ms,c,lo,hi\n", 0) == 0);
    CHECK(os.str().find(",0.5,,\n") != std::string::npos);
    const auto j = to_json(c);
    CHECK(j["rule"] == "OR");
    CHECK(j["verdict"].is_null());
    CHECK(j["median_c"] == 0.5);
}
