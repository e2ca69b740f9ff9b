#include <sft/lft.hpp>
#include <sft/lft_oracle.hpp>

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

using namespace sft;

namespace {

struct Marginals {
    int a[2]; // P(A = a1) at alpha1, alpha2, in thousandths
    int b[2]; // P(B = b1) at beta1, beta2
};

// Four 2x2 tables on the k/1000 grid sharing the given marginals; P(a1,b1)
// is drawn uniformly from its admissible range in each condition.
FactorialTables grid_instance(const Marginals& m, std::mt19937_64& eng) {
    FactorialTables t;
    for (std::size_t c = 0; c < 4; ++c) {
        const int pa = m.a[c / 2], pb = m.b[c % 2];
        std::uniform_int_distribution<int> d(std::max(0, pa + pb - 1000), std::min(pa, pb));
        const int p11 = d(eng);
        const std::vector<int> k{p11, pa - p11, pb - p11, 1000 - pa - pb + p11};
        std::vector<double> p;
        for (int x : k) p.push_back(x / 1000.0);
        t[c] = make_joint_table(kFactorialConditions[c], 2, 2, p);
    }
    return t;
}

FactorialTables relabel_a(const FactorialTables& in) {
    auto out = in;
    for (auto& t : out) t.probs = {t(1, 0), t(1, 1), t(0, 0), t(0, 1)};
    return out;
}

FactorialTables swap_factors(const FactorialTables& in) {
    FactorialTables out;
    const std::size_t from[4] = {0, 2, 1, 3};
    for (std::size_t c = 0; c < 4; ++c) {
        const auto& s = in[from[c]];
        out[c] = make_joint_table(kFactorialConditions[c], 2, 2, {s(0, 0), s(1, 0), s(0, 1), s(1, 1)});
    }
    return out;
}

bool simplex_feasible(const FactorialTables& t) { return solve_lft(build_lft_system(t, 1e-9)).feasible; }

} // namespace

TEST_CASE("to_rational recovers short decimals exactly") {
    CHECK(to_rational(0.8811) == Rational(8811, 10000));
    CHECK(to_rational(0.1) == Rational(1, 10));
    CHECK(to_rational(-0.25) == Rational(-1, 4));
    CHECK(to_rational(0.0) == Rational(0));
    CHECK(to_rational(1.0 / 3.0) == Rational(1, 3));
}

TEST_CASE("oracle agrees with known instances") {
    FactorialTables ex;
    const std::array<std::vector<double>, 4> cells{{{.2, .2, .1, .5}, {.3, .1, .4, .2}, {.1, .5, .2, .2}, {.4, .2, .3, .1}}};
    for (std::size_t c = 0; c < 4; ++c) ex[c] = make_joint_table(kFactorialConditions[c], 2, 2, cells[c]);
    CHECK(exhaustive_lft_oracle(ex));

    FactorialTables pr;
    for (std::size_t c = 0; c < 4; ++c)
        pr[c] = make_joint_table(kFactorialConditions[c], 2, 2, c == 3 ? std::vector<double>{0, .5, .5, 0}
                                                                       : std::vector<double>{.5, 0, 0, .5});
    CHECK_FALSE(exhaustive_lft_oracle(pr));

    auto big = ex;
    big[0] = make_joint_table(Condition::A1B1, 3, 2, {.1, .1, .1, .1, .1, .5});
    CHECK_THROWS_AS(exhaustive_lft_oracle(big), std::invalid_argument);
}

TEST_CASE("simplex verdicts match the exact oracle on grid instances", "[property]") {
    std::mt19937_64 eng(20240611);
    std::uniform_int_distribution<int> marg(50, 950);
    int feasible = 0, infeasible = 0;
    for (int rep = 0; rep < 1200; ++rep) {
        // Every fourth instance uses all-1/2 marginals, where infeasible cases are common.
        const Marginals m = rep % 4 == 0 ? Marginals{{500, 500}, {500, 500}}
                                         : Marginals{{marg(eng), marg(eng)}, {marg(eng), marg(eng)}};
        const auto t = grid_instance(m, eng);
        const bool exact = exhaustive_lft_oracle(t);
        INFO("rep " << rep);
        REQUIRE(simplex_feasible(t) == exact);
        (exact ? feasible : infeasible) += 1;
    }
    CHECK(feasible > 100);
    CHECK(infeasible > 100);
}

TEST_CASE("feasibility is invariant under relabeling and swapping the factors", "[property]") {
    std::mt19937_64 eng(99);
    std::uniform_int_distribution<int> marg(100, 900);
    for (int rep = 0; rep < 300; ++rep) {
        const auto t = grid_instance({{marg(eng), marg(eng)}, {marg(eng), marg(eng)}}, eng);
        const bool base = exhaustive_lft_oracle(t);
        INFO("rep " << rep);
        CHECK(exhaustive_lft_oracle(relabel_a(t)) == base);
        CHECK(exhaustive_lft_oracle(swap_factors(t)) == base);
        CHECK(simplex_feasible(relabel_a(t)) == base);
        CHECK(simplex_feasible(swap_factors(t)) == base);
    }
}

TEST_CASE("tables built from a product of independent responses are feasible", "[property]") {
    std::mt19937_64 eng(5);
    std::uniform_int_distribution<int> marg(1, 9);
    for (int rep = 0; rep < 200; ++rep) {
        const double pa[2] = {marg(eng) / 10.0, marg(eng) / 10.0};
        const double pb[2] = {marg(eng) / 10.0, marg(eng) / 10.0};
        FactorialTables t;
        for (std::size_t c = 0; c < 4; ++c) {
            const double a = pa[c / 2], b = pb[c % 2];
            t[c] = make_joint_table(kFactorialConditions[c], 2, 2, {a * b, a * (1 - b), (1 - a) * b, (1 - a) * (1 - b)});
        }
        CHECK(simplex_feasible(t));
    }
}
