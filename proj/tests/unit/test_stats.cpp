#include "helpers.hpp"

#include <sft/stats.hpp>

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace sft;
using Catch::Approx;

namespace {

double frac_le(const std::vector<double>& xs, double t) {
    return static_cast<double>(std::count_if(xs.begin(), xs.end(), [t](double v) { return v <= t; })) /
           static_cast<double>(xs.size());
}

// sup over the union grid, evaluating both ECDFs by direct counting.
struct BruteKs {
    double two = 0, y_minus_x = 0, x_minus_y = 0;
};

BruteKs brute_ks(const std::vector<double>& x, const std::vector<double>& y) {
    std::set<double> grid(x.begin(), x.end());
    grid.insert(y.begin(), y.end());
    BruteKs b;
    for (double t : grid) {
        const double d = frac_le(x, t) - frac_le(y, t);
        b.two = std::max(b.two, std::abs(d));
        b.x_minus_y = std::max(b.x_minus_y, d);
        b.y_minus_x = std::max(b.y_minus_x, -d);
    }
    return b;
}

long double q_series(long double lambda) {
    long double s = 0;
    for (int k = 1; k <= 2000; ++k) s += ((k % 2) ? 1.0L : -1.0L) * std::exp(-2.0L * k * k * lambda * lambda);
    return 2 * s;
}

std::vector<double> rounded(std::vector<double> v, double step) {
    for (auto& x : v) x = std::round(x / step) * step;
    return v;
}

} // namespace

TEST_CASE("ecdf steps", "[stats]") {
    const auto a = ecdf(std::vector<double>{1, 2, 3});
    CHECK(a.grid == std::vector<double>{1, 2, 3});
    CHECK(a.values == std::vector<double>{1.0 / 3, 2.0 / 3, 1.0});
    const auto b = ecdf(std::vector<double>{5, 5, 5});
    CHECK(b.grid == std::vector<double>{5});
    CHECK(b.values == std::vector<double>{1.0});
    const auto c = ecdf(std::vector<double>{2, 1, 2, 4});
    CHECK(c.grid == std::vector<double>{1, 2, 4});
    CHECK(c.values == std::vector<double>{0.25, 0.75, 1.0});
    CHECK(c.at(0.5) == 0.0);
    CHECK(c.at(2) == 0.75);
    CHECK(c.at(3.9) == 0.75);
    CHECK_THROWS_AS(ecdf(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(ecdf(std::vector<double>{1, NAN}), std::invalid_argument);
}

TEST_CASE("survival is one minus the ecdf", "[stats]") {
    const auto s = survival(std::vector<double>{1, 2, 3});
    CHECK(s.at(2) == Approx(1.0 / 3));
    CHECK(s.at(0) == 1.0);
    CHECK(s.at(3) == 0.0);
    CHECK(s.at(100) == 0.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto xs = rounded(sft::test::normal_sample(200, 0, 3, seed), 0.5);
        const auto f = ecdf(xs);
        const auto sv = survival(xs);
        REQUIRE(f.grid == sv.grid);
        for (std::size_t i = 0; i < f.size(); ++i) {
            CHECK(sv.values[i] == 1.0 - f.values[i]);
            CHECK(f.values[i] == frac_le(xs, f.grid[i]));
        }
        CHECK(std::is_sorted(sv.values.rbegin(), sv.values.rend()));
    }
}

TEST_CASE("Nelson-Aalen cumulative hazard", "[stats]") {
    const auto h = nelson_aalen(std::vector<double>{1, 2, 3});
    CHECK(h.values[0] == Approx(1.0 / 3));
    CHECK(h.values[1] == Approx(1.0 / 3 + 1.0 / 2));
    CHECK(h.values[2] == Approx(1.0 / 3 + 1.0 / 2 + 1.0));
    CHECK(nelson_aalen(std::vector<double>{7}).values == std::vector<double>{1.0});
    const auto tie = nelson_aalen(std::vector<double>{4, 4});
    CHECK(tie.grid == std::vector<double>{4});
    CHECK(tie.values == std::vector<double>{1.0});
    CHECK(h.at(0.5) == 0.0);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto n = 10 + 37 * seed;
        const auto xs = sft::test::exp_sample(n, 0.01, 100, seed);
        const auto c = nelson_aalen(xs);
        REQUIRE(c.size() == n);
        long double harmonic = 0;
        for (std::size_t i = 1; i <= n; ++i) harmonic += 1.0L / static_cast<long double>(i);
        CHECK(c.values.back() == Approx(static_cast<double>(harmonic)).epsilon(1e-12));
        CHECK(std::is_sorted(c.values.begin(), c.values.end()));
    }
}

TEST_CASE("log cdf", "[stats]") {
    CHECK(log_cdf(std::vector<double>{1, 2}).at(1) == Approx(std::log(0.5)));
    CHECK(log_cdf(std::vector<double>{1, 2}).at(5) == 0.0);
    CHECK(log_cdf(std::vector<double>{1, 2, 3, 4}).at(3) == Approx(std::log(0.75)));
    const auto k = log_cdf(std::vector<double>{3, 1, 2});
    CHECK(std::isinf(k.at(0.5)));
    for (double v : k.values) CHECK(v <= 0.0);
}

TEST_CASE("curve CSV", "[stats]") {
    std::ostringstream os;
    write_curve_csv(os, ecdf(std::vector<double>{2, 1, 2, 4}), "F");
    CHECK(os.str() == "t_ms,F\n1,0.25\n2,0.75\n4,1\n");
}

TEST_CASE("KS worked cases", "[stats][ks]") {
    const std::vector<double> a{1, 2, 3};
    const auto same = ks_two_sample(a, a);
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == 1.0);
    CHECK(ks_two_sample(a, std::vector<double>{4, 5, 6}).statistic == 1.0);
    CHECK(ks_two_sample(std::vector<double>{1, 3}, std::vector<double>{2, 4}).statistic == 0.5);
    CHECK_THROWS_AS(ks_two_sample(std::vector<double>{}, a), std::invalid_argument);

    // x slower than y: F_y - F_x is large, so GreaterFirst (S_x >= S_y) is significant.
    const auto slow = sft::test::exp_sample(300, 0.01, 300, 1);
    const auto fast = sft::test::exp_sample(300, 0.01, 200, 2);
    const auto fwd = ks_two_sample(slow, fast, KsSided::GreaterFirst);
    const auto rev = ks_two_sample(slow, fast, KsSided::GreaterSecond);
    CHECK(fwd.p_value < 1e-6);
    CHECK(rev.p_value > 0.5);
}

TEST_CASE("KS statistics equal a brute-force supremum over the union grid", "[stats][ks]") {
    std::mt19937_64 eng(42);
    for (int rep = 0; rep < 200; ++rep) {
        const auto n1 = 1 + eng() % 60, n2 = 1 + eng() % 60;
        const double step = rep % 2 ? 1.0 : 0.001;
        const auto x = rounded(sft::test::normal_sample(n1, 0, 5, eng()), step);
        const auto y = rounded(sft::test::normal_sample(n2, 0.5, 5, eng()), step);
        const auto b = brute_ks(x, y);
        CHECK(ks_two_sample(x, y).statistic == Approx(b.two).margin(1e-15));
        CHECK(ks_two_sample(x, y, KsSided::GreaterFirst).statistic == Approx(b.y_minus_x).margin(1e-15));
        CHECK(ks_two_sample(x, y, KsSided::GreaterSecond).statistic == Approx(b.x_minus_y).margin(1e-15));
        // symmetry
        CHECK(ks_two_sample(y, x).statistic == ks_two_sample(x, y).statistic);
        CHECK(ks_two_sample(y, x, KsSided::GreaterFirst).statistic ==
              ks_two_sample(x, y, KsSided::GreaterSecond).statistic);
    }
}

TEST_CASE("KS p-values", "[stats][ks]") {
    // The two evaluation branches agree with a long alternating series where it converges.
    for (double lambda = 0.45; lambda < 2.5; lambda += 0.01)
        CHECK(kolmogorov_q(lambda) == Approx(static_cast<double>(q_series(lambda))).margin(1e-13));
    CHECK(kolmogorov_q(1.3581) == Approx(0.05).margin(1e-4));
    CHECK(kolmogorov_q(1.6276) == Approx(0.01).margin(1e-4));
    CHECK(kolmogorov_q(0) == 1.0);
    CHECK(kolmogorov_q(0.05) == 1.0);
    CHECK(kolmogorov_q(10) < 1e-80);
    for (double lambda = 0; lambda < 3; lambda += 0.013) {
        const double q = kolmogorov_q(lambda);
        CHECK(q >= 0.0);
        CHECK(q <= 1.0);
    }

    const std::vector<double> x{1, 2, 3, 4}, y{2.5, 3.5, 4.5, 5.5, 6.5};
    const auto r = ks_two_sample(x, y, KsSided::GreaterFirst);
    const double ne = 4.0 * 5.0 / 9.0;
    CHECK(r.p_value == Approx(std::exp(-2 * r.statistic * r.statistic * ne)));
    CHECK(r.n1 == 4);
    CHECK(r.n2 == 5);
}
