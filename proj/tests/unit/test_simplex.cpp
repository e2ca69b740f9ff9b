#include <sft/simplex.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

using namespace sft;
using Catch::Approx;

namespace {

double residual(const std::vector<double>& a, std::size_t rows, std::size_t cols, const std::vector<double>& b,
                const std::vector<double>& x) {
    double worst = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0;
        for (std::size_t c = 0; c < cols; ++c) acc += a[r * cols + c] * x[c];
        worst = std::max(worst, std::abs(acc - b[r]));
    }
    return worst;
}

} // namespace

TEST_CASE("phase one finds a point of a small feasible system") {
    const std::vector<double> a{1, 1, 1, -1};
    const std::vector<double> b{1, 0};
    const auto res = phase_one<double>(a, 2, 2, b);
    CHECK(res.objective == Approx(0).margin(1e-12));
    CHECK(res.x[0] == Approx(0.5));
    CHECK(res.x[1] == Approx(0.5));
}

TEST_CASE("phase one reports the slack of an inconsistent system") {
    // x1 + x2 = 1 and x1 + x2 = 3 cannot both hold; the least total slack is 2.
    const std::vector<double> a{1, 1, 1, 1};
    const std::vector<double> b{1, 3};
    const auto res = phase_one<double>(a, 2, 2, b);
    CHECK(res.objective == Approx(2.0));
}

TEST_CASE("nonnegativity makes a consistent system infeasible") {
    const std::vector<double> a{1, 1};
    const std::vector<double> b{-1};
    const auto res = phase_one<double>(a, 1, 2, b);
    CHECK(res.objective == Approx(1.0));
}

TEST_CASE("negative right-hand sides are handled by row sign flips") {
    const std::vector<double> a{-1, 0, 0, -1};
    const std::vector<double> b{-2, -3};
    const auto res = phase_one<double>(a, 2, 2, b);
    CHECK(res.objective == Approx(0).margin(1e-12));
    CHECK(res.x[0] == Approx(2));
    CHECK(res.x[1] == Approx(3));
}

TEST_CASE("phase one validates dimensions") {
    const std::vector<double> a{1, 1, 1};
    const std::vector<double> b{1};
    CHECK_THROWS_AS(phase_one<double>(a, 1, 2, b), std::invalid_argument);
}

TEST_CASE("pivot limit raises NumericalError") {
    const std::vector<double> a{1, 1, 1, -1};
    const std::vector<double> b{1, 0};
    PhaseOneOptions<double> opt;
    opt.max_pivots = 0;
    CHECK_THROWS_AS(phase_one<double>(a, 2, 2, b, opt), NumericalError);
}

TEST_CASE("planted nonnegative solutions are recovered", "[property]") {
    std::mt19937_64 eng(42);
    std::uniform_int_distribution<int> coef(-3, 3);
    std::uniform_real_distribution<double> val(0.0, 1.0);
    std::bernoulli_distribution zero(0.4);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t rows = 2 + rep % 6, cols = rows + 1 + rep % 5;
        std::vector<double> a(rows * cols), x(cols), b(rows, 0.0);
        for (auto& v : a) v = coef(eng);
        for (auto& v : x) v = zero(eng) ? 0.0 : val(eng);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) b[r] += a[r * cols + c] * x[c];
        const auto res = phase_one<double>(a, rows, cols, b);
        INFO("rep " << rep);
        REQUIRE(res.objective == Approx(0).margin(1e-9));
        for (double v : res.x) CHECK(v >= -1e-12);
        CHECK(residual(a, rows, cols, b, res.x) < 1e-9);
    }
}

TEST_CASE("phase one is deterministic") {
    const std::vector<double> a{1, 1, 1, 0, 0, 1, 1, 1};
    const std::vector<double> b{1, 1};
    const auto r1 = phase_one<double>(a, 2, 4, b);
    const auto r2 = phase_one<double>(a, 2, 4, b);
    CHECK(r1.x == r2.x);
    CHECK(r1.pivots == r2.pivots);
}
