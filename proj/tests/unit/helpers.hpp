#pragma once

#include <sft/trial_store.hpp>

#include <random>
#include <string>
#include <vector>

namespace sft::test {

inline TrialRecord rec(double alpha, double beta, double a, double b, double rt, Channels ch = Channels::Double,
                       std::uint64_t idx = 0) {
    TrialRecord r;
    r.experiment_id = "exp";
    r.subject_id = "s1";
    r.trial_index = idx;
    r.alpha = alpha;
    r.beta = beta;
    r.a_final = a;
    r.b_final = b;
    r.rt_ms = rt;
    r.channels = ch;
    return r;
}

inline std::vector<double> normal_sample(std::size_t n, double mu, double sd, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> d(mu, sd);
    std::vector<double> v(n);
    for (auto& x : v) x = d(eng);
    return v;
}

inline std::vector<double> exp_sample(std::size_t n, double rate, double shift, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::exponential_distribution<double> d(rate);
    std::vector<double> v(n);
    for (auto& x : v) x = shift + d(eng);
    return v;
}

} // namespace sft::test
