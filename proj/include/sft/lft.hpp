#pragma once

// Linear Feasibility Test for selective influence on discretized responses:
// joint tables per factorial condition, the marginal-selectivity battery,
// marginal repair, and construction / solution of the feasibility system over
// the joint quadruple probabilities Q.

#include <sft/detail/text.hpp>
#include <sft/errors.hpp>
#include <sft/simplex.hpp>
#include <sft/stats.hpp>
#include <sft/trial_store.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sft {

/// Discrete joint distribution of the binned responses (A, B) under one condition.
struct JointTable {
    Condition condition = Condition::A1B1;
    std::vector<std::string> a_bins;
    std::vector<std::string> b_bins;
    /// m x n, row-major: probs[i * n + j] = P(A = a_i, B = b_j).
    std::vector<double> probs;
    std::size_t count = 0;

    std::size_t m() const noexcept { return a_bins.size(); }
    std::size_t n() const noexcept { return b_bins.size(); }

    double operator()(std::size_t i, std::size_t j) const { return probs[i * n() + j]; }
    double& operator()(std::size_t i, std::size_t j) { return probs[i * n() + j]; }

    std::vector<double> a_marginal() const {
        std::vector<double> out(m(), 0.0);
        for (std::size_t i = 0; i < m(); ++i)
            for (std::size_t j = 0; j < n(); ++j) out[i] += (*this)(i, j);
        return out;
    }

    std::vector<double> b_marginal() const {
        std::vector<double> out(n(), 0.0);
        for (std::size_t i = 0; i < m(); ++i)
            for (std::size_t j = 0; j < n(); ++j) out[j] += (*this)(i, j);
        return out;
    }
};

/// Joint tables of the four double-channel conditions, ordered 11, 12, 21, 22.
using FactorialTables = std::array<JointTable, 4>;

/// Table with default bin labels a1..am, b1..bn.
inline JointTable make_joint_table(Condition c, std::size_t m, std::size_t n, std::vector<double> probs,
                                   std::size_t count = 0) {
    if (probs.size() != m * n) throw std::invalid_argument("make_joint_table: expected m*n probabilities");
    JointTable t;
    t.condition = c;
    for (std::size_t i = 0; i < m; ++i) t.a_bins.push_back("a" + std::to_string(i + 1));
    for (std::size_t j = 0; j < n; ++j) t.b_bins.push_back("b" + std::to_string(j + 1));
    t.probs = std::move(probs);
    t.count = count;
    return t;
}

inline void validate_table(const JointTable& t, double tol = 1e-12) {
    if (t.m() == 0 || t.n() == 0 || t.probs.size() != t.m() * t.n())
        throw std::invalid_argument("joint table has inconsistent dimensions");
    double sum = 0;
    for (double p : t.probs) {
        if (!std::isfinite(p) || p < 0) throw std::invalid_argument("joint table has a negative or non-finite cell");
        sum += p;
    }
    if (std::abs(sum - 1.0) > tol) throw std::invalid_argument("joint table does not sum to 1");
}

/// Labels for the intervals induced by sorted cuts: (-inf,c1], (c1,c2], ..., (ck,inf).
inline std::vector<std::string> interval_labels(const std::vector<double>& cuts) {
    std::vector<std::string> out;
    std::string lo = "-inf";
    for (double c : cuts) {
        const auto hi = detail::format_double(c);
        out.push_back("(" + lo + "," + hi + "]");
        lo = hi;
    }
    out.push_back("(" + lo + ",inf)");
    return out;
}

/// Bin index of v: a value equal to a cut falls in the lower bin.
inline std::size_t bin_of(double v, const std::vector<double>& cuts) {
    return static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
}

/// Relative-frequency tables of the binned responses for the four factorial conditions.
inline FactorialTables discretize_responses(const std::array<ResponseSample, 4>& samples,
                                            const std::vector<double>& a_cuts, const std::vector<double>& b_cuts) {
    const auto check_cuts = [](const std::vector<double>& cuts) {
        for (std::size_t i = 0; i < cuts.size(); ++i) {
            if (!std::isfinite(cuts[i])) throw std::invalid_argument("cut values must be finite");
            if (i > 0 && !(cuts[i] > cuts[i - 1])) throw std::invalid_argument("cut values must be strictly increasing");
        }
    };
    check_cuts(a_cuts);
    check_cuts(b_cuts);
    const auto a_labels = interval_labels(a_cuts);
    const auto b_labels = interval_labels(b_cuts);

    FactorialTables out;
    for (std::size_t c = 0; c < 4; ++c) {
        const auto& s = samples[c];
        if (s.a.empty() || s.a.size() != s.b.size())
            throw std::invalid_argument("condition " + std::string(to_string(kFactorialConditions[c])) +
                                        " has no paired responses");
        JointTable t;
        t.condition = kFactorialConditions[c];
        t.a_bins = a_labels;
        t.b_bins = b_labels;
        t.probs.assign(a_labels.size() * b_labels.size(), 0.0);
        std::vector<std::size_t> counts(t.probs.size(), 0);
        for (std::size_t k = 0; k < s.a.size(); ++k) ++counts[bin_of(s.a[k], a_cuts) * t.n() + bin_of(s.b[k], b_cuts)];
        const auto total = static_cast<double>(s.a.size());
        for (std::size_t k = 0; k < counts.size(); ++k) t.probs[k] = static_cast<double>(counts[k]) / total;
        t.count = s.a.size();
        out[c] = std::move(t);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Marginal selectivity

struct MarginalTest {
    /// "A" or "B".
    std::string variable;
    /// Level held fixed, e.g. "alpha1".
    std::string fixed_level;
    Condition first = Condition::A1B1;
    Condition second = Condition::A1B2;
    KsResult ks;
    bool pass = true;
};

struct MarginalSelectivityReport {
    std::array<MarginalTest, 4> tests;
    double alpha_sig = 0.05;
    /// Per-test threshold alpha_sig / 4 (Bonferroni).
    double threshold = 0.0125;
    bool pass = true;
};

/// Two-sided KS tests on the raw responses: A across beta levels at alpha1 and
/// at alpha2, B across alpha levels at beta1 and at beta2. Passes iff all four
/// p-values exceed alpha_sig / 4.
inline MarginalSelectivityReport marginal_selectivity_battery(const std::array<ResponseSample, 4>& s,
                                                              double alpha_sig = 0.05) {
    if (!(alpha_sig > 0 && alpha_sig < 1)) throw std::invalid_argument("alpha_sig must lie in (0, 1)");
    for (const auto& c : s)
        if (c.a.empty() || c.b.empty()) throw std::invalid_argument("marginal selectivity needs four nonempty conditions");
    MarginalSelectivityReport r;
    r.alpha_sig = alpha_sig;
    r.threshold = alpha_sig / 4.0;
    using C = Condition;
    r.tests[0] = {"A", "alpha1", C::A1B1, C::A1B2, ks_two_sample(s[0].a, s[1].a), true};
    r.tests[1] = {"A", "alpha2", C::A2B1, C::A2B2, ks_two_sample(s[2].a, s[3].a), true};
    r.tests[2] = {"B", "beta1", C::A1B1, C::A2B1, ks_two_sample(s[0].b, s[2].b), true};
    r.tests[3] = {"B", "beta2", C::A1B2, C::A2B2, ks_two_sample(s[1].b, s[3].b), true};
    for (auto& t : r.tests) {
        t.pass = t.ks.p_value > r.threshold;
        r.pass = r.pass && t.pass;
    }
    return r;
}

/// Table-style summary: one column per comparison, "D(p)" entries.
inline std::string format_marginal_report(const MarginalSelectivityReport& r) {
    std::ostringstream os;
    os << "comparison        D(p)\n";
    for (const auto& t : r.tests) {
        os << t.variable << " @ " << t.fixed_level << " (" << to_string(t.first) << " vs " << to_string(t.second)
           << ")  " << detail::format_fixed(t.ks.statistic, 3) << "(" << detail::format_fixed(t.ks.p_value, 3) << ")"
           << (t.pass ? "" : "  *") << '\n';
    }
    os << "marginal selectivity: " << (r.pass ? "Yes" : "No") << " (alpha = " << detail::format_double(r.alpha_sig)
       << "/4)\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Marginal repair

class RepairError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Strict keeps P(a1,b1) and fails when that forces a negative cell.
/// ClampToFeasible first moves P(a1,b1) to the nearest value that keeps all
/// four cells nonnegative under the new marginals.
enum class RepairPolicy { Strict, ClampToFeasible };

inline std::string_view to_string(RepairPolicy p) { return p == RepairPolicy::Strict ? "strict" : "clamp"; }

/// 2x2 repair imposing the averaged marginals P(a1) = pbar_a1, P(b1) = pbar_b1
/// while keeping P(a1,b1). Cells in order (a1b1, a1b2, a2b1, a2b2).
inline std::array<double, 4> repair_cells(double p11, double pbar_a1, double pbar_b1,
                                          RepairPolicy policy = RepairPolicy::Strict) {
    if (policy == RepairPolicy::ClampToFeasible)
        p11 = std::clamp(p11, std::max(0.0, pbar_a1 + pbar_b1 - 1.0), std::min(pbar_a1, pbar_b1));
    std::array<double, 4> c{p11, pbar_a1 - p11, pbar_b1 - p11, 1.0 - pbar_a1 - pbar_b1 + p11};
    for (auto& v : c) {
        if (v < -1e-12) throw RepairError("repair produced negative probability");
        if (v < 0) v = 0;
    }
    return c;
}

namespace detail {

struct AveragedMarginals {
    std::array<std::vector<double>, 2> a; ///< A-marginal at alpha1, alpha2
    std::array<std::vector<double>, 2> b; ///< B-marginal at beta1, beta2
};

inline AveragedMarginals averaged_marginals(const FactorialTables& t) {
    const auto avg = [](std::vector<double> x, const std::vector<double>& y) {
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = (x[k] + y[k]) / 2.0;
        return x;
    };
    AveragedMarginals m;
    m.a[0] = avg(t[0].a_marginal(), t[1].a_marginal());
    m.a[1] = avg(t[2].a_marginal(), t[3].a_marginal());
    m.b[0] = avg(t[0].b_marginal(), t[2].b_marginal());
    m.b[1] = avg(t[1].b_marginal(), t[3].b_marginal());
    return m;
}

inline void check_same_shape(const FactorialTables& t, double sum_tol) {
    for (const auto& x : t) {
        validate_table(x, sum_tol);
        if (x.m() != t[0].m() || x.n() != t[0].n()) throw std::invalid_argument("joint tables differ in shape");
    }
}

/// Iterative proportional fitting of one table to the given marginals.
inline void fit_marginals(JointTable& t, const std::vector<double>& rows, const std::vector<double>& cols) {
    constexpr int kMaxSweeps = 10000;
    constexpr double kTarget = 1e-13;
    constexpr double kAccept = 1e-10;
    const std::size_t m = t.m(), n = t.n();
    double dev = 0;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        const auto rs = t.a_marginal();
        for (std::size_t i = 0; i < m; ++i) {
            if (rs[i] == 0) {
                if (rows[i] > 0) throw RepairError("averaged marginal puts mass on an empty row");
                continue;
            }
            const double f = rows[i] / rs[i];
            for (std::size_t j = 0; j < n; ++j) t(i, j) *= f;
        }
        const auto cs = t.b_marginal();
        for (std::size_t j = 0; j < n; ++j) {
            if (cs[j] == 0) {
                if (cols[j] > 0) throw RepairError("averaged marginal puts mass on an empty column");
                continue;
            }
            const double f = cols[j] / cs[j];
            for (std::size_t i = 0; i < m; ++i) t(i, j) *= f;
        }
        dev = 0;
        const auto rs2 = t.a_marginal();
        for (std::size_t i = 0; i < m; ++i) dev = std::max(dev, std::abs(rs2[i] - rows[i]));
        if (dev <= kTarget) return;
    }
    if (dev > kAccept) throw RepairError("marginal fitting did not converge");
}

} // namespace detail

/// Replaces each pair of marginals that selective influence requires to be
/// equal by their average. 2x2 tables keep P(a1,b1) and adjust the other three
/// cells; larger tables are fitted to the averaged marginals by iterative
/// proportional fitting.
/// Input tables may be rounded (cell sums within 1e-3 of 1); 2x2 output sums
/// to 1 by construction. `policy` applies to 2x2 tables only.
inline FactorialTables enforce_marginal_equality(const FactorialTables& tables,
                                                 RepairPolicy policy = RepairPolicy::Strict) {
    detail::check_same_shape(tables, 1e-3);
    const auto avg = detail::averaged_marginals(tables);
    FactorialTables out = tables;
    for (std::size_t c = 0; c < 4; ++c) {
        const std::size_t i = c / 2, j = c % 2;
        auto& t = out[c];
        if (t.m() == 2 && t.n() == 2) {
            const auto cells = repair_cells(t(0, 0), avg.a[i][0], avg.b[j][0], policy);
            t.probs.assign(cells.begin(), cells.end());
        } else {
            detail::fit_marginals(t, avg.a[i], avg.b[j]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Feasibility system

class MarginalMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Equality system over Q(a_alpha1, a_alpha2, b_beta1, b_beta2) >= 0. Variables
/// are ordered lexicographically with b_beta2 varying fastest; rows are grouped
/// by condition (11, 12, 21, 22) and then by cell (a, b) row-major.
struct LftSystem {
    std::size_t m = 0;
    std::size_t n = 0;
    std::vector<std::uint8_t> matrix; ///< rows() x cols(), row-major
    std::vector<double> rhs;
    std::vector<std::array<std::size_t, 4>> variable_labels;

    std::size_t rows() const noexcept { return 4 * m * n; }
    std::size_t cols() const noexcept { return m * m * n * n; }
    std::uint8_t at(std::size_t r, std::size_t c) const { return matrix[r * cols() + c]; }
};

inline std::size_t lft_variable_index(std::size_t m, std::size_t n, std::size_t a1, std::size_t a2, std::size_t b1,
                                      std::size_t b2) {
    return ((a1 * m + a2) * n + b1) * n + b2;
}

/// Throws MarginalMismatch unless the four tables satisfy exact marginal
/// selectivity within `tol`.
inline void require_marginal_equality(const FactorialTables& t, double tol = 1e-12) {
    detail::check_same_shape(t, 1e-9);
    const auto close = [tol](const std::vector<double>& x, const std::vector<double>& y) {
        for (std::size_t k = 0; k < x.size(); ++k)
            if (std::abs(x[k] - y[k]) > tol) return false;
        return true;
    };
    if (!close(t[0].a_marginal(), t[1].a_marginal()) || !close(t[2].a_marginal(), t[3].a_marginal()) ||
        !close(t[0].b_marginal(), t[2].b_marginal()) || !close(t[1].b_marginal(), t[3].b_marginal()))
        throw MarginalMismatch("joint tables violate marginal selectivity; repair them before building the system");
}

inline LftSystem build_lft_system(const FactorialTables& tables, double tol = 1e-12) {
    require_marginal_equality(tables, tol);
    LftSystem s;
    s.m = tables[0].m();
    s.n = tables[0].n();
    const std::size_t m = s.m, n = s.n;
    s.matrix.assign(s.rows() * s.cols(), 0);
    s.rhs.assign(s.rows(), 0.0);
    s.variable_labels.resize(s.cols());
    for (std::size_t a1 = 0; a1 < m; ++a1)
        for (std::size_t a2 = 0; a2 < m; ++a2)
            for (std::size_t b1 = 0; b1 < n; ++b1)
                for (std::size_t b2 = 0; b2 < n; ++b2) {
                    const auto v = lft_variable_index(m, n, a1, a2, b1, b2);
                    s.variable_labels[v] = {a1, a2, b1, b2};
                    for (std::size_t c = 0; c < 4; ++c) {
                        const std::size_t a = c / 2 == 0 ? a1 : a2;
                        const std::size_t b = c % 2 == 0 ? b1 : b2;
                        s.matrix[(c * m * n + a * n + b) * s.cols() + v] = 1;
                    }
                }
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < n; ++b) s.rhs[c * m * n + a * n + b] = tables[c](a, b);
    return s;
}

enum class LftMethod { Simplex, Exhaustive };

struct LftVerdict {
    bool feasible = false;
    std::optional<std::vector<double>> solution;
    /// Max absolute equality violation of the returned point.
    double residual = 0;
    /// Phase-one optimum (total artificial slack).
    double objective = 0;
    LftMethod method = LftMethod::Simplex;
};

/// max_r |(matrix q)_r - rhs_r|.
inline double lft_residual(const LftSystem& s, const std::vector<double>& q) {
    if (q.size() != s.cols()) throw std::invalid_argument("lft_residual: wrong vector length");
    double worst = 0;
    for (std::size_t r = 0; r < s.rows(); ++r) {
        double acc = 0;
        for (std::size_t c = 0; c < s.cols(); ++c)
            if (s.at(r, c)) acc += q[c];
        worst = std::max(worst, std::abs(acc - s.rhs[r]));
    }
    return worst;
}

inline constexpr double kLftFeasibilityTolerance = 1e-9;

/// Decides whether a nonnegative Q reproduces all four joint tables.
inline LftVerdict solve_lft(const LftSystem& s) {
    std::vector<double> a(s.matrix.begin(), s.matrix.end());
    const auto res = phase_one<double>(a, s.rows(), s.cols(), s.rhs);
    LftVerdict v;
    v.objective = res.objective;
    v.method = LftMethod::Simplex;
    if (res.objective > kLftFeasibilityTolerance) {
        v.feasible = false;
        v.residual = lft_residual(s, res.x);
        return v;
    }
    auto q = res.x;
    for (auto& x : q)
        if (x < 0 && x > -1e-12) x = 0;
    v.residual = lft_residual(s, q);
    double total = 0;
    for (double x : q) total += x;
    if (v.residual > kLftFeasibilityTolerance || std::abs(total - 1.0) > kLftFeasibilityTolerance)
        throw NumericalError("solve_lft: witness fails verification (residual " + detail::format_double(v.residual) + ")");
    v.feasible = true;
    v.solution = std::move(q);
    return v;
}

inline nlohmann::ordered_json to_json(const LftVerdict& v) {
    nlohmann::ordered_json j;
    j["feasible"] = v.feasible;
    j["residual"] = v.residual;
    j["objective"] = v.objective;
    j["method"] = v.method == LftMethod::Simplex ? "simplex" : "exhaustive";
    if (v.solution) j["witness"] = *v.solution;
    else j["witness"] = nullptr;
    return j;
}

// ---------------------------------------------------------------------------
// Table import / export

inline void write_tables_csv(std::ostream& out, const FactorialTables& t) {
    out << "condition,a_bin,b_bin,prob\n";
    for (const auto& x : t)
        for (std::size_t i = 0; i < x.m(); ++i)
            for (std::size_t j = 0; j < x.n(); ++j)
                out << to_string(x.condition) << ',' << detail::csv_escape(x.a_bins[i]) << ','
                    << detail::csv_escape(x.b_bins[j]) << ',' << detail::format_double(x(i, j)) << '\n';
}

/// Reads the CSV block form. Bins keep their order of first appearance.
inline FactorialTables read_tables_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("joint-table CSV is empty");
    const auto header = detail::split_csv_line(line);
    if (!header || *header != std::vector<std::string>{"condition", "a_bin", "b_bin", "prob"})
        throw SchemaError("joint-table CSV header must be condition,a_bin,b_bin,prob");
    struct Raw {
        std::vector<std::string> a, b;
        std::map<std::pair<std::string, std::string>, double> p;
    };
    std::map<std::string, Raw> raw;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = detail::split_csv_line(line);
        if (!f || f->size() != 4) throw SchemaError("expected 4 fields", row);
        const auto p = detail::parse_double((*f)[3]);
        if (!p) throw SchemaError("prob is not numeric", row);
        auto& r = raw[(*f)[0]];
        if (std::find(r.a.begin(), r.a.end(), (*f)[1]) == r.a.end()) r.a.push_back((*f)[1]);
        if (std::find(r.b.begin(), r.b.end(), (*f)[2]) == r.b.end()) r.b.push_back((*f)[2]);
        r.p[{(*f)[1], (*f)[2]}] = *p;
    }
    FactorialTables out;
    for (std::size_t c = 0; c < 4; ++c) {
        const auto name = std::string(to_string(kFactorialConditions[c]));
        const auto it = raw.find(name);
        if (it == raw.end()) throw SchemaError("joint-table CSV lacks condition " + name);
        JointTable t;
        t.condition = kFactorialConditions[c];
        t.a_bins = it->second.a;
        t.b_bins = it->second.b;
        t.probs.assign(t.m() * t.n(), 0.0);
        for (std::size_t i = 0; i < t.m(); ++i)
            for (std::size_t j = 0; j < t.n(); ++j) {
                const auto cell = it->second.p.find({t.a_bins[i], t.b_bins[j]});
                if (cell == it->second.p.end()) throw SchemaError("joint-table CSV lacks a cell of " + name);
                t(i, j) = cell->second;
            }
        out[c] = std::move(t);
    }
    return out;
}

/// Human-readable layout: one grid per condition with row and column marginals.
inline std::string format_tables_report(const FactorialTables& tables) {
    std::ostringstream os;
    for (const auto& t : tables) {
        os << to_string(t.condition);
        if (t.count) os << " (n=" << t.count << ")";
        os << '\n' << "        ";
        for (const auto& b : t.b_bins) os << ' ' << b;
        os << '\n';
        const auto am = t.a_marginal();
        for (std::size_t i = 0; i < t.m(); ++i) {
            os << "  " << t.a_bins[i];
            for (std::size_t j = 0; j < t.n(); ++j) os << ' ' << detail::format_fixed(t(i, j), 4);
            os << " | " << detail::format_fixed(am[i], 4) << '\n';
        }
        os << "  marg";
        for (double v : t.b_marginal()) os << ' ' << detail::format_fixed(v, 4);
        os << "\n\n";
    }
    return os.str();
}

} // namespace sft
