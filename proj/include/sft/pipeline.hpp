#pragma once

// End-to-end analysis: filters, partition, marginal selectivity, LFT,
// dominance, SIC/MIC with classification, and capacity. Statistical failures
// are recorded in the report; only I/O and schema problems throw.

#include <sft/capacity.hpp>
#include <sft/contrast.hpp>
#include <sft/errors.hpp>
#include <sft/lft.hpp>
#include <sft/rng.hpp>
#include <sft/stats.hpp>
#include <sft/svg.hpp>
#include <sft/trial_store.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sft {

inline constexpr const char* kReportSchema = "sft-report/1";

enum class FilterOrder { ResponseThenRt, RtThenResponse };

struct AnalysisConfig {
    std::string input;
    double split_alpha = 50;
    double split_beta = 50;
    /// Response discretization cuts for the LFT; empty means the factor split.
    std::vector<double> a_cuts;
    std::vector<double> b_cuts;
    LevelDirection direction;
    double alpha_sig = 0.05;
    double sft_alpha = 0.33;
    std::size_t n_perm = 10000;
    std::size_t n_boot = 2000;
    std::uint64_t seed = 1;
    double response_k = 3;
    double rt_k = 5;
    FilterOrder filter_order = FilterOrder::ResponseThenRt;
    StoppingRule capacity_rule = StoppingRule::AND;
    RepairPolicy repair_policy = RepairPolicy::Strict;
    unsigned threads = 0;

    void validate() const {
        if (!(alpha_sig > 0 && alpha_sig < 1)) throw std::invalid_argument("alpha_sig must lie in (0, 1)");
        if (!(sft_alpha > 0 && sft_alpha < 1)) throw std::invalid_argument("sft_alpha must lie in (0, 1)");
        if (n_perm < 100) throw std::invalid_argument("n_perm must be >= 100");
        if (n_boot < 1) throw std::invalid_argument("n_boot must be >= 1");
        if (!std::isfinite(split_alpha) || !std::isfinite(split_beta)) throw std::invalid_argument("splits must be finite");
    }

    std::vector<double> effective_a_cuts() const { return a_cuts.empty() ? std::vector<double>{split_alpha} : a_cuts; }
    std::vector<double> effective_b_cuts() const { return b_cuts.empty() ? std::vector<double>{split_beta} : b_cuts; }
};

struct AnalysisResult {
    nlohmann::ordered_json report;
    std::string text;
    TrialSet filtered;
    ConditionMap parts;
    std::optional<MarginalSelectivityReport> marginal;
    std::optional<FactorialTables> raw_tables;
    std::optional<FactorialTables> repaired_tables;
    std::optional<LftVerdict> lft;
    std::optional<DominanceReport> dominance;
    std::optional<SicProfile> sic;
    std::optional<ArchitectureCall> architecture;
    std::optional<CapacityCurve> capacity;
    bool selective_influence_supported = false;
};

namespace detail {

/// Runs one stage; statistical errors become {"status":"error"} entries.
inline bool run_stage(nlohmann::ordered_json& slot, std::ostringstream& text, const std::function<void()>& body) {
    try {
        body();
        return true;
    } catch (const IoError&) {
        throw;
    } catch (const SchemaError&) {
        throw;
    } catch (const std::exception& e) {
        slot["status"] = "error";
        slot["message"] = e.what();
        text << "  error: " << e.what() << '\n';
        return false;
    }
}

inline nlohmann::ordered_json to_json(const MarginalSelectivityReport& r) {
    nlohmann::ordered_json j;
    j["alpha_sig"] = r.alpha_sig;
    j["threshold"] = r.threshold;
    auto tests = nlohmann::ordered_json::array();
    for (const auto& t : r.tests)
        tests.push_back({{"variable", t.variable},
                         {"fixed_level", t.fixed_level},
                         {"first", std::string(to_string(t.first))},
                         {"second", std::string(to_string(t.second))},
                         {"ks", sft::to_json(t.ks)},
                         {"pass", t.pass}});
    j["tests"] = std::move(tests);
    j["pass"] = r.pass;
    return j;
}

inline std::vector<double> pooled_rts(const ConditionMap& parts, std::initializer_list<Condition> conds) {
    std::vector<double> out;
    for (auto c : conds) {
        const auto r = rts_of(parts.at(c));
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

} // namespace detail

inline AnalysisResult analyze(const TrialSet& input, const AnalysisConfig& cfg) {
    cfg.validate();
    AnalysisResult res;
    auto& rep = res.report;
    std::ostringstream text;
    rep["schema"] = kReportSchema;
    rep["input"] = {{"source", cfg.input}, {"trials", input.size()}};
    rep["config"] = {{"split_alpha", cfg.split_alpha},
                     {"split_beta", cfg.split_beta},
                     {"a_cuts", cfg.effective_a_cuts()},
                     {"b_cuts", cfg.effective_b_cuts()},
                     {"alpha_level1_is_low", cfg.direction.alpha_level1_is_low},
                     {"beta_level1_is_low", cfg.direction.beta_level1_is_low},
                     {"alpha_sig", cfg.alpha_sig},
                     {"sft_alpha", cfg.sft_alpha},
                     {"n_perm", cfg.n_perm},
                     {"n_boot", cfg.n_boot},
                     {"seed", cfg.seed},
                     {"response_k", cfg.response_k},
                     {"rt_k", cfg.rt_k},
                     {"filter_order", cfg.filter_order == FilterOrder::ResponseThenRt ? "response-first" : "rt-first"},
                     {"repair_policy", std::string(to_string(cfg.repair_policy))},
                     {"capacity_rule", std::string(to_string(cfg.capacity_rule))}};
    text << "SFT analysis report (" << kReportSchema << ")\n";
    text << "input: " << cfg.input << "  trials: " << input.size() << "\n\n";

    // Filters.
    text << "[filters]\n";
    res.filtered = input;
    auto& filt = rep["filters"];
    const auto apply_filter = [&](const char* name, const std::function<TrialSet(const TrialSet&)>& f) {
        detail::run_stage(filt[name], text, [&] { res.filtered = f(res.filtered); });
    };
    const auto response_filter = [&] {
        apply_filter("response", [&](const TrialSet& s) { return filter_response_outliers(s, cfg.response_k); });
    };
    const auto rt_filter = [&] { apply_filter("rt", [&](const TrialSet& s) { return filter_rt_outliers(s, cfg.rt_k); }); };
    if (cfg.filter_order == FilterOrder::ResponseThenRt) {
        response_filter();
        rt_filter();
    } else {
        rt_filter();
        response_filter();
    }
    filt["log"] = res.filtered.provenance().log;
    filt["retained"] = res.filtered.size();
    for (const auto& line : res.filtered.provenance().log) text << "  " << line << '\n';
    text << "  retained " << res.filtered.size() << " of " << input.size() << " trials\n\n";

    // Partition.
    res.parts = partition_by_condition(res.filtered, cfg.split_alpha, cfg.split_beta, cfg.direction);
    auto& counts = rep["conditions"];
    text << "[conditions]\n ";
    bool factorial_complete = true;
    for (auto c : kAllConditions) {
        const auto n = res.parts.at(c).size();
        counts[std::string(to_string(c))] = n;
        text << ' ' << to_string(c) << '=' << n;
    }
    for (auto c : kFactorialConditions) factorial_complete = factorial_complete && !res.parts.at(c).empty();
    const auto suggested = suggest_level_direction(res.filtered, cfg.split_alpha, cfg.split_beta);
    rep["suggested_direction"] = {{"alpha_level1_is_low", suggested.alpha_level1_is_low},
                                  {"beta_level1_is_low", suggested.beta_level1_is_low}};
    text << "\n  suggested level-1 side (slower mean RT): alpha " << (suggested.alpha_level1_is_low ? "low" : "high")
         << ", beta " << (suggested.beta_level1_is_low ? "low" : "high") << "\n\n";

    std::array<ResponseSample, 4> responses;
    for (std::size_t c = 0; c < 4; ++c) responses[c] = responses_of(res.parts.at(kFactorialConditions[c]));

    // Marginal selectivity.
    text << "[marginal selectivity]\n";
    auto& ms = rep["marginal_selectivity"];
    if (!factorial_complete) {
        ms["status"] = "skipped";
        ms["reason"] = "empty factorial condition";
        text << "  skipped: empty factorial condition\n";
    } else {
        detail::run_stage(ms, text, [&] {
            res.marginal = marginal_selectivity_battery(responses, cfg.alpha_sig);
            ms = detail::to_json(*res.marginal);
            ms["status"] = "ok";
            text << format_marginal_report(*res.marginal);
        });
    }
    text << '\n';

    // LFT.
    text << "[linear feasibility test]\n";
    auto& lj = rep["lft"];
    if (!res.marginal) {
        lj["status"] = "skipped";
        lj["reason"] = "marginal selectivity not evaluated";
        text << "  skipped: marginal selectivity not evaluated\n";
    } else {
        detail::run_stage(lj, text, [&] {
            res.raw_tables = discretize_responses(responses, cfg.effective_a_cuts(), cfg.effective_b_cuts());
            lj["a_bins"] = (*res.raw_tables)[0].a_bins;
            lj["b_bins"] = (*res.raw_tables)[0].b_bins;
            text << format_tables_report(*res.raw_tables);
            if (!res.marginal->pass) {
                lj["status"] = "skipped";
                lj["reason"] = "marginal selectivity failed";
                text << "  skipped: marginal selectivity failed\n";
                return;
            }
            res.repaired_tables = enforce_marginal_equality(*res.raw_tables, cfg.repair_policy);
            res.lft = solve_lft(build_lft_system(*res.repaired_tables));
            const auto a_bins = lj["a_bins"], b_bins = lj["b_bins"];
            lj = to_json(*res.lft);
            lj["a_bins"] = a_bins;
            lj["b_bins"] = b_bins;
            lj["status"] = "ok";
            text << "  after marginal repair:\n" << format_tables_report(*res.repaired_tables);
            text << "  LFT: " << (res.lft->feasible ? "feasible" : "infeasible")
                 << " (phase-one objective " << detail::format_double(res.lft->objective) << ")\n";
        });
    }
    res.selective_influence_supported = res.marginal && res.marginal->pass && res.lft && res.lft->feasible;
    rep["selective_influence_supported"] = res.selective_influence_supported;
    text << "  selective influence " << (res.selective_influence_supported ? "supported" : "not supported") << "\n\n";
    const auto mark_unsupported = [&](nlohmann::ordered_json& slot) {
        if (!res.selective_influence_supported) slot["unsupported_by_selective_influence"] = true;
    };
    const char* unsupported_note = "  (unsupported by selective influence)\n";

    ConditionRts crts;
    if (factorial_complete) crts = condition_rts(res.parts);

    // Dominance.
    text << "[stochastic dominance]\n";
    auto& dj = rep["dominance"];
    if (!factorial_complete) {
        dj["status"] = "skipped";
        dj["reason"] = "empty factorial condition";
        text << "  skipped: empty factorial condition\n";
    } else {
        detail::run_stage(dj, text, [&] {
            res.dominance = dominance_battery(crts, cfg.alpha_sig);
            dj = to_json(*res.dominance);
            dj["status"] = "ok";
            mark_unsupported(dj);
            text << format_dominance_report(*res.dominance);
            if (!res.selective_influence_supported) text << unsupported_note;
        });
    }
    text << '\n';

    // SIC / MIC.
    text << "[SIC / MIC]\n";
    auto& sj = rep["sic"];
    if (!factorial_complete) {
        sj["status"] = "skipped";
        sj["reason"] = "empty factorial condition";
        text << "  skipped: empty factorial condition\n";
    } else {
        detail::run_stage(sj, text, [&] {
            res.sic = permutation_significance(crts, cfg.n_perm, substream_seed(cfg.seed, 0), cfg.threads);
            res.architecture = classify_architecture(*res.sic, cfg.sft_alpha);
            sj = to_json(*res.sic, res.architecture);
            sj["sic_area"] = sic_area(*res.sic);
            sj["status"] = "ok";
            mark_unsupported(sj);
            if (res.dominance && !res.dominance->pass) sj["dominance_violated"] = true;
            text << "  " << format_sic_row(*res.sic, *res.architecture) << '\n';
            if (!res.architecture->note.empty()) text << "  note: " << res.architecture->note << '\n';
            if (!res.selective_influence_supported) text << unsupported_note;
        });
    }
    text << '\n';

    // Capacity.
    text << "[capacity]\n";
    auto& cj = rep["capacity"];
    const auto single_a = detail::pooled_rts(res.parts, {Condition::A1B0, Condition::A2B0});
    const auto single_b = detail::pooled_rts(res.parts, {Condition::A0B1, Condition::A0B2});
    const auto doubles = detail::pooled_rts(res.parts, {Condition::A1B1, Condition::A1B2, Condition::A2B1, Condition::A2B2});
    if (single_a.empty() || single_b.empty() || doubles.empty()) {
        cj["status"] = "skipped";
        cj["reason"] = "no single-channel trials for one or both channels";
        text << "  skipped: no single-channel trials for one or both channels\n";
    } else {
        detail::run_stage(cj, text, [&] {
            CapacityInput ci{doubles, single_a, single_b, cfg.capacity_rule};
            res.capacity = capacity_verdict(ci, capacity_curve(ci), cfg.n_boot, substream_seed(cfg.seed, 1), cfg.threads);
            cj = to_json(*res.capacity);
            cj["status"] = "ok";
            mark_unsupported(cj);
            text << "  C_" << to_string(cfg.capacity_rule) << ": " << to_string(*res.capacity->verdict) << " over "
                 << res.capacity->grid.size() << " grid points (" << res.capacity->n_boot << " bootstrap replicates)\n";
        });
    }
    res.text = text.str();
    return res;
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::function<void(std::ostream&)>& fn) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    fn(out);
    if (!out) throw IoError("write failed for '" + p.string() + "'");
}

} // namespace detail

/// Writes report.json, report.txt and the per-stage CSVs (plus SVG plots when
/// requested) into `dir`.
inline void write_analysis_outputs(const AnalysisResult& res, const std::filesystem::path& dir, bool emit_plots) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "'");
    detail::write_file(dir / "report.json", [&](std::ostream& o) { o << res.report.dump(2) << '\n'; });
    detail::write_file(dir / "report.txt", [&](std::ostream& o) { o << res.text; });

    std::vector<PlotSeries> surv_series;
    const bool complete = std::all_of(kFactorialConditions.begin(), kFactorialConditions.end(),
                                      [&](Condition c) { return !res.parts.at(c).empty(); });
    if (complete) {
        detail::write_file(dir / "survival.csv", [&](std::ostream& o) {
            o << "condition,t_ms,survival\n";
            for (auto c : kFactorialConditions) {
                const auto s = survival(rts_of(res.parts.at(c)));
                surv_series.push_back({std::string(to_string(c)), s.grid, s.values, true});
                for (std::size_t i = 0; i < s.grid.size(); ++i)
                    o << to_string(c) << ',' << detail::format_double(s.grid[i]) << ',' << detail::format_double(s.values[i]) << '\n';
            }
        });
    }
    if (res.raw_tables) detail::write_file(dir / "tables_raw.csv", [&](std::ostream& o) { write_tables_csv(o, *res.raw_tables); });
    if (res.repaired_tables)
        detail::write_file(dir / "tables_repaired.csv", [&](std::ostream& o) { write_tables_csv(o, *res.repaired_tables); });
    if (res.sic) detail::write_file(dir / "sic.csv", [&](std::ostream& o) { write_sic_csv(o, *res.sic); });
    if (res.capacity) detail::write_file(dir / "capacity.csv", [&](std::ostream& o) { write_capacity_csv(o, *res.capacity); });

    if (!emit_plots) return;
    if (!surv_series.empty())
        detail::write_file(dir / "survival.svg", [&](std::ostream& o) {
            write_svg_plot(o, {"Survival functions", "t (ms)", "S(t)", surv_series, std::nullopt});
        });
    if (res.sic)
        detail::write_file(dir / "sic.svg", [&](std::ostream& o) {
            write_svg_plot(o, {"Survivor interaction contrast", "t (ms)", "SIC(t)", {{"SIC", res.sic->grid, res.sic->sic, true}}, 0.0});
        });
    if (res.capacity) {
        std::vector<PlotSeries> series{{"C(t)", res.capacity->grid, res.capacity->c, true}};
        if (res.capacity->band) {
            series.push_back({"lower 2.5%", res.capacity->grid, res.capacity->band->lo, true});
            series.push_back({"upper 97.5%", res.capacity->grid, res.capacity->band->hi, true});
        }
        detail::write_file(dir / "capacity.svg", [&](std::ostream& o) {
            write_svg_plot(o, {"Capacity coefficient", "t (ms)", "C(t)", series, 1.0});
        });
    }
}

} // namespace sft
