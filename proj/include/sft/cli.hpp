#pragma once

// Command-line front end. run() takes explicit streams so it can be driven
// in-process by tests; exit codes are 0 ok, 1 usage, 2 I/O, 3 schema.

#include <sft/capacity.hpp>
#include <sft/contrast.hpp>
#include <sft/errors.hpp>
#include <sft/geometry.hpp>
#include <sft/lft.hpp>
#include <sft/pipeline.hpp>
#include <sft/simulator.hpp>
#include <sft/trial_store.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sft::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kSchema = 3 };

/// Options shared by the commands that start from a trial file.
struct InputOptions {
    std::string input;
    std::string format = "auto";
    bool include_practice = false;
    double split_alpha = 50;
    double split_beta = 50;
    std::string alpha_level1 = "low";
    std::string beta_level1 = "low";
    double response_k = 3;
    double rt_k = 5;
    std::string filter_order = "response-first";

    void attach(CLI::App& app) {
        app.add_option("-i,--input", input, "Trial file (.jsonl or .csv)")->required();
        app.add_option("--format", format, "Input format")->check(CLI::IsMember({"auto", "jsonl", "csv"}));
        app.add_flag("--include-practice", include_practice, "Keep trials flagged as practice");
        app.add_option("--split-alpha", split_alpha, "Factor split for alpha");
        app.add_option("--split-beta", split_beta, "Factor split for beta");
        app.add_option("--alpha-level1", alpha_level1, "Which side of the alpha split is level 1")
            ->check(CLI::IsMember({"low", "high"}));
        app.add_option("--beta-level1", beta_level1, "Which side of the beta split is level 1")
            ->check(CLI::IsMember({"low", "high"}));
        app.add_option("--response-k", response_k, "SD multiple for the response outlier filter");
        app.add_option("--rt-k", rt_k, "SD multiple for the RT outlier filter");
        app.add_option("--filter-order", filter_order, "Order of the two outlier filters")
            ->check(CLI::IsMember({"response-first", "rt-first"}));
    }

    LevelDirection direction() const { return {alpha_level1 == "low", beta_level1 == "low"}; }

    TrialSet load() const {
        const auto fmt = format == "auto" ? format_from_path(input)
                                          : (format == "csv" ? TrialFormat::Csv : TrialFormat::JsonLines);
        return load_trials(input, fmt, LoadOptions{include_practice});
    }

    TrialSet load_filtered() const {
        auto set = load();
        if (filter_order == "response-first") return filter_rt_outliers(filter_response_outliers(set, response_k), rt_k);
        return filter_response_outliers(filter_rt_outliers(set, rt_k), response_k);
    }
};

namespace detail {

inline void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << body;
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::string lft_status(const MarginalSelectivityReport& ms, const std::optional<LftVerdict>& v) {
    if (!ms.pass) return "skipped (marginal selectivity failed)";
    if (!v) return "error";
    return v->feasible ? "feasible" : "infeasible";
}

} // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Systems factorial technology toolkit", "sft"};
    app.set_config("--config", "", "Read options from a TOML/INI file");
    app.require_subcommand(1);
    int code = kOk;

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "Run the full pipeline on a trial file");
    InputOptions an_in;
    AnalysisConfig an_cfg;
    std::string an_out = "sft-out";
    bool an_plots = false;
    std::string an_rule = "and";
    std::string an_policy = "strict";
    an_in.attach(*analyze_cmd);
    analyze_cmd->add_option("--a-cuts", an_cfg.a_cuts, "Response cuts for A (default: alpha split)")->delimiter(',');
    analyze_cmd->add_option("--b-cuts", an_cfg.b_cuts, "Response cuts for B (default: beta split)")->delimiter(',');
    analyze_cmd->add_option("--alpha-sig", an_cfg.alpha_sig, "Family-wise level for KS batteries");
    analyze_cmd->add_option("--sft-alpha", an_cfg.sft_alpha, "Significance level for SIC/MIC classification");
    analyze_cmd->add_option("--n-perm", an_cfg.n_perm, "Permutations for SIC/MIC p-values");
    analyze_cmd->add_option("--n-boot", an_cfg.n_boot, "Bootstrap replicates for the capacity band");
    analyze_cmd->add_option("--seed", an_cfg.seed, "Seed for resampling");
    analyze_cmd->add_option("--threads", an_cfg.threads, "Worker threads (0 = all cores)");
    analyze_cmd->add_option("--capacity-rule", an_rule, "Stopping rule for capacity")->check(CLI::IsMember({"and", "or"}));
    analyze_cmd->add_option("--repair-policy", an_policy, "Marginal repair when keeping P(a1,b1) gives a negative cell")
        ->check(CLI::IsMember({"strict", "clamp"}));
    analyze_cmd->add_option("-o,--out", an_out, "Output directory");
    analyze_cmd->add_flag("--plots", an_plots, "Also write SVG plots");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic trial file");
    ArchitectureModel sim_model;
    ResponseModel sim_resp;
    Design sim_design;
    std::string sim_arch = "parallel-and";
    std::vector<double> sim_rate_alpha{0.01, 0.03}, sim_rate_beta{0.01, 0.03};
    std::vector<double> sim_alpha_range{20, 80}, sim_beta_range{20, 80};
    std::uint64_t sim_seed = 1;
    std::string sim_out;
    std::string sim_format = "auto";
    bool sim_no_traj = false;
    sim_cmd->add_option("--architecture", sim_arch, "Generating architecture")
        ->check(CLI::IsMember({"serial-or", "serial-and", "parallel-or", "parallel-and", "coactive"}));
    sim_cmd->add_option("--k", sim_model.channel_shape, "Gamma shape of each channel");
    sim_cmd->add_option("--rate-alpha", sim_rate_alpha, "Alpha rates (1/ms) at level 1,2")->delimiter(',')->expected(2);
    sim_cmd->add_option("--rate-beta", sim_rate_beta, "Beta rates (1/ms) at level 1,2")->delimiter(',')->expected(2);
    sim_cmd->add_option("--serial-or-p", sim_model.serial_or_p, "P(alpha executed) under serial OR");
    sim_cmd->add_option("--base-ms", sim_model.base_ms, "Residual time added to every RT");
    sim_cmd->add_option("--si-violation", sim_model.si_violation, "Cross-factor rate contamination");
    sim_cmd->add_option("--shared-sd", sim_model.shared_sd, "SD of the duration term shared by both channels");
    sim_cmd->add_option("--noise-sd", sim_resp.noise_sd, "SD of final-response error");
    sim_cmd->add_option("--violation-shift", sim_resp.violation_shift, "Response shift breaking marginal selectivity");
    sim_cmd->add_option("--n", sim_design.n_trials, "Number of trials");
    sim_cmd->add_option("--single-fraction", sim_design.single_channel_fraction, "Fraction of single-channel trials");
    sim_cmd->add_flag("--balanced", sim_design.balanced_conditions, "Cycle double-channel trials through the four cells");
    sim_cmd->add_option("--alpha-range", sim_alpha_range, "Alpha range lo,hi")->delimiter(',')->expected(2);
    sim_cmd->add_option("--beta-range", sim_beta_range, "Beta range lo,hi")->delimiter(',')->expected(2);
    sim_cmd->add_option("--split-alpha", sim_design.split_alpha, "Alpha level split");
    sim_cmd->add_option("--split-beta", sim_design.split_beta, "Beta level split");
    sim_cmd->add_option("--experiment-id", sim_design.experiment_id, "experiment_id of every record");
    sim_cmd->add_option("--subject-id", sim_design.subject_id, "subject_id of every record");
    sim_cmd->add_flag("--no-trajectories", sim_no_traj, "Omit trajectories");
    sim_cmd->add_option("--seed", sim_seed, "Simulation seed");
    sim_cmd->add_option("--format", sim_format, "Output format")->check(CLI::IsMember({"auto", "jsonl", "csv"}));
    sim_cmd->add_option("-o,--out", sim_out, "Output trial file")->required();

    // golden
    auto* golden_cmd = app.add_subcommand("golden", "Write geometry golden vectors");
    std::string golden_out;
    golden_cmd->add_option("-o,--out", golden_out, "Output directory")->required();

    // lft
    auto* lft_cmd = app.add_subcommand("lft", "Linear feasibility test on joint tables or trial data");
    std::string lft_tables;
    InputOptions lft_in;
    std::vector<double> lft_a_cuts, lft_b_cuts, lft_sweep;
    bool lft_repair = false, lft_json = false;
    std::string lft_policy = "strict";
    double lft_alpha_sig = 0.05;
    lft_cmd->add_option("--tables", lft_tables, "Joint-table CSV (condition,a_bin,b_bin,prob)");
    lft_cmd->add_option("-i,--input", lft_in.input, "Trial file (instead of --tables)");
    lft_cmd->add_option("--format", lft_in.format, "Input format")->check(CLI::IsMember({"auto", "jsonl", "csv"}));
    lft_cmd->add_option("--split-alpha", lft_in.split_alpha, "Factor split for alpha");
    lft_cmd->add_option("--split-beta", lft_in.split_beta, "Factor split for beta");
    lft_cmd->add_option("--alpha-level1", lft_in.alpha_level1)->check(CLI::IsMember({"low", "high"}));
    lft_cmd->add_option("--beta-level1", lft_in.beta_level1)->check(CLI::IsMember({"low", "high"}));
    lft_cmd->add_option("--a-cuts", lft_a_cuts, "Response cuts for A")->delimiter(',');
    lft_cmd->add_option("--b-cuts", lft_b_cuts, "Response cuts for B")->delimiter(',');
    lft_cmd->add_option("--sweep", lft_sweep, "Single cuts (used for both A and B) to try in turn")->delimiter(',');
    lft_cmd->add_option("--alpha-sig", lft_alpha_sig, "Family-wise level for the marginal battery");
    lft_cmd->add_flag("--repair", lft_repair, "Average marginals before testing (tables mode)");
    lft_cmd->add_option("--repair-policy", lft_policy, "Marginal repair when keeping P(a1,b1) gives a negative cell")
        ->check(CLI::IsMember({"strict", "clamp"}));
    lft_cmd->add_flag("--json", lft_json, "Print a JSON record instead of text");

    // dominance
    auto* dom_cmd = app.add_subcommand("dominance", "Stochastic dominance battery");
    InputOptions dom_in;
    double dom_alpha = 0.05;
    bool dom_json = false;
    dom_in.attach(*dom_cmd);
    dom_cmd->add_option("--alpha-sig", dom_alpha, "Family-wise level");
    dom_cmd->add_flag("--json", dom_json, "Print JSON");

    // sic
    auto* sic_cmd = app.add_subcommand("sic", "SIC/MIC with permutation p-values and classification");
    InputOptions sic_in;
    std::size_t sic_perm = 10000;
    std::uint64_t sic_seed = 1;
    double sic_alpha = 0.33;
    unsigned sic_threads = 0;
    std::string sic_csv;
    bool sic_json = false;
    sic_in.attach(*sic_cmd);
    sic_cmd->add_option("--n-perm", sic_perm, "Permutations");
    sic_cmd->add_option("--seed", sic_seed, "Seed");
    sic_cmd->add_option("--sft-alpha", sic_alpha, "Classification level");
    sic_cmd->add_option("--threads", sic_threads, "Worker threads (0 = all cores)");
    sic_cmd->add_option("--csv", sic_csv, "Write the SIC curve here");
    sic_cmd->add_flag("--json", sic_json, "Print JSON");

    // capacity
    auto* cap_cmd = app.add_subcommand("capacity", "Capacity coefficient with bootstrap band");
    InputOptions cap_in;
    std::string cap_rule = "and";
    std::size_t cap_boot = 2000;
    std::uint64_t cap_seed = 1;
    unsigned cap_threads = 0;
    std::string cap_csv;
    bool cap_json = false;
    cap_in.attach(*cap_cmd);
    cap_cmd->add_option("--rule", cap_rule, "Stopping rule")->check(CLI::IsMember({"and", "or"}));
    cap_cmd->add_option("--n-boot", cap_boot, "Bootstrap replicates");
    cap_cmd->add_option("--seed", cap_seed, "Seed");
    cap_cmd->add_option("--threads", cap_threads, "Worker threads (0 = all cores)");
    cap_cmd->add_option("--csv", cap_csv, "Write t_ms,c,lo,hi here");
    cap_cmd->add_flag("--json", cap_json, "Print JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "sft: " << e.what() << "\nRun with --help for usage.\n";
        return kUsage;
    }

    const auto partition = [](const InputOptions& in) {
        return partition_by_condition(in.load_filtered(), in.split_alpha, in.split_beta, in.direction());
    };

    try {
        if (analyze_cmd->parsed()) {
            an_cfg.input = an_in.input;
            an_cfg.split_alpha = an_in.split_alpha;
            an_cfg.split_beta = an_in.split_beta;
            an_cfg.direction = an_in.direction();
            an_cfg.response_k = an_in.response_k;
            an_cfg.rt_k = an_in.rt_k;
            an_cfg.filter_order = an_in.filter_order == "response-first" ? FilterOrder::ResponseThenRt : FilterOrder::RtThenResponse;
            an_cfg.capacity_rule = an_rule == "and" ? StoppingRule::AND : StoppingRule::OR;
            an_cfg.repair_policy = an_policy == "clamp" ? RepairPolicy::ClampToFeasible : RepairPolicy::Strict;
            an_cfg.validate();
            const auto result = analyze(an_in.load(), an_cfg);
            write_analysis_outputs(result, an_out, an_plots);
            out << result.text;
        } else if (sim_cmd->parsed()) {
            sim_model.architecture = *parse_architecture(sim_arch);
            sim_model.rate_alpha = {sim_rate_alpha[0], sim_rate_alpha[1]};
            sim_model.rate_beta = {sim_rate_beta[0], sim_rate_beta[1]};
            sim_design.alpha_range = {sim_alpha_range[0], sim_alpha_range[1]};
            sim_design.beta_range = {sim_beta_range[0], sim_beta_range[1]};
            sim_design.record_trajectories = !sim_no_traj;
            const auto fmt = sim_format == "auto" ? format_from_path(sim_out)
                                                  : (sim_format == "csv" ? TrialFormat::Csv : TrialFormat::JsonLines);
            const auto set = simulate_dataset(sim_model, sim_resp, sim_design, sim_seed, 0);
            save_trials(set, sim_out, fmt);
            nlohmann::ordered_json meta(set.provenance().meta);
            detail::write_text_file(sim_out + ".provenance.json", meta.dump(2) + "\n");
            out << "wrote " << set.size() << " trials to " << sim_out << '\n';
        } else if (golden_cmd->parsed()) {
            write_golden(golden_out);
            out << "wrote " << (std::filesystem::path(golden_out) / "shape_points.csv").string() << " and "
                << (std::filesystem::path(golden_out) / "trackball_steps.csv").string() << '\n';
        } else if (lft_cmd->parsed()) {
            const auto policy = lft_policy == "clamp" ? RepairPolicy::ClampToFeasible : RepairPolicy::Strict;
            if (lft_tables.empty() == lft_in.input.empty()) {
                err << "sft lft: give exactly one of --tables or --input\n";
                return kUsage;
            }
            if (!lft_tables.empty()) {
                std::ifstream tf(lft_tables);
                if (!tf) throw IoError("cannot open joint-table file '" + lft_tables + "'");
                auto tables = read_tables_csv(tf);
                if (lft_repair) tables = enforce_marginal_equality(tables, policy);
                const auto verdict = solve_lft(build_lft_system(tables));
                if (lft_json) out << to_json(verdict).dump(2) << '\n';
                else out << format_tables_report(tables) << "LFT: " << (verdict.feasible ? "feasible" : "infeasible") << '\n';
            } else {
                const auto parts = partition(lft_in);
                std::array<ResponseSample, 4> resp;
                for (std::size_t c = 0; c < 4; ++c) resp[c] = responses_of(parts.at(kFactorialConditions[c]));
                const auto ms = marginal_selectivity_battery(resp, lft_alpha_sig);
                std::vector<std::pair<std::vector<double>, std::vector<double>>> cut_sets;
                if (!lft_sweep.empty()) {
                    for (double c : lft_sweep) cut_sets.push_back({{c}, {c}});
                } else {
                    cut_sets.push_back({lft_a_cuts.empty() ? std::vector<double>{lft_in.split_alpha} : lft_a_cuts,
                                        lft_b_cuts.empty() ? std::vector<double>{lft_in.split_beta} : lft_b_cuts});
                }
                auto rows = nlohmann::ordered_json::array();
                if (!lft_json) out << format_marginal_report(ms) << "\na_cuts  b_cuts  LFT\n";
                for (const auto& [ac, bc] : cut_sets) {
                    std::optional<LftVerdict> v;
                    std::string failure;
                    if (ms.pass) {
                        try {
                            v = solve_lft(build_lft_system(enforce_marginal_equality(discretize_responses(resp, ac, bc), policy)));
                        } catch (const std::exception& e) {
                            failure = e.what();
                        }
                    }
                    const auto status = failure.empty() ? detail::lft_status(ms, v) : "error: " + failure;
                    rows.push_back({{"a_cuts", ac}, {"b_cuts", bc}, {"status", status}});
                    if (!lft_json) {
                        const auto join = [](const std::vector<double>& xs) {
                            std::string s;
                            for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + sft::detail::format_double(xs[i]);
                            return s;
                        };
                        out << join(ac) << "  " << join(bc) << "  " << status << '\n';
                    }
                }
                if (lft_json) {
                    nlohmann::ordered_json j;
                    j["marginal_selectivity"] = sft::detail::to_json(ms);
                    j["cuts"] = std::move(rows);
                    out << j.dump(2) << '\n';
                }
            }
        } else if (dom_cmd->parsed()) {
            const auto rep = dominance_battery(condition_rts(partition(dom_in)), dom_alpha);
            out << (dom_json ? to_json(rep).dump(2) + "\n" : format_dominance_report(rep));
        } else if (sic_cmd->parsed()) {
            const auto prof = permutation_significance(condition_rts(partition(sic_in)), sic_perm, sic_seed, sic_threads);
            const auto call = classify_architecture(prof, sic_alpha);
            if (!sic_csv.empty()) {
                std::ostringstream os;
                write_sic_csv(os, prof);
                detail::write_text_file(sic_csv, os.str());
            }
            if (sic_json) out << to_json(prof, call).dump(2) << '\n';
            else {
                out << format_sic_row(prof, call) << '\n';
                if (!call.note.empty()) out << "note: " << call.note << '\n';
            }
        } else if (cap_cmd->parsed()) {
            const auto parts = partition(cap_in);
            CapacityInput ci{sft::detail::pooled_rts(parts, {Condition::A1B1, Condition::A1B2, Condition::A2B1, Condition::A2B2}),
                             sft::detail::pooled_rts(parts, {Condition::A1B0, Condition::A2B0}),
                             sft::detail::pooled_rts(parts, {Condition::A0B1, Condition::A0B2}),
                             cap_rule == "and" ? StoppingRule::AND : StoppingRule::OR};
            const auto curve = capacity_verdict(ci, capacity_curve(ci), cap_boot, cap_seed, cap_threads);
            if (!cap_csv.empty()) {
                std::ostringstream os;
                write_capacity_csv(os, curve);
                detail::write_text_file(cap_csv, os.str());
            }
            if (cap_json) out << to_json(curve).dump(2) << '\n';
            else out << "C_" << to_string(curve.rule) << " verdict: " << to_string(*curve.verdict) << " ("
                     << curve.grid.size() << " grid points)\n";
        }
    } catch (const IoError& e) {
        err << "sft: " << e.what() << '\n';
        code = kIo;
    } catch (const SchemaError& e) {
        err << "sft: " << e.what() << '\n';
        code = kSchema;
    } catch (const std::exception& e) {
        err << "sft: " << e.what() << '\n';
        code = kUsage;
    }
    return code;
}

} // namespace sft::cli
