#pragma once

// Canonical trial records, JSON Lines / CSV ingestion and export, outlier
// filtering, and partitioning into the factorial conditions.

#include <sft/detail/text.hpp>
#include <sft/errors.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sft {

enum class Channels : std::uint8_t { Double, SingleAlpha, SingleBeta };

inline std::string_view to_string(Channels c) {
    switch (c) {
    case Channels::Double: return "double";
    case Channels::SingleAlpha: return "single_alpha";
    case Channels::SingleBeta: return "single_beta";
    }
    return "double";
}

inline std::optional<Channels> parse_channels(std::string_view s) {
    if (s == "double") return Channels::Double;
    if (s == "single_alpha") return Channels::SingleAlpha;
    if (s == "single_beta") return Channels::SingleBeta;
    return std::nullopt;
}

struct TrajectorySample {
    double t_ms = 0;
    double a = 0;
    double b = 0;

    bool operator==(const TrajectorySample&) const = default;
};

struct TrialRecord {
    std::string experiment_id;
    std::string subject_id;
    std::uint64_t trial_index = 0;
    double alpha = 0;
    double beta = 0;
    double a_final = 0;
    double b_final = 0;
    double rt_ms = 0;
    Channels channels = Channels::Double;
    std::optional<std::vector<TrajectorySample>> trajectory;

    bool operator==(const TrialRecord&) const = default;
};

/// Throws SchemaError (tagged with `row` when nonzero) if a record breaks an
/// invariant of the trial model.
inline void validate_record(const TrialRecord& r, std::size_t row = 0) {
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(r.alpha) || !finite(r.beta) || !finite(r.a_final) || !finite(r.b_final) || !finite(r.rt_ms))
        throw SchemaError("non-finite numeric field", row);
    if (!(r.rt_ms > 0)) throw SchemaError("rt_ms must be positive", row);
    if (r.channels == Channels::SingleAlpha && r.beta != 0)
        throw SchemaError("single_alpha trial must have beta = 0", row);
    if (r.channels == Channels::SingleBeta && r.alpha != 0)
        throw SchemaError("single_beta trial must have alpha = 0", row);
    if (r.trajectory) {
        const auto& tr = *r.trajectory;
        for (std::size_t i = 0; i < tr.size(); ++i) {
            if (!finite(tr[i].t_ms) || !finite(tr[i].a) || !finite(tr[i].b))
                throw SchemaError("non-finite trajectory sample", row);
            if (i > 0 && !(tr[i].t_ms > tr[i - 1].t_ms))
                throw SchemaError("trajectory timestamps must be strictly increasing", row);
        }
        if (!tr.empty() && tr.front().t_ms < 0) throw SchemaError("trajectory starts before 0 ms", row);
        if (!tr.empty() && tr.back().t_ms > r.rt_ms) throw SchemaError("trajectory extends past rt_ms", row);
    }
}

struct Provenance {
    std::map<std::string, std::string> meta;
    /// One entry per filtering / partitioning step, in order.
    std::vector<std::string> log;

    bool operator==(const Provenance&) const = default;
};

/// Immutable collection of trials from one experiment.
class TrialSet {
public:
    TrialSet() = default;

    explicit TrialSet(std::vector<TrialRecord> records, Provenance provenance = {})
        : records_(std::move(records)), provenance_(std::move(provenance)) {
        for (std::size_t i = 0; i < records_.size(); ++i) {
            validate_record(records_[i], i + 1);
            if (records_[i].experiment_id != records_.front().experiment_id)
                throw SchemaError("experiment_id differs from first record", i + 1);
        }
    }

    const std::vector<TrialRecord>& records() const noexcept { return records_; }
    const Provenance& provenance() const noexcept { return provenance_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    /// Subset of records sharing this set's provenance plus one log line.
    TrialSet derive(std::vector<TrialRecord> records, std::string log_line) const {
        Provenance p = provenance_;
        p.log.push_back(std::move(log_line));
        return TrialSet(std::move(records), std::move(p));
    }

private:
    std::vector<TrialRecord> records_;
    Provenance provenance_;
};

// ---------------------------------------------------------------------------
// Ingestion / export

enum class TrialFormat { JsonLines, Csv };

inline TrialFormat format_from_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return ext == ".csv" ? TrialFormat::Csv : TrialFormat::JsonLines;
}

struct LoadOptions {
    /// Records flagged `"practice": true` are dropped unless this is set.
    bool include_practice = false;
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, std::size_t row) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(std::string("missing required field '") + key + "'", row);
    return *it;
}

inline double require_number(const nlohmann::json& obj, const char* key, std::size_t row) {
    const auto& v = require(obj, key, row);
    if (!v.is_number()) throw SchemaError(std::string("field '") + key + "' is not numeric", row);
    return v.get<double>();
}

inline std::string require_string(const nlohmann::json& obj, const char* key, std::size_t row) {
    const auto& v = require(obj, key, row);
    if (!v.is_string()) throw SchemaError(std::string("field '") + key + "' is not a string", row);
    return v.get<std::string>();
}

inline TrialRecord record_from_json(const nlohmann::json& obj, std::size_t row) {
    if (!obj.is_object()) throw SchemaError("line is not a JSON object", row);
    TrialRecord r;
    r.experiment_id = require_string(obj, "experiment_id", row);
    r.subject_id = require_string(obj, "subject_id", row);
    const auto& idx = require(obj, "trial_index", row);
    if (idx.is_number_unsigned()) {
        r.trial_index = idx.get<std::uint64_t>();
    } else if (idx.is_number_integer() && idx.get<std::int64_t>() >= 0) {
        r.trial_index = static_cast<std::uint64_t>(idx.get<std::int64_t>());
    } else {
        throw SchemaError("field 'trial_index' is not a nonnegative integer", row);
    }
    r.alpha = require_number(obj, "alpha", row);
    r.beta = require_number(obj, "beta", row);
    r.a_final = require_number(obj, "a_final", row);
    r.b_final = require_number(obj, "b_final", row);
    r.rt_ms = require_number(obj, "rt_ms", row);
    const auto ch = parse_channels(require_string(obj, "channels", row));
    if (!ch) throw SchemaError("field 'channels' must be double, single_alpha or single_beta", row);
    r.channels = *ch;
    if (const auto it = obj.find("trajectory"); it != obj.end() && !it->is_null()) {
        if (!it->is_array()) throw SchemaError("field 'trajectory' is not an array", row);
        std::vector<TrajectorySample> samples;
        samples.reserve(it->size());
        for (const auto& s : *it) {
            if (!s.is_object()) throw SchemaError("trajectory sample is not an object", row);
            samples.push_back({require_number(s, "t_ms", row), require_number(s, "a", row), require_number(s, "b", row)});
        }
        r.trajectory = std::move(samples);
    }
    validate_record(r, row);
    return r;
}

inline nlohmann::ordered_json record_to_json(const TrialRecord& r) {
    nlohmann::ordered_json j;
    j["experiment_id"] = r.experiment_id;
    j["subject_id"] = r.subject_id;
    j["trial_index"] = r.trial_index;
    j["alpha"] = r.alpha;
    j["beta"] = r.beta;
    j["a_final"] = r.a_final;
    j["b_final"] = r.b_final;
    j["rt_ms"] = r.rt_ms;
    j["channels"] = std::string(to_string(r.channels));
    if (r.trajectory) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& s : *r.trajectory) arr.push_back({{"t_ms", s.t_ms}, {"a", s.a}, {"b", s.b}});
        j["trajectory"] = std::move(arr);
    }
    return j;
}

inline constexpr std::array<std::string_view, 9> kCsvColumns{
    "experiment_id", "subject_id", "trial_index", "alpha", "beta", "a_final", "b_final", "rt_ms", "channels"};

} // namespace detail

/// Parses trials from a stream. `source` is recorded in provenance.
inline TrialSet read_trials(std::istream& in, TrialFormat format, std::string source = "<stream>",
                            LoadOptions options = {}) {
    std::vector<TrialRecord> records;
    std::size_t practice_dropped = 0;
    std::string line;
    std::size_t line_no = 0;

    const auto check_experiment = [&](const TrialRecord& r, std::size_t row) {
        if (!records.empty() && r.experiment_id != records.front().experiment_id)
            throw SchemaError("experiment_id differs from first record", row);
    };

    if (format == TrialFormat::JsonLines) {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json obj;
            try {
                obj = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw SchemaError(std::string("invalid JSON: ") + e.what(), line_no);
            }
            auto r = detail::record_from_json(obj, line_no);
            if (const auto it = obj.find("practice"); it != obj.end() && it->is_boolean() && it->get<bool>() &&
                                                      !options.include_practice) {
                ++practice_dropped;
                continue;
            }
            check_experiment(r, line_no);
            records.push_back(std::move(r));
        }
    } else {
        if (!std::getline(in, line)) throw SchemaError("CSV input is missing its header row");
        const auto header = detail::split_csv_line(line);
        if (!header) throw SchemaError("malformed CSV header");
        std::map<std::string, std::size_t> col;
        for (std::size_t i = 0; i < header->size(); ++i) col[(*header)[i]] = i;
        for (auto name : detail::kCsvColumns)
            if (!col.contains(std::string(name)))
                throw SchemaError("CSV header lacks column '" + std::string(name) + "'");
        std::size_t row = 0;
        while (std::getline(in, line)) {
            ++row;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            const auto fields = detail::split_csv_line(line);
            if (!fields || fields->size() != header->size()) throw SchemaError("wrong number of fields", row);
            const auto field = [&](const char* name) -> const std::string& { return (*fields)[col.at(name)]; };
            const auto number = [&](const char* name) {
                const auto v = detail::parse_double(field(name));
                if (!v) throw SchemaError(std::string("field '") + name + "' is not numeric", row);
                return *v;
            };
            TrialRecord r;
            r.experiment_id = field("experiment_id");
            r.subject_id = field("subject_id");
            const auto idx = detail::parse_uint(field("trial_index"));
            if (!idx) throw SchemaError("field 'trial_index' is not a nonnegative integer", row);
            r.trial_index = *idx;
            r.alpha = number("alpha");
            r.beta = number("beta");
            r.a_final = number("a_final");
            r.b_final = number("b_final");
            r.rt_ms = number("rt_ms");
            const auto ch = parse_channels(field("channels"));
            if (!ch) throw SchemaError("field 'channels' must be double, single_alpha or single_beta", row);
            r.channels = *ch;
            validate_record(r, row);
            check_experiment(r, row);
            records.push_back(std::move(r));
        }
    }

    Provenance p;
    p.meta["source"] = std::move(source);
    p.meta["format"] = format == TrialFormat::Csv ? "csv" : "jsonl";
    if (practice_dropped > 0) p.log.push_back("load: dropped " + std::to_string(practice_dropped) + " practice trials");
    return TrialSet(std::move(records), std::move(p));
}

inline TrialSet load_trials(const std::filesystem::path& path, TrialFormat format, LoadOptions options = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trial file '" + path.string() + "'");
    return read_trials(in, format, path.string(), options);
}

inline TrialSet load_trials(const std::filesystem::path& path) { return load_trials(path, format_from_path(path)); }

/// Writes trials; the CSV form carries no trajectories.
inline void write_trials(const TrialSet& set, std::ostream& out, TrialFormat format) {
    if (format == TrialFormat::JsonLines) {
        for (const auto& r : set.records()) out << detail::record_to_json(r).dump() << '\n';
        return;
    }
    for (std::size_t i = 0; i < detail::kCsvColumns.size(); ++i) out << (i ? "," : "") << detail::kCsvColumns[i];
    out << '\n';
    using detail::format_double;
    for (const auto& r : set.records()) {
        out << detail::csv_escape(r.experiment_id) << ',' << detail::csv_escape(r.subject_id) << ',' << r.trial_index
            << ',' << format_double(r.alpha) << ',' << format_double(r.beta) << ',' << format_double(r.a_final) << ','
            << format_double(r.b_final) << ',' << format_double(r.rt_ms) << ',' << to_string(r.channels) << '\n';
    }
}

inline void save_trials(const TrialSet& set, const std::filesystem::path& path, TrialFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write trial file '" + path.string() + "'");
    write_trials(set, out, format);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Outlier filters

namespace detail {

struct MeanSd {
    double mean = 0;
    double sd = 0;
};

/// Mean and sample standard deviation (n - 1 denominator).
inline MeanSd mean_sd(const std::vector<double>& xs) {
    MeanSd out;
    if (xs.empty()) return out;
    out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() < 2) return out;
    double ss = 0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    return out;
}

inline void require_finite_positive(double k, const char* what) {
    if (!std::isfinite(k) || !(k > 0)) throw std::invalid_argument(std::string(what) + " must be finite and positive");
}

inline bool is_outlier(double x, const MeanSd& ms, double k) { return ms.sd > 0 && std::abs(x - ms.mean) > k * ms.sd; }

} // namespace detail

/// Removes trials whose response error (a_final - alpha or b_final - beta) lies
/// more than k sample standard deviations from the mean error. Single pass.
/// The absent channel of a single-channel trial is not tested.
inline TrialSet filter_response_outliers(const TrialSet& set, double k = 3.0) {
    detail::require_finite_positive(k, "k");
    const auto& recs = set.records();
    const auto n_double = std::count_if(recs.begin(), recs.end(), [](const auto& r) { return r.channels == Channels::Double; });
    if (n_double < 2) throw std::invalid_argument("filter_response_outliers needs at least two double-channel trials");

    std::vector<double> da, db;
    for (const auto& r : recs) {
        if (r.channels != Channels::SingleBeta) da.push_back(r.a_final - r.alpha);
        if (r.channels != Channels::SingleAlpha) db.push_back(r.b_final - r.beta);
    }
    const auto ma = detail::mean_sd(da);
    const auto mb = detail::mean_sd(db);

    std::vector<TrialRecord> kept;
    kept.reserve(recs.size());
    for (const auto& r : recs) {
        const bool out_a = r.channels != Channels::SingleBeta && detail::is_outlier(r.a_final - r.alpha, ma, k);
        const bool out_b = r.channels != Channels::SingleAlpha && detail::is_outlier(r.b_final - r.beta, mb, k);
        if (!out_a && !out_b) kept.push_back(r);
    }
    const auto removed = recs.size() - kept.size();
    return set.derive(std::move(kept), "filter_response_outliers k=" + detail::format_double(k) + ": removed " +
                                           std::to_string(removed) + " of " + std::to_string(recs.size()));
}

/// Removes trials with RT more than k sample standard deviations from the mean
/// RT of the whole set. Single pass.
inline TrialSet filter_rt_outliers(const TrialSet& set, double k = 5.0) {
    detail::require_finite_positive(k, "k");
    const auto& recs = set.records();
    if (recs.size() < 2) throw std::invalid_argument("filter_rt_outliers needs at least two trials");
    std::vector<double> rts;
    rts.reserve(recs.size());
    for (const auto& r : recs) rts.push_back(r.rt_ms);
    const auto ms = detail::mean_sd(rts);
    std::vector<TrialRecord> kept;
    kept.reserve(recs.size());
    for (const auto& r : recs)
        if (!detail::is_outlier(r.rt_ms, ms, k)) kept.push_back(r);
    const auto removed = recs.size() - kept.size();
    return set.derive(std::move(kept), "filter_rt_outliers k=" + detail::format_double(k) + ": removed " +
                                           std::to_string(removed) + " of " + std::to_string(recs.size()));
}

// ---------------------------------------------------------------------------
// Conditions

enum class Condition : std::uint8_t { A1B1, A1B2, A2B1, A2B2, A0B1, A0B2, A1B0, A2B0 };

inline constexpr std::array<Condition, 8> kAllConditions{Condition::A1B1, Condition::A1B2, Condition::A2B1,
                                                         Condition::A2B2, Condition::A0B1, Condition::A0B2,
                                                         Condition::A1B0, Condition::A2B0};

/// The double-channel cells in canonical order 11, 12, 21, 22.
inline constexpr std::array<Condition, 4> kFactorialConditions{Condition::A1B1, Condition::A1B2, Condition::A2B1,
                                                               Condition::A2B2};

inline std::string_view to_string(Condition c) {
    constexpr std::array<std::string_view, 8> names{"a1b1", "a1b2", "a2b1", "a2b2", "a0b1", "a0b2", "a1b0", "a2b0"};
    return names[static_cast<std::size_t>(c)];
}

/// Which side of each split is level 1 (the slower-processed interval).
struct LevelDirection {
    bool alpha_level1_is_low = true;
    bool beta_level1_is_low = true;

    bool operator==(const LevelDirection&) const = default;
};

/// 1 or 2. Values below the split form the low interval.
inline int factor_level(double value, double split, bool level1_is_low) {
    const bool low = value < split;
    return low == level1_is_low ? 1 : 2;
}

inline Condition condition_of(const TrialRecord& r, double split_alpha, double split_beta, LevelDirection dir) {
    switch (r.channels) {
    case Channels::SingleAlpha:
        return factor_level(r.alpha, split_alpha, dir.alpha_level1_is_low) == 1 ? Condition::A1B0 : Condition::A2B0;
    case Channels::SingleBeta:
        return factor_level(r.beta, split_beta, dir.beta_level1_is_low) == 1 ? Condition::A0B1 : Condition::A0B2;
    case Channels::Double: break;
    }
    const int la = factor_level(r.alpha, split_alpha, dir.alpha_level1_is_low);
    const int lb = factor_level(r.beta, split_beta, dir.beta_level1_is_low);
    return static_cast<Condition>((la - 1) * 2 + (lb - 1));
}

using ConditionMap = std::map<Condition, TrialSet>;

/// Bins every trial into one of the eight condition labels. All eight keys are
/// present; empty cells are noted in their provenance.
inline ConditionMap partition_by_condition(const TrialSet& set, double split_alpha, double split_beta,
                                           LevelDirection dir = {}) {
    std::map<Condition, std::vector<TrialRecord>> bins;
    for (auto c : kAllConditions) bins[c];
    for (const auto& r : set.records()) bins[condition_of(r, split_alpha, split_beta, dir)].push_back(r);
    ConditionMap out;
    for (auto& [c, recs] : bins) {
        std::string line = "partition " + std::string(to_string(c)) + " split_alpha=" +
                           detail::format_double(split_alpha) + " split_beta=" + detail::format_double(split_beta);
        if (recs.empty()) line += " (empty)";
        out.emplace(c, set.derive(std::move(recs), std::move(line)));
    }
    return out;
}

/// Suggests level directions so that level 1 is the side of each split with
/// the larger mean RT among double-channel trials.
inline LevelDirection suggest_level_direction(const TrialSet& set, double split_alpha, double split_beta) {
    double sum[2][2] = {{0, 0}, {0, 0}};
    double cnt[2][2] = {{0, 0}, {0, 0}};
    for (const auto& r : set.records()) {
        if (r.channels != Channels::Double) continue;
        const int ia = r.alpha < split_alpha ? 0 : 1;
        const int ib = r.beta < split_beta ? 0 : 1;
        sum[0][ia] += r.rt_ms;
        cnt[0][ia] += 1;
        sum[1][ib] += r.rt_ms;
        cnt[1][ib] += 1;
    }
    const auto low_is_slower = [&](int f) {
        if (cnt[f][0] == 0 || cnt[f][1] == 0) return true;
        return sum[f][0] / cnt[f][0] >= sum[f][1] / cnt[f][1];
    };
    return {low_is_slower(0), low_is_slower(1)};
}

/// Response values (A, B) of one condition.
struct ResponseSample {
    std::vector<double> a;
    std::vector<double> b;
};

inline ResponseSample responses_of(const TrialSet& set) {
    ResponseSample s;
    for (const auto& r : set.records()) {
        s.a.push_back(r.a_final);
        s.b.push_back(r.b_final);
    }
    return s;
}

inline std::vector<double> rts_of(const TrialSet& set) {
    std::vector<double> out;
    out.reserve(set.size());
    for (const auto& r : set.records()) out.push_back(r.rt_ms);
    return out;
}

} // namespace sft
