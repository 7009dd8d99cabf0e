#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "reportsmith/value.hpp"

namespace reportsmith::profiler {

struct Quantiles {
    double p25 = 0, p50 = 0, p75 = 0;
};

struct FieldProfile {
    std::string name;
    Kind kind = Kind::nominal;
    std::size_t count = 0;
    std::size_t null_count = 0;
    /// Nulls are excluded.
    std::size_t distinct_count = 0;
    std::optional<double> min, max, mean, stddev;
    std::optional<Quantiles> quantiles;
    /// Population Fisher-Pearson g1; absent when stddev is 0 or fewer than 3 values.
    std::optional<double> skewness;
    double entropy_bits = 0;
    double normalized_entropy = 0;
    /// Count descending, then value ascending; at most 10 entries.
    std::vector<std::pair<Value, std::size_t>> top_k;
    std::optional<double> orders_of_magnitude;
    std::optional<bool> has_nonpositive;

    nlohmann::ordered_json to_json() const;
    static FieldProfile from_json(const nlohmann::json& j);
};

enum class PairKind { pearson_r, cramers_v, variance_ratio };
std::string_view to_string(PairKind k);

struct PairStat {
    /// For variance_ratio, field_a is the grouping field and field_b the measure.
    std::string field_a;
    std::string field_b;
    PairKind kind = PairKind::pearson_r;
    double value = 0;
    std::size_t complete_rows = 0;

    nlohmann::ordered_json to_json() const;
    static PairStat from_json(const nlohmann::json& j);
};

enum class HintKind { facet_candidate, measure_candidate, correlation, trend_axis, skew_alert, null_alert };
std::string_view to_string(HintKind k);
HintKind hint_kind_from_string(std::string_view s);

struct Hint {
    HintKind kind = HintKind::facet_candidate;
    std::vector<std::string> fields;
    std::vector<std::pair<std::string, double>> evidence;
    std::string rule_id;

    /// "rule_id:field[,field...]"; the unit of grounding for insight plans.
    std::string grounding_ref() const;
    std::optional<double> evidence_value(std::string_view name) const;
    nlohmann::ordered_json to_json() const;
    static Hint from_json(const nlohmann::json& j);
};

struct HintRule {
    std::string rule_id;
    HintKind kind = HintKind::facet_candidate;
    std::map<std::string, double> thresholds;

    double threshold(const std::string& key, double fallback) const;
};

/// Editable rule list (`rules.json`). Rule order determines hint order.
struct HintRuleSet {
    std::vector<HintRule> rules;

    static HintRuleSet defaults();
    static HintRuleSet from_json(const nlohmann::json& j);
    static HintRuleSet load(const std::filesystem::path& p);
    nlohmann::ordered_json to_json() const;
    const HintRule* find(HintKind kind) const;
};

struct StatisticalProfile {
    std::vector<FieldProfile> per_field;
    std::vector<PairStat> pairs;
    std::vector<Hint> hints;
    std::string profile_digest;

    const FieldProfile* find(std::string_view name) const;
    nlohmann::ordered_json to_json() const;
    static StatisticalProfile from_json(const nlohmann::json& j);
};

// Kernels. The *_serial variants are the reference implementations; the
// default entry points spread fields or pairs across OpenMP threads and must
// produce identical results.

FieldProfile profile_field(const std::string& name, const std::vector<Value>& column, Kind kind);
std::vector<FieldProfile> profile_fields(const Table& table);
std::vector<FieldProfile> profile_fields_serial(const Table& table);

/// Pearson for quantitative x quantitative, Cramer's V for discrete x discrete
/// and variance ratio for discrete x quantitative, over rows complete in both
/// fields. Discrete fields need <= 50 distinct values; pairs with fewer than 3
/// complete rows or a degenerate denominator are omitted.
std::vector<PairStat> profile_pairs(const Table& table, const std::vector<FieldProfile>& fields);
std::vector<PairStat> profile_pairs_serial(const Table& table, const std::vector<FieldProfile>& fields);

std::vector<Hint> generate_hints(const std::vector<FieldProfile>& fields, const std::vector<PairStat>& pairs,
                                 const HintRuleSet& rules);

StatisticalProfile build_profile(const Table& table, const HintRuleSet& rules);

struct ProfileQuery {
    enum class Kind { field_summary, facet_candidates, top_correlations, temporal_fields, distinct_values };
    Kind kind = Kind::facet_candidates;
    std::string field;
    std::size_t n = 5;
    std::size_t limit = 10;

    /// Throws UnknownQueryKind for unrecognized kinds.
    static ProfileQuery from_json(const nlohmann::json& j);
    nlohmann::ordered_json to_json() const;
};

struct HintResponse {
    nlohmann::ordered_json payload;
    std::vector<Hint> hints;
};

/// Answers from the profile alone. Throws UnknownField.
HintResponse query_profile(const StatisticalProfile& profile, const ProfileQuery& query);

}  // namespace reportsmith::profiler
