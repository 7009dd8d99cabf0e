#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reportsmith/deriver.hpp"
#include "reportsmith/planner.hpp"
#include "reportsmith/profiler.hpp"
#include "reportsmith/publisher.hpp"
#include "reportsmith/roles.hpp"

namespace reportsmith::vizrec {

enum class Mark { point, bar, line, area, tick, rect };
enum class Channel { x, y, color, size, facet };
enum class Scale { linear, log, symlog, ordinal, temporal };
enum class Aggregate { none, count, sum, mean };

inline constexpr Mark kMarks[] = {Mark::point, Mark::bar, Mark::line, Mark::area, Mark::tick, Mark::rect};
inline constexpr Channel kChannels[] = {Channel::x, Channel::y, Channel::color, Channel::size, Channel::facet};

std::string_view to_string(Mark m);
std::string_view to_string(Channel c);
std::string_view to_string(Scale s);
std::string_view to_string(Aggregate a);

/// Name of the virtual count field offered when a single field is bound.
inline constexpr const char* kCountField = "__count__";

struct StatsExcerpt {
    std::size_t distinct_count = 0;
    std::optional<double> skewness;
    std::optional<bool> has_nonpositive;
    std::optional<double> orders_of_magnitude;
    std::optional<double> min, max;
    /// The facet hint rule fires on this field's result profile.
    bool facet_evidence = false;
    /// Every non-null value is a number (years vs ISO dates for temporal fields).
    bool numeric = false;
};

struct BoundField {
    std::string field;
    Role role = Role::measure;
    Kind kind = Kind::quantitative;
    StatsExcerpt stats;
};

struct PartialSpec {
    std::string insight_id;
    Task task = Task::distribution;
    std::vector<BoundField> bound_fields;
    std::vector<std::string> dropped_fields;

    nlohmann::ordered_json to_json() const;
    static PartialSpec from_json(const nlohmann::json& j);
};

struct Encoding {
    Channel channel = Channel::x;
    std::string field;
    Scale scale = Scale::linear;
    Aggregate aggregate = Aggregate::none;
    std::optional<int> bin;
};

struct DecisionEntry {
    int rank = 0;
    double cost = 0;
    std::vector<std::string> reasons;
    std::string candidate;
};

struct CompleteSpec {
    Mark mark = Mark::point;
    /// Ordered x, y, color, size, facet; absent channels omitted.
    std::vector<Encoding> encodings;
    double cost = 0;
    std::vector<std::string> reasons;
    std::vector<DecisionEntry> decision_log;

    const Encoding* find(Channel c) const;
    /// Canonical text form; ties between equal-cost candidates go to the smaller one.
    std::string serialize() const;
    nlohmann::ordered_json to_json() const;
    static CompleteSpec from_json(const nlohmann::json& j);
};

/// Hard-constraint parameters and soft-rule weights (`viz_knowledge.json`).
/// A rule or weight missing from the file contributes nothing.
struct Knowledge {
    double skew_min_orders_of_magnitude = 3;
    double skew_min_abs_skewness = 2;
    int bin_count = 20;
    double symlog_constant = 1;
    int facet_min_distinct = 2;
    int facet_max_distinct = 12;
    int color_max_categories = 10;
    int few_categories = 3;
    /// rule id -> weight name -> weight
    std::map<std::string, std::map<std::string, double>> weights;

    static Knowledge defaults();
    static Knowledge from_json(const nlohmann::json& j);
    static Knowledge load(const std::filesystem::path& p);
    nlohmann::ordered_json to_json() const;
    /// 0 when the rule or weight is absent.
    double weight(const std::string& rule, const std::string& name) const;
    bool is_skewed(const StatsExcerpt& s) const;
};

/// One bound field per role-carrying result column; detail columns past the
/// fourth are dropped. Throws NoBindableFields.
PartialSpec build_partial_spec(const deriver::DerivedDataset& derived, const planner::InsightPlan& plan,
                               const profiler::HintRuleSet& rules);

/// Names of the violated hard constraints (H1..H8); empty when valid.
std::vector<std::string> hard_violations(const CompleteSpec& spec, const PartialSpec& partial, const Knowledge& kb);

/// Sum of fired soft-rule weights; reason codes go to `reasons` when given.
double cost(const CompleteSpec& spec, const PartialSpec& partial, const Knowledge& kb,
            std::vector<std::string>* reasons = nullptr);

/// Every candidate that passes the hard constraints, in generation order.
/// Throws NoValidCandidate when none survive.
std::vector<CompleteSpec> enumerate_candidates(const PartialSpec& partial, const Knowledge& kb);

/// Candidates generated before hard-constraint filtering.
std::size_t raw_candidate_count(const PartialSpec& partial);

/// Minimum-cost candidate, ties by serialize(); decision_log holds the top 5.
/// Skeletons (mark + channel assignment) are scored across OpenMP threads.
CompleteSpec solve(const PartialSpec& partial, const Knowledge& kb);
/// Single-threaded reference for solve().
CompleteSpec solve_serial(const PartialSpec& partial, const Knowledge& kb);

/// Vega-Lite v5 document. Deterministic bytes for identical inputs.
std::string to_render_doc(const CompleteSpec& spec, const PartialSpec& partial, const publisher::ArtifactRef& artifact,
                          const std::string& title, const Knowledge& kb);

}  // namespace reportsmith::vizrec
