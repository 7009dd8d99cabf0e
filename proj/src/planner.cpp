#include "reportsmith/planner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "reportsmith/digest.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/json_util.hpp"

namespace reportsmith::planner {

using nlohmann::json;
using nlohmann::ordered_json;
using profiler::Hint;
using profiler::HintKind;

namespace {

constexpr const char* kInstructions =
    "You plan the insights of a data report. Work in steps. Each step answer with one JSON object: "
    "either {\"action\":\"query_profile\",\"query\":{\"kind\":...}} to inspect the dataset profile "
    "(kinds: field_summary {field}, facet_candidates, top_correlations {n}, temporal_fields, distinct_values "
    "{field, limit}), or {\"action\":\"final\",\"plans\":[...]} with exactly insight_count plans. "
    "A plan is {\"insight_id\",\"title\",\"question\",\"task\",\"fields\":[{\"name\",\"role\"}],\"grounding\":[...]}. "
    "task is one of distribution, correlation, ranking, trend, part_to_whole, comparison, outlier. "
    "role is one of measure, dimension, time, detail. grounding lists hint references "
    "(\"rule_id:field[,field]\") or \"field_summary:<field>\" entries returned by your queries. "
    "At most 8 queries.";

std::string field_summary_ref(const std::string& field) { return "field_summary:" + field; }

std::string join_names(const std::vector<PlanField>& fields) {
    std::string s;
    for (const auto& f : fields) {
        if (!s.empty()) s += ", ";
        s += f.name;
    }
    return s;
}

struct Candidate {
    Task task;
    std::vector<PlanField> fields;
    std::vector<std::string> grounding;
    double score = 0;

    std::vector<std::string> names() const {
        std::vector<std::string> n;
        for (const auto& f : fields) n.push_back(f.name);
        return n;
    }
};

bool better(const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    auto an = a.names(), bn = b.names();
    if (an != bn) return an < bn;
    return to_string(a.task) < to_string(b.task);
}

const Hint* find_hint(const profiler::StatisticalProfile& p, HintKind kind, const std::string& field) {
    for (const auto& h : p.hints)
        if (h.kind == kind && !h.fields.empty() && h.fields[0] == field) return &h;
    return nullptr;
}

std::string title_for(Task task, const std::vector<PlanField>& fields) {
    auto first = [&](Role r) -> std::string {
        for (const auto& f : fields)
            if (f.role == r) return f.name;
        return {};
    };
    switch (task) {
        case Task::trend: {
            auto m = first(Role::measure);
            return m.empty() ? "Records per " + first(Role::time) : m + " over " + first(Role::time);
        }
        case Task::correlation: return fields[0].name + " vs " + fields[1].name;
        case Task::comparison: return first(Role::measure) + " by " + first(Role::dimension);
        case Task::ranking: return "Top " + first(Role::dimension) + " by " + first(Role::measure);
        case Task::distribution: return "Distribution of " + fields[0].name;
        case Task::part_to_whole: return "Share of records by " + fields[0].name;
        case Task::outlier: return "Outliers in " + fields[0].name;
    }
    return join_names(fields);
}

std::string question_for(Task task, const std::vector<PlanField>& fields) {
    auto first = [&](Role r) -> std::string {
        for (const auto& f : fields)
            if (f.role == r) return f.name;
        return {};
    };
    switch (task) {
        case Task::trend: {
            auto m = first(Role::measure);
            return m.empty() ? "How many records are there per " + first(Role::time) + "?"
                             : "How does the average " + m + " change over " + first(Role::time) + "?";
        }
        case Task::correlation: return "How are " + fields[0].name + " and " + fields[1].name + " related?";
        case Task::comparison:
            return "How does the average " + first(Role::measure) + " compare across " + first(Role::dimension) + "?";
        case Task::ranking: return "Which " + first(Role::dimension) + " rank highest by " + first(Role::measure) + "?";
        case Task::distribution: return "How is " + fields[0].name + " distributed?";
        case Task::part_to_whole: return "What share of records falls in each " + fields[0].name + "?";
        case Task::outlier: return "Which records are unusual in " + fields[0].name + "?";
    }
    return {};
}

InsightPlan to_plan(const Candidate& c) {
    InsightPlan p;
    p.task = c.task;
    p.fields = c.fields;
    p.grounding = c.grounding;
    p.insight_id = make_insight_id(c.task, c.fields);
    p.title = title_for(c.task, c.fields);
    p.question = question_for(c.task, c.fields);
    return p;
}

std::map<Task, std::vector<Candidate>> enumerate(const ingest::DatasetSchema& schema,
                                                 const profiler::StatisticalProfile& profile) {
    std::vector<std::string> temporals, measures, facets, identifiers;
    for (const auto& h : profile.hints) {
        if (h.fields.empty() || !schema.find(h.fields[0])) continue;
        if (h.kind == HintKind::trend_axis) temporals.push_back(h.fields[0]);
        if (h.kind == HintKind::measure_candidate) measures.push_back(h.fields[0]);
        if (h.kind == HintKind::facet_candidate) facets.push_back(h.fields[0]);
    }
    for (const auto& f : schema.fields)
        if (f.kind == Kind::identifier) identifiers.push_back(f.name);

    // Highest normalized entropy wins; names break ties.
    std::optional<std::string> best_facet;
    double best_h = -1;
    for (const auto& f : facets) {
        const auto* fp = profile.find(f);
        const double h = fp ? fp->normalized_entropy : 0;
        if (h > best_h || (h == best_h && best_facet && f < *best_facet)) {
            best_h = h;
            best_facet = f;
        }
    }

    std::map<Task, std::vector<Candidate>> out;
    const auto ref = [&](HintKind k, const std::string& f) {
        const Hint* h = find_hint(profile, k, f);
        return h ? h->grounding_ref() : field_summary_ref(f);
    };

    for (const auto& t : temporals) {
        if (measures.empty()) {
            out[Task::trend].push_back({Task::trend, {{t, Role::time}}, {ref(HintKind::trend_axis, t)}, 10});
            continue;
        }
        for (const auto& m : measures)
            out[Task::trend].push_back({Task::trend,
                                        {{t, Role::time}, {m, Role::measure}},
                                        {ref(HintKind::trend_axis, t), ref(HintKind::measure_candidate, m)},
                                        15});
    }

    for (const auto& h : profile.hints) {
        if (h.kind != HintKind::correlation || h.fields.size() != 2) continue;
        const auto* a = schema.find(h.fields[0]);
        const auto* b = schema.find(h.fields[1]);
        if (!a || !b || a->kind != Kind::quantitative || b->kind != Kind::quantitative) continue;
        Candidate c{Task::correlation, {{a->name, Role::measure}, {b->name, Role::measure}}, {h.grounding_ref()}, 0};
        c.score = 8 + 4 * std::abs(h.evidence_value("pearson_r").value_or(0));
        if (best_facet) {
            c.fields.push_back({*best_facet, Role::dimension});
            c.grounding.push_back(ref(HintKind::facet_candidate, *best_facet));
        }
        out[Task::correlation].push_back(std::move(c));
    }

    for (const auto& f : schema.fields) {
        if (!is_discrete(f.kind)) continue;
        const auto* fp = profile.find(f.name);
        const bool facet = std::find(facets.begin(), facets.end(), f.name) != facets.end();
        if (!facet && (!fp || fp->distinct_count < 2 || fp->distinct_count > 20)) continue;
        for (const auto& m : measures)
            out[Task::comparison].push_back({Task::comparison,
                                             {{f.name, Role::dimension}, {m, Role::measure}},
                                             {ref(HintKind::facet_candidate, f.name), ref(HintKind::measure_candidate, m)},
                                             facet ? 8.0 : 6.0});
    }

    for (const auto& f : schema.fields) {
        const auto* fp = profile.find(f.name);
        if (!fp) continue;
        if (f.kind == Kind::quantitative && std::find(measures.begin(), measures.end(), f.name) != measures.end()) {
            const Hint* skew = find_hint(profile, HintKind::skew_alert, f.name);
            std::vector<std::string> g{skew ? skew->grounding_ref() : ref(HintKind::measure_candidate, f.name)};
            out[Task::distribution].push_back({Task::distribution, {{f.name, Role::measure}}, g, skew ? 6.0 : 4.0});
        } else if (is_discrete(f.kind) && fp->distinct_count >= 2) {
            out[Task::distribution].push_back(
                {Task::distribution, {{f.name, Role::dimension}}, {ref(HintKind::facet_candidate, f.name)}, 4});
        }
    }

    for (const auto& i : identifiers)
        for (const auto& m : measures)
            out[Task::ranking].push_back({Task::ranking,
                                          {{i, Role::dimension}, {m, Role::measure}},
                                          {field_summary_ref(i), ref(HintKind::measure_candidate, m)},
                                          5});

    for (auto& [task, list] : out) std::sort(list.begin(), list.end(), better);
    return out;
}

}  // namespace

void Intent::validate() const {
    if (insight_count < 1 || insight_count > 12)
        throw Error(ErrorCode::InvalidConfig, "insight_count must be between 1 and 12, got " + std::to_string(insight_count));
}

ordered_json Intent::to_json() const {
    ordered_json j;
    j["goal"] = goal;
    j["insight_count"] = insight_count;
    j["audience_note"] = audience_note ? ordered_json(*audience_note) : ordered_json(nullptr);
    return j;
}

std::vector<std::string> InsightPlan::fields_with(Role role) const {
    std::vector<std::string> out;
    for (const auto& f : fields)
        if (f.role == role) out.push_back(f.name);
    return out;
}

ordered_json InsightPlan::to_json() const {
    ordered_json j;
    j["insight_id"] = insight_id;
    j["title"] = title;
    j["question"] = question;
    j["task"] = to_string(task);
    j["fields"] = ordered_json::array();
    for (const auto& f : fields) j["fields"].push_back({{"name", f.name}, {"role", to_string(f.role)}});
    j["grounding"] = grounding;
    return j;
}

InsightPlan InsightPlan::from_json(const json& j) {
    std::vector<std::string> v;
    InsightPlan p;
    if (!j.is_object()) throw PlanInvalid({"plan must be a JSON object"});
    auto str = [&](const char* key, std::string& out, bool required) {
        if (j.contains(key) && j[key].is_string()) out = j[key].get<std::string>();
        else if (required) v.push_back(std::string("missing string '") + key + "'");
    };
    str("insight_id", p.insight_id, false);
    str("title", p.title, false);
    str("question", p.question, false);
    std::string task;
    str("task", task, true);
    if (!task.empty()) {
        if (is_task_name(task)) p.task = task_from_string(task);
        else v.push_back("task '" + task + "' is not in the taxonomy");
    }
    if (j.contains("fields") && j["fields"].is_array()) {
        for (const auto& f : j["fields"]) {
            if (!f.is_object() || !f.contains("name") || !f["name"].is_string() || !f.contains("role") ||
                !f["role"].is_string()) {
                v.push_back("each field needs string 'name' and 'role'");
                continue;
            }
            try {
                p.fields.push_back({f["name"].get<std::string>(), role_from_string(f["role"].get<std::string>())});
            } catch (const Error&) {
                v.push_back("unknown role '" + f["role"].get<std::string>() + "'");
            }
        }
    } else {
        v.push_back("missing array 'fields'");
    }
    if (j.contains("grounding") && j["grounding"].is_array()) {
        for (const auto& g : j["grounding"])
            if (g.is_string()) p.grounding.push_back(g.get<std::string>());
    }
    if (!v.empty()) throw PlanInvalid(v);
    if (p.insight_id.empty() && !p.fields.empty()) p.insight_id = make_insight_id(p.task, p.fields);
    if (p.title.empty() && !p.fields.empty()) p.title = title_for(p.task, p.fields);
    if (p.question.empty() && !p.fields.empty()) p.question = question_for(p.task, p.fields);
    return p;
}

std::string InsightPlan::digest() const { return json_digest(to_plain(to_json())); }

void validate_plan(const InsightPlan& plan, const ingest::DatasetSchema& schema) {
    std::vector<std::string> v;
    if (plan.insight_id.empty()) v.push_back("insight_id is empty");
    if (plan.fields.empty()) v.push_back("fields list is empty");
    if (plan.grounding.empty()) v.push_back("grounding is empty");
    std::set<std::string> seen;
    for (const auto& f : plan.fields) {
        if (!seen.insert(f.name).second) v.push_back("field '" + f.name + "' appears twice");
        const auto* fs = schema.find(f.name);
        if (!fs) {
            v.push_back("field '" + f.name + "' does not exist");
            continue;
        }
        switch (f.role) {
            case Role::time:
                if (fs->kind != Kind::temporal)
                    v.push_back("time role on non-temporal field '" + f.name + "' (" + std::string(to_string(fs->kind)) + ")");
                break;
            case Role::measure:
                if (fs->kind != Kind::quantitative && fs->kind != Kind::boolean)
                    v.push_back("measure role on " + std::string(to_string(fs->kind)) + " field '" + f.name + "'");
                break;
            case Role::dimension:
                if (fs->kind == Kind::quantitative)
                    v.push_back("dimension role on quantitative field '" + f.name + "'");
                break;
            case Role::detail: break;
        }
    }
    if (!v.empty()) throw PlanInvalid(v);
}

std::string make_insight_id(Task task, const std::vector<PlanField>& fields) {
    std::string s(to_string(task));
    std::replace(s.begin(), s.end(), '_', '-');
    for (const auto& f : fields) {
        s += '-';
        bool dash = true;
        for (unsigned char c : f.name) {
            if (std::isalnum(c)) {
                s += static_cast<char>(std::tolower(c));
                dash = false;
            } else if (!dash) {
                s += '-';
                dash = true;
            }
        }
        while (!s.empty() && s.back() == '-') s.pop_back();
    }
    return s;
}

std::vector<InsightPlan> fallback_plan(const Intent& intent, const ingest::DatasetSchema& schema,
                                       const profiler::StatisticalProfile& profile) {
    intent.validate();
    auto by_task = enumerate(schema, profile);
    std::vector<InsightPlan> out;
    std::set<std::string> ids;
    for (std::size_t tier = 0; out.size() < static_cast<std::size_t>(intent.insight_count); ++tier) {
        std::vector<Candidate> level;
        for (const auto& [task, list] : by_task)
            if (tier < list.size()) level.push_back(list[tier]);
        if (level.empty()) break;
        std::sort(level.begin(), level.end(), better);
        for (const auto& c : level) {
            if (out.size() >= static_cast<std::size_t>(intent.insight_count)) break;
            auto p = to_plan(c);
            if (!ids.insert(p.insight_id).second) continue;
            out.push_back(std::move(p));
        }
    }
    if (out.empty()) throw Error(ErrorCode::InsufficientFields, "no insight candidate can be formed from this dataset");
    return out;
}

std::set<std::string> fallback_evidence(const profiler::StatisticalProfile& profile,
                                        const ingest::DatasetSchema& schema) {
    std::set<std::string> refs;
    for (const auto& h : profile.hints) refs.insert(h.grounding_ref());
    for (const auto& f : schema.fields) refs.insert(field_summary_ref(f.name));
    return refs;
}

llm::GatewayRequest step_request(const Intent& intent, const ingest::DatasetSchema& schema,
                                 const std::vector<std::string>& transcript,
                                 const std::optional<std::string>& feedback) {
    llm::GatewayRequest req;
    req.role = llm::AgentRole::planner;
    req.schema_id = "plan_step";
    req.text_parts.push_back(kInstructions);
    std::ostringstream in;
    in << "goal: " << intent.goal << "\ninsight_count: " << intent.insight_count;
    if (intent.audience_note) in << "\naudience: " << *intent.audience_note;
    req.text_parts.push_back(in.str());
    std::ostringstream fs;
    fs << "dataset: " << schema.description << "\nfields:";
    for (const auto& f : schema.fields) fs << "\n- " << f.name << " (" << to_string(f.kind) << ")";
    req.text_parts.push_back(fs.str());
    if (!transcript.empty()) {
        std::string t = "transcript:";
        for (const auto& line : transcript) t += "\n" + line;
        req.text_parts.push_back(t);
    }
    if (feedback) req.text_parts.push_back("your previous final answer was rejected: " + *feedback);
    return req;
}

PlanOutcome plan_insights(const Intent& intent, const ingest::DatasetSchema& schema,
                          const profiler::StatisticalProfile& profile, llm::Gateway* gateway, trace::Span& span) {
    intent.validate();
    PlanOutcome out;

    auto fallback = [&](const std::string& reason) {
        out.plans = fallback_plan(intent, schema, profile);
        out.used_fallback = true;
        out.returned_refs = fallback_evidence(profile, schema);
        span.degrade();
        span.set("planner_path", "fallback");
        span.set("fallback_reason", reason);
        if (out.plans.size() < static_cast<std::size_t>(intent.insight_count)) {
            auto w = span.child("warning:insight_shortfall");
            w.set("span_kind", "warning");
            w.set("requested", intent.insight_count);
            w.set("planned", out.plans.size());
            w.degrade();
        }
    };
    auto finish = [&]() {
        span.set("tool_calls", out.tool_calls);
        span.set("plan_retries", out.retries);
        span.set("returned_hints", std::vector<std::string>(out.returned_refs.begin(), out.returned_refs.end()));
        return out;
    };

    if (!gateway) {
        fallback("no gateway");
        return finish();
    }

    std::vector<std::string> transcript;
    std::optional<std::string> feedback;
    const int max_steps = kMaxToolCalls + kMaxRetries + 4;
    for (int step = 0; step < max_steps; ++step) {
        llm::GatewayResponse resp;
        try {
            resp = gateway->complete(step_request(intent, schema, transcript, feedback), span);
        } catch (const Error& e) {
            fallback(e.what());
            return finish();
        }
        const json& parsed = resp.parsed;
        if (parsed.at("action") == "query_profile") {
            transcript.push_back("action: " + canonical_dump(parsed.at("query")));
            if (out.tool_calls >= kMaxToolCalls) {
                transcript.push_back("observation: tool budget exhausted; answer with action final");
                continue;
            }
            ++out.tool_calls;
            auto tool = span.child("tool:query_profile", std::to_string(out.tool_calls));
            tool.set("span_kind", "tool");
            tool.set("query", to_ordered(parsed.at("query")));
            try {
                auto q = profiler::ProfileQuery::from_json(parsed.at("query"));
                auto r = profiler::query_profile(profile, q);
                std::vector<std::string> refs;
                for (const auto& h : r.hints) refs.push_back(h.grounding_ref());
                if (q.kind == profiler::ProfileQuery::Kind::field_summary ||
                    q.kind == profiler::ProfileQuery::Kind::distinct_values)
                    refs.push_back(field_summary_ref(q.field));
                out.returned_refs.insert(refs.begin(), refs.end());
                tool.set("returned_hints", refs);
                transcript.push_back("observation: " + r.payload.dump());
            } catch (const Error& e) {
                tool.fail(e.what());
                transcript.push_back(std::string("observation: error: ") + e.what());
            }
            continue;
        }

        std::vector<std::string> violations;
        std::vector<InsightPlan> plans;
        std::set<std::string> ids;
        for (const auto& pj : parsed.at("plans")) {
            try {
                auto p = InsightPlan::from_json(pj);
                validate_plan(p, schema);
                for (const auto& g : p.grounding)
                    if (!out.returned_refs.contains(g))
                        violations.push_back(p.insight_id + ": grounding '" + g + "' was not returned by any query");
                if (!ids.insert(p.insight_id).second) violations.push_back("duplicate insight_id " + p.insight_id);
                plans.push_back(std::move(p));
            } catch (const PlanInvalid& e) {
                for (const auto& v : e.violations()) violations.push_back(v);
            }
        }
        if (violations.empty() && plans.size() != static_cast<std::size_t>(intent.insight_count))
            violations.push_back("expected " + std::to_string(intent.insight_count) + " plans, got " +
                                 std::to_string(plans.size()));
        if (violations.empty()) {
            out.plans = std::move(plans);
            span.set("planner_path", "llm");
            return finish();
        }
        std::string msg;
        for (const auto& v : violations) msg += (msg.empty() ? "" : "; ") + v;
        if (out.retries >= kMaxRetries) {
            fallback("invalid plans after retries: " + msg);
            return finish();
        }
        ++out.retries;
        feedback = msg;
        transcript.push_back("action: final (rejected)");
    }
    fallback("step budget exhausted");
    return finish();
}

}  // namespace reportsmith::planner
