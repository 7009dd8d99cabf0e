#include "reportsmith/reporter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <sstream>

#include "reportsmith/digest.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/io.hpp"
#include "reportsmith/json_util.hpp"

namespace reportsmith::reporter {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kNarrateInstructions =
    "Write two or three plain sentences answering the question from the statistics given. Answer with JSON "
    "{\"body\": <markdown>, \"citations\": [{\"name\": <statistic>, \"value\": <number>}]} and cite every "
    "number you write. Put field names and category labels in backticks.";

struct Cols {
    const deriver::DerivedDataset& d;

    std::vector<std::string> with(Role r) const {
        std::vector<std::string> out;
        for (const auto& c : d.result_schema)
            if (d.final_query.role_of(c.name) == r) out.push_back(c.name);
        return out;
    }
    std::optional<std::size_t> index(const std::string& name) const {
        for (std::size_t i = 0; i < d.result_schema.size(); ++i)
            if (d.result_schema[i].name == name) return i;
        return std::nullopt;
    }
    const profiler::FieldProfile* profile(const std::string& name) const {
        for (const auto& f : d.mini_profile)
            if (f.name == name) return &f;
        return nullptr;
    }
    // Row index holding the largest (or smallest) numeric value in the column.
    std::optional<std::size_t> arg_extreme(const std::string& name, bool largest) const {
        auto c = index(name);
        if (!c) return std::nullopt;
        std::optional<std::size_t> best;
        double bv = 0;
        for (std::size_t r = 0; r < d.rows.rows.size(); ++r) {
            auto v = as_double(d.rows.rows[r][*c]);
            if (!v) continue;
            if (!best || (largest ? *v > bv : *v < bv)) {
                best = r;
                bv = *v;
            }
        }
        return best;
    }
    std::string cell(std::size_t row, const std::string& name) const { return to_text(d.rows.rows[row][*index(name)]); }
};

class Writer {
public:
    std::string stat(const std::string& name, double v) {
        std::string t = format_stat(v);
        cites.push_back({name, v, t});
        return t;
    }
    static std::string code(const std::string& s) { return "`" + s + "`"; }
    std::vector<Citation> cites;
};

std::optional<double> pearson(const deriver::DerivedDataset& d, std::size_t a, std::size_t b, std::size_t& n) {
    std::vector<std::pair<double, double>> xy;
    for (const auto& r : d.rows.rows) {
        auto x = as_double(r[a]), y = as_double(r[b]);
        if (x && y) xy.emplace_back(*x, *y);
    }
    n = xy.size();
    if (n < 3) return std::nullopt;
    double mx = 0, my = 0;
    for (auto [x, y] : xy) mx += x, my += y;
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (auto [x, y] : xy) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if (sxx == 0 || syy == 0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

std::string html_escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
            case '&': o += "&amp;"; break;
            case '<': o += "&lt;"; break;
            case '>': o += "&gt;"; break;
            case '"': o += "&quot;"; break;
            default: o += c;
        }
    }
    return o;
}

ordered_json citations_json(const std::vector<Citation>& cs) {
    ordered_json a = ordered_json::array();
    for (const auto& c : cs) a.push_back({{"name", c.name}, {"value", c.value}, {"text", c.text}});
    return a;
}

}  // namespace

ordered_json Narrative::to_json() const {
    ordered_json j;
    j["insight_id"] = insight_id;
    j["title"] = title;
    j["body_markdown"] = body_markdown;
    j["stat_citations"] = citations_json(stat_citations);
    j["source"] = source;
    return j;
}

Narrative Narrative::from_json(const json& j) {
    Narrative n;
    n.insight_id = j.at("insight_id").get<std::string>();
    n.title = j.at("title").get<std::string>();
    n.body_markdown = j.at("body_markdown").get<std::string>();
    for (const auto& c : j.at("stat_citations"))
        n.stat_citations.push_back({c.at("name").get<std::string>(), c.at("value").get<double>(),
                                    c.value("text", format_stat(c.at("value").get<double>()))});
    n.source = j.value("source", "template");
    return n;
}

std::string format_stat(double v) {
    if (!std::isfinite(v)) return "0";
    if (std::abs(v - std::round(v)) < 1e-9 && std::abs(v) < 1e15) {
        std::ostringstream s;
        s << static_cast<long long>(std::llround(v));
        return s.str();
    }
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << v;
    std::string t = s.str();
    while (!t.empty() && t.back() == '0') t.pop_back();
    if (!t.empty() && t.back() == '.') t.pop_back();
    if (t == "-0") t = "0";
    return t;
}

std::vector<std::string> uncited_numbers(const std::string& body, const std::vector<Citation>& citations) {
    std::vector<std::string> out;
    bool in_code = false;
    for (std::size_t i = 0; i < body.size();) {
        const char c = body[i];
        if (c == '`') {
            in_code = !in_code;
            ++i;
            continue;
        }
        const char prev = i > 0 ? body[i - 1] : ' ';
        const bool glued = std::isalnum(static_cast<unsigned char>(prev)) || prev == '_' || prev == '.';
        const bool starts_digit =
            std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && !glued && i + 1 < body.size() && std::isdigit(static_cast<unsigned char>(body[i + 1])));
        if (in_code || !starts_digit) {
            ++i;
            continue;
        }
        std::size_t j = i + (c == '-' ? 1 : 0);
        while (j < body.size() && std::isdigit(static_cast<unsigned char>(body[j]))) ++j;
        std::size_t decimals = 0;
        if (j + 1 < body.size() && body[j] == '.' && std::isdigit(static_cast<unsigned char>(body[j + 1]))) {
            std::size_t k = j + 1;
            while (k < body.size() && std::isdigit(static_cast<unsigned char>(body[k]))) ++k;
            decimals = k - j - 1;
            j = k;
        }
        // Identifier tails such as p25 or v2 are not figures.
        if (glued || (j < body.size() && (std::isalpha(static_cast<unsigned char>(body[j])) || body[j] == '_'))) {
            i = j;
            continue;
        }
        std::string tok = body.substr(i, j - i);
        const double v = std::stod(tok);
        const double scale = std::pow(10.0, static_cast<double>(decimals));
        const bool ok = std::any_of(citations.begin(), citations.end(), [&](const Citation& cit) {
            if (cit.text == tok) return true;
            return std::abs(std::round(cit.value * scale) / scale - v) <= 1e-9 * std::max(1.0, std::abs(v));
        });
        if (!ok) out.push_back(tok);
        i = j;
    }
    return out;
}

Narrative template_narrative(const planner::InsightPlan& plan, const deriver::DerivedDataset& derived,
                             const vizrec::CompleteSpec& spec) {
    (void)spec;
    Narrative n;
    n.insight_id = plan.insight_id;
    n.title = plan.title;
    Cols cols{derived};
    Writer w;
    std::ostringstream b;
    const auto measures = cols.with(Role::measure);
    const auto dims = cols.with(Role::dimension);
    const auto times = cols.with(Role::time);
    const std::size_t nrows = derived.rows.rows.size();
    auto prof = [&](const std::string& f) { return cols.profile(f); };
    auto code = Writer::code;
    bool done = false;

    switch (plan.task) {
        case Task::trend: {
            const std::string t = !times.empty() ? times[0] : !dims.empty() ? dims[0] : "";
            if (t.empty() || measures.empty()) break;
            const auto* pm = prof(measures[0]);
            const auto* pt = prof(t);
            auto peak = cols.arg_extreme(measures[0], true);
            if (!pm || !pm->min || !pt || !peak) break;
            b << code(measures[0]) << " ranges from " << w.stat("min:" + measures[0], *pm->min) << " to "
              << w.stat("max:" + measures[0], *pm->max) << " across "
              << w.stat("periods:" + t, static_cast<double>(pt->distinct_count)) << " periods of " << code(t)
              << ". The peak falls in " << code(cols.cell(*peak, t)) << ".";
            done = true;
            break;
        }
        case Task::correlation: {
            if (measures.size() < 2) break;
            std::size_t n = 0;
            auto r = pearson(derived, *cols.index(measures[0]), *cols.index(measures[1]), n);
            b << "Across " << w.stat("records", static_cast<double>(n)) << " records, " << code(measures[0]) << " and "
              << code(measures[1]);
            if (r) b << " have a Pearson correlation of " << w.stat("pearson_r", *r) << ".";
            else b << " show no measurable linear relationship.";
            const auto* pa = prof(measures[0]);
            const auto* pb = prof(measures[1]);
            if (pa && pb && pa->quantiles && pb->quantiles)
                b << " The median " << code(measures[0]) << " is " << w.stat("median:" + measures[0], pa->quantiles->p50)
                  << " and the median " << code(measures[1]) << " is "
                  << w.stat("median:" + measures[1], pb->quantiles->p50) << ".";
            if (!dims.empty())
                if (const auto* pd = prof(dims[0]))
                    b << " The records span " << w.stat("groups:" + dims[0], static_cast<double>(pd->distinct_count))
                      << " " << code(dims[0]) << " groups.";
            done = true;
            break;
        }
        case Task::comparison: {
            if (measures.empty() || dims.empty()) break;
            auto hi = cols.arg_extreme(measures[0], true), lo = cols.arg_extreme(measures[0], false);
            const auto* pm = prof(measures[0]);
            if (!hi || !lo || !pm || !pm->max) break;
            b << code(measures[0]) << " is highest for " << code(cols.cell(*hi, dims[0])) << " at "
              << w.stat("max:" + measures[0], *pm->max) << " and lowest for " << code(cols.cell(*lo, dims[0])) << " at "
              << w.stat("min:" + measures[0], *pm->min) << ", across "
              << w.stat("groups:" + dims[0], static_cast<double>(nrows)) << " " << code(dims[0]) << " groups.";
            done = true;
            break;
        }
        case Task::distribution: {
            if (dims.empty() && !measures.empty()) {
                const auto* p = prof(measures[0]);
                if (!p || !p->quantiles) break;
                b << code(measures[0]) << " has a median of " << w.stat("median:" + measures[0], p->quantiles->p50)
                  << " with an interquartile range from " << w.stat("p25:" + measures[0], p->quantiles->p25) << " to "
                  << w.stat("p75:" + measures[0], p->quantiles->p75) << "; values span "
                  << w.stat("min:" + measures[0], *p->min) << " to " << w.stat("max:" + measures[0], *p->max)
                  << " over " << w.stat("records", static_cast<double>(p->count - p->null_count)) << " records.";
                if (p->skewness && std::abs(*p->skewness) >= 1)
                    b << " The skewness of " << w.stat("skewness:" + measures[0], *p->skewness)
                      << " means a few large values dominate the tail.";
                done = true;
            } else if (!dims.empty() && !measures.empty() && nrows > 0) {
                const auto ci = *cols.index(measures[0]);
                double total = 0;
                for (const auto& r : derived.rows.rows) total += as_double(r[ci]).value_or(0);
                auto top = cols.arg_extreme(measures[0], true);
                const double top_n = as_double(derived.rows.rows[*top][ci]).value_or(0);
                b << "There are " << w.stat("distinct:" + dims[0], static_cast<double>(nrows)) << " distinct "
                  << code(dims[0]) << " values; the most common is " << code(cols.cell(*top, dims[0])) << " with "
                  << w.stat("top_count", top_n) << " of " << w.stat("total", total) << " records ("
                  << w.stat("top_share_pct", total > 0 ? 100 * top_n / total : 0) << "%).";
                done = true;
            }
            break;
        }
        case Task::ranking: {
            if (measures.empty() || nrows == 0) break;
            const std::string label = !dims.empty() ? dims[0] : derived.result_schema[0].name;
            const auto* p = prof(measures[0]);
            auto top = cols.arg_extreme(measures[0], true);
            if (!p || !p->max || !top) break;
            b << code(cols.cell(*top, label)) << " ranks first with " << code(measures[0]) << " of "
              << w.stat("max:" + measures[0], *p->max) << "; the " << w.stat("entries", static_cast<double>(nrows))
              << " listed entries range from " << w.stat("min:" + measures[0], *p->min) << " to "
              << w.stat("max:" + measures[0], *p->max) << ".";
            done = true;
            break;
        }
        case Task::part_to_whole: {
            if (measures.empty() || dims.empty() || nrows == 0) break;
            auto top = cols.arg_extreme(measures[0], true);
            if (!top) break;
            const double share = as_double(derived.rows.rows[*top][*cols.index(measures[0])]).value_or(0);
            b << code(cols.cell(*top, dims[0])) << " holds the largest share at "
              << w.stat("top_share_pct", 100 * share) << "% across "
              << w.stat("categories", static_cast<double>(nrows)) << " " << code(dims[0]) << " categories.";
            done = true;
            break;
        }
        case Task::outlier: {
            if (measures.empty()) break;
            const auto* p = prof(measures[0]);
            if (!p || !p->max || !p->mean || !p->stddev) break;
            b << "The largest " << code(measures[0]) << " value is " << w.stat("max:" + measures[0], *p->max)
              << ", against a mean of " << w.stat("mean:" + measures[0], *p->mean) << " and a standard deviation of "
              << w.stat("stddev:" + measures[0], *p->stddev) << " over "
              << w.stat("records", static_cast<double>(p->count - p->null_count)) << " records.";
            done = true;
            break;
        }
    }
    if (!done) {
        b.str("");
        w.cites.clear();
        b << "The derived result has " << w.stat("rows", static_cast<double>(nrows)) << " rows.";
    }
    n.body_markdown = b.str();
    n.stat_citations = std::move(w.cites);
    return n;
}

llm::GatewayRequest narrate_request(const planner::InsightPlan& plan, const deriver::DerivedDataset& derived,
                                    const vizrec::CompleteSpec& spec) {
    llm::GatewayRequest req;
    req.role = llm::AgentRole::narrator;
    req.schema_id = "narrative";
    ordered_json stats = ordered_json::array();
    for (const auto& f : derived.mini_profile) stats.push_back(f.to_json());
    req.text_parts = {kNarrateInstructions, "question: " + plan.question, "statistics: " + stats.dump(),
                      "chart: " + spec.serialize()};
    return req;
}

Narrative narrate_insight(const planner::InsightPlan& plan, const deriver::DerivedDataset& derived,
                          const vizrec::CompleteSpec& spec, llm::Gateway* gateway, trace::Span& span) {
    if (gateway) {
        try {
            auto resp = gateway->complete(narrate_request(plan, derived, spec), span);
            Narrative n;
            n.insight_id = plan.insight_id;
            n.title = plan.title;
            n.body_markdown = resp.parsed.at("body").get<std::string>();
            n.source = "llm";
            for (const auto& c : resp.parsed.at("citations")) {
                const auto& v = c.at("value");
                const double d = v.is_number() ? v.get<double>() : std::stod(v.get<std::string>());
                n.stat_citations.push_back({c.at("name").get<std::string>(), d,
                                            v.is_string() ? v.get<std::string>() : format_stat(d)});
            }
            auto missing = uncited_numbers(n.body_markdown, n.stat_citations);
            if (missing.empty()) {
                span.set("narration_source", "llm");
                return n;
            }
            span.set("narration_rejected", missing);
            span.degrade();
        } catch (const std::exception& e) {
            span.set("narration_fallback_reason", e.what());
        }
    }
    span.set("narration_source", "template");
    return template_narrative(plan, derived, spec);
}

std::string report_title(const std::string& goal) {
    std::string t = goal;
    auto b = t.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "Data report";
    t = t.substr(b, t.find_last_not_of(" \t\r\n") - b + 1);
    while (!t.empty() && (t.back() == '.' || t.back() == '?' || t.back() == '!')) t.pop_back();
    if (!t.empty()) t[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
    return t;
}

std::string generated_at_now() {
    std::time_t t;
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) t = static_cast<std::time_t>(std::atoll(sde));
    else t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ordered_json compose_report(const planner::Intent& intent, const ingest::DatasetSchema& schema,
                            const std::vector<CompletedInsight>& completed, const std::vector<SkippedInsight>& skipped,
                            const std::string& generated_at) {
    if (completed.empty()) throw Error(ErrorCode::EmptyReport, "every planned insight was skipped");
    for (const auto& c : completed) {
        auto missing = uncited_numbers(c.narrative.body_markdown, c.narrative.stat_citations);
        if (!missing.empty())
            throw Error(ErrorCode::SchemaViolation, "narrative for " + c.plan.insight_id + " cites no source for " + missing[0]);
    }
    ordered_json r;
    r["version"] = kReportVersion;
    r["title"] = report_title(intent.goal);
    r["goal"] = intent.goal;
    r["generated_at"] = generated_at;
    std::ostringstream pre;
    pre << "This report answers \"" << intent.goal << "\" with " << completed.size() << " insight"
        << (completed.size() == 1 ? "" : "s") << " drawn from a dataset of " << schema.row_count << " rows.";
    if (!skipped.empty()) pre << " " << skipped.size() << " planned insight" << (skipped.size() == 1 ? " was" : "s were") << " skipped.";
    r["preamble"] = pre.str();
    r["dataset"] = {{"digest", schema.dataset_digest}, {"row_count", schema.row_count}, {"description", schema.description}};
    r["insights"] = ordered_json::array();
    for (const auto& c : completed) {
        ordered_json e;
        e["insight_id"] = c.plan.insight_id;
        e["title"] = c.plan.title;
        e["task"] = to_string(c.plan.task);
        e["question"] = c.plan.question;
        e["narrative"] = {{"body_markdown", c.narrative.body_markdown},
                          {"stat_citations", citations_json(c.narrative.stat_citations)},
                          {"source", c.narrative.source}};
        e["chart_ref"] = "charts/" + c.plan.insight_id + ".json";
        e["data_ref"] = "data/" + c.plan.insight_id + ".json";
        e["trace_ref"] = "traces/" + c.plan.insight_id + ".md";
        e["sql"] = c.derived.final_query.sql;
        e["roles"] = ordered_json::object();
        for (const auto& [col, role] : c.derived.final_query.roles) e["roles"][col] = to_string(role);
        e["result_schema"] = ordered_json::array();
        for (const auto& col : c.derived.result_schema)
            e["result_schema"].push_back({{"name", col.name}, {"kind", to_string(col.kind)}});
        e["spec"] = {{"mark", to_string(c.spec.mark)}, {"candidate", c.spec.serialize()}, {"cost", c.spec.cost}};
        e["data_artifact"] = c.derived.artifact.to_json();
        e["provenance"] = {{"plan_digest", c.plan.digest()},
                           {"query_digest", sha256_hex(c.derived.final_query.sql)},
                           {"spec_digest", sha256_hex(c.chart_doc)},
                           {"trace_span_id", c.trace_span_id}};
        r["insights"].push_back(std::move(e));
    }
    r["skipped"] = ordered_json::array();
    for (const auto& s : skipped)
        r["skipped"].push_back({{"insight_id", s.plan.insight_id},
                                {"title", s.plan.title},
                                {"reason", s.skipped.reason},
                                {"last_error", s.skipped.last_error},
                                {"attempted_sql", s.skipped.attempted_sql}});
    return r;
}

std::string dump_report(const ordered_json& report) { return report.dump(2) + "\n"; }

std::string trace_doc(const CompletedInsight& c) {
    std::ostringstream o;
    o << "# " << c.plan.title << "\n\n";
    o << "Insight `" << c.plan.insight_id << "`, task `" << to_string(c.plan.task) << "`, trace span `"
      << c.trace_span_id << "`.\n\n";
    o << "## Question\n\n" << c.plan.question << "\n\n";
    o << "## Grounding hints\n\n";
    for (const auto& g : c.plan.grounding) o << "- `" << g << "`\n";
    o << "\n## SQL\n\n```sql\n" << c.derived.final_query.sql << "\n```\n\n";
    o << "Repairs: " << c.derived.final_query.attempt << ". Artifact: `" << c.derived.artifact.store_key << "` ("
      << c.derived.artifact.row_count.value_or(0) << " rows).\n\n";
    o << "## Result schema\n\n| column | kind | role |\n|---|---|---|\n";
    for (const auto& col : c.derived.result_schema) {
        auto role = c.derived.final_query.role_of(col.name);
        o << "| " << col.name << " | " << to_string(col.kind) << " | " << (role ? std::string(to_string(*role)) : "-")
          << " |\n";
    }
    o << "\n## Solver decision log\n\n| rank | cost | candidate | reasons |\n|---|---|---|---|\n";
    for (const auto& d : c.spec.decision_log) {
        std::string reasons;
        for (const auto& r : d.reasons) reasons += (reasons.empty() ? "" : ", ") + r;
        o << "| " << d.rank << " | " << format_double(d.cost) << " | `" << d.candidate << "` | "
          << (reasons.empty() ? "-" : reasons) << " |\n";
    }
    o << "\n## Final spec\n\n```json\n" << c.chart_doc << "```\n\n";
    o << "## Narrative\n\n" << c.narrative.body_markdown << "\n";
    return o.str();
}

std::string skipped_trace_doc(const SkippedInsight& s) {
    std::ostringstream o;
    o << "# " << s.plan.title << " (skipped)\n\n";
    o << "Insight `" << s.plan.insight_id << "`, task `" << to_string(s.plan.task) << "`.\n\n";
    o << "## Question\n\n" << s.plan.question << "\n\n";
    o << "## Grounding hints\n\n";
    for (const auto& g : s.plan.grounding) o << "- `" << g << "`\n";
    o << "\n## Outcome\n\n" << s.skipped.reason << "\n\n## Last error\n\n```\n" << s.skipped.last_error << "\n```\n\n";
    o << "## Attempted SQL\n\n";
    for (std::size_t i = 0; i < s.skipped.attempted_sql.size(); ++i)
        o << "Attempt " << i << ":\n\n```sql\n" << s.skipped.attempted_sql[i] << "\n```\n\n";
    return o.str();
}

std::string data_doc(const deriver::DerivedDataset& d, std::size_t cap) {
    ordered_json j;
    j["insight_id"] = d.insight_id;
    j["columns"] = ordered_json::array();
    for (const auto& c : d.result_schema) j["columns"].push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
    j["row_count"] = d.rows.rows.size();
    j["truncated"] = d.rows.rows.size() > cap;
    j["rows"] = ordered_json::array();
    for (std::size_t r = 0; r < d.rows.rows.size() && r < cap; ++r) {
        ordered_json row = ordered_json::array();
        for (const auto& v : d.rows.rows[r]) row.push_back(value_to_json(v));
        j["rows"].push_back(std::move(row));
    }
    return j.dump() + "\n";
}

std::string index_html(const ordered_json& report) {
    std::ostringstream o;
    const std::string title = html_escape(report.value("title", "Report"));
    o << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>" << title << "</title>\n"
      << "<style>body{font-family:sans-serif;max-width:60rem;margin:2rem auto;padding:0 1rem}"
         "pre{background:#f4f4f4;padding:.75rem;overflow-x:auto}section{margin-bottom:2.5rem}</style>\n"
      << "</head>\n<body>\n<div id=\"app\">\n<h1>" << title << "</h1>\n<p>"
      << html_escape(report.value("preamble", "")) << "</p>\n";
    for (const auto& e : report.at("insights")) {
        o << "<section id=\"" << html_escape(e.at("insight_id").get<std::string>()) << "\">\n<h2>"
          << html_escape(e.at("title").get<std::string>()) << "</h2>\n<p>"
          << html_escape(e.at("narrative").at("body_markdown").get<std::string>()) << "</p>\n"
          << "<pre><code>" << html_escape(e.at("sql").get<std::string>()) << "</code></pre>\n"
          << "<p><a href=\"" << html_escape(e.at("chart_ref").get<std::string>()) << "\">chart</a> | <a href=\""
          << html_escape(e.at("data_ref").get<std::string>()) << "\">data</a> | <a href=\""
          << html_escape(e.at("trace_ref").get<std::string>()) << "\">trace</a></p>\n</section>\n";
    }
    if (!report.at("skipped").empty()) {
        o << "<section id=\"skipped\">\n<h2>Skipped insights</h2>\n<ul>\n";
        for (const auto& s : report.at("skipped"))
            o << "<li>" << html_escape(s.at("title").get<std::string>()) << ": "
              << html_escape(s.at("reason").get<std::string>()) << "</li>\n";
        o << "</ul>\n</section>\n";
    }
    o << "</div>\n<script src=\"viewer/viewer.js\"></script>\n</body>\n</html>\n";
    return o.str();
}

BundleResult emit_bundle(const std::filesystem::path& dir, const ordered_json& report,
                         const std::vector<CompletedInsight>& completed, const std::vector<SkippedInsight>& skipped,
                         publisher::ObjectStore& store, publisher::ArtifactManifest* manifest) {
    BundleResult out;
    out.dir = dir;
    std::error_code ec;
    for (const char* sub : {"charts", "data", "traces"}) std::filesystem::create_directories(dir / sub, ec);
    if (ec) throw Error(ErrorCode::StoreUnavailable, "cannot create bundle directory " + dir.string() + ": " + ec.message());

    auto emit = [&](const std::string& rel, const std::string& bytes, publisher::ArtifactKind kind) {
        write_file_atomic(dir / rel, bytes);
        out.refs.push_back(publisher::put_report_asset(bytes, kind, rel, store, manifest));
    };
    emit("report.json", dump_report(report), publisher::ArtifactKind::report_manifest);
    emit("index.html", index_html(report), publisher::ArtifactKind::html_bundle_member);
    for (const auto& c : completed) {
        emit("charts/" + c.plan.insight_id + ".json", c.chart_doc, publisher::ArtifactKind::chart_json);
        emit("data/" + c.plan.insight_id + ".json", data_doc(c.derived), publisher::ArtifactKind::html_bundle_member);
        emit("traces/" + c.plan.insight_id + ".md", trace_doc(c), publisher::ArtifactKind::trace_doc);
    }
    for (const auto& s : skipped)
        emit("traces/" + s.plan.insight_id + ".md", skipped_trace_doc(s), publisher::ArtifactKind::trace_doc);
    return out;
}

}  // namespace reportsmith::reporter
