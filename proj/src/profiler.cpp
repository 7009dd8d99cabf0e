#include "reportsmith/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "reportsmith/digest.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/io.hpp"
#include "reportsmith/json_util.hpp"

namespace reportsmith::profiler {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {
constexpr std::size_t kTopK = 10;
constexpr std::size_t kMaxPairCardinality = 50;
constexpr std::size_t kMinCompleteRows = 3;

struct ValueLess {
    bool operator()(const Value& a, const Value& b) const { return compare(a, b) < 0; }
};
using Frequencies = std::map<Value, std::size_t, ValueLess>;

double entropy_of(const Frequencies& freq, std::size_t total) {
    double h = 0;
    for (const auto& [_, c] : freq) {
        double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}
}  // namespace

// ------------------------------------------------------------------ json

std::string_view to_string(PairKind k) {
    switch (k) {
        case PairKind::pearson_r: return "pearson_r";
        case PairKind::cramers_v: return "cramers_v";
        case PairKind::variance_ratio: return "variance_ratio";
    }
    return "pearson_r";
}

std::string_view to_string(HintKind k) {
    switch (k) {
        case HintKind::facet_candidate: return "facet_candidate";
        case HintKind::measure_candidate: return "measure_candidate";
        case HintKind::correlation: return "correlation";
        case HintKind::trend_axis: return "trend_axis";
        case HintKind::skew_alert: return "skew_alert";
        case HintKind::null_alert: return "null_alert";
    }
    return "facet_candidate";
}

HintKind hint_kind_from_string(std::string_view s) {
    for (HintKind k : {HintKind::facet_candidate, HintKind::measure_candidate, HintKind::correlation,
                       HintKind::trend_axis, HintKind::skew_alert, HintKind::null_alert})
        if (to_string(k) == s) return k;
    throw Error(ErrorCode::InvalidConfig, "unknown hint kind '" + std::string(s) + "'");
}

ordered_json FieldProfile::to_json() const {
    ordered_json j;
    j["name"] = name;
    j["kind"] = reportsmith::to_string(kind);
    j["count"] = count;
    j["null_count"] = null_count;
    j["distinct_count"] = distinct_count;
    j["min"] = opt_json(min);
    j["max"] = opt_json(max);
    j["mean"] = opt_json(mean);
    j["stddev"] = opt_json(stddev);
    j["quantiles"] = quantiles ? ordered_json{{"p25", quantiles->p25}, {"p50", quantiles->p50}, {"p75", quantiles->p75}}
                               : ordered_json(nullptr);
    j["skewness"] = opt_json(skewness);
    j["entropy_bits"] = entropy_bits;
    j["normalized_entropy"] = normalized_entropy;
    j["top_k"] = ordered_json::array();
    for (const auto& [v, c] : top_k) j["top_k"].push_back({{"value", value_to_json(v)}, {"count", c}});
    j["orders_of_magnitude"] = opt_json(orders_of_magnitude);
    j["has_nonpositive"] = has_nonpositive ? ordered_json(*has_nonpositive) : ordered_json(nullptr);
    return j;
}

FieldProfile FieldProfile::from_json(const json& j) {
    FieldProfile p;
    p.name = j.at("name").get<std::string>();
    p.kind = kind_from_string(j.at("kind").get<std::string>());
    p.count = j.at("count").get<std::size_t>();
    p.null_count = j.at("null_count").get<std::size_t>();
    p.distinct_count = j.at("distinct_count").get<std::size_t>();
    p.min = opt_double(j, "min");
    p.max = opt_double(j, "max");
    p.mean = opt_double(j, "mean");
    p.stddev = opt_double(j, "stddev");
    if (!j.at("quantiles").is_null())
        p.quantiles = Quantiles{j["quantiles"]["p25"].get<double>(), j["quantiles"]["p50"].get<double>(),
                                j["quantiles"]["p75"].get<double>()};
    p.skewness = opt_double(j, "skewness");
    p.entropy_bits = j.at("entropy_bits").get<double>();
    p.normalized_entropy = j.at("normalized_entropy").get<double>();
    for (const auto& e : j.at("top_k")) p.top_k.emplace_back(value_from_json(e.at("value")), e.at("count").get<std::size_t>());
    p.orders_of_magnitude = opt_double(j, "orders_of_magnitude");
    if (!j.at("has_nonpositive").is_null()) p.has_nonpositive = j["has_nonpositive"].get<bool>();
    return p;
}

ordered_json PairStat::to_json() const {
    return {{"field_a", field_a}, {"field_b", field_b}, {"kind", to_string(kind)}, {"value", value},
            {"complete_rows", complete_rows}};
}

PairStat PairStat::from_json(const json& j) {
    PairStat p;
    p.field_a = j.at("field_a").get<std::string>();
    p.field_b = j.at("field_b").get<std::string>();
    auto k = j.at("kind").get<std::string>();
    p.kind = k == "pearson_r" ? PairKind::pearson_r : k == "cramers_v" ? PairKind::cramers_v : PairKind::variance_ratio;
    p.value = j.at("value").get<double>();
    p.complete_rows = j.value("complete_rows", std::size_t{0});
    return p;
}

std::string Hint::grounding_ref() const {
    std::string s = rule_id + ":";
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) s += ",";
        s += fields[i];
    }
    return s;
}

std::optional<double> Hint::evidence_value(std::string_view name) const {
    for (const auto& [k, v] : evidence)
        if (k == name) return v;
    return std::nullopt;
}

ordered_json Hint::to_json() const {
    ordered_json ev = ordered_json::object();
    for (const auto& [k, v] : evidence) ev[k] = v;
    return {{"hint_kind", to_string(kind)}, {"fields", fields}, {"evidence", ev}, {"rule_id", rule_id}};
}

Hint Hint::from_json(const json& j) {
    Hint h;
    h.kind = hint_kind_from_string(j.at("hint_kind").get<std::string>());
    h.fields = j.at("fields").get<std::vector<std::string>>();
    auto ev = ordered_json::parse(j.at("evidence").dump());
    for (const auto& [k, v] : ev.items()) h.evidence.emplace_back(k, v.get<double>());
    h.rule_id = j.at("rule_id").get<std::string>();
    return h;
}

double HintRule::threshold(const std::string& key, double fallback) const {
    auto it = thresholds.find(key);
    return it == thresholds.end() ? fallback : it->second;
}

HintRuleSet HintRuleSet::defaults() {
    HintRuleSet s;
    s.rules = {
        {"facet.v1", HintKind::facet_candidate, {{"min_distinct", 2}, {"max_distinct", 12}, {"min_normalized_entropy", 0.5}}},
        {"measure.v1", HintKind::measure_candidate, {{"min_distinct", 10}}},
        {"corr.v1", HintKind::correlation, {{"min_abs_r", 0.3}}},
        {"trend.v1", HintKind::trend_axis, {}},
        {"skew.v1", HintKind::skew_alert, {{"min_abs_skewness", 2}, {"min_orders_of_magnitude", 3}}},
        {"null.v1", HintKind::null_alert, {{"min_null_ratio", 0.2}}},
    };
    return s;
}

HintRuleSet HintRuleSet::from_json(const json& j) {
    HintRuleSet s;
    try {
        const json& list = j.is_array() ? j : j.at("rules");
        for (const auto& r : list) {
            HintRule rule;
            rule.rule_id = r.at("rule_id").get<std::string>();
            rule.kind = hint_kind_from_string(r.at("kind").get<std::string>());
            if (r.contains("thresholds"))
                for (const auto& [k, v] : r["thresholds"].items()) rule.thresholds[k] = v.get<double>();
            s.rules.push_back(std::move(rule));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("rules: ") + e.what());
    }
    return s;
}

HintRuleSet HintRuleSet::load(const std::filesystem::path& p) {
    try {
        return from_json(json::parse(read_file(p)));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, p.string() + ": " + e.what());
    }
}

ordered_json HintRuleSet::to_json() const {
    ordered_json list = ordered_json::array();
    for (const auto& r : rules) {
        ordered_json t = ordered_json::object();
        for (const auto& [k, v] : r.thresholds) t[k] = v;
        list.push_back({{"rule_id", r.rule_id}, {"kind", to_string(r.kind)}, {"thresholds", t}});
    }
    return {{"rules", list}};
}

const HintRule* HintRuleSet::find(HintKind kind) const {
    for (const auto& r : rules)
        if (r.kind == kind) return &r;
    return nullptr;
}

const FieldProfile* StatisticalProfile::find(std::string_view name) const {
    for (const auto& f : per_field)
        if (f.name == name) return &f;
    return nullptr;
}

ordered_json StatisticalProfile::to_json() const {
    ordered_json j;
    j["profile_digest"] = profile_digest;
    j["per_field"] = ordered_json::array();
    for (const auto& f : per_field) j["per_field"].push_back(f.to_json());
    j["pairs"] = ordered_json::array();
    for (const auto& p : pairs) j["pairs"].push_back(p.to_json());
    j["hints"] = ordered_json::array();
    for (const auto& h : hints) j["hints"].push_back(h.to_json());
    return j;
}

StatisticalProfile StatisticalProfile::from_json(const json& j) {
    StatisticalProfile p;
    p.profile_digest = j.at("profile_digest").get<std::string>();
    for (const auto& f : j.at("per_field")) p.per_field.push_back(FieldProfile::from_json(f));
    for (const auto& x : j.at("pairs")) p.pairs.push_back(PairStat::from_json(x));
    for (const auto& h : j.at("hints")) p.hints.push_back(Hint::from_json(h));
    return p;
}

// ------------------------------------------------------------------ field kernel

FieldProfile profile_field(const std::string& name, const std::vector<Value>& column, Kind kind) {
    FieldProfile p;
    p.name = name;
    p.kind = kind;
    p.count = column.size();

    Frequencies freq;
    std::vector<double> nums;
    for (const auto& v : column) {
        if (is_null(v)) {
            ++p.null_count;
            continue;
        }
        ++freq[v];
        if (kind == Kind::quantitative)
            if (auto d = as_double(v)) nums.push_back(*d);
    }
    const std::size_t present = p.count - p.null_count;
    p.distinct_count = freq.size();
    if (present > 0) {
        p.entropy_bits = entropy_of(freq, present);
        p.normalized_entropy = p.distinct_count <= 1 ? 0.0 : p.entropy_bits / std::log2(static_cast<double>(p.distinct_count));
    }

    std::vector<std::pair<Value, std::size_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return compare(a.first, b.first) < 0;
    });
    if (ranked.size() > kTopK) ranked.resize(kTopK);
    p.top_k = std::move(ranked);

    if (kind != Kind::quantitative || nums.empty()) return p;

    const double n = static_cast<double>(nums.size());
    double sum = 0;
    for (double x : nums) sum += x;
    const double mean = sum / n;
    double m2 = 0, m3 = 0;
    for (double x : nums) {
        const double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    p.mean = mean;
    p.stddev = std::sqrt(m2);
    if (nums.size() >= 3 && m2 > 0) p.skewness = m3 / std::pow(m2, 1.5);

    std::vector<double> sorted = nums;
    std::sort(sorted.begin(), sorted.end());
    p.min = sorted.front();
    p.max = sorted.back();
    p.quantiles = Quantiles{quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.5), quantile_sorted(sorted, 0.75)};

    p.has_nonpositive = sorted.front() <= 0;
    auto first_pos = std::upper_bound(sorted.begin(), sorted.end(), 0.0);
    if (first_pos != sorted.end()) p.orders_of_magnitude = std::log10(sorted.back() / *first_pos);
    return p;
}

std::vector<FieldProfile> profile_fields_serial(const Table& table) {
    std::vector<FieldProfile> out;
    out.reserve(table.columns.size());
    for (const auto& c : table.columns) out.push_back(profile_field(c.name, c.values, c.kind));
    return out;
}

std::vector<FieldProfile> profile_fields(const Table& table) {
    std::vector<FieldProfile> out(table.columns.size());
    const auto n = static_cast<long>(table.columns.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        const auto& c = table.columns[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = profile_field(c.name, c.values, c.kind);
    }
    return out;
}

// ------------------------------------------------------------------ pair kernels

namespace {

struct PairTask {
    std::size_t a, b;
    PairKind kind;
};

std::vector<PairTask> plan_pairs(const Table& table, const std::vector<FieldProfile>& fields) {
    std::vector<PairTask> tasks;
    auto small_discrete = [&](std::size_t i) {
        return is_discrete(table.columns[i].kind) && fields[i].distinct_count <= kMaxPairCardinality;
    };
    auto quant = [&](std::size_t i) { return table.columns[i].kind == Kind::quantitative; };
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        for (std::size_t j = i + 1; j < table.columns.size(); ++j) {
            if (quant(i) && quant(j)) tasks.push_back({i, j, PairKind::pearson_r});
            else if (small_discrete(i) && small_discrete(j)) tasks.push_back({i, j, PairKind::cramers_v});
            else if (small_discrete(i) && quant(j)) tasks.push_back({i, j, PairKind::variance_ratio});
            else if (quant(i) && small_discrete(j)) tasks.push_back({j, i, PairKind::variance_ratio});
        }
    }
    return tasks;
}

std::optional<PairStat> pearson(const TypedColumn& x, const TypedColumn& y) {
    std::vector<double> xs, ys;
    for (std::size_t r = 0; r < x.values.size(); ++r) {
        auto a = as_double(x.values[r]);
        auto b = as_double(y.values[r]);
        if (a && b) {
            xs.push_back(*a);
            ys.push_back(*b);
        }
    }
    if (xs.size() < kMinCompleteRows) return std::nullopt;
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0 || syy <= 0) return std::nullopt;
    double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    return PairStat{x.name, y.name, PairKind::pearson_r, r, xs.size()};
}

std::optional<PairStat> cramers_v(const TypedColumn& x, const TypedColumn& y) {
    std::map<std::pair<Value, Value>, std::size_t, decltype([](const auto& a, const auto& b) {
                 int c = compare(a.first, b.first);
                 return c != 0 ? c < 0 : compare(a.second, b.second) < 0;
             })>
        table;
    Frequencies rows, cols;
    std::size_t n = 0;
    for (std::size_t r = 0; r < x.values.size(); ++r) {
        if (is_null(x.values[r]) || is_null(y.values[r])) continue;
        ++table[{x.values[r], y.values[r]}];
        ++rows[x.values[r]];
        ++cols[y.values[r]];
        ++n;
    }
    const std::size_t k = std::min(rows.size(), cols.size());
    if (n < kMinCompleteRows || k < 2) return std::nullopt;
    const double dn = static_cast<double>(n);
    double chi2 = 0;
    for (const auto& [rv, rc] : rows) {
        for (const auto& [cv, cc] : cols) {
            const double expected = static_cast<double>(rc) * static_cast<double>(cc) / dn;
            auto it = table.find({rv, cv});
            const double observed = it == table.end() ? 0.0 : static_cast<double>(it->second);
            chi2 += (observed - expected) * (observed - expected) / expected;
        }
    }
    double v = std::clamp(std::sqrt(chi2 / (dn * static_cast<double>(k - 1))), 0.0, 1.0);
    return PairStat{x.name, y.name, PairKind::cramers_v, v, n};
}

std::optional<PairStat> variance_ratio(const TypedColumn& group, const TypedColumn& measure) {
    std::map<Value, std::pair<double, std::size_t>, ValueLess> sums;
    std::vector<std::pair<const Value*, double>> rows;
    for (std::size_t r = 0; r < group.values.size(); ++r) {
        auto m = as_double(measure.values[r]);
        if (is_null(group.values[r]) || !m) continue;
        rows.emplace_back(&group.values[r], *m);
        auto& s = sums[group.values[r]];
        s.first += *m;
        s.second += 1;
    }
    if (rows.size() < kMinCompleteRows) return std::nullopt;
    double grand = 0;
    for (const auto& [_, m] : rows) grand += m;
    grand /= static_cast<double>(rows.size());
    double ss_total = 0;
    for (const auto& [_, m] : rows) ss_total += (m - grand) * (m - grand);
    if (ss_total <= 0) return std::nullopt;
    double ss_between = 0;
    for (const auto& [_, s] : sums) {
        const double gm = s.first / static_cast<double>(s.second);
        ss_between += static_cast<double>(s.second) * (gm - grand) * (gm - grand);
    }
    double ratio = std::clamp(ss_between / ss_total, 0.0, 1.0);
    return PairStat{group.name, measure.name, PairKind::variance_ratio, ratio, rows.size()};
}

std::optional<PairStat> run_pair(const Table& table, const PairTask& t) {
    const auto& a = table.columns[t.a];
    const auto& b = table.columns[t.b];
    switch (t.kind) {
        case PairKind::pearson_r: return pearson(a, b);
        case PairKind::cramers_v: return cramers_v(a, b);
        case PairKind::variance_ratio: return variance_ratio(a, b);
    }
    return std::nullopt;
}

}  // namespace

std::vector<PairStat> profile_pairs_serial(const Table& table, const std::vector<FieldProfile>& fields) {
    std::vector<PairStat> out;
    for (const auto& t : plan_pairs(table, fields))
        if (auto p = run_pair(table, t)) out.push_back(*p);
    return out;
}

std::vector<PairStat> profile_pairs(const Table& table, const std::vector<FieldProfile>& fields) {
    const auto tasks = plan_pairs(table, fields);
    std::vector<std::optional<PairStat>> slots(tasks.size());
    const auto n = static_cast<long>(tasks.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) slots[static_cast<std::size_t>(i)] = run_pair(table, tasks[static_cast<std::size_t>(i)]);
    std::vector<PairStat> out;
    for (auto& s : slots)
        if (s) out.push_back(std::move(*s));
    return out;
}

// ------------------------------------------------------------------ hints

std::vector<Hint> generate_hints(const std::vector<FieldProfile>& fields, const std::vector<PairStat>& pairs,
                                 const HintRuleSet& rules) {
    std::vector<Hint> out;
    for (const auto& rule : rules.rules) {
        switch (rule.kind) {
            case HintKind::facet_candidate: {
                const double lo = rule.threshold("min_distinct", 2), hi = rule.threshold("max_distinct", 12);
                const double min_h = rule.threshold("min_normalized_entropy", 0.5);
                for (const auto& f : fields) {
                    const auto d = static_cast<double>(f.distinct_count);
                    if (is_discrete(f.kind) && d >= lo && d <= hi && f.normalized_entropy >= min_h)
                        out.push_back({rule.kind, {f.name},
                                       {{"distinct_count", d}, {"normalized_entropy", f.normalized_entropy}}, rule.rule_id});
                }
                break;
            }
            case HintKind::measure_candidate: {
                const double lo = rule.threshold("min_distinct", 10);
                for (const auto& f : fields)
                    if (f.kind == Kind::quantitative && static_cast<double>(f.distinct_count) >= lo)
                        out.push_back({rule.kind, {f.name}, {{"distinct_count", static_cast<double>(f.distinct_count)}},
                                       rule.rule_id});
                break;
            }
            case HintKind::correlation: {
                const double min_r = rule.threshold("min_abs_r", 0.3);
                for (const auto& p : pairs)
                    if (p.kind == PairKind::pearson_r && std::abs(p.value) >= min_r)
                        out.push_back({rule.kind, {p.field_a, p.field_b}, {{"pearson_r", p.value}}, rule.rule_id});
                break;
            }
            case HintKind::trend_axis:
                for (const auto& f : fields)
                    if (f.kind == Kind::temporal)
                        out.push_back({rule.kind, {f.name}, {{"distinct_count", static_cast<double>(f.distinct_count)}},
                                       rule.rule_id});
                break;
            case HintKind::skew_alert: {
                const double min_g1 = rule.threshold("min_abs_skewness", 2);
                const double min_oom = rule.threshold("min_orders_of_magnitude", 3);
                for (const auto& f : fields) {
                    if (f.kind != Kind::quantitative) continue;
                    std::vector<std::pair<std::string, double>> ev;
                    if (f.orders_of_magnitude && *f.orders_of_magnitude >= min_oom)
                        ev.emplace_back("orders_of_magnitude", *f.orders_of_magnitude);
                    if (f.skewness && std::abs(*f.skewness) >= min_g1) ev.emplace_back("skewness", *f.skewness);
                    if (!ev.empty()) out.push_back({rule.kind, {f.name}, ev, rule.rule_id});
                }
                break;
            }
            case HintKind::null_alert: {
                const double min_ratio = rule.threshold("min_null_ratio", 0.2);
                for (const auto& f : fields) {
                    if (f.count == 0) continue;
                    const double ratio = static_cast<double>(f.null_count) / static_cast<double>(f.count);
                    if (ratio >= min_ratio) out.push_back({rule.kind, {f.name}, {{"null_ratio", ratio}}, rule.rule_id});
                }
                break;
            }
        }
    }
    return out;
}

StatisticalProfile build_profile(const Table& table, const HintRuleSet& rules) {
    StatisticalProfile p;
    p.per_field = profile_fields(table);
    p.pairs = profile_pairs(table, p.per_field);
    p.hints = generate_hints(p.per_field, p.pairs, rules);
    auto j = p.to_json();
    j.erase("profile_digest");
    p.profile_digest = sha256_hex(j.dump());
    return p;
}

// ------------------------------------------------------------------ queries

ProfileQuery ProfileQuery::from_json(const json& j) {
    ProfileQuery q;
    const std::string kind = j.value("kind", "");
    if (kind == "field_summary") q.kind = Kind::field_summary;
    else if (kind == "facet_candidates") q.kind = Kind::facet_candidates;
    else if (kind == "top_correlations") q.kind = Kind::top_correlations;
    else if (kind == "temporal_fields") q.kind = Kind::temporal_fields;
    else if (kind == "distinct_values") q.kind = Kind::distinct_values;
    else throw Error(ErrorCode::UnknownQueryKind, "unknown profile query kind '" + kind + "'");
    if (j.contains("field") && j["field"].is_string()) q.field = j["field"].get<std::string>();
    if (j.contains("n") && j["n"].is_number_unsigned()) q.n = j["n"].get<std::size_t>();
    if (j.contains("limit") && j["limit"].is_number_unsigned()) q.limit = j["limit"].get<std::size_t>();
    return q;
}

ordered_json ProfileQuery::to_json() const {
    static constexpr const char* names[] = {"field_summary", "facet_candidates", "top_correlations", "temporal_fields",
                                            "distinct_values"};
    ordered_json j;
    j["kind"] = names[static_cast<int>(kind)];
    if (kind == Kind::field_summary || kind == Kind::distinct_values) j["field"] = field;
    if (kind == Kind::top_correlations) j["n"] = n;
    if (kind == Kind::distinct_values) j["limit"] = limit;
    return j;
}

HintResponse query_profile(const StatisticalProfile& profile, const ProfileQuery& query) {
    HintResponse r;
    auto hints_json = [](const std::vector<Hint>& hs) {
        ordered_json a = ordered_json::array();
        for (const auto& h : hs) a.push_back(h.to_json());
        return a;
    };
    auto require_field = [&]() -> const FieldProfile& {
        const FieldProfile* f = profile.find(query.field);
        if (!f) throw Error(ErrorCode::UnknownField, "no field named '" + query.field + "' in profile");
        return *f;
    };
    switch (query.kind) {
        case ProfileQuery::Kind::field_summary: {
            const auto& f = require_field();
            for (const auto& h : profile.hints)
                if (std::find(h.fields.begin(), h.fields.end(), f.name) != h.fields.end()) r.hints.push_back(h);
            r.payload = {{"field", f.to_json()}, {"hints", hints_json(r.hints)}};
            break;
        }
        case ProfileQuery::Kind::facet_candidates:
        case ProfileQuery::Kind::temporal_fields: {
            const HintKind want = query.kind == ProfileQuery::Kind::facet_candidates ? HintKind::facet_candidate
                                                                                     : HintKind::trend_axis;
            ordered_json names = ordered_json::array();
            for (const auto& h : profile.hints)
                if (h.kind == want) {
                    r.hints.push_back(h);
                    names.push_back(h.fields.front());
                }
            r.payload = {{"fields", names}, {"hints", hints_json(r.hints)}};
            break;
        }
        case ProfileQuery::Kind::top_correlations: {
            std::vector<Hint> corr;
            for (const auto& h : profile.hints)
                if (h.kind == HintKind::correlation) corr.push_back(h);
            std::stable_sort(corr.begin(), corr.end(), [](const Hint& a, const Hint& b) {
                const double ra = std::abs(a.evidence_value("pearson_r").value_or(0));
                const double rb = std::abs(b.evidence_value("pearson_r").value_or(0));
                if (ra != rb) return ra > rb;
                return a.fields < b.fields;
            });
            if (corr.size() > query.n) corr.resize(query.n);
            r.hints = corr;
            r.payload = {{"hints", hints_json(r.hints)}};
            break;
        }
        case ProfileQuery::Kind::distinct_values: {
            const auto& f = require_field();
            ordered_json vals = ordered_json::array();
            for (std::size_t i = 0; i < f.top_k.size() && i < query.limit; ++i)
                vals.push_back({{"value", value_to_json(f.top_k[i].first)}, {"count", f.top_k[i].second}});
            r.payload = {{"field", f.name}, {"values", vals}, {"distinct_count", f.distinct_count}};
            break;
        }
    }
    return r;
}

}  // namespace reportsmith::profiler
