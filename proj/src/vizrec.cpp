#include "reportsmith/vizrec.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "reportsmith/error.hpp"
#include "reportsmith/io.hpp"
#include "reportsmith/json_util.hpp"

namespace reportsmith::vizrec {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::string_view, N>& names, const char* what) {
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == s) return static_cast<E>(i);
    throw Error(ErrorCode::ParseError, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array<std::string_view, 6> kMarkNames{"point", "bar", "line", "area", "tick", "rect"};
constexpr std::array<std::string_view, 5> kChannelNames{"x", "y", "color", "size", "facet"};
constexpr std::array<std::string_view, 5> kScaleNames{"linear", "log", "symlog", "ordinal", "temporal"};
constexpr std::array<std::string_view, 4> kAggregateNames{"none", "count", "sum", "mean"};

bool discrete_kind(Kind k) { return is_discrete(k) || k == Kind::identifier; }

const BoundField& count_field() {
    static const BoundField f{kCountField, Role::detail, Kind::quantitative, {}};
    return f;
}

const BoundField* lookup(const PartialSpec& p, const std::string& name) {
    for (const auto& f : p.bound_fields)
        if (f.field == name) return &f;
    if (name == kCountField && p.bound_fields.size() == 1) return &count_field();
    return nullptr;
}

bool enc_discrete(const Encoding& e, const BoundField& f) { return e.bin.has_value() || discrete_kind(f.kind); }
bool enc_quant(const Encoding& e, const BoundField& f) { return f.kind == Kind::quantitative && !e.bin; }

bool positional(Channel c) { return c == Channel::x || c == Channel::y; }

struct Option {
    Scale scale;
    Aggregate aggregate;
    std::optional<int> bin;
};

std::vector<Option> options_for(const BoundField& f, Channel c, int bin_count) {
    if (f.field == kCountField) return {{Scale::linear, Aggregate::count, std::nullopt}};
    if (f.kind == Kind::temporal) return {{Scale::temporal, Aggregate::none, std::nullopt}};
    if (f.kind != Kind::quantitative) return {{Scale::ordinal, Aggregate::none, std::nullopt}};
    switch (c) {
        case Channel::x:
        case Channel::y: {
            std::vector<Option> out;
            for (Scale s : {Scale::linear, Scale::log, Scale::symlog})
                for (Aggregate a : {Aggregate::none, Aggregate::sum, Aggregate::mean}) out.push_back({s, a, std::nullopt});
            out.push_back({Scale::linear, Aggregate::none, bin_count});
            return out;
        }
        case Channel::color:
            return {{Scale::linear, Aggregate::none, std::nullopt},
                    {Scale::linear, Aggregate::sum, std::nullopt},
                    {Scale::linear, Aggregate::mean, std::nullopt}};
        case Channel::size:
        case Channel::facet: return {{Scale::linear, Aggregate::none, std::nullopt}};
    }
    return {};
}

std::vector<BoundField> search_fields(const PartialSpec& p) {
    auto fields = p.bound_fields;
    if (fields.size() == 1) fields.push_back(count_field());
    return fields;
}

struct Skeleton {
    Mark mark;
    // channel index per search field, -1 = unbound
    std::vector<int> channel_of;
};

std::vector<Skeleton> skeletons(const std::vector<BoundField>& fields) {
    std::vector<std::vector<int>> assignments;
    std::vector<int> cur(fields.size(), -1);
    std::array<bool, 5> used{};
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == fields.size()) {
            if (used[0] && used[1]) assignments.push_back(cur);
            return;
        }
        for (int c = 0; c < 5; ++c) {
            if (used[c]) continue;
            used[c] = true;
            cur[i] = c;
            rec(i + 1);
            used[c] = false;
        }
        cur[i] = -1;
        rec(i + 1);
    };
    rec(0);
    std::vector<Skeleton> out;
    for (Mark m : kMarks)
        for (const auto& a : assignments) out.push_back({m, a});
    return out;
}

// Calls fn for every option combination of the skeleton, in generation order.
template <typename Fn>
void expand(const Skeleton& sk, const std::vector<BoundField>& fields, int bin_count, Fn&& fn) {
    std::vector<std::pair<int, std::size_t>> bound;  // (channel, field index), channel order
    for (int c = 0; c < 5; ++c)
        for (std::size_t i = 0; i < fields.size(); ++i)
            if (sk.channel_of[i] == c) bound.emplace_back(c, i);
    std::vector<std::vector<Option>> opts;
    for (auto [c, i] : bound) opts.push_back(options_for(fields[i], kChannels[c], bin_count));
    std::vector<std::size_t> idx(bound.size(), 0);
    CompleteSpec spec;
    spec.mark = sk.mark;
    spec.encodings.resize(bound.size());
    while (true) {
        for (std::size_t k = 0; k < bound.size(); ++k) {
            const auto& o = opts[k][idx[k]];
            auto& e = spec.encodings[k];
            e.channel = kChannels[bound[k].first];
            e.field = fields[bound[k].second].field;
            e.scale = o.scale;
            e.aggregate = o.aggregate;
            e.bin = o.bin;
        }
        fn(spec);
        std::size_t k = bound.size();
        while (k > 0) {
            --k;
            if (++idx[k] < opts[k].size()) break;
            idx[k] = 0;
            if (k == 0) return;
        }
        if (bound.empty()) return;
    }
}

struct Ranked {
    double cost;
    std::string key;
    CompleteSpec spec;
};

bool ranked_less(const Ranked& a, const Ranked& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.key < b.key;
}

struct TopK {
    std::size_t k = 5;
    std::vector<Ranked> items;

    void offer(const CompleteSpec& spec, double c) {
        if (items.size() == k && c > items.back().cost) return;
        std::string key = spec.serialize();
        Ranked r{c, std::move(key), spec};
        if (items.size() == k && !ranked_less(r, items.back())) return;
        items.insert(std::upper_bound(items.begin(), items.end(), r, ranked_less), std::move(r));
        if (items.size() > k) items.pop_back();
    }
    void merge(const TopK& o) {
        for (const auto& r : o.items) {
            items.insert(std::upper_bound(items.begin(), items.end(), r, ranked_less), r);
            if (items.size() > k) items.pop_back();
        }
    }
};

void score_skeleton(const Skeleton& sk, const std::vector<BoundField>& fields, const PartialSpec& partial,
                    const Knowledge& kb, TopK& top, std::size_t& valid) {
    expand(sk, fields, kb.bin_count, [&](const CompleteSpec& spec) {
        if (!hard_violations(spec, partial, kb).empty()) return;
        ++valid;
        top.offer(spec, cost(spec, partial, kb));
    });
}

CompleteSpec finish(const TopK& top, std::size_t valid, const PartialSpec& partial, const Knowledge& kb) {
    if (valid == 0 || top.items.empty())
        throw Error(ErrorCode::NoValidCandidate, "hard constraints eliminate every candidate for " + partial.insight_id);
    CompleteSpec best = top.items.front().spec;
    best.reasons.clear();
    best.cost = cost(best, partial, kb, &best.reasons);
    for (std::size_t i = 0; i < top.items.size(); ++i) {
        DecisionEntry d;
        d.rank = static_cast<int>(i) + 1;
        d.cost = top.items[i].cost;
        cost(top.items[i].spec, partial, kb, &d.reasons);
        d.candidate = top.items[i].key;
        best.decision_log.push_back(std::move(d));
    }
    return best;
}

}  // namespace

std::string_view to_string(Mark m) { return kMarkNames[static_cast<std::size_t>(m)]; }
std::string_view to_string(Channel c) { return kChannelNames[static_cast<std::size_t>(c)]; }
std::string_view to_string(Scale s) { return kScaleNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(Aggregate a) { return kAggregateNames[static_cast<std::size_t>(a)]; }

// ------------------------------------------------------------------ partial

ordered_json PartialSpec::to_json() const {
    ordered_json j;
    j["insight_id"] = insight_id;
    j["task"] = to_string(task);
    j["bound_fields"] = ordered_json::array();
    for (const auto& f : bound_fields) {
        ordered_json s;
        s["distinct_count"] = f.stats.distinct_count;
        s["skewness"] = opt_json(f.stats.skewness);
        s["has_nonpositive"] = f.stats.has_nonpositive ? ordered_json(*f.stats.has_nonpositive) : ordered_json(nullptr);
        s["orders_of_magnitude"] = opt_json(f.stats.orders_of_magnitude);
        s["min"] = opt_json(f.stats.min);
        s["max"] = opt_json(f.stats.max);
        s["facet_evidence"] = f.stats.facet_evidence;
        s["numeric"] = f.stats.numeric;
        j["bound_fields"].push_back(
            {{"field", f.field}, {"role", to_string(f.role)}, {"kind", to_string(f.kind)}, {"stats", s}});
    }
    j["dropped_fields"] = dropped_fields;
    return j;
}

PartialSpec PartialSpec::from_json(const json& j) {
    PartialSpec p;
    p.insight_id = j.value("insight_id", "");
    p.task = task_from_string(j.at("task").get<std::string>());
    for (const auto& b : j.at("bound_fields")) {
        BoundField f;
        f.field = b.at("field").get<std::string>();
        f.role = role_from_string(b.at("role").get<std::string>());
        f.kind = kind_from_string(b.at("kind").get<std::string>());
        const auto& s = b.at("stats");
        f.stats.distinct_count = s.value("distinct_count", std::size_t{0});
        f.stats.skewness = opt_double(s, "skewness");
        if (s.contains("has_nonpositive") && !s["has_nonpositive"].is_null())
            f.stats.has_nonpositive = s["has_nonpositive"].get<bool>();
        f.stats.orders_of_magnitude = opt_double(s, "orders_of_magnitude");
        f.stats.min = opt_double(s, "min");
        f.stats.max = opt_double(s, "max");
        f.stats.facet_evidence = s.value("facet_evidence", false);
        f.stats.numeric = s.value("numeric", f.kind == Kind::quantitative);
        p.bound_fields.push_back(std::move(f));
    }
    if (j.contains("dropped_fields")) p.dropped_fields = j["dropped_fields"].get<std::vector<std::string>>();
    return p;
}

PartialSpec build_partial_spec(const deriver::DerivedDataset& derived, const planner::InsightPlan& plan,
                               const profiler::HintRuleSet& rules) {
    PartialSpec p;
    p.insight_id = derived.insight_id;
    p.task = plan.task;
    const auto* facet = rules.find(profiler::HintKind::facet_candidate);
    std::vector<BoundField> all;
    for (std::size_t c = 0; c < derived.result_schema.size(); ++c) {
        const auto& col = derived.result_schema[c];
        auto role = derived.final_query.role_of(col.name);
        if (!role) continue;
        BoundField f{col.name, *role, col.kind, {}};
        for (const auto& fp : derived.mini_profile) {
            if (fp.name != col.name) continue;
            f.stats.distinct_count = fp.distinct_count;
            f.stats.skewness = fp.skewness;
            f.stats.has_nonpositive = fp.has_nonpositive;
            f.stats.orders_of_magnitude = fp.orders_of_magnitude;
            f.stats.min = fp.min;
            f.stats.max = fp.max;
            if (facet) {
                const auto d = static_cast<double>(fp.distinct_count);
                f.stats.facet_evidence = is_discrete(fp.kind) && d >= facet->threshold("min_distinct", 2) &&
                                         d <= facet->threshold("max_distinct", 12) &&
                                         fp.normalized_entropy >= facet->threshold("min_normalized_entropy", 0.5);
            }
        }
        bool any = false, numeric = true;
        for (const auto& row : derived.rows.rows) {
            if (c >= row.size() || is_null(row[c])) continue;
            any = true;
            numeric = numeric && is_numeric(row[c]);
        }
        f.stats.numeric = any ? numeric : col.kind == Kind::quantitative;
        all.push_back(std::move(f));
    }
    std::size_t non_detail = std::count_if(all.begin(), all.end(), [](const auto& f) { return f.role != Role::detail; });
    std::size_t detail_budget = non_detail >= 4 ? 0 : 4 - non_detail;
    std::size_t kept_non_detail = 0;
    for (auto& f : all) {
        const bool keep = f.role == Role::detail ? detail_budget > 0 : kept_non_detail < 4;
        if (!keep) {
            p.dropped_fields.push_back(f.field);
            continue;
        }
        if (f.role == Role::detail) --detail_budget;
        else ++kept_non_detail;
        p.bound_fields.push_back(std::move(f));
    }
    if (p.bound_fields.empty())
        throw Error(ErrorCode::NoBindableFields, "no role-carrying result column for " + derived.insight_id);
    return p;
}

// ------------------------------------------------------------------ knowledge

Knowledge Knowledge::defaults() {
    Knowledge k;
    k.weights = {
        {"S1", {{"non_point_mark", 8}}},
        {"S2", {{"non_line_mark", 8}}},
        {"S3", {{"non_bar_mark", 8}, {"horizontal_bar", 1}}},
        {"S4",
         {{"skewed_linear", 10},
          {"skewed_log", 2},
          {"skewed_symlog_nonpositive", 2},
          {"skewed_symlog_positive", 3},
          {"unskewed_nonlinear", 1}}},
        {"S5", {{"binned_channel", 2}}},
        {"S6", {{"facet_with_evidence", -3}}},
        {"S7", {{"unused_field", 4}}},
        {"S8", {{"facet_few_categories", 4}}},
        {"S9", {{"aggregate_sum", 1}, {"aggregate_mean", 0}, {"aggregate_without_discrete_axis", 5}}},
        {"S10", {{"identifier_on_axis", 6}}},
    };
    return k;
}

Knowledge Knowledge::from_json(const json& j) {
    Knowledge k;
    try {
        if (j.contains("skew")) {
            k.skew_min_orders_of_magnitude = j["skew"].value("min_orders_of_magnitude", k.skew_min_orders_of_magnitude);
            k.skew_min_abs_skewness = j["skew"].value("min_abs_skewness", k.skew_min_abs_skewness);
        }
        if (j.contains("defaults")) {
            k.bin_count = j["defaults"].value("bin_count", k.bin_count);
            k.symlog_constant = j["defaults"].value("symlog_constant", k.symlog_constant);
        }
        if (j.contains("hard_constraints")) {
            const auto& h = j["hard_constraints"];
            if (h.contains("H4")) {
                k.facet_min_distinct = h["H4"].value("min_distinct", k.facet_min_distinct);
                k.facet_max_distinct = h["H4"].value("max_distinct", k.facet_max_distinct);
            }
            if (h.contains("H5")) k.color_max_categories = h["H5"].value("max_categories", k.color_max_categories);
        }
        for (const auto& r : j.at("soft_rules")) {
            const std::string id = r.at("id").get<std::string>();
            auto& w = k.weights[id];
            for (const auto& [name, v] : r.at("weights").items()) w[name] = v.get<double>();
            if (id == "S8" && r.contains("thresholds"))
                k.few_categories = r["thresholds"].value("max_categories", k.few_categories);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("viz knowledge: ") + e.what());
    }
    return k;
}

Knowledge Knowledge::load(const std::filesystem::path& p) {
    try {
        return from_json(json::parse(read_file(p)));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, p.string() + ": " + e.what());
    }
}

ordered_json Knowledge::to_json() const {
    ordered_json j;
    j["skew"] = {{"min_orders_of_magnitude", skew_min_orders_of_magnitude}, {"min_abs_skewness", skew_min_abs_skewness}};
    j["defaults"] = {{"bin_count", bin_count}, {"symlog_constant", symlog_constant}};
    j["hard_constraints"] = {{"H4", {{"min_distinct", facet_min_distinct}, {"max_distinct", facet_max_distinct}}},
                             {"H5", {{"max_categories", color_max_categories}}}};
    j["soft_rules"] = ordered_json::array();
    std::vector<std::string> ids;
    for (const auto& [id, w] : weights) ids.push_back(id);
    std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
        return std::stoi(a.substr(1)) < std::stoi(b.substr(1));
    });
    for (const auto& id : ids) {
        ordered_json r{{"id", id}, {"weights", weights.at(id)}};
        if (id == "S8") r["thresholds"] = {{"max_categories", few_categories}};
        j["soft_rules"].push_back(r);
    }
    return j;
}

double Knowledge::weight(const std::string& rule, const std::string& name) const {
    auto r = weights.find(rule);
    if (r == weights.end()) return 0;
    auto w = r->second.find(name);
    return w == r->second.end() ? 0 : w->second;
}

bool Knowledge::is_skewed(const StatsExcerpt& s) const {
    return (s.orders_of_magnitude && *s.orders_of_magnitude >= skew_min_orders_of_magnitude) ||
           (s.skewness && std::abs(*s.skewness) >= skew_min_abs_skewness);
}

// ------------------------------------------------------------------ spec

const Encoding* CompleteSpec::find(Channel c) const {
    for (const auto& e : encodings)
        if (e.channel == c) return &e;
    return nullptr;
}

std::string CompleteSpec::serialize() const {
    std::string s(to_string(mark));
    for (Channel c : kChannels) {
        s += '|';
        s += to_string(c);
        s += '=';
        const Encoding* e = find(c);
        if (!e) {
            s += '-';
            continue;
        }
        s += e->field;
        s += ':';
        s += to_string(e->scale);
        s += ':';
        s += to_string(e->aggregate);
        s += ':';
        s += e->bin ? std::to_string(*e->bin) : "-";
    }
    return s;
}

ordered_json CompleteSpec::to_json() const {
    ordered_json j;
    j["mark"] = to_string(mark);
    j["encodings"] = ordered_json::array();
    for (const auto& e : encodings) {
        ordered_json o{{"channel", to_string(e.channel)},
                       {"field", e.field},
                       {"scale", to_string(e.scale)},
                       {"aggregate", to_string(e.aggregate)}};
        o["bin"] = e.bin ? ordered_json(*e.bin) : ordered_json(nullptr);
        j["encodings"].push_back(o);
    }
    j["cost"] = cost;
    j["reasons"] = reasons;
    j["decision_log"] = ordered_json::array();
    for (const auto& d : decision_log)
        j["decision_log"].push_back(
            {{"rank", d.rank}, {"cost", d.cost}, {"reasons", d.reasons}, {"candidate", d.candidate}});
    return j;
}

CompleteSpec CompleteSpec::from_json(const json& j) {
    CompleteSpec s;
    s.mark = parse_enum<Mark>(j.at("mark").get<std::string>(), kMarkNames, "mark");
    for (const auto& o : j.at("encodings")) {
        Encoding e;
        e.channel = parse_enum<Channel>(o.at("channel").get<std::string>(), kChannelNames, "channel");
        e.field = o.at("field").get<std::string>();
        e.scale = parse_enum<Scale>(o.at("scale").get<std::string>(), kScaleNames, "scale");
        e.aggregate = parse_enum<Aggregate>(o.at("aggregate").get<std::string>(), kAggregateNames, "aggregate");
        if (o.contains("bin") && !o["bin"].is_null()) e.bin = o["bin"].get<int>();
        s.encodings.push_back(std::move(e));
    }
    s.cost = j.value("cost", 0.0);
    if (j.contains("reasons")) s.reasons = j["reasons"].get<std::vector<std::string>>();
    if (j.contains("decision_log"))
        for (const auto& d : j["decision_log"])
            s.decision_log.push_back({d.at("rank").get<int>(), d.at("cost").get<double>(),
                                      d.at("reasons").get<std::vector<std::string>>(),
                                      d.at("candidate").get<std::string>()});
    return s;
}

// ------------------------------------------------------------------ constraints

std::vector<std::string> hard_violations(const CompleteSpec& spec, const PartialSpec& partial, const Knowledge& kb) {
    std::vector<std::string> v;
    const Encoding* x = spec.find(Channel::x);
    const Encoding* y = spec.find(Channel::y);
    std::array<int, 5> per_channel{};
    std::vector<std::string> seen;
    for (const auto& e : spec.encodings) {
        ++per_channel[static_cast<std::size_t>(e.channel)];
        if (std::find(seen.begin(), seen.end(), e.field) != seen.end() || !lookup(partial, e.field)) {
            v.push_back("structure");
            return v;
        }
        seen.push_back(e.field);
    }
    if (!x || !y || std::any_of(per_channel.begin(), per_channel.end(), [](int n) { return n > 1; })) {
        v.push_back("structure");
        return v;
    }
    const BoundField& fx = *lookup(partial, x->field);
    const BoundField& fy = *lookup(partial, y->field);

    for (const auto& e : spec.encodings) {
        if (e.scale != Scale::log) continue;
        const auto& s = lookup(partial, e.field)->stats;
        if (!(s.min && *s.min > 0 && s.has_nonpositive && !*s.has_nonpositive)) {
            v.push_back("H1");
            break;
        }
    }
    if (spec.mark == Mark::line || spec.mark == Mark::area) {
        if (!(fx.kind == Kind::temporal || fx.kind == Kind::ordinal || x->bin)) v.push_back("H2");
    }
    if (spec.mark == Mark::bar) {
        const bool dx = enc_discrete(*x, fx), dy = enc_discrete(*y, fy);
        bool ok = dx != dy;
        if (ok) {
            const Encoding& other = dx ? *y : *x;
            const BoundField& fo = dx ? fy : fx;
            ok = enc_quant(other, fo) && other.aggregate != Aggregate::none;
        }
        if (!ok) v.push_back("H3");
    }
    if (const Encoding* f = spec.find(Channel::facet)) {
        const auto& bf = *lookup(partial, f->field);
        const auto d = static_cast<int>(bf.stats.distinct_count);
        if (!is_discrete(bf.kind) || d < kb.facet_min_distinct || d > kb.facet_max_distinct) v.push_back("H4");
    }
    if (const Encoding* c = spec.find(Channel::color)) {
        const auto& bf = *lookup(partial, c->field);
        if (discrete_kind(bf.kind) && static_cast<int>(bf.stats.distinct_count) > kb.color_max_categories)
            v.push_back("H5");
    }
    if (const Encoding* s = spec.find(Channel::size)) {
        if (!enc_quant(*s, *lookup(partial, s->field))) v.push_back("H6");
    }
    if (spec.mark == Mark::rect) {
        bool ok = enc_discrete(*x, fx) && enc_discrete(*y, fy);
        if (ok) {
            ok = false;
            for (Channel c : {Channel::color, Channel::size})
                if (const Encoding* e = spec.find(c))
                    ok = ok || (enc_quant(*e, *lookup(partial, e->field)) && e->aggregate != Aggregate::none);
        }
        if (!ok) v.push_back("H7");
    }
    if (partial.bound_fields.size() <= std::size(kChannels)) {
        for (const auto& f : partial.bound_fields) {
            if (f.role != Role::measure && f.role != Role::dimension) continue;
            if (std::find(seen.begin(), seen.end(), f.field) == seen.end()) {
                v.push_back("H8");
                break;
            }
        }
    }
    return v;
}

double cost(const CompleteSpec& spec, const PartialSpec& partial, const Knowledge& kb, std::vector<std::string>* reasons) {
    double total = 0;
    auto fire = [&](const char* rule, const char* name, const std::string& subject = {}) {
        const double w = kb.weight(rule, name);
        if (w == 0) return;
        total += w;
        if (reasons) reasons->push_back(std::string(rule) + "." + name + (subject.empty() ? "" : ":" + subject));
    };

    switch (partial.task) {
        case Task::correlation:
        case Task::outlier:
            if (spec.mark != Mark::point) fire("S1", "non_point_mark");
            break;
        case Task::trend:
            if (spec.mark != Mark::line) fire("S2", "non_line_mark");
            break;
        case Task::comparison:
        case Task::ranking:
        case Task::part_to_whole:
        case Task::distribution:
            if (spec.mark != Mark::bar) fire("S3", "non_bar_mark");
            break;
    }
    const Encoding* x = spec.find(Channel::x);
    const Encoding* y = spec.find(Channel::y);
    if (spec.mark == Mark::bar && x && y && enc_discrete(*y, *lookup(partial, y->field)))
        fire("S3", "horizontal_bar");

    bool discrete_axis = false;
    bool any_aggregate = false;
    for (const auto& e : spec.encodings) {
        const BoundField& f = *lookup(partial, e.field);
        if (positional(e.channel)) {
            if (enc_discrete(e, f)) discrete_axis = true;
            if (f.kind == Kind::quantitative && f.field != kCountField) {
                if (kb.is_skewed(f.stats)) {
                    if (e.scale == Scale::linear) fire("S4", "skewed_linear", f.field);
                    else if (e.scale == Scale::log) fire("S4", "skewed_log", f.field);
                    else if (e.scale == Scale::symlog)
                        fire("S4", f.stats.has_nonpositive.value_or(true) ? "skewed_symlog_nonpositive" : "skewed_symlog_positive",
                             f.field);
                } else if (e.scale == Scale::log || e.scale == Scale::symlog) {
                    fire("S4", "unskewed_nonlinear", f.field);
                }
            }
            if (f.kind == Kind::identifier) fire("S10", "identifier_on_axis", f.field);
        }
        if (e.bin) fire("S5", "binned_channel", f.field);
        if (e.channel == Channel::facet) {
            if (f.stats.facet_evidence) fire("S6", "facet_with_evidence", f.field);
            if (static_cast<int>(f.stats.distinct_count) <= kb.few_categories) fire("S8", "facet_few_categories", f.field);
        }
        if (e.aggregate != Aggregate::none) any_aggregate = true;
        if (e.aggregate == Aggregate::sum) fire("S9", "aggregate_sum", f.field);
        if (e.aggregate == Aggregate::mean) fire("S9", "aggregate_mean", f.field);
    }
    if (any_aggregate && !discrete_axis) fire("S9", "aggregate_without_discrete_axis");
    for (const auto& f : partial.bound_fields)
        if (std::none_of(spec.encodings.begin(), spec.encodings.end(),
                         [&](const Encoding& e) { return e.field == f.field; }))
            fire("S7", "unused_field", f.field);
    return total;
}

// ------------------------------------------------------------------ search

std::vector<CompleteSpec> enumerate_candidates(const PartialSpec& partial, const Knowledge& kb) {
    const auto fields = search_fields(partial);
    std::vector<CompleteSpec> out;
    for (const auto& sk : skeletons(fields))
        expand(sk, fields, kb.bin_count, [&](const CompleteSpec& spec) {
            if (hard_violations(spec, partial, kb).empty()) {
                CompleteSpec s = spec;
                s.cost = cost(s, partial, kb, &s.reasons);
                out.push_back(std::move(s));
            }
        });
    if (out.empty())
        throw Error(ErrorCode::NoValidCandidate, "hard constraints eliminate every candidate for " + partial.insight_id);
    return out;
}

std::size_t raw_candidate_count(const PartialSpec& partial) {
    const auto fields = search_fields(partial);
    std::size_t n = 0;
    for (const auto& sk : skeletons(fields)) expand(sk, fields, 20, [&](const CompleteSpec&) { ++n; });
    return n;
}

CompleteSpec solve_serial(const PartialSpec& partial, const Knowledge& kb) {
    const auto fields = search_fields(partial);
    TopK top;
    std::size_t valid = 0;
    for (const auto& sk : skeletons(fields)) score_skeleton(sk, fields, partial, kb, top, valid);
    return finish(top, valid, partial, kb);
}

CompleteSpec solve(const PartialSpec& partial, const Knowledge& kb) {
    const auto fields = search_fields(partial);
    const auto sks = skeletons(fields);
    TopK top;
    std::size_t valid = 0;
#pragma omp parallel
    {
        TopK local;
        std::size_t local_valid = 0;
#pragma omp for schedule(dynamic, 8) nowait
        for (std::size_t i = 0; i < sks.size(); ++i) score_skeleton(sks[i], fields, partial, kb, local, local_valid);
#pragma omp critical
        {
            top.merge(local);
            valid += local_valid;
        }
    }
    return finish(top, valid, partial, kb);
}

// ------------------------------------------------------------------ render

std::string to_render_doc(const CompleteSpec& spec, const PartialSpec& partial, const publisher::ArtifactRef& artifact,
                          const std::string& title, const Knowledge& kb) {
    ordered_json doc;
    doc["$schema"] = "https://vega.github.io/schema/vega-lite/v5.json";
    if (!title.empty()) doc["title"] = title;
    doc["data"] = {{"url", artifact.store_key}, {"name", partial.insight_id}};
    doc["mark"] = to_string(spec.mark);
    ordered_json enc = ordered_json::object();
    for (const auto& e : spec.encodings) {
        const BoundField* f = lookup(partial, e.field);
        ordered_json o;
        if (e.field != kCountField) o["field"] = e.field;
        std::string type;
        switch (e.scale) {
            case Scale::linear:
            case Scale::log:
            case Scale::symlog: type = "quantitative"; break;
            case Scale::ordinal: type = "ordinal"; break;
            case Scale::temporal: type = f && f->stats.numeric ? "ordinal" : "temporal"; break;
        }
        if (e.channel == Channel::facet && f && f->kind == Kind::nominal) type = "nominal";
        o["type"] = type;
        if (e.aggregate != Aggregate::none) o["aggregate"] = to_string(e.aggregate);
        if (e.bin) o["bin"] = {{"maxbins", *e.bin}};
        if (e.scale == Scale::symlog) o["scale"] = {{"type", "symlog"}, {"constant", kb.symlog_constant}};
        else if (e.scale == Scale::log) o["scale"] = {{"type", "log"}};
        else if (e.scale == Scale::linear && e.channel != Channel::facet) o["scale"] = {{"type", "linear"}};
        if (e.channel == Channel::facet) o["columns"] = 2;
        enc[std::string(to_string(e.channel))] = o;
    }
    doc["encoding"] = enc;
    doc["usermeta"] = {{"insight_id", partial.insight_id},
                       {"artifact_digest", artifact.digest},
                       {"data_file", "data/" + partial.insight_id + ".json"},
                       {"cost", spec.cost},
                       {"candidate", spec.serialize()}};
    return doc.dump(2) + "\n";
}

}  // namespace reportsmith::vizrec
