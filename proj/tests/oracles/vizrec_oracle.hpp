#pragma once

// Exhaustive reference for chart recommendation. Reads the partial spec and
// the knowledge file as plain JSON, enumerates channel -> field maps (rather
// than field -> channel), checks H1-H8 from their textual definitions and
// prices candidates straight from the weight table.

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace oracle::viz {

using nlohmann::json;

struct Field {
    std::string name, role, kind;
    long distinct = 0;
    std::optional<double> skewness, oom, min;
    std::optional<bool> nonpositive;
    bool facet_evidence = false;
};

struct Enc {
    std::string field, scale, agg;
    int bin = 0;  // 0 = none
};

constexpr const char* kMarks[] = {"point", "bar", "line", "area", "tick", "rect"};
constexpr const char* kChannels[] = {"x", "y", "color", "size", "facet"};

struct Cand {
    std::string mark;
    std::optional<Enc> ch[5];

    std::string key() const {
        std::string s = mark;
        for (int c = 0; c < 5; ++c) {
            s += std::string("|") + kChannels[c] + "=";
            if (!ch[c]) {
                s += "-";
                continue;
            }
            s += ch[c]->field + ":" + ch[c]->scale + ":" + ch[c]->agg + ":" + (ch[c]->bin ? std::to_string(ch[c]->bin) : "-");
        }
        return s;
    }
};

struct Kb {
    double skew_oom = 3, skew_abs = 2;
    int bins = 20, facet_lo = 2, facet_hi = 12, color_max = 10, few = 3;
    std::map<std::string, std::map<std::string, double>> w;

    static Kb from(const json& j) {
        Kb k;
        k.skew_oom = j["skew"]["min_orders_of_magnitude"];
        k.skew_abs = j["skew"]["min_abs_skewness"];
        k.bins = j["defaults"]["bin_count"];
        k.facet_lo = j["hard_constraints"]["H4"]["min_distinct"];
        k.facet_hi = j["hard_constraints"]["H4"]["max_distinct"];
        k.color_max = j["hard_constraints"]["H5"]["max_categories"];
        for (const auto& r : j["soft_rules"]) {
            for (const auto& [n, v] : r["weights"].items()) k.w[r["id"]][n] = v;
            if (r["id"] == "S8" && r.contains("thresholds")) k.few = r["thresholds"]["max_categories"];
        }
        return k;
    }
    double weight(const std::string& r, const std::string& n) const {
        auto a = w.find(r);
        if (a == w.end()) return 0;
        auto b = a->second.find(n);
        return b == a->second.end() ? 0 : b->second;
    }
};

struct Partial {
    std::string task;
    std::vector<Field> fields;

    static Partial from(const json& j) {
        Partial p;
        p.task = j["task"];
        for (const auto& b : j["bound_fields"]) {
            Field f;
            f.name = b["field"];
            f.role = b["role"];
            f.kind = b["kind"];
            const auto& s = b["stats"];
            f.distinct = s.value("distinct_count", 0L);
            if (s.contains("skewness") && !s["skewness"].is_null()) f.skewness = s["skewness"].get<double>();
            if (s.contains("orders_of_magnitude") && !s["orders_of_magnitude"].is_null())
                f.oom = s["orders_of_magnitude"].get<double>();
            if (s.contains("min") && !s["min"].is_null()) f.min = s["min"].get<double>();
            if (s.contains("has_nonpositive") && !s["has_nonpositive"].is_null())
                f.nonpositive = s["has_nonpositive"].get<bool>();
            f.facet_evidence = s.value("facet_evidence", false);
            p.fields.push_back(f);
        }
        return p;
    }
};

// The single-field case gets a virtual record-count measure.
inline std::vector<Field> universe(const Partial& p) {
    auto fs = p.fields;
    if (fs.size() == 1) fs.push_back({"__count__", "detail", "quantitative", 0, {}, {}, {}, {}, false});
    return fs;
}

inline const Field* field(const Partial& p, const std::string& name) {
    for (const auto& f : p.fields)
        if (f.name == name) return &f;
    static const Field count{"__count__", "detail", "quantitative", 0, {}, {}, {}, {}, false};
    if (name == "__count__" && p.fields.size() == 1) return &count;
    return nullptr;
}

inline bool discrete(const std::string& kind) {
    return kind == "nominal" || kind == "ordinal" || kind == "boolean" || kind == "identifier";
}
// Categorical encodings: discrete kinds, plus anything binned.
inline bool cat(const Enc& e, const Field& f) { return e.bin > 0 || discrete(f.kind); }
inline bool cont(const Enc& e, const Field& f) { return f.kind == "quantitative" && e.bin == 0; }

inline std::vector<Enc> encodings_for(const Field& f, int channel, int bins) {
    if (f.name == "__count__") return {{f.name, "linear", "count", 0}};
    if (f.kind == "temporal") return {{f.name, "temporal", "none", 0}};
    if (f.kind != "quantitative") return {{f.name, "ordinal", "none", 0}};
    std::vector<Enc> out;
    if (channel <= 1) {
        for (const char* s : {"linear", "log", "symlog"})
            for (const char* a : {"none", "sum", "mean"}) out.push_back({f.name, s, a, 0});
        out.push_back({f.name, "linear", "none", bins});
    } else if (channel == 2) {
        for (const char* a : {"none", "sum", "mean"}) out.push_back({f.name, "linear", a, 0});
    } else {
        out.push_back({f.name, "linear", "none", 0});
    }
    return out;
}

inline bool hard_ok(const Cand& c, const Partial& p, const Kb& kb) {
    if (!c.ch[0] || !c.ch[1]) return false;
    std::vector<std::string> used;
    for (const auto& e : c.ch)
        if (e) {
            if (!field(p, e->field)) return false;
            for (const auto& u : used)
                if (u == e->field) return false;
            used.push_back(e->field);
        }
    const Enc &x = *c.ch[0], &y = *c.ch[1];
    const Field &fx = *field(p, x.field), &fy = *field(p, y.field);
    // H1
    for (const auto& e : c.ch)
        if (e && e->scale == "log") {
            const Field& f = *field(p, e->field);
            if (!f.min || *f.min <= 0 || !f.nonpositive || *f.nonpositive) return false;
        }
    // H2
    if ((c.mark == "line" || c.mark == "area") && !(fx.kind == "temporal" || fx.kind == "ordinal" || x.bin > 0)) return false;
    // H3
    if (c.mark == "bar") {
        const bool cx = cat(x, fx), cy = cat(y, fy);
        if (cx == cy) return false;
        const Enc& m = cx ? y : x;
        if (!cont(m, cx ? fy : fx) || m.agg == "none") return false;
    }
    // H4
    if (c.ch[4]) {
        const Field& f = *field(p, c.ch[4]->field);
        const bool disc = f.kind == "nominal" || f.kind == "ordinal" || f.kind == "boolean";
        if (!disc || f.distinct < kb.facet_lo || f.distinct > kb.facet_hi) return false;
    }
    // H5
    if (c.ch[2]) {
        const Field& f = *field(p, c.ch[2]->field);
        if (discrete(f.kind) && f.distinct > kb.color_max) return false;
    }
    // H6
    if (c.ch[3] && !cont(*c.ch[3], *field(p, c.ch[3]->field))) return false;
    // H7
    if (c.mark == "rect") {
        if (!cat(x, fx) || !cat(y, fy)) return false;
        bool measure = false;
        for (int k : {2, 3})
            if (c.ch[k] && cont(*c.ch[k], *field(p, c.ch[k]->field)) && c.ch[k]->agg != "none") measure = true;
        if (!measure) return false;
    }
    // H8
    if (p.fields.size() <= 5)
        for (const auto& f : p.fields)
            if (f.role == "measure" || f.role == "dimension") {
                bool bound = false;
                for (const auto& u : used) bound = bound || u == f.name;
                if (!bound) return false;
            }
    return true;
}

inline double price(const Cand& c, const Partial& p, const Kb& kb) {
    double t = 0;
    const std::string& task = p.task;
    if ((task == "correlation" || task == "outlier") && c.mark != "point") t += kb.weight("S1", "non_point_mark");
    if (task == "trend" && c.mark != "line") t += kb.weight("S2", "non_line_mark");
    if ((task == "comparison" || task == "ranking" || task == "part_to_whole" || task == "distribution") && c.mark != "bar")
        t += kb.weight("S3", "non_bar_mark");
    if (c.mark == "bar" && cat(*c.ch[1], *field(p, c.ch[1]->field))) t += kb.weight("S3", "horizontal_bar");
    bool cat_axis = false, aggregated = false;
    for (int k = 0; k < 5; ++k) {
        if (!c.ch[k]) continue;
        const Enc& e = *c.ch[k];
        const Field& f = *field(p, e.field);
        if (k <= 1) {
            cat_axis = cat_axis || cat(e, f);
            if (f.kind == "quantitative" && f.name != "__count__") {
                const bool skewed = (f.oom && *f.oom >= kb.skew_oom) || (f.skewness && std::fabs(*f.skewness) >= kb.skew_abs);
                if (skewed) {
                    if (e.scale == "linear") t += kb.weight("S4", "skewed_linear");
                    if (e.scale == "log") t += kb.weight("S4", "skewed_log");
                    if (e.scale == "symlog")
                        t += kb.weight("S4", f.nonpositive.value_or(true) ? "skewed_symlog_nonpositive" : "skewed_symlog_positive");
                } else if (e.scale != "linear") {
                    t += kb.weight("S4", "unskewed_nonlinear");
                }
            }
            if (f.kind == "identifier") t += kb.weight("S10", "identifier_on_axis");
        }
        if (e.bin) t += kb.weight("S5", "binned_channel");
        if (k == 4) {
            if (f.facet_evidence) t += kb.weight("S6", "facet_with_evidence");
            if (f.distinct <= kb.few) t += kb.weight("S8", "facet_few_categories");
        }
        aggregated = aggregated || e.agg != "none";
        if (e.agg == "sum") t += kb.weight("S9", "aggregate_sum");
        if (e.agg == "mean") t += kb.weight("S9", "aggregate_mean");
    }
    if (aggregated && !cat_axis) t += kb.weight("S9", "aggregate_without_discrete_axis");
    for (const auto& f : p.fields) {
        bool bound = false;
        for (const auto& e : c.ch) bound = bound || (e && e->field == f.name);
        if (!bound) t += kb.weight("S7", "unused_field");
    }
    return t;
}

struct Result {
    std::size_t raw = 0, valid = 0;
    std::string best_key;
    double best_cost = 0;
};

inline Result exhaustive(const Partial& p, const Kb& kb) {
    const auto fs = universe(p);
    Result r;
    const int n = static_cast<int>(fs.size());
    // choice[c] in [-1, n): field index on channel c
    int choice[5] = {-1, -1, -1, -1, -1};
    std::vector<Cand> maps;
    std::function<void(int)> assign = [&](int c) {
        if (c == 5) {
            for (int i = 0; i < 5; ++i)
                for (int j = i + 1; j < 5; ++j)
                    if (choice[i] >= 0 && choice[i] == choice[j]) return;
            if (choice[0] < 0 || choice[1] < 0) return;
            for (const char* m : kMarks) {
                std::vector<Cand> partial{Cand{m, {}}};
                for (int k = 0; k < 5; ++k) {
                    if (choice[k] < 0) continue;
                    std::vector<Cand> next;
                    for (const auto& base : partial)
                        for (const auto& e : encodings_for(fs[choice[k]], k, kb.bins)) {
                            Cand c = base;
                            c.ch[k] = e;
                            next.push_back(c);
                        }
                    partial.swap(next);
                }
                for (const auto& c : partial) {
                    ++r.raw;
                    if (!hard_ok(c, p, kb)) continue;
                    ++r.valid;
                    const double cost = price(c, p, kb);
                    const std::string key = c.key();
                    if (r.valid == 1 || cost < r.best_cost || (cost == r.best_cost && key < r.best_key)) {
                        r.best_cost = cost;
                        r.best_key = key;
                    }
                }
            }
            return;
        }
        for (int f = -1; f < n; ++f) {
            choice[c] = f;
            assign(c + 1);
        }
        choice[c] = -1;
    };
    assign(0);
    return r;
}

// Parses a canonical serialization back into a candidate (for checking
// solver output with hard_ok).
inline Cand parse_key(const std::string& key) {
    Cand c;
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= key.size(); ++i)
        if (i == key.size() || key[i] == '|') {
            parts.push_back(key.substr(start, i - start));
            start = i + 1;
        }
    c.mark = parts[0];
    for (int k = 0; k < 5 && k + 1 < static_cast<int>(parts.size()); ++k) {
        auto v = parts[k + 1].substr(parts[k + 1].find('=') + 1);
        if (v == "-") continue;
        std::vector<std::string> f;
        std::size_t s = 0;
        for (std::size_t i = 0; i <= v.size(); ++i)
            if (i == v.size() || v[i] == ':') {
                f.push_back(v.substr(s, i - s));
                s = i + 1;
            }
        c.ch[k] = Enc{f[0], f[1], f[2], f[3] == "-" ? 0 : std::stoi(f[3])};
    }
    return c;
}

}  // namespace oracle::viz
