#include "reportsmith/trace.hpp"

#include <algorithm>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "reportsmith/digest.hpp"
#include "reportsmith/error.hpp"

namespace reportsmith::trace {

std::string_view to_string(Status s) {
    switch (s) {
        case Status::ok: return "ok";
        case Status::error: return "error";
        case Status::degraded: return "degraded";
    }
    return "ok";
}

Status status_from_string(std::string_view s) {
    if (s == "ok") return Status::ok;
    if (s == "error") return Status::error;
    if (s == "degraded") return Status::degraded;
    throw Error(ErrorCode::ParseError, "unknown span status '" + std::string(s) + "'");
}

nlohmann::ordered_json SpanRecord::to_json() const {
    nlohmann::ordered_json j;
    j["trace_id"] = trace_id;
    j["span_id"] = span_id;
    j["parent_span_id"] = parent_span_id ? nlohmann::ordered_json(*parent_span_id) : nlohmann::ordered_json(nullptr);
    j["stage_name"] = stage_name;
    j["agent_role"] = agent_role ? nlohmann::ordered_json(*agent_role) : nlohmann::ordered_json(nullptr);
    j["status"] = to_string(status);
    j["start"] = start_ns;
    j["end"] = end_ns;
    j["input_digest"] = input_digest;
    j["output_digest"] = output_digest;
    j["attributes"] = attributes;
    return j;
}

SpanRecord SpanRecord::from_json(const nlohmann::json& j) {
    SpanRecord r;
    r.trace_id = j.at("trace_id").get<std::string>();
    r.span_id = j.at("span_id").get<std::string>();
    if (!j.at("parent_span_id").is_null()) r.parent_span_id = j.at("parent_span_id").get<std::string>();
    r.stage_name = j.at("stage_name").get<std::string>();
    if (!j.at("agent_role").is_null()) r.agent_role = j.at("agent_role").get<std::string>();
    r.status = status_from_string(j.at("status").get<std::string>());
    r.start_ns = j.at("start").get<std::int64_t>();
    r.end_ns = j.at("end").get<std::int64_t>();
    r.input_digest = j.value("input_digest", "");
    r.output_digest = j.value("output_digest", "");
    r.attributes = nlohmann::ordered_json::parse(j.at("attributes").dump());
    return r;
}

TraceStore::TraceStore(std::string trace_id, std::optional<std::filesystem::path> jsonl)
    : trace_id_(std::move(trace_id)) {
    if (jsonl) {
        std::error_code ec;
        std::filesystem::create_directories(jsonl->parent_path(), ec);
        out_.open(*jsonl, std::ios::app);
        if (!out_) std::cerr << "reportsmith: cannot open trace log " << jsonl->string() << "\n";
    }
}

void TraceStore::append(const SpanRecord& rec) {
    std::lock_guard lock(mu_);
    spans_.push_back(rec);
    if (out_.is_open()) {
        try {
            out_ << rec.to_json().dump() << '\n';
            out_.flush();
        } catch (const std::exception& e) {
            std::cerr << "reportsmith: trace write failed: " << e.what() << "\n";
        }
    }
}

std::vector<SpanRecord> TraceStore::spans() const {
    std::lock_guard lock(mu_);
    return spans_;
}

namespace {
std::int64_t now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}
}  // namespace

Span Span::disabled() { return Span(); }

Span Span::root(std::shared_ptr<TraceStore> store, std::string name) {
    Span s;
    s.store_ = std::move(store);
    s.rec_.trace_id = s.store_->trace_id();
    s.rec_.span_id = sha256_hex("root/" + name).substr(0, 16);
    s.rec_.stage_name = std::move(name);
    s.rec_.start_ns = now_ns();
    s.open_ = true;
    return s;
}

Span::Span(Span&& o) noexcept
    : store_(std::move(o.store_)),
      rec_(std::move(o.rec_)),
      open_(o.open_),
      child_mu_(std::move(o.child_mu_)),
      child_counts_(std::move(o.child_counts_)) {
    o.open_ = false;
}

Span& Span::operator=(Span&& o) noexcept {
    if (this != &o) {
        close();
        store_ = std::move(o.store_);
        rec_ = std::move(o.rec_);
        open_ = o.open_;
        child_mu_ = std::move(o.child_mu_);
        child_counts_ = std::move(o.child_counts_);
        o.open_ = false;
    }
    return *this;
}

Span::~Span() { close(); }

Span Span::child(const std::string& name, const std::string& key) {
    Span s;
    if (!store_) return s;
    const std::string disc = key.empty() ? name : key;
    int ordinal = 0;
    {
        std::lock_guard lock(*child_mu_);
        ordinal = (*child_counts_)[disc]++;
    }
    s.store_ = store_;
    s.rec_.trace_id = rec_.trace_id;
    s.rec_.span_id = sha256_hex(rec_.span_id + "/" + disc + "#" + std::to_string(ordinal)).substr(0, 16);
    s.rec_.parent_span_id = rec_.span_id;
    s.rec_.stage_name = name;
    s.rec_.start_ns = now_ns();
    s.open_ = true;
    return s;
}

void Span::set(const std::string& key, nlohmann::ordered_json value) {
    if (store_) rec_.attributes[key] = std::move(value);
}

void Span::fail(const std::string& message) {
    rec_.status = Status::error;
    set("error", message);
}

void Span::close() {
    if (!open_ || !store_) {
        open_ = false;
        return;
    }
    open_ = false;
    rec_.end_ns = std::max(now_ns(), rec_.start_ns);
    try {
        store_->append(rec_);
    } catch (const std::exception& e) {
        std::cerr << "reportsmith: trace append failed: " << e.what() << "\n";
    }
}

std::vector<SpanRecord> load_jsonl(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::UnreadableSource, "cannot open trace " + p.string());
    std::vector<SpanRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(SpanRecord::from_json(nlohmann::json::parse(line)));
    }
    return out;
}

std::string check_tree(const std::vector<SpanRecord>& spans) {
    if (spans.empty()) return "no spans";
    std::map<std::string, const SpanRecord*> by_id;
    for (const auto& s : spans) {
        if (!by_id.emplace(s.span_id, &s).second) return "duplicate span id " + s.span_id;
        if (s.end_ns < s.start_ns) return "span " + s.span_id + " ends before it starts";
    }
    int roots = 0;
    for (const auto& s : spans) {
        if (!s.parent_span_id) {
            ++roots;
            continue;
        }
        if (!by_id.contains(*s.parent_span_id)) return "orphan span " + s.span_id;
    }
    if (roots != 1) return "expected exactly one root, found " + std::to_string(roots);
    // Parent links must be acyclic; with one root and no orphans every chain ends at the root.
    for (const auto& s : spans) {
        std::set<std::string> seen;
        const SpanRecord* cur = &s;
        while (cur->parent_span_id) {
            if (!seen.insert(cur->span_id).second) return "cycle through " + s.span_id;
            cur = by_id.at(*cur->parent_span_id);
        }
    }
    return {};
}

std::string render_tree(const std::vector<SpanRecord>& spans, const std::string& insight_filter) {
    std::map<std::string, std::vector<const SpanRecord*>> children;
    const SpanRecord* root = nullptr;
    for (const auto& s : spans) {
        if (s.parent_span_id) children[*s.parent_span_id].push_back(&s);
        else root = &s;
    }
    for (auto& [_, v] : children)
        std::sort(v.begin(), v.end(), [](auto* a, auto* b) {
            return a->start_ns != b->start_ns ? a->start_ns < b->start_ns : a->span_id < b->span_id;
        });
    std::ostringstream out;
    std::function<void(const SpanRecord*, int)> walk = [&](const SpanRecord* s, int depth) {
        if (depth == 1 && !insight_filter.empty()) {
            auto it = s->attributes.find("insight_id");
            if (it == s->attributes.end() || *it != insight_filter) return;
        }
        out << std::string(static_cast<std::size_t>(depth) * 2, ' ') << s->stage_name;
        if (s->agent_role) out << " [" << *s->agent_role << "]";
        out << " " << to_string(s->status);
        if (auto it = s->attributes.find("cache"); it != s->attributes.end()) out << " cache=" << it->get<std::string>();
        if (auto it = s->attributes.find("insight_id"); it != s->attributes.end())
            out << " insight=" << it->get<std::string>();
        out << " (" << (s->end_ns - s->start_ns) / 1000 << " us)\n";
        for (auto* c : children[s->span_id]) walk(c, depth + 1);
    };
    if (root) walk(root, 0);
    return out.str();
}

}  // namespace reportsmith::trace
