#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace reportsmith::trace {

enum class Status { ok, error, degraded };
std::string_view to_string(Status s);
Status status_from_string(std::string_view s);

struct SpanRecord {
    std::string trace_id;
    std::string span_id;
    std::optional<std::string> parent_span_id;
    std::string stage_name;
    std::optional<std::string> agent_role;
    Status status = Status::ok;
    std::int64_t start_ns = 0;
    std::int64_t end_ns = 0;
    std::string input_digest;
    std::string output_digest;
    nlohmann::ordered_json attributes = nlohmann::ordered_json::object();

    nlohmann::ordered_json to_json() const;
    static SpanRecord from_json(const nlohmann::json& j);
};

/// Append-only span log. Every closed span becomes one JSONL line; writes are
/// serialized through a single mutex. I/O failures go to stderr and never
/// propagate.
class TraceStore {
public:
    explicit TraceStore(std::string trace_id, std::optional<std::filesystem::path> jsonl = std::nullopt);

    const std::string& trace_id() const { return trace_id_; }
    void append(const SpanRecord& rec);
    std::vector<SpanRecord> spans() const;

private:
    std::string trace_id_;
    mutable std::mutex mu_;
    std::vector<SpanRecord> spans_;
    std::ofstream out_;
};

/// Handle for an open span. Closes on destruction. Span ids are derived from
/// the parent id, a discriminator key and a per-key ordinal, so the same stage
/// tree yields the same ids in every run.
class Span {
public:
    /// A span that records nothing; children are disabled too.
    static Span disabled();
    static Span root(std::shared_ptr<TraceStore> store, std::string name);

    Span(Span&&) noexcept;
    Span& operator=(Span&&) noexcept;
    Span(const Span&) = delete;
    Span& operator=(const Span&) = delete;
    ~Span();

    Span child(const std::string& name, const std::string& key = {});

    bool enabled() const { return static_cast<bool>(store_); }
    const std::string& id() const { return rec_.span_id; }
    const SpanRecord& record() const { return rec_; }

    void set(const std::string& key, nlohmann::ordered_json value);
    void set_role(std::string role) { rec_.agent_role = std::move(role); }
    void set_status(Status s) { rec_.status = s; }
    /// Raises ok -> degraded but never clears an error.
    void degrade() {
        if (rec_.status == Status::ok) rec_.status = Status::degraded;
    }
    void fail(const std::string& message);
    void set_input_digest(std::string d) { rec_.input_digest = std::move(d); }
    void set_output_digest(std::string d) { rec_.output_digest = std::move(d); }
    void close();

private:
    Span() = default;
    std::shared_ptr<TraceStore> store_;
    SpanRecord rec_;
    bool open_ = false;
    std::shared_ptr<std::mutex> child_mu_ = std::make_shared<std::mutex>();
    std::shared_ptr<std::map<std::string, int>> child_counts_ = std::make_shared<std::map<std::string, int>>();
};

std::vector<SpanRecord> load_jsonl(const std::filesystem::path& p);

/// Returns an empty string when the spans form a single-rooted tree with no
/// orphans, duplicate ids or inverted timestamps; otherwise the first problem.
std::string check_tree(const std::vector<SpanRecord>& spans);

/// Indented text rendering, children ordered by start time.
std::string render_tree(const std::vector<SpanRecord>& spans, const std::string& insight_filter = {});

}  // namespace reportsmith::trace
