#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include <json.hpp>

#include "reportsmith/ingest.hpp"
#include "reportsmith/io.hpp"
#include "reportsmith/llm_gateway.hpp"
#include "reportsmith/trace.hpp"
#include "reportsmith/value.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return REPORTSMITH_SOURCE_DIR; }
inline std::filesystem::path sample_csv() { return source_dir() / "data/sample/papers.csv"; }

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("rs-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline reportsmith::RawTable raw_from_csv(const std::string& text) {
    return reportsmith::ingest::parse_csv_table(text, "inline.csv");
}

struct Loaded {
    reportsmith::ingest::DatasetSchema schema;
    reportsmith::Table table;
};

// Ingest without knowledge or gateway.
inline Loaded load(const reportsmith::RawTable& raw) {
    using namespace reportsmith;
    auto cleaned = ingest::clean(raw);
    auto fields = ingest::refine_fields(raw);
    auto span = trace::Span::disabled();
    auto schema = ingest::describe_dataset(fields, cleaned, nullptr, span);
    return {schema, ingest::apply_schema(cleaned, schema.fields)};
}

inline Loaded load_sample() { return load(reportsmith::ingest::load_dataset(sample_csv().string())); }

inline std::unique_ptr<reportsmith::llm::Gateway> stub_gateway(const std::filesystem::path& fixtures) {
    using namespace reportsmith;
    return std::make_unique<llm::Gateway>(llm::RoutingTable::defaults(), std::make_shared<llm::StubBackend>(fixtures));
}

// Builds fixtures for a multi-step session: `run` is replayed with a fresh
// stub gateway and the first unanswered prompt of `role` gets the next
// scripted response, until the script is used up.
template <typename Run>
void script_fixtures(const std::filesystem::path& root, reportsmith::llm::AgentRole role,
                     const std::vector<nlohmann::json>& script, Run&& run) {
    using namespace reportsmith;
    for (std::size_t i = 0; i < script.size(); ++i) {
        auto backend = std::make_shared<llm::StubBackend>(root);
        llm::Gateway gw(llm::RoutingTable::defaults(), backend);
        run(gw);
        std::optional<std::string> key;
        for (const auto& m : backend->misses())
            if (m.role == role) {
                key = m.key;
                break;
            }
        if (!key) return;
        nlohmann::json doc{{"response", script[i]}};
        write_file_atomic(root / std::string(llm::to_string(role)) / (*key + ".json"), doc.dump(2));
    }
}

}  // namespace testing
