#include "reportsmith/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <deque>
#include <exception>
#include <functional>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "reportsmith/deriver.hpp"
#include "reportsmith/digest.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/ingest.hpp"
#include "reportsmith/io.hpp"
#include "reportsmith/json_util.hpp"
#include "reportsmith/llm_gateway.hpp"
#include "reportsmith/profiler.hpp"
#include "reportsmith/publisher.hpp"
#include "reportsmith/reporter.hpp"
#include "reportsmith/vizrec.hpp"

namespace reportsmith::orchestrator {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kStageOrder[] = {"ingest", "profile",  "plan",    "derive", "materialize",
                                       "solve",  "narrate", "compose", "emit"};
constexpr const char* kInsightStages[] = {"derive", "materialize", "solve", "narrate"};
constexpr const char* kConfigNodes[] = {"dataset", "knowledge", "rules", "viz_knowledge", "models", "fixtures", "intent"};

// Static stage graph. Per-insight stages depend on their own insight's
// upstream stages only.
const std::vector<std::pair<std::string, std::string>>& edges() {
    static const std::vector<std::pair<std::string, std::string>> e{
        {"dataset", "ingest"},      {"knowledge", "ingest"},   {"models", "ingest"},       {"fixtures", "ingest"},
        {"ingest", "profile"},      {"rules", "profile"},      {"profile", "plan"},        {"ingest", "plan"},
        {"intent", "plan"},         {"models", "plan"},        {"fixtures", "plan"},       {"plan", "derive"},
        {"ingest", "derive"},       {"models", "derive"},      {"fixtures", "derive"},     {"derive", "materialize"},
        {"ingest", "materialize"},  {"materialize", "solve"},  {"plan", "solve"},          {"rules", "solve"},
        {"viz_knowledge", "solve"}, {"solve", "narrate"},      {"materialize", "narrate"}, {"plan", "narrate"},
        {"models", "narrate"},      {"fixtures", "narrate"},   {"narrate", "compose"},     {"solve", "compose"},
        {"materialize", "compose"}, {"derive", "compose"},     {"intent", "compose"},      {"ingest", "compose"},
        {"compose", "emit"},        {"solve", "emit"},         {"materialize", "emit"},    {"derive", "emit"},
    };
    return e;
}

// Config nodes upstream of `stage`. Models and fixtures are left out: stages
// that call a model key on their own roles' routes and fixtures instead.
std::vector<std::string> config_lineage(const std::string& stage) {
    std::set<std::string> seen{stage}, out;
    std::vector<std::string> todo{stage};
    while (!todo.empty()) {
        auto n = todo.back();
        todo.pop_back();
        for (const auto& [a, b] : edges())
            if (b == n && seen.insert(a).second) todo.push_back(a);
    }
    for (const char* c : kConfigNodes)
        if (seen.count(c) && std::string_view(c) != "models" && std::string_view(c) != "fixtures") out.insert(c);
    return {out.begin(), out.end()};
}

bool per_insight(const std::string& stage) {
    return std::find(std::begin(kInsightStages), std::end(kInsightStages), stage) != std::end(kInsightStages);
}

int stage_rank(const std::string& s) {
    for (int i = 0; i < static_cast<int>(std::size(kStageOrder)); ++i)
        if (s == kStageOrder[i]) return i;
    return 99;
}

std::string dir_digest(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return "absent";
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& e : fs::recursive_directory_iterator(dir, ec))
        if (e.is_regular_file()) entries.emplace_back(fs::relative(e.path(), dir).generic_string(), sha256_hex(read_file(e.path())));
    std::sort(entries.begin(), entries.end());
    std::string acc;
    for (const auto& [p, d] : entries) acc += p + "\n" + d + "\n";
    return sha256_hex(acc);
}

std::string jd(const ordered_json& j) { return json_digest(to_plain(j)); }

struct StageOutput {
    ordered_json out;
    std::string span_id;
    bool hit = false;
};

struct Context {
    RunConfig cfg;
    std::string run_id;
    fs::path run_dir;
    std::shared_ptr<trace::TraceStore> traces;
    std::unique_ptr<StageCache> cache;
    std::unique_ptr<publisher::FilesystemStore> store;
    publisher::ArtifactManifest artifacts;
    std::unique_ptr<llm::Gateway> gateway;
    profiler::HintRuleSet rules;
    vizrec::Knowledge kb;
    llm::RoutingTable routes = llm::RoutingTable::defaults();
    std::string rules_digest, kb_digest, knowledge_digest;
    std::map<std::string, std::string> fixture_digests;
    /// dataset, knowledge, rules, viz_knowledge, intent -> digest
    std::map<std::string, std::string> config_digests;
    std::mutex rec_mu;
    std::vector<StageRecord> records;

    ordered_json llm_config(std::initializer_list<llm::AgentRole> roles) const {
        ordered_json j;
        j["backend"] = cfg.llm == LlmMode::stub ? "stub" : "http";
        for (auto r : roles) {
            const std::string name(llm::to_string(r));
            const auto& route = routes.route(r);
            j["routes"][name] = {{"tier", llm::to_string(route.tier)},
                                 {"model_id", route.model_id},
                                 {"max_tokens", route.max_tokens},
                                 {"temperature", route.temperature}};
            auto f = fixture_digests.find(name);
            j["fixtures"][name] = f == fixture_digests.end() ? "none" : f->second;
        }
        return j;
    }

    StageOutput run_stage(trace::Span& root, const std::string& stage, const std::string& insight_id,
                          std::vector<std::string> inputs, const ordered_json& config,
                          const std::function<ordered_json(trace::Span&)>& compute,
                          const std::function<bool(const ordered_json&)>& usable = {}) {
        ordered_json full = config;
        for (const auto& n : config_lineage(stage)) full["lineage"][n] = config_digests.at(n);
        StageKey k{stage, std::move(inputs), jd(full), code_version(stage)};
        const std::string key = k.digest();
        auto span = root.child(stage, insight_id.empty() ? stage : stage + ":" + insight_id);
        span.set("span_kind", "stage");
        if (!insight_id.empty()) span.set("insight_id", insight_id);
        span.set("stage_key", key);
        {
            auto sorted = k.input_digests;
            std::sort(sorted.begin(), sorted.end());
            span.set_input_digest(sha256_hex([&] {
                std::string s;
                for (const auto& d : sorted) s += d + "\n";
                return s;
            }()));
        }
        StageOutput result;
        result.span_id = span.id();
        std::optional<ordered_json> cached;
        if (cache) cached = cache->get(key);
        if (cached && (!usable || usable(*cached))) {
            span.set("cache", "hit");
            result.out = std::move(*cached);
            result.hit = true;
        } else {
            span.set("cache", "miss");
            try {
                result.out = compute(span);
            } catch (const Error& e) {
                span.fail(e.what());
                record(stage, insight_id, key, false, span, "");
                throw;
            }
            if (cache) cache->put(key, stage, result.out);
        }
        if (result.out.is_object() && result.out.value("degraded", false)) span.degrade();
        const std::string out_digest = jd(result.out);
        span.set_output_digest(out_digest);
        span.close();
        record(stage, insight_id, key, result.hit, span, out_digest);
        return result;
    }

    void record(const std::string& stage, const std::string& insight_id, const std::string& key, bool hit,
                const trace::Span& span, const std::string& out_digest) {
        std::lock_guard lock(rec_mu);
        records.push_back({stage, insight_id, key, hit, span.record().status, out_digest, span.id()});
    }
};

ordered_json query_outcome_json(const deriver::QueryOutcome& q) {
    ordered_json j;
    j["query"] = q.query ? q.query->to_json() : ordered_json(nullptr);
    j["result_schema"] = ordered_json::array();
    for (const auto& c : q.result_schema) j["result_schema"].push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
    j["attempted_sql"] = q.attempted_sql;
    if (q.skipped) {
        j["skipped"] = {{"reason", q.skipped->reason}, {"last_error", q.skipped->last_error}};
        j["degraded"] = true;
    } else {
        j["skipped"] = nullptr;
    }
    return j;
}

publisher::ResultSet load_rows(const publisher::ObjectStore& store, const deriver::DerivedDataset& d) {
    auto bytes = store.get(d.artifact.store_key);
    if (!bytes) throw Error(ErrorCode::StoreUnavailable, "artifact " + d.artifact.store_key + " missing from store");
    auto rs = publisher::decode(*bytes);
    rs.schema = d.result_schema;
    return rs;
}

struct InsightSlot {
    std::optional<reporter::CompletedInsight> completed;
    std::optional<reporter::SkippedInsight> skipped;
};

void process_insight(Context& ctx, trace::Span& root, const planner::InsightPlan& plan,
                     const ingest::DatasetSchema& schema, const std::string& schema_digest, const Table& table,
                     InsightSlot& slot) {
    const std::string id = plan.insight_id;
    const std::string plan_digest = plan.digest();
    auto skip = [&](std::string reason, std::string error, std::vector<std::string> attempted) {
        slot.skipped = reporter::SkippedInsight{plan, {id, std::move(reason), std::move(error), std::move(attempted)}};
    };

    auto derive = ctx.run_stage(
        root, "derive", id, {plan_digest, schema_digest},
        {{"llm", ctx.llm_config({llm::AgentRole::deriver, llm::AgentRole::repairer})}, {"max_attempts", ctx.cfg.max_attempts}},
        [&](trace::Span& s) {
            auto engine = deriver::open_session(table);
            return query_outcome_json(
                deriver::derive_query(plan, schema, *engine, ctx.gateway.get(), s, ctx.cfg.max_attempts));
        });
    if (!derive.out.at("skipped").is_null()) {
        skip(derive.out["skipped"].value("reason", "RepairExhausted"), derive.out["skipped"].value("last_error", ""),
             derive.out.at("attempted_sql").get<std::vector<std::string>>());
        return;
    }
    const auto query = deriver::CandidateQuery::from_json(to_plain(derive.out.at("query")));

    auto mat = ctx.run_stage(
        root, "materialize", id, {jd(derive.out.at("query")), schema_digest}, ordered_json::object(),
        [&](trace::Span& s) {
            auto engine = deriver::open_session(table);
            auto d = deriver::materialize(id, query, schema, *engine, *ctx.store, &ctx.artifacts, s);
            return d.to_json(false);
        },
        [&](const ordered_json& cached) {
            return ctx.store->exists(cached.at("artifact").at("store_key").get<std::string>());
        });
    auto derived = deriver::DerivedDataset::from_json(to_plain(mat.out));
    derived.rows = load_rows(*ctx.store, derived);
    ctx.artifacts.add(derived.artifact);
    const std::string derived_digest = jd(mat.out);

    StageOutput solved;
    try {
        solved = ctx.run_stage(root, "solve", id, {derived_digest, plan_digest},
                               {{"viz_knowledge", ctx.kb_digest}, {"rules", ctx.rules_digest}}, [&](trace::Span& s) {
                                   auto partial = vizrec::build_partial_spec(derived, plan, ctx.rules);
                                   auto spec = vizrec::solve(partial, ctx.kb);
                                   s.set("candidate", spec.serialize());
                                   s.set("cost", spec.cost);
                                   ordered_json j;
                                   j["partial"] = partial.to_json();
                                   j["spec"] = spec.to_json();
                                   j["chart_doc"] =
                                       vizrec::to_render_doc(spec, partial, derived.artifact, plan.title, ctx.kb);
                                   return j;
                               });
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoBindableFields && e.code() != ErrorCode::NoValidCandidate) throw;
        skip(std::string(to_string(e.code())), e.detail(), {query.sql});
        return;
    }
    auto partial = vizrec::PartialSpec::from_json(to_plain(solved.out.at("partial")));
    auto spec = vizrec::CompleteSpec::from_json(to_plain(solved.out.at("spec")));
    const std::string chart_doc = solved.out.at("chart_doc").get<std::string>();

    auto narrated = ctx.run_stage(root, "narrate", id, {plan_digest, derived_digest, sha256_hex(chart_doc)},
                                  {{"llm", ctx.llm_config({llm::AgentRole::narrator})}}, [&](trace::Span& s) {
                                      return reporter::narrate_insight(plan, derived, spec, ctx.gateway.get(), s).to_json();
                                  });

    slot.completed = reporter::CompletedInsight{plan,      std::move(derived), std::move(partial),
                                                std::move(spec), chart_doc,
                                                reporter::Narrative::from_json(to_plain(narrated.out)), derive.span_id};
}

void restore_bundle(const publisher::ObjectStore& store, const fs::path& dir, const ordered_json& refs,
                    publisher::ArtifactManifest* manifest) {
    for (const auto& rj : refs) {
        auto ref = publisher::ArtifactRef::from_json(to_plain(rj));
        auto bytes = store.get(ref.store_key);
        if (!bytes) throw Error(ErrorCode::StoreUnavailable, "bundle member " + ref.store_key + " missing from store");
        std::error_code ec;
        fs::create_directories((dir / ref.logical_name).parent_path(), ec);
        write_file_atomic(dir / ref.logical_name, *bytes);
        if (manifest) manifest->add(ref);
    }
}

bool is_fatal(ErrorCode c) {
    return c == ErrorCode::EmptyDataset || c == ErrorCode::EmptyReport || c == ErrorCode::StoreUnavailable ||
           c == ErrorCode::InvalidConfig || c == ErrorCode::UnreadableSource || c == ErrorCode::UnsupportedFormat ||
           c == ErrorCode::InsufficientFields || c == ErrorCode::ParseError;
}

}  // namespace

// ------------------------------------------------------------------ config

ordered_json RunConfig::to_json() const {
    auto opt_path = [](const std::optional<fs::path>& p) { return p ? ordered_json(p->string()) : ordered_json(nullptr); };
    ordered_json j;
    j["data"] = data_uri;
    j["goal"] = goal;
    j["insights"] = insights;
    j["audience"] = audience ? ordered_json(*audience) : ordered_json(nullptr);
    j["out"] = out_dir.string();
    j["llm"] = llm == LlmMode::stub ? "stub" : "http";
    j["rules"] = opt_path(rules);
    j["viz_knowledge"] = opt_path(viz_knowledge);
    j["models"] = opt_path(models);
    j["fixtures"] = fixtures.string();
    j["knowledge"] = opt_path(knowledge);
    j["no_cache"] = no_cache;
    j["workers"] = workers;
    j["max_attempts"] = max_attempts;
    j["plan_overrides"] = ordered_json::object();
    for (const auto& [id, p] : plan_overrides) j["plan_overrides"][id] = p.to_json();
    return j;
}

RunConfig RunConfig::from_json(const json& j) {
    auto opt_path = [&](const char* k) -> std::optional<fs::path> {
        if (!j.contains(k) || j[k].is_null()) return std::nullopt;
        return fs::path(j[k].get<std::string>());
    };
    RunConfig c;
    c.data_uri = j.at("data").get<std::string>();
    c.goal = j.value("goal", "");
    c.insights = j.value("insights", 3);
    if (j.contains("audience") && !j["audience"].is_null()) c.audience = j["audience"].get<std::string>();
    c.out_dir = j.value("out", "out");
    c.llm = j.value("llm", "stub") == "http" ? LlmMode::http : LlmMode::stub;
    c.rules = opt_path("rules");
    c.viz_knowledge = opt_path("viz_knowledge");
    c.models = opt_path("models");
    c.fixtures = j.value("fixtures", "fixtures");
    c.knowledge = opt_path("knowledge");
    c.no_cache = j.value("no_cache", false);
    c.workers = j.value("workers", 4);
    c.max_attempts = j.value("max_attempts", 3);
    if (j.contains("plan_overrides"))
        for (const auto& [id, p] : j["plan_overrides"].items()) c.plan_overrides.emplace(id, planner::InsightPlan::from_json(p));
    return c;
}

std::string StageKey::digest() const {
    auto sorted = input_digests;
    std::sort(sorted.begin(), sorted.end());
    json j{{"stage_name", stage_name}, {"input_digests", sorted}, {"config_digest", config_digest}, {"code_version", code_version}};
    return json_digest(j);
}

std::string code_version(const std::string& stage) {
    static const std::map<std::string, std::string> versions{
        {"ingest", "ingest/1"},   {"profile", "profile/1"}, {"plan", "plan/1"},
        {"derive", "derive/1"},   {"materialize", "materialize/1"}, {"solve", "solve/1"},
        {"narrate", "narrate/1"}, {"compose", "compose/1"}, {"emit", "emit/1"},
    };
    auto it = versions.find(stage);
    return it == versions.end() ? stage + "/0" : it->second;
}

StageCache::StageCache(fs::path root) : root_(std::move(root)) {}

std::optional<ordered_json> StageCache::get(const std::string& key) const {
    const auto p = root_ / key.substr(0, 2) / (key + ".json");
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) return std::nullopt;
    try {
        auto j = ordered_json::parse(read_file(p));
        return j.at("output");
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void StageCache::put(const std::string& key, const std::string& stage, const ordered_json& output) {
    const auto p = root_ / key.substr(0, 2) / (key + ".json");
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    ordered_json j{{"stage", stage}, {"key", key}, {"output", output}};
    write_file_atomic(p, j.dump());
}

ordered_json StageRecord::to_json() const {
    ordered_json j;
    j["stage"] = stage;
    j["insight_id"] = insight_id.empty() ? ordered_json(nullptr) : ordered_json(insight_id);
    j["key"] = key;
    j["cache"] = cache_hit ? "hit" : "miss";
    j["status"] = trace::to_string(status);
    j["output_digest"] = output_digest;
    j["span_id"] = span_id;
    return j;
}

std::string new_run_id() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    std::random_device rd;
    std::ostringstream s;
    s << buf << "-" << std::hex << std::setw(8) << std::setfill('0') << rd();
    return s.str();
}

// ------------------------------------------------------------------ pipeline

RunResult run_pipeline(const RunConfig& config) {
    Context ctx;
    ctx.cfg = config;
    planner::Intent intent{config.goal, config.insights, config.audience};
    intent.validate();
    if (config.workers < 1) throw Error(ErrorCode::InvalidConfig, "workers must be at least 1");

    ctx.run_id = new_run_id();
    ctx.run_dir = config.out_dir / ctx.run_id;
    std::error_code ec;
    fs::create_directories(config.out_dir / "traces", ec);
    if (ec) throw Error(ErrorCode::StoreUnavailable, "cannot create " + config.out_dir.string() + ": " + ec.message());
    const fs::path trace_path = config.out_dir / "traces" / (ctx.run_id + ".jsonl");
    ctx.traces = std::make_shared<trace::TraceStore>(ctx.run_id, trace_path);
    if (!config.no_cache) ctx.cache = std::make_unique<StageCache>(config.out_dir / "cache");
    ctx.store = std::make_unique<publisher::FilesystemStore>(config.out_dir / "store");

    ctx.rules = config.rules ? profiler::HintRuleSet::load(*config.rules) : profiler::HintRuleSet::defaults();
    ctx.kb = config.viz_knowledge ? vizrec::Knowledge::load(*config.viz_knowledge) : vizrec::Knowledge::defaults();
    if (config.models) ctx.routes = llm::RoutingTable::load(*config.models);
    ctx.rules_digest = jd(ctx.rules.to_json());
    ctx.kb_digest = jd(ctx.kb.to_json());
    ctx.knowledge_digest = config.knowledge ? dir_digest(*config.knowledge) : "none";
    std::shared_ptr<llm::Backend> backend;
    if (config.llm == LlmMode::stub) {
        backend = std::make_shared<llm::StubBackend>(config.fixtures);
        for (auto r : llm::kAllRoles) {
            const std::string name(llm::to_string(r));
            ctx.fixture_digests[name] = dir_digest(config.fixtures / name);
        }
    } else {
        backend = llm::HttpBackend::from_env();
    }
    ctx.gateway = std::make_unique<llm::Gateway>(ctx.routes, backend);

    RunResult result;
    result.run_id = ctx.run_id;
    result.run_dir = ctx.run_dir;
    result.trace_path = trace_path;

    auto root = trace::Span::root(ctx.traces, "run");
    root.set("span_kind", "run");
    root.set("run_id", ctx.run_id);
    std::vector<planner::InsightPlan> plans;
    try {
        // ---- ingest
        auto raw = ingest::load_dataset(config.data_uri);
        const std::string dataset_digest = ingest::table_digest(raw);
        ctx.config_digests = {{"dataset", dataset_digest},
                              {"knowledge", ctx.knowledge_digest},
                              {"rules", ctx.rules_digest},
                              {"viz_knowledge", ctx.kb_digest},
                              {"intent", jd(intent.to_json())}};
        ingest::Options opts;
        auto ingested = ctx.run_stage(
            root, "ingest", "", {dataset_digest},
            {{"null_sentinels", opts.null_sentinels},
             {"knowledge", ctx.knowledge_digest},
             {"llm", ctx.llm_config({llm::AgentRole::describer})}},
            [&](trace::Span& s) {
                auto cleaned = ingest::clean(raw, opts);
                auto fields = ingest::refine_fields(raw, opts);
                if (config.knowledge) {
                    ingest::FixtureKnowledge k(*config.knowledge);
                    for (std::size_t i = 0; i < fields.size(); ++i)
                        fields[i] = ingest::expand_codes(fields[i], ingest::distinct_samples(cleaned.columns[i]), &k, s);
                }
                auto schema = ingest::describe_dataset(fields, cleaned, ctx.gateway.get(), s);
                auto j = schema.to_json();
                if (s.record().status == trace::Status::degraded) j["degraded"] = true;
                return j;
            });
        const auto schema = ingest::DatasetSchema::from_json(to_plain(ingested.out));
        const std::string schema_digest = jd(ingested.out);
        const Table table = ingest::apply_schema(ingest::clean(raw, opts), schema.fields);

        // ---- profile
        auto profiled = ctx.run_stage(root, "profile", "", {schema_digest}, {{"rules", ctx.rules_digest}},
                                      [&](trace::Span&) { return profiler::build_profile(table, ctx.rules).to_json(); });
        const auto profile = profiler::StatisticalProfile::from_json(to_plain(profiled.out));

        // ---- plan
        auto planned = ctx.run_stage(
            root, "plan", "", {jd(profiled.out), schema_digest, jd(intent.to_json())},
            {{"llm", ctx.llm_config({llm::AgentRole::planner})}}, [&](trace::Span& s) {
                auto o = planner::plan_insights(intent, schema, profile, ctx.gateway.get(), s);
                ordered_json j;
                j["plans"] = ordered_json::array();
                for (const auto& p : o.plans) j["plans"].push_back(p.to_json());
                j["used_fallback"] = o.used_fallback;
                j["tool_calls"] = o.tool_calls;
                j["retries"] = o.retries;
                j["returned_refs"] = std::vector<std::string>(o.returned_refs.begin(), o.returned_refs.end());
                if (o.used_fallback) j["degraded"] = true;
                return j;
            });
        for (const auto& pj : planned.out.at("plans")) plans.push_back(planner::InsightPlan::from_json(to_plain(pj)));
        for (const auto& [id, override_plan] : config.plan_overrides) {
            auto it = std::find_if(plans.begin(), plans.end(), [&](const auto& p) { return p.insight_id == id; });
            if (it == plans.end()) throw Error(ErrorCode::InvalidConfig, "no planned insight named " + id);
            auto p = override_plan;
            p.insight_id = id;
            planner::validate_plan(p, schema);
            *it = std::move(p);
        }

        // ---- per insight
        std::vector<InsightSlot> slots(plans.size());
        std::vector<std::exception_ptr> errors(plans.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (std::size_t i = next++; i < plans.size(); i = next++) {
                try {
                    process_insight(ctx, root, plans[i], schema, schema_digest, table, slots[i]);
                } catch (const Error& e) {
                    if (is_fatal(e.code())) errors[i] = std::current_exception();
                    else slots[i].skipped = reporter::SkippedInsight{plans[i], {plans[i].insight_id, std::string(to_string(e.code())), e.detail(), {}}};
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), plans.size());
        std::vector<std::thread> pool;
        for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);

        std::vector<reporter::CompletedInsight> completed;
        std::vector<reporter::SkippedInsight> skipped;
        for (auto& s : slots) {
            if (s.completed) completed.push_back(std::move(*s.completed));
            if (s.skipped) skipped.push_back(std::move(*s.skipped));
        }

        // ---- compose
        std::vector<std::string> compose_inputs{jd(intent.to_json()), schema_digest};
        for (const auto& c : completed) {
            compose_inputs.push_back("plan:" + c.plan.digest());
            compose_inputs.push_back("derived:" + jd(c.derived.to_json(false)));
            compose_inputs.push_back("chart:" + sha256_hex(c.chart_doc));
            compose_inputs.push_back("narrative:" + jd(c.narrative.to_json()));
            compose_inputs.push_back("span:" + c.trace_span_id);
        }
        for (const auto& s : skipped)
            compose_inputs.push_back("skipped:" + s.plan.digest() + ":" + s.skipped.reason + ":" + sha256_hex(s.skipped.last_error));
        auto composed = ctx.run_stage(root, "compose", "", compose_inputs, {{"report_version", reporter::kReportVersion}},
                                      [&](trace::Span&) {
                                          return reporter::compose_report(intent, schema, completed, skipped,
                                                                          reporter::generated_at_now());
                                      });
        result.report = composed.out;

        // ---- emit
        std::vector<std::string> emit_inputs{jd(composed.out)};
        for (const auto& c : completed) {
            emit_inputs.push_back("spec:" + jd(c.spec.to_json()));
            emit_inputs.push_back("derived:" + jd(c.derived.to_json(false)));
        }
        for (const auto& s : skipped) emit_inputs.push_back("skipped:" + s.plan.digest());
        auto emitted = ctx.run_stage(
            root, "emit", "", emit_inputs, ordered_json::object(),
            [&](trace::Span&) {
                auto b = reporter::emit_bundle(ctx.run_dir, composed.out, completed, skipped, *ctx.store, &ctx.artifacts);
                ordered_json refs = ordered_json::array();
                for (const auto& r : b.refs) refs.push_back(r.to_json());
                return ordered_json{{"refs", refs}};
            },
            [&](const ordered_json& cached) {
                for (const auto& r : cached.at("refs"))
                    if (!ctx.store->exists(r.at("store_key").get<std::string>())) return false;
                return true;
            });
        if (emitted.hit) restore_bundle(*ctx.store, ctx.run_dir, emitted.out.at("refs"), &ctx.artifacts);
    } catch (const Error& e) {
        root.fail(e.what());
        root.close();
        throw;
    }

    // ---- run manifest
    auto records = ctx.records;
    std::map<std::string, std::size_t> order;
    for (std::size_t i = 0; i < plans.size(); ++i) order[plans[i].insight_id] = i;
    std::stable_sort(records.begin(), records.end(), [&](const StageRecord& a, const StageRecord& b) {
        auto group = [&](const StageRecord& r) {
            const int s = stage_rank(r.stage);
            if (!per_insight(r.stage)) return std::pair<int, int>{s < 3 ? s : 1000 + s, 0};
            return std::pair<int, int>{10 + static_cast<int>(order[r.insight_id]), s};
        };
        return group(a) < group(b);
    });
    result.stages = records;

    ordered_json m;
    m["run_id"] = ctx.run_id;
    m["created_at"] = reporter::generated_at_now();
    m["config"] = config.to_json();
    m["code_versions"] = ordered_json::object();
    for (const char* s : kStageOrder) m["code_versions"][s] = code_version(s);
    m["stages"] = ordered_json::array();
    for (const auto& r : records) m["stages"].push_back(r.to_json());
    m["plans"] = ordered_json::array();
    for (const auto& p : plans) m["plans"].push_back(p.to_json());
    m["artifacts"] = ctx.artifacts.to_json();
    m["report"] = nullptr;
    for (const auto& r : ctx.artifacts.refs())
        if (r.kind == publisher::ArtifactKind::report_manifest) m["report"] = r.to_json();
    m["trace"] = fs::relative(trace_path, config.out_dir).generic_string();
    root.set("stage_count", records.size());
    root.close();

    fs::create_directories(ctx.run_dir, ec);
    write_file_atomic(ctx.run_dir / "run.json", m.dump(2) + "\n");
    write_file_atomic(config.out_dir / "dag.json", dag_json().dump(2) + "\n");
    result.manifest = std::move(m);
    return result;
}

ordered_json load_run_manifest(const fs::path& out_dir, const std::string& run_id) {
    const auto p = out_dir / run_id / "run.json";
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) throw Error(ErrorCode::UnreadableSource, "no run manifest at " + p.string());
    return ordered_json::parse(read_file(p));
}

RunResult replan(const fs::path& out_dir, const std::string& run_id, const std::string& insight_id,
                 const planner::InsightPlan& plan) {
    auto m = load_run_manifest(out_dir, run_id);
    auto cfg = RunConfig::from_json(to_plain(m.at("config")));
    cfg.out_dir = out_dir;
    cfg.plan_overrides[insight_id] = plan;
    return run_pipeline(cfg);
}

std::vector<fs::path> render(const fs::path& out_dir, const std::string& run_id) {
    auto m = load_run_manifest(out_dir, run_id);
    publisher::FilesystemStore store(out_dir / "store");
    const fs::path dir = out_dir / run_id;
    std::vector<fs::path> written;
    ordered_json bundle = ordered_json::array();
    for (const auto& r : m.at("artifacts"))
        if (r.at("kind") != "derived_parquet") bundle.push_back(r);
    restore_bundle(store, dir, bundle, nullptr);
    for (const auto& r : bundle) written.push_back(dir / r.at("logical_name").get<std::string>());
    // The fallback page is regenerated so template changes apply to old runs.
    auto report = ordered_json::parse(read_file(dir / "report.json"));
    write_file_atomic(dir / "index.html", reporter::index_html(report));
    return written;
}

ordered_json dag_json() {
    ordered_json j;
    j["config_nodes"] = kConfigNodes;
    j["stages"] = kStageOrder;
    j["per_insight_stages"] = kInsightStages;
    j["edges"] = ordered_json::array();
    for (const auto& [a, b] : edges()) j["edges"].push_back({a, b});
    return j;
}

std::set<std::string> invalidate(const json& run_manifest, const std::string& changed_node) {
    if (changed_node.empty()) return {};
    std::vector<std::string> insights;
    if (run_manifest.contains("plans"))
        for (const auto& p : run_manifest.at("plans")) insights.push_back(p.at("insight_id").get<std::string>());

    auto known_config = std::find(std::begin(kConfigNodes), std::end(kConfigNodes), changed_node) != std::end(kConfigNodes);
    auto known_stage = stage_rank(changed_node) != 99;
    std::optional<std::string> only_insight;
    std::string start = changed_node;
    if (changed_node.rfind("plan:", 0) == 0) {
        only_insight = changed_node.substr(5);
        if (std::find(insights.begin(), insights.end(), *only_insight) == insights.end())
            throw Error(ErrorCode::UnknownNode, "no insight named " + *only_insight + " in run");
        start = "plan";
    } else if (!known_config && !known_stage) {
        throw Error(ErrorCode::UnknownNode, "unknown DAG node '" + changed_node + "'");
    }

    // Stage-level reachability, then expansion to per-insight instances.
    std::set<std::string> stages;
    std::deque<std::string> queue{start};
    if (known_stage) stages.insert(start);
    while (!queue.empty()) {
        auto n = queue.front();
        queue.pop_front();
        for (const auto& [a, b] : edges())
            if (a == n && stages.insert(b).second) queue.push_back(b);
    }
    if (only_insight) stages.erase("plan");

    std::set<std::string> out;
    for (const auto& s : stages) {
        if (!per_insight(s)) {
            out.insert(s);
            continue;
        }
        for (const auto& id : insights)
            if (!only_insight || id == *only_insight) out.insert(s + ":" + id);
    }
    return out;
}

}  // namespace reportsmith::orchestrator
