// Serial reference vs OpenMP kernels for profiling and chart search.

#include <benchmark/benchmark.h>

#include <fstream>
#include <map>
#include <random>

#include "reportsmith/profiler.hpp"
#include "reportsmith/vizrec.hpp"

using namespace reportsmith;

namespace {

Table make_table(std::size_t rows) {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> norm(0, 1);
    std::lognormal_distribution<double> logn(3, 1.5);
    std::uniform_int_distribution<int> level(0, 5), year(2000, 2024);
    const char* names[] = {"a", "b", "c", "d", "e", "f"};
    Table t;
    t.row_count = rows;
    t.columns = {{"m1", Kind::quantitative, {}}, {"m2", Kind::quantitative, {}}, {"m3", Kind::quantitative, {}},
                 {"m4", Kind::quantitative, {}}, {"cat", Kind::nominal, {}},      {"year", Kind::temporal, {}}};
    for (std::size_t i = 0; i < rows; ++i) {
        const double z = norm(rng);
        t.columns[0].values.emplace_back(z);
        t.columns[1].values.emplace_back(z * 0.5 + norm(rng));
        t.columns[2].values.emplace_back(logn(rng));
        t.columns[3].values.emplace_back(static_cast<std::int64_t>(logn(rng)));
        t.columns[4].values.emplace_back(std::string(names[level(rng)]));
        t.columns[5].values.emplace_back(static_cast<std::int64_t>(year(rng)));
    }
    return t;
}

const Table& table(std::size_t rows) {
    static std::map<std::size_t, Table> cache;
    auto it = cache.find(rows);
    if (it == cache.end()) it = cache.emplace(rows, make_table(rows)).first;
    return it->second;
}

void BM_ProfileFieldsSerial(benchmark::State& st) {
    const auto& t = table(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(profiler::profile_fields_serial(t));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_ProfileFieldsParallel(benchmark::State& st) {
    const auto& t = table(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(profiler::profile_fields(t));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_ProfilePairsSerial(benchmark::State& st) {
    const auto& t = table(st.range(0));
    const auto fields = profiler::profile_fields_serial(t);
    for (auto _ : st) benchmark::DoNotOptimize(profiler::profile_pairs_serial(t, fields));
}

void BM_ProfilePairsParallel(benchmark::State& st) {
    const auto& t = table(st.range(0));
    const auto fields = profiler::profile_fields(t);
    for (auto _ : st) benchmark::DoNotOptimize(profiler::profile_pairs(t, fields));
}

vizrec::PartialSpec partial(const char* name) {
    std::ifstream in(std::string(REPORTSMITH_SOURCE_DIR) + "/tests/fixtures/partials/" + name + ".json");
    return vizrec::PartialSpec::from_json(nlohmann::json::parse(in));
}

void BM_SolveSerial(benchmark::State& st) {
    const auto p = partial("four_fields");
    const auto kb = vizrec::Knowledge::defaults();
    for (auto _ : st) benchmark::DoNotOptimize(vizrec::solve_serial(p, kb));
}

void BM_SolveParallel(benchmark::State& st) {
    const auto p = partial("four_fields");
    const auto kb = vizrec::Knowledge::defaults();
    for (auto _ : st) benchmark::DoNotOptimize(vizrec::solve(p, kb));
}

}  // namespace

BENCHMARK(BM_ProfileFieldsSerial)->Arg(10000)->Arg(200000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProfileFieldsParallel)->Arg(10000)->Arg(200000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProfilePairsSerial)->Arg(10000)->Arg(200000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProfilePairsParallel)->Arg(10000)->Arg(200000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolveSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolveParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
