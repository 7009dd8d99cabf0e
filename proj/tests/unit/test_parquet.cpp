#include <doctest.h>

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "helpers.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/io.hpp"
#include "reportsmith/parquet.hpp"

using namespace reportsmith;

namespace {

std::vector<parquet::ColumnData> sample_columns() {
    using parquet::PhysicalType;
    return {
        {"year", PhysicalType::int64, {Value{std::int64_t{2019}}, Value{}, Value{std::int64_t{-3}}, Value{std::int64_t{0}}}},
        {"score", PhysicalType::dbl, {Value{0.5}, Value{-1e300}, Value{}, Value{3.0}}},
        {"label", PhysicalType::byte_array, {Value{std::string("VIS")}, Value{std::string("")}, Value{std::string("é, \"q\"")}, Value{}}},
    };
}

std::string run(const std::string& cmd) {
    std::string out;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) return out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    ::pclose(p);
    return out;
}

bool have_pyarrow() { return run("python3 -c 'import pyarrow.parquet' 2>/dev/null && echo ok") == "ok\n"; }

}  // namespace

TEST_SUITE("parquet") {
    TEST_CASE("round-trip preserves types, values and nulls") {
        auto cols = sample_columns();
        auto bytes = parquet::write(cols, 4);
        CHECK(bytes.substr(0, 4) == "PAR1");
        CHECK(bytes.substr(bytes.size() - 4) == "PAR1");
        auto f = parquet::read(bytes);
        REQUIRE(f.num_rows == 4);
        REQUIRE(f.columns.size() == 3);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(f.columns[c].name == cols[c].name);
            CHECK(f.columns[c].type == cols[c].type);
            for (std::size_t r = 0; r < 4; ++r) {
                CHECK(f.columns[c].values[r].index() == cols[c].values[r].index());
                CHECK(compare(f.columns[c].values[r], cols[c].values[r]) == 0);
            }
        }
    }

    TEST_CASE("encoding is byte-deterministic") {
        CHECK(parquet::write(sample_columns(), 4) == parquet::write(sample_columns(), 4));
    }

    TEST_CASE("empty tables and all-null columns survive") {
        auto f = parquet::read(parquet::write({{"a", parquet::PhysicalType::int64, {}}}, 0));
        CHECK(f.num_rows == 0);
        CHECK(f.columns.at(0).name == "a");
        auto g = parquet::read(parquet::write({{"n", parquet::PhysicalType::byte_array, {Value{}, Value{}}}}, 2));
        CHECK(is_null(g.columns.at(0).values.at(1)));
    }

    TEST_CASE("type inference") {
        CHECK(parquet::infer_type({Value{}, Value{std::int64_t{1}}}) == parquet::PhysicalType::int64);
        CHECK(parquet::infer_type({Value{std::int64_t{1}}, Value{2.5}}) == parquet::PhysicalType::dbl);
        CHECK(parquet::infer_type({Value{std::string("x")}}) == parquet::PhysicalType::byte_array);
    }

    TEST_CASE("garbage is rejected") {
        CHECK_THROWS_AS(parquet::read("not a parquet file"), Error);
        CHECK_THROWS_AS(parquet::read("PAR1\x01\x02PAR1"), Error);
    }

    TEST_CASE("files are readable by an independent reader (pyarrow)") {
        if (!have_pyarrow()) {
            MESSAGE("pyarrow not available; cross-check skipped");
            return;
        }
        testing::TempDir tmp;
        const auto path = tmp.path / "x.parquet";
        write_file_atomic(path, parquet::write(sample_columns(), 4));
        auto out = run("python3 -c \"import json,sys,pyarrow.parquet as pq; t=pq.read_table(sys.argv[1]); "
                       "print(json.dumps({'types':[str(f.type) for f in t.schema],'rows':t.to_pylist()}))\" " +
                       path.string());
        auto j = nlohmann::json::parse(out);
        CHECK(j["types"] == nlohmann::json::parse(R"(["int64","double","string"])"));
        CHECK(j["rows"][0]["year"] == 2019);
        CHECK(j["rows"][1]["year"].is_null());
        CHECK(j["rows"][1]["score"] == -1e300);
        CHECK(j["rows"][2]["label"] == "é, \"q\"");
        CHECK(j["rows"][3]["label"].is_null());

        // And the other direction: an uncompressed, plain-encoded pyarrow file.
        const auto theirs = tmp.path / "y.parquet";
        run("python3 -c \"import sys,pyarrow as pa,pyarrow.parquet as pq; "
            "t=pa.table({'k':pa.array([1,None,3],pa.int64()),'s':pa.array(['a','b',None])}); "
            "pq.write_table(t,sys.argv[1],compression='NONE',use_dictionary=False,data_page_version='1.0')\" " +
            theirs.string());
        auto f = parquet::read(read_file(theirs));
        REQUIRE(f.num_rows == 3);
        CHECK(std::get<std::int64_t>(f.columns[0].values[2]) == 3);
        CHECK(is_null(f.columns[0].values[1]));
        CHECK(std::get<std::string>(f.columns[1].values[1]) == "b");
        CHECK(is_null(f.columns[1].values[2]));
    }
}
