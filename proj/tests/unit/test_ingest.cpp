#include <doctest.h>

#include "helpers.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/io.hpp"
#include "reportsmith/parquet.hpp"
#include "reportsmith/publisher.hpp"

using namespace reportsmith;
using testing::raw_from_csv;

namespace {

Kind kind_of(const std::string& csv_text) { return ingest::refine_fields(raw_from_csv(csv_text)).at(0).kind; }

std::string column_csv(const std::string& name, const std::vector<std::string>& cells) {
    std::string s = name + "\n";
    for (const auto& c : cells) s += c + "\n";
    return s;
}

}  // namespace

TEST_SUITE("ingest") {
    TEST_CASE("csv loads into columns with row count") {
        auto t = raw_from_csv("a,b\n1,x\n2,y\n3,z");
        CHECK(t.columns.size() == 2);
        CHECK(t.row_count == 3);
        CHECK(t.columns[1].cells[2] == std::optional<std::string>("z"));
    }

    TEST_CASE("load errors") {
        testing::TempDir tmp;
        write_file_atomic(tmp.path / "empty.csv", "");
        CHECK_THROWS_WITH_AS(ingest::load_dataset((tmp.path / "empty.csv").string()), doctest::Contains("EmptyDataset"), Error);
        CHECK_THROWS_WITH_AS(ingest::load_dataset((tmp.path / "missing.csv").string()), doctest::Contains("UnreadableSource"),
                             Error);
        write_file_atomic(tmp.path / "x.xlsx", "zz");
        CHECK_THROWS_WITH_AS(ingest::load_dataset((tmp.path / "x.xlsx").string()), doctest::Contains("UnsupportedFormat"),
                             Error);
    }

    TEST_CASE("kind heuristics") {
        std::vector<std::string> years;
        for (int y = 1990; y <= 2024; ++y) years.push_back(std::to_string(y));
        CHECK(kind_of(column_csv("Year", years)) == Kind::temporal);
        CHECK(kind_of(column_csv("Count", years)) == Kind::quantitative);
        CHECK(kind_of(column_csv("Award", {"BP", "C", "HM", ""})) == Kind::nominal);
        CHECK(kind_of(column_csv("Flag", {"yes", "No", "YES", "no"})) == Kind::boolean);
        CHECK(kind_of(column_csv("Bit", {"0", "1", "1", "0"})) == Kind::boolean);
        CHECK(kind_of(column_csv("When", {"2020-01-02", "2021-12-31", "2019-06-30"})) == Kind::temporal);
        CHECK(kind_of(column_csv("X", {"1.5", "2", "-3e2", "NA"})) == Kind::quantitative);
        std::vector<std::string> titles;
        for (int i = 0; i < 1000; ++i) titles.push_back("Paper title number " + std::to_string(i));
        CHECK(kind_of(column_csv("Title", titles)) == Kind::identifier);
    }

    TEST_CASE("sentinel nulls are mapped without changing row count") {
        auto raw = raw_from_csv("v,w\nNA,1\nN/A,2\nnull,3\n,4\n 4 ,5\n");
        auto c = ingest::clean(raw);
        CHECK(c.row_count == raw.row_count);
        for (int i = 0; i < 4; ++i) CHECK_FALSE(c.columns[0].cells[i].has_value());
        CHECK(c.columns[0].cells[4] == std::optional<std::string>("4"));
    }

    TEST_CASE("classification is deterministic") {
        auto raw = ingest::load_dataset(testing::sample_csv().string());
        CHECK(ingest::DatasetSchema{"", ingest::refine_fields(raw), "", 0}.to_json() ==
              ingest::DatasetSchema{"", ingest::refine_fields(raw), "", 0}.to_json());
        auto fields = ingest::refine_fields(raw);
        REQUIRE(fields.size() == 6);
        CHECK(fields[0].kind == Kind::temporal);
        CHECK(fields[1].kind == Kind::nominal);
        CHECK(fields[2].kind == Kind::quantitative);
        CHECK(fields[3].kind == Kind::quantitative);
        CHECK(fields[4].kind == Kind::nominal);
        CHECK(fields[5].kind == Kind::boolean);
    }

    TEST_CASE("cryptic tokens") {
        CHECK(ingest::is_cryptic_token("BP"));
        CHECK(ingest::is_cryptic_token("C"));
        CHECK(ingest::is_cryptic_token("A1"));
        CHECK_FALSE(ingest::is_cryptic_token("Alpha"));
        CHECK_FALSE(ingest::is_cryptic_token("bp"));
        CHECK_FALSE(ingest::is_cryptic_token("ABCD"));
    }

    TEST_CASE("expand_codes resolves only codes present in the column") {
        testing::TempDir tmp;
        write_file_atomic(tmp.path / "Award.json", R"({"BP": "Best Paper Award", "C": "Conference Paper", "ZZ": "Never"})");
        ingest::FixtureKnowledge k(tmp.path);
        auto span = trace::Span::disabled();
        ingest::FieldSchema f{"Award", Kind::nominal, std::nullopt, "", std::nullopt, {}};
        auto out = ingest::expand_codes(f, {"BP", "C"}, &k, span);
        REQUIRE(out.code_dictionary);
        CHECK(*out.code_dictionary == std::map<std::string, std::string>{{"BP", "Best Paper Award"}, {"C", "Conference Paper"}});

        ingest::FieldSchema plain{"Award", Kind::nominal, std::nullopt, "", std::nullopt, {}};
        auto none = ingest::expand_codes(plain, {"Alpha", "Beta"}, &k, span);
        CHECK((!none.code_dictionary || none.code_dictionary->empty()));
    }

    TEST_CASE("unavailable knowledge leaves the field unchanged and warns") {
        auto store = std::make_shared<trace::TraceStore>("t");
        auto root = trace::Span::root(store, "run");
        ingest::FixtureKnowledge k("/nonexistent/knowledge");
        ingest::FieldSchema f{"Award", Kind::nominal, std::nullopt, "", std::nullopt, {}};
        auto out = ingest::expand_codes(f, {"BP", "C"}, &k, root);
        CHECK_FALSE(out.code_dictionary.has_value());
        root.close();
        bool warned = false;
        for (const auto& s : store->spans()) warned = warned || s.stage_name.rfind("warning", 0) == 0;
        CHECK(warned);
    }

    TEST_CASE("rank in knowledge makes a field ordinal") {
        testing::TempDir tmp;
        write_file_atomic(tmp.path / "Size.json", R"({"S": "Small", "M": "Medium", "L": "Large", "__rank__": ["S", "M", "L"]})");
        ingest::FixtureKnowledge k(tmp.path);
        auto span = trace::Span::disabled();
        ingest::FieldSchema f{"Size", Kind::nominal, std::nullopt, "", std::nullopt, {}};
        auto out = ingest::expand_codes(f, {"S", "M", "L"}, &k, span);
        CHECK(out.kind == Kind::ordinal);
        CHECK(out.rank == std::vector<std::string>{"S", "M", "L"});
    }

    TEST_CASE("stub describe falls back to the template") {
        auto raw = raw_from_csv("a,b\n1,x\n2,y\n");
        auto fields = ingest::refine_fields(raw);
        auto span = trace::Span::disabled();
        auto schema = ingest::describe_dataset(fields, ingest::clean(raw), nullptr, span);
        CHECK(schema.description == ingest::template_description(fields, 2));
        CHECK(schema.description.find("a") != std::string::npos);
        CHECK(schema.description.find("b") != std::string::npos);
        CHECK(schema.row_count == 2);
        auto again = ingest::describe_dataset(fields, ingest::clean(raw), nullptr, span);
        CHECK(again.to_json() == schema.to_json());
    }

    TEST_CASE("parquet written by the publisher reloads cell-identical") {
        auto loaded = testing::load_sample();
        publisher::ResultSet rs;
        for (const auto& c : loaded.table.columns) rs.schema.push_back({c.name, c.kind});
        for (std::size_t r = 0; r < loaded.table.row_count; ++r) {
            std::vector<Value> row;
            for (const auto& c : loaded.table.columns) row.push_back(c.values[r]);
            rs.rows.push_back(row);
        }
        auto raw_csv = ingest::clean(ingest::load_dataset(testing::sample_csv().string()));
        auto raw_pq = ingest::parse_parquet_table(publisher::encode(rs), "x.parquet");
        REQUIRE(raw_pq.row_count == raw_csv.row_count);
        REQUIRE(raw_pq.columns.size() == raw_csv.columns.size());
        for (std::size_t c = 0; c < raw_csv.columns.size(); ++c) CHECK(raw_pq.columns[c].cells == raw_csv.columns[c].cells);
    }
}
