#include <doctest.h>

#include <fstream>
#include <thread>

#include "helpers.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/publisher.hpp"

using namespace reportsmith;
using namespace reportsmith::publisher;

namespace {

ResultSet small_result() {
    ResultSet r;
    r.schema = {{"Conference", Kind::nominal}, {"n", Kind::quantitative}, {"mean", Kind::quantitative}};
    r.rows = {{std::string("CHI"), std::int64_t{120}, 3.5},
              {std::string("VIS"), std::int64_t{131}, Value{}},
              {Value{}, std::int64_t{0}, -0.25}};
    return r;
}

}  // namespace

TEST_SUITE("publisher") {
    TEST_CASE("content keys are SHA-256 of the bytes") {
        CHECK(content_key("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        CHECK(content_key("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        CHECK(store_key("ab12", ".parquet") == "artifacts/ab/ab12.parquet");
    }

    TEST_CASE("put is atomic and idempotent") {
        testing::TempDir tmp;
        FilesystemStore store(tmp.path);
        CHECK_FALSE(store.exists("artifacts/aa/x.json"));
        CHECK(store.put("artifacts/aa/x.json", "one"));
        CHECK_FALSE(store.put("artifacts/aa/x.json", "one"));
        CHECK(store.get("artifacts/aa/x.json") == std::optional<std::string>("one"));
        CHECK_FALSE(store.get("artifacts/zz/missing.json"));
        for (const auto& e : std::filesystem::recursive_directory_iterator(tmp.path))
            CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
    }

    TEST_CASE("concurrent puts of the same object leave one intact copy") {
        testing::TempDir tmp;
        FilesystemStore store(tmp.path);
        const std::string bytes(1 << 16, 'q');
        std::atomic<int> created{0};
        std::vector<std::thread> ts;
        for (int i = 0; i < 4; ++i)
            ts.emplace_back([&] { created += store.put("artifacts/qq/blob", bytes); });
        for (auto& t : ts) t.join();
        CHECK(created.load() >= 1);
        CHECK(store.get("artifacts/qq/blob") == std::optional<std::string>(bytes));
    }

    TEST_CASE("materialize dedupes identical results") {
        testing::TempDir tmp;
        FilesystemStore store(tmp.path);
        ArtifactManifest manifest;
        auto a = materialize(small_result(), "derived/a", store, &manifest);
        auto b = materialize(small_result(), "derived/a", store, &manifest);
        CHECK(a.digest == b.digest);
        CHECK(a.store_key == store_key(a.digest, ".parquet"));
        CHECK(a.row_count == std::optional<std::size_t>(3));
        CHECK(manifest.refs().size() == 1);
        auto bytes = store.get(a.store_key);
        REQUIRE(bytes);
        CHECK(bytes->size() == a.byte_size);
        CHECK(content_key(*bytes) == a.digest);
        std::size_t files = 0;
        for (const auto& e : std::filesystem::recursive_directory_iterator(tmp.path)) files += e.is_regular_file();
        CHECK(files == 1);
    }

    TEST_CASE("encode is byte-stable and decode round-trips rows") {
        auto r = small_result();
        CHECK(encode(r) == encode(r));
        auto back = decode(encode(r));
        REQUIRE(back.schema.size() == 3);
        CHECK(back.schema[0].name == "Conference");
        REQUIRE(back.rows.size() == r.rows.size());
        for (std::size_t i = 0; i < r.rows.size(); ++i)
            for (std::size_t c = 0; c < 3; ++c) CHECK(compare(back.rows[i][c], r.rows[i][c]) == 0);
    }

    TEST_CASE("empty schema cannot be materialized") {
        testing::TempDir tmp;
        FilesystemStore store(tmp.path);
        CHECK_THROWS_AS(materialize(ResultSet{}, "x", store), Error);
    }

    TEST_CASE("unwritable store reports StoreUnavailable") {
        testing::TempDir tmp;
        std::ofstream(tmp.path / "file") << "x";
        FilesystemStore store(tmp.path / "file");
        try {
            materialize(small_result(), "x", store);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::StoreUnavailable);
        }
    }

    TEST_CASE("artifact refs serialize") {
        testing::TempDir tmp;
        FilesystemStore store(tmp.path);
        ArtifactManifest m;
        auto chart = put_report_asset("{}", ArtifactKind::chart_json, "charts/x.json", store, &m);
        CHECK_FALSE(chart.row_count);
        auto j = nlohmann::json(chart.to_json());
        CHECK(j["kind"] == "chart_json");
        CHECK_FALSE(j.contains("row_count"));
        auto back = ArtifactRef::from_json(j);
        CHECK(back.digest == chart.digest);
        CHECK(back.kind == ArtifactKind::chart_json);
        CHECK(back.logical_name == "charts/x.json");
        for (auto k : {ArtifactKind::derived_parquet, ArtifactKind::chart_json, ArtifactKind::report_manifest,
                       ArtifactKind::trace_doc, ArtifactKind::html_bundle_member})
            CHECK(artifact_kind_from_string(to_string(k)) == k);
    }
}
