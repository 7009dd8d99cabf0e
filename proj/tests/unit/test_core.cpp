#include <doctest.h>

#include "reportsmith/csv.hpp"
#include "reportsmith/digest.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/json_util.hpp"
#include "reportsmith/roles.hpp"
#include "reportsmith/value.hpp"

using namespace reportsmith;

TEST_SUITE("core") {
    TEST_CASE("sha256 matches published test vectors") {
        CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
              "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
        CHECK(sha256_hex(std::string(1000000, 'a')) ==
              "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
    }

    TEST_CASE("canonical json digest ignores key order") {
        auto a = nlohmann::json::parse(R"({"b": 1, "a": [1, 2, {"y": 1, "x": 2}]})");
        auto b = nlohmann::json::parse(R"({"a": [1, 2, {"x": 2, "y": 1}], "b": 1})");
        CHECK(canonical_dump(a) == R"({"a":[1,2,{"x":2,"y":1}],"b":1})");
        CHECK(json_digest(a) == json_digest(b));
        CHECK(json_digest(a) != json_digest(nlohmann::json::parse(R"({"a": [2, 1, {"x": 2, "y": 1}], "b": 1})")));
    }

    TEST_CASE("csv parser handles quotes, embedded separators and CRLF") {
        auto rows = csv::parse("a,b,c\r\n\"x, y\",\"say \"\"hi\"\"\",\r\n1,\"multi\nline\",3\n");
        REQUIRE(rows.size() == 3);
        CHECK(rows[1] == std::vector<std::string>{"x, y", "say \"hi\"", ""});
        CHECK(rows[2][1] == "multi\nline");
        CHECK(csv::escape_field("a,b") == "\"a,b\"");
        CHECK(csv::escape_field("plain") == "plain");
    }

    TEST_CASE("value ordering puts nulls first, numbers before strings") {
        CHECK(compare(Value{}, Value{std::int64_t{1}}) < 0);
        CHECK(compare(Value{std::int64_t{2}}, Value{1.5}) > 0);
        CHECK(compare(Value{std::int64_t{2}}, Value{2.0}) == 0);
        CHECK(compare(Value{9.0}, Value{std::string("1")}) < 0);
        CHECK(compare(Value{std::string("a")}, Value{std::string("b")}) < 0);
    }

    TEST_CASE("doubles format with the shortest round-trip representation") {
        CHECK(format_double(0.1) == "0.1");
        CHECK(format_double(2.0) == "2");
        CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
        CHECK(to_text(Value{std::int64_t{-4}}) == "-4");
    }

    TEST_CASE("json values round-trip") {
        for (const Value& v : {Value{}, Value{std::int64_t{7}}, Value{2.5}, Value{std::string("x")}}) {
            auto back = value_from_json(to_plain(value_to_json(v)));
            CHECK(back.index() == v.index());
            CHECK(compare(back, v) == 0);
        }
    }

    TEST_CASE("task and role names round-trip") {
        for (Task t : kAllTasks) CHECK(task_from_string(to_string(t)) == t);
        for (Role r : {Role::measure, Role::dimension, Role::time, Role::detail}) CHECK(role_from_string(to_string(r)) == r);
        CHECK(is_task_name("trend"));
        CHECK_FALSE(is_task_name("forecast"));
    }

    TEST_CASE("error text carries the code name") {
        Error e(ErrorCode::RepairExhausted, "gave up");
        CHECK(std::string(e.what()) == "RepairExhausted: gave up");
        CHECK(e.detail() == "gave up");
    }
}
