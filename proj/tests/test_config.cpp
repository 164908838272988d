#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "srgt/config.hpp"

using namespace srgt;

TEST_CASE("kv parse basics") {
    std::stringstream ss(
        "# comment line\n"
        "alpha = 1.5\n"
        "name=front  # trailing comment\n"
        "\n"
        "count = 42\n");
    const KvFile kv = parse_kv(ss);
    CHECK(kv.get_double("alpha") == 1.5);
    CHECK(kv.get("name") == "front");
    CHECK(kv.get_int("count") == 42);
    CHECK(kv.has("alpha"));
    CHECK_FALSE(kv.has("missing"));
    CHECK(kv.get_or("missing", "x") == "x");
    CHECK_THROWS_AS(kv.get("missing"), config_error);
    CHECK_THROWS_AS(kv.get_double("name"), config_error);
    CHECK_THROWS_AS(kv.get_int("alpha"), config_error);
}

TEST_CASE("kv rejects malformed lines") {
    std::stringstream ss("just a line without equals\n");
    CHECK_THROWS_AS(parse_kv(ss), config_error);
}

TEST_CASE("kv roundtrip preserves full precision") {
    KvFile kv;
    kv.set_double("x", 0.1234567890123456789);
    kv.set_double("y", -3.0e-17);
    kv.set_int("n", -7);
    const auto dir = std::filesystem::temp_directory_path() / "srgt_config_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "t.cfg").string();
    write_kv(kv, path);
    const KvFile r = read_kv(path);
    CHECK(r.get_double("x") == kv.get_double("x"));
    CHECK(r.get_double("y") == kv.get_double("y"));
    CHECK(r.get_int("n") == -7);
    std::filesystem::remove_all(dir);
}
