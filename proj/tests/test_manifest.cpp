#include "doctest.h"

#include "crt/error.hpp"
#include "crt/manifest.hpp"
#include "test_helpers.hpp"

using namespace crt;
using testutil::TempDir;

TEST_SUITE("manifest") {

TEST_CASE("parses a hand-written manifest with comments and directives") {
    TempDir dir("manifest");
    const auto path = dir.path / "m.txt";
    write_file_atomic(path,
                      "# ultra-distance race fixture\n"
                      "@rps RP84, RP95, RP110\n"
                      "@fps 25\n"
                      "@clip_seconds 7\n"
                      "\n"
                      "runner_001,RP84,clips/a.rvc,tracks/a.csv,41520\n"
                      "runner_001,RP95,clips/b.rvc,tracks/b.csv,50100\n"
                      "runner_002,RP84,clips/c.rvc,tracks/c.csv,39980\n");
    const Manifest m = load_manifest(path);
    CHECK(m.records.size() == 3);
    CHECK(m.recording_points == std::vector<std::string>{"RP84", "RP95", "RP110"});
    CHECK(m.fps == 25.0);
    CHECK(m.clip_seconds == 7.0);
    CHECK(m.rp_index("RP95") == 1);
    CHECK(m.rp_index("RP999") == -1);
    CHECK(m.records[0].crt_seconds == 41520);
}

TEST_CASE("214 runners over the last three recording points stay within 642 records") {
    Rng rng(11);
    const Manifest m = testutil::random_manifest(214, 3, rng, 0.85);
    CHECK(m.records.size() <= 642);
    CHECK(m.records.size() >= 2 * 214);  // endpoints always kept
    validate_manifest(m);  // no throw
}

TEST_CASE("empty record list is rejected") {
    TempDir dir("manifest");
    const auto path = dir.path / "empty.txt";
    write_file_atomic(path, "@rps RP0,RP1\n# no records\n");
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("empty manifest"),
                         ValidationError);
}

TEST_CASE("duplicate (runner, RP) pair names both lines") {
    TempDir dir("manifest");
    const auto path = dir.path / "dup.txt";
    write_file_atomic(path,
                      "@rps RP_1,RP_2\n"
                      "runner_7,RP_1,c.rvc,t.csv,1000\n"
                      "runner_7,RP_2,c.rvc,t.csv,2000\n"
                      "runner_7,RP_2,d.rvc,u.csv,2500\n");
    try {
        load_manifest(path);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("runner_7") != std::string::npos);
        CHECK(msg.find("RP_2") != std::string::npos);
        CHECK(msg.find("3") != std::string::npos);  // both source lines named
        CHECK(msg.find("4") != std::string::npos);
    }
}

TEST_CASE("non-monotone per-runner CRT is rejected") {
    TempDir dir("manifest");
    const auto path = dir.path / "mono.txt";
    write_file_atomic(path,
                      "@rps RP_1,RP_2\n"
                      "runner_1,RP_1,c.rvc,t.csv,5000\n"
                      "runner_1,RP_2,c.rvc,t.csv,4000\n");
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("non-monotone"),
                         ValidationError);

    // equal CRTs are also rejected (strictly increasing)
    write_file_atomic(path,
                      "@rps RP_1,RP_2\n"
                      "runner_1,RP_1,c.rvc,t.csv,5000\n"
                      "runner_1,RP_2,c.rvc,t.csv,5000\n");
    CHECK_THROWS_AS(load_manifest(path), ValidationError);
}

TEST_CASE("unknown recording point and malformed rows carry line numbers") {
    TempDir dir("manifest");
    const auto path = dir.path / "bad.txt";
    write_file_atomic(path,
                      "@rps RP_1\n"
                      "runner_1,RP_9,c.rvc,t.csv,5000\n");
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("RP_9"), ValidationError);

    write_file_atomic(path, "@rps RP_1\nrunner_1,RP_1,c.rvc,t.csv\n");
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains(":2"), ParseError);

    write_file_atomic(path, "@rps RP_1\nrunner_1,RP_1,c.rvc,t.csv,12x\n");
    CHECK_THROWS_AS(load_manifest(path), ParseError);

    write_file_atomic(path, "@rps RP_1\nrunner_1,RP_1,c.rvc,t.csv,-5\n");
    CHECK_THROWS_AS(load_manifest(path), ParseError);
}

TEST_CASE("property: any generated manifest with a decreasing CRT pair is rejected") {
    Rng rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        Manifest m = testutil::random_manifest(3 + static_cast<int>(rng.below(10)),
                                               2 + static_cast<int>(rng.below(3)), rng);
        validate_manifest(m);  // valid as generated

        // find a runner with at least two records and break its ordering
        std::vector<std::size_t> degrade;
        for (std::size_t i = 0; i < m.records.size(); ++i)
            if (m.rp_index(m.records[i].rp_id) > 0) degrade.push_back(i);
        const std::size_t victim = degrade[rng.below(degrade.size())];
        m.records[victim].crt_seconds = 0;  // cumulative time can never decrease
        CHECK_THROWS_AS(validate_manifest(m), ValidationError);
    }
}

TEST_CASE("round-trip: load(write(M)) == M for generated manifests") {
    Rng rng(404);
    TempDir dir("manifest");
    for (int trial = 0; trial < 20; ++trial) {
        const int runners = 1 + static_cast<int>(rng.below(25));
        const int rps = 1 + static_cast<int>(rng.below(4));
        const Manifest m = testutil::random_manifest(runners, rps, rng, 0.7);
        const auto path = dir.path / ("rt_" + std::to_string(trial) + ".txt");
        save_manifest(path, m);
        const Manifest back = load_manifest(path);
        REQUIRE(back == m);
    }
}

TEST_CASE("identifier validation") {
    CHECK(valid_identifier("runner_001"));
    CHECK(valid_identifier("RP-84.b"));
    CHECK_FALSE(valid_identifier(""));
    CHECK_FALSE(valid_identifier("has space"));
    CHECK_FALSE(valid_identifier("slash/y"));
}

}  // TEST_SUITE
