#include <set>

#include "doctest.h"

#include "crt/backbone.hpp"
#include "crt/error.hpp"
#include "crt/sha256.hpp"
#include "test_helpers.hpp"

using namespace crt;
using testutil::TempDir;

namespace {

StreamTensor small_tensor(StreamKind kind, std::uint64_t seed) {
    Rng rng(seed);
    StreamTensor t;
    t.kind = kind;
    t.t = 6;
    t.h = 8;
    t.w = 8;
    t.c = kind == StreamKind::RGB ? 3 : 2;
    t.data.resize(static_cast<std::size_t>(t.t) * t.h * t.w * static_cast<std::size_t>(t.c));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

Embedding stub_embedding(StreamKind kind, TapPoint tap, ContextMode ctx,
                         std::uint64_t seed) {
    const StubBackbone backbone(kind);
    return extract_embedding(backbone, small_tensor(kind, seed), tap, ctx);
}

}  // namespace

TEST_SUITE("backbone") {

TEST_CASE("tap dimensions: 400 logits, 1024 pooled penultimate") {
    const Embedding rgb400 =
        stub_embedding(StreamKind::RGB, TapPoint::LOGITS_400, ContextMode::SB, 1);
    CHECK(rgb400.dim() == 400);
    const Embedding flow1024 =
        stub_embedding(StreamKind::FLOW, TapPoint::PENULTIMATE_1024, ContextMode::SB, 2);
    CHECK(flow1024.dim() == 1024);
}

TEST_CASE("extraction is deterministic and stateless") {
    const StubBackbone backbone(StreamKind::RGB);
    const StreamTensor t = small_tensor(StreamKind::RGB, 42);
    const TapFeatures a = backbone.forward(t);
    const TapFeatures b = backbone.forward(t);
    CHECK(a.logits == b.logits);
    CHECK(a.avg_pool == b.avg_pool);
    CHECK(a.max_pool == b.max_pool);

    // distinct inputs separate
    const TapFeatures c = backbone.forward(small_tensor(StreamKind::RGB, 43));
    CHECK(a.logits != c.logits);
}

TEST_CASE("per-stream weights differ and mismatched inputs are rejected") {
    const StubBackbone rgb(StreamKind::RGB);
    const StubBackbone flow(StreamKind::FLOW);
    CHECK_THROWS_AS(rgb.forward(small_tensor(StreamKind::FLOW, 1)), ValidationError);

    StreamTensor t = small_tensor(StreamKind::RGB, 9);
    const TapFeatures fr = rgb.forward(t);
    t.kind = StreamKind::FLOW;  // same bytes through the other stream's weights
    const TapFeatures ff = flow.forward(t);
    CHECK(fr.logits != ff.logits);
}

TEST_CASE("penultimate embedding is the elementwise mean of the two pools") {
    const StubBackbone backbone(StreamKind::RGB);
    const StreamTensor t = small_tensor(StreamKind::RGB, 77);
    const TapFeatures f = backbone.forward(t);
    const std::vector<float> pen = tap_vector(f, TapPoint::PENULTIMATE_1024);
    REQUIRE(pen.size() == 1024);
    for (std::size_t i = 0; i < pen.size(); ++i)
        CHECK(pen[i] == 0.5f * (f.avg_pool[i] + f.max_pool[i]));
}

TEST_CASE("fuse: sum is elementwise, concat is canonical RGB-first") {
    const Embedding rgb = stub_embedding(StreamKind::RGB, TapPoint::LOGITS_400,
                                         ContextMode::BB, 5);
    const Embedding flow = stub_embedding(StreamKind::FLOW, TapPoint::LOGITS_400,
                                          ContextMode::BB, 6);

    const Embedding sum = fuse(rgb, flow, FusionMode::SUM);
    CHECK(sum.dim() == 400);
    CHECK(sum.fusion == FusionMode::SUM);
    CHECK(sum.streams.is_both());
    for (int i : {0, 7, 399})
        CHECK(sum.vector[static_cast<std::size_t>(i)] ==
              rgb.vector[static_cast<std::size_t>(i)] + flow.vector[static_cast<std::size_t>(i)]);

    // sum commutes bitwise
    const Embedding sum_rev = fuse(flow, rgb, FusionMode::SUM);
    CHECK(sum.vector == sum_rev.vector);

    const Embedding cat = fuse(rgb, flow, FusionMode::CONCAT);
    CHECK(cat.dim() == 800);
    REQUIRE(cat.vector.size() == 800);
    CHECK(std::equal(rgb.vector.begin(), rgb.vector.end(), cat.vector.begin()));
    CHECK(std::equal(flow.vector.begin(), flow.vector.end(), cat.vector.begin() + 400));

    // concat order is canonical regardless of argument order
    const Embedding cat_rev = fuse(flow, rgb, FusionMode::CONCAT);
    CHECK(cat.vector == cat_rev.vector);
}

TEST_CASE("small fuse examples: [1,2]+[3,4] and [1,2]||[3,4]") {
    // values checked through the public API on the logits head by slicing is
    // awkward; validate the arithmetic contract directly instead
    const Embedding rgb = stub_embedding(StreamKind::RGB, TapPoint::LOGITS_400,
                                         ContextMode::SB, 11);
    Embedding a = rgb, b = rgb;
    b.streams = StreamSet::single(StreamKind::FLOW);
    a.vector.assign(400, 0.0f);
    b.vector.assign(400, 0.0f);
    a.vector[0] = 1.0f;
    a.vector[1] = 2.0f;
    b.vector[0] = 3.0f;
    b.vector[1] = 4.0f;
    const Embedding s = fuse(a, b, FusionMode::SUM);
    CHECK(s.vector[0] == 4.0f);
    CHECK(s.vector[1] == 6.0f);
    const Embedding c = fuse(a, b, FusionMode::CONCAT);
    CHECK(c.vector[0] == 1.0f);
    CHECK(c.vector[1] == 2.0f);
    CHECK(c.vector[400] == 3.0f);
    CHECK(c.vector[401] == 4.0f);
}

TEST_CASE("fuse rejects tap, dim, context mismatches and overlapping streams") {
    const Embedding rgb400 =
        stub_embedding(StreamKind::RGB, TapPoint::LOGITS_400, ContextMode::BB, 1);
    const Embedding flow400 =
        stub_embedding(StreamKind::FLOW, TapPoint::LOGITS_400, ContextMode::BB, 2);
    const Embedding flow1024 =
        stub_embedding(StreamKind::FLOW, TapPoint::PENULTIMATE_1024, ContextMode::BB, 3);
    const Embedding flow_sb =
        stub_embedding(StreamKind::FLOW, TapPoint::LOGITS_400, ContextMode::SB, 4);

    CHECK_THROWS_WITH_AS(fuse(rgb400, flow1024, FusionMode::SUM),
                         doctest::Contains("tap mismatch"), ValidationError);
    CHECK_THROWS_WITH_AS(fuse(rgb400, rgb400, FusionMode::SUM),
                         doctest::Contains("overlapping"), ValidationError);
    CHECK_THROWS_WITH_AS(fuse(rgb400, flow_sb, FusionMode::CONCAT),
                         doctest::Contains("context mismatch"), ValidationError);

    Embedding short_flow = flow400;
    short_flow.vector.resize(300);
    CHECK_THROWS_WITH_AS(fuse(rgb400, short_flow, FusionMode::SUM),
                         doctest::Contains("dim mismatch"), ValidationError);
}

TEST_CASE("dimension table is exhaustive over tap x stream x fusion") {
    std::set<int> dims;
    for (TapPoint tap : {TapPoint::LOGITS_400, TapPoint::PENULTIMATE_1024}) {
        CHECK(cell_dim(tap, StreamSet::single(StreamKind::RGB), std::nullopt) ==
              tap_dim(tap));
        CHECK(cell_dim(tap, StreamSet::single(StreamKind::FLOW), std::nullopt) ==
              tap_dim(tap));
        CHECK(cell_dim(tap, StreamSet::both(), FusionMode::SUM) == tap_dim(tap));
        CHECK(cell_dim(tap, StreamSet::both(), FusionMode::CONCAT) == 2 * tap_dim(tap));
        for (int d : {cell_dim(tap, StreamSet::single(StreamKind::RGB), std::nullopt),
                      cell_dim(tap, StreamSet::both(), FusionMode::SUM),
                      cell_dim(tap, StreamSet::both(), FusionMode::CONCAT)})
            dims.insert(d);
    }
    CHECK(dims == std::set<int>{400, 800, 1024, 2048});
}

TEST_CASE("embedding validation rejects inconsistent shapes") {
    Embedding e = stub_embedding(StreamKind::RGB, TapPoint::LOGITS_400, ContextMode::BB, 8);
    e.vector.resize(500);
    CHECK_THROWS_AS(validate_embedding(e), ValidationError);
    e.vector.resize(400);
    e.fusion = FusionMode::SUM;  // single stream must not carry fusion
    CHECK_THROWS_AS(validate_embedding(e), ValidationError);
}

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex(std::string()) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex(std::string("abc")) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex(std::string(1000000, 'a')) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("weights config verifies hashes before any work") {
    TempDir dir("weights");
    write_file_atomic(dir.path / "rgb.bin", std::string("rgb-weights"));
    write_file_atomic(dir.path / "flow.bin", std::string("flow-weights"));
    const std::string rgb_hash = sha256_file(dir.path / "rgb.bin");
    const std::string flow_hash = sha256_file(dir.path / "flow.bin");

    const std::string good = std::string("{\n") +
                             "  \"rgb\": {\"path\": \"rgb.bin\", \"sha256\": \"" + rgb_hash +
                             "\"},\n  \"flow\": {\"path\": \"flow.bin\", \"sha256\": \"" +
                             flow_hash + "\"},\n  \"command\": \"true {input} {output}\"\n}\n";
    write_file_atomic(dir.path / "weights.json", good);
    const WeightsConfig cfg = load_weights_config(dir.path / "weights.json");
    CHECK(cfg.rgb.sha256 == rgb_hash);
    CHECK(cfg.command == "true {input} {output}");

    const std::string bad = std::string("{\n") +
                            "  \"rgb\": {\"path\": \"rgb.bin\", \"sha256\": \"" + flow_hash +
                            "\"},\n  \"flow\": {\"path\": \"flow.bin\", \"sha256\": \"" +
                            flow_hash + "\"},\n  \"command\": \"true\"\n}\n";
    write_file_atomic(dir.path / "bad.json", bad);
    CHECK_THROWS_WITH_AS(load_weights_config(dir.path / "bad.json"),
                         doctest::Contains("hash mismatch"), ValidationError);
}

TEST_CASE("stream tensor and tap feature files round-trip") {
    TempDir dir("exchange");
    const StreamTensor t = small_tensor(StreamKind::FLOW, 31);
    save_stream_tensor(dir.path / "t.crtt", t);
    const StreamTensor back = load_stream_tensor(dir.path / "t.crtt");
    CHECK(back.kind == t.kind);
    CHECK(back.t == t.t);
    CHECK(back.h == t.h);
    CHECK(back.w == t.w);
    CHECK(back.c == t.c);
    CHECK(back.data == t.data);

    const StubBackbone backbone(StreamKind::FLOW);
    const TapFeatures f = backbone.forward(t);
    save_tap_features(dir.path / "f.crte", f);
    const TapFeatures fb = load_tap_features(dir.path / "f.crte");
    CHECK(fb.logits == f.logits);
    CHECK(fb.avg_pool == f.avg_pool);
    CHECK(fb.max_pool == f.max_pool);
}

TEST_CASE("process backbone surfaces command failures") {
    WeightsEntry w;
    w.path = "/nonexistent";
    w.sha256 = "x";
    const ProcessBackbone backbone(StreamKind::RGB, w, "false # {input} {output}");
    CHECK_THROWS_WITH_AS(backbone.forward(small_tensor(StreamKind::RGB, 1)),
                         doctest::Contains("command failed"), Error);
}

}  // TEST_SUITE
