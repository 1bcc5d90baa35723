#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "crt/error.hpp"
#include "crt/streams.hpp"
#include "test_helpers.hpp"

using namespace crt;

namespace {

// textured strip viewed through a sliding window, so the scene content
// translates by (+shift, 0) px/frame with no invented border pixels
std::vector<Image> translating_clip(int t, int h, int w, int shift, std::uint64_t seed) {
    Rng rng(seed);
    const int wide = w + shift * (t + 1);
    Image texture(h, wide);
    for (auto& v : texture.data) v = static_cast<std::uint8_t>(rng.below(256));
    std::vector<Image> frames;
    for (int ti = 0; ti < t; ++ti) {
        Image f(h, w);
        const int off = (t - 1 - ti) * shift;  // content slides right over time
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c) f.at(y, x, c) = texture.at(y, x + off, c);
        frames.push_back(std::move(f));
    }
    return frames;
}

float median_channel(const StreamTensor& t, int channel) {
    std::vector<float> vals;
    for (int ti = 0; ti + 1 < t.t; ++ti)  // skip the padded last slice
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x) vals.push_back(t.at(ti, y, x, channel));
    std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(vals.size() / 2),
                     vals.end());
    return vals[vals.size() / 2];
}

struct ConstantFlow final : FlowEstimator {
    float u, v;
    ConstantFlow(float uu, float vv) : u(uu), v(vv) {}
    std::string name() const override { return "constant"; }
    bool reentrant() const override { return true; }
    std::vector<float> estimate(const std::uint8_t*, const std::uint8_t*, int h,
                                int w) const override {
        std::vector<float> field(static_cast<std::size_t>(h) * w * 2);
        for (std::size_t i = 0; i < field.size(); i += 2) {
            field[i] = u;
            field[i + 1] = v;
        }
        return field;
    }
};

struct FailingFlow final : FlowEstimator {
    std::string name() const override { return "failing"; }
    bool reentrant() const override { return true; }
    std::vector<float> estimate(const std::uint8_t*, const std::uint8_t*, int,
                                int) const override {
        throw std::runtime_error("boom");
    }
};

}  // namespace

TEST_SUITE("streams") {

TEST_CASE("rgb scaling hits the declared bounds exactly") {
    const auto zeros = testutil::constant_clip(3, 8, 8, 0).frames;
    StreamTensor t0 = prepare_rgb(zeros, StreamOptions{16, 20.0f});
    for (float v : t0.data) CHECK(v == -1.0f);

    const auto full = testutil::constant_clip(3, 8, 8, 255).frames;
    StreamTensor t1 = prepare_rgb(full, StreamOptions{16, 20.0f});
    for (float v : t1.data) CHECK(v == 1.0f);

    const auto mid = testutil::constant_clip(2, 8, 8, 128).frames;
    StreamTensor tm = prepare_rgb(mid, StreamOptions{16, 20.0f});
    for (float v : tm.data) CHECK(v == doctest::Approx(0.00392156862745098).epsilon(1e-6));
}

TEST_CASE("rgb tensor shape and determinism") {
    Rng rng(5);
    std::vector<Image> frames;
    for (int i = 0; i < 4; ++i) frames.push_back(testutil::noise_image(31, 17, rng));
    const StreamTensor a = prepare_rgb(frames, StreamOptions{224, 20.0f});
    const StreamTensor b = prepare_rgb(frames, StreamOptions{224, 20.0f});
    CHECK(a.t == 4);
    CHECK(a.h == 224);
    CHECK(a.w == 224);
    CHECK(a.c == 3);
    CHECK(a.data == b.data);
    a.check_range();  // no throw
}

TEST_CASE("temporally constant clip yields all-zero flow") {
    const auto frames = testutil::constant_clip(5, 24, 24, 90).frames;
    const BlockMatchingFlow est(8, 6);
    const StreamTensor flow = compute_flow(frames, est);
    CHECK(flow.t == 5);
    CHECK(flow.c == 2);
    for (float v : flow.data) CHECK(v == 0.0f);
}

TEST_CASE("synthetic translation recovers median flow 0.15 after clip/scale") {
    const auto frames = translating_clip(8, 64, 64, 3, 99);
    const BlockMatchingFlow est(8, 20);
    const StreamTensor flow = compute_flow(frames, est);
    flow.check_range();
    const float med_u = median_channel(flow, 0);
    const float med_v = median_channel(flow, 1);
    CHECK(std::abs(med_u - 0.15f) <= 0.05f);  // 3 px / 20 px clip bound
    CHECK(std::abs(med_v) <= 0.05f);
}

TEST_CASE("time-reversed clip negates the flow within tolerance") {
    auto frames = translating_clip(8, 64, 64, 3, 123);
    const BlockMatchingFlow est(8, 20);
    const StreamTensor fwd = compute_flow(frames, est);
    std::reverse(frames.begin(), frames.end());
    const StreamTensor rev = compute_flow(frames, est);
    CHECK(std::abs(median_channel(fwd, 0) + median_channel(rev, 0)) <= 0.1f);
    CHECK(std::abs(median_channel(fwd, 1) + median_channel(rev, 1)) <= 0.1f);
}

TEST_CASE("displacements beyond the clip bound saturate at 1.0") {
    const auto frames = testutil::constant_clip(3, 8, 8, 10).frames;
    const ConstantFlow est(50.0f, -50.0f);  // injected estimator seam
    const StreamTensor flow = compute_flow(frames, est);
    for (int ti = 0; ti < flow.t; ++ti)
        for (int y = 0; y < flow.h; ++y)
            for (int x = 0; x < flow.w; ++x) {
                CHECK(flow.at(ti, y, x, 0) == 1.0f);
                CHECK(flow.at(ti, y, x, 1) == -1.0f);
            }
    flow.check_range();
}

TEST_CASE("flow keeps T slices by repeating the last one") {
    const auto frames = translating_clip(6, 32, 32, 2, 7);
    const BlockMatchingFlow est(8, 6);
    const StreamTensor flow = compute_flow(frames, est);
    REQUIRE(flow.t == 6);
    const std::size_t slice = static_cast<std::size_t>(flow.h) * flow.w * 2;
    for (std::size_t i = 0; i < slice; ++i)
        CHECK(flow.data[4 * slice + i] == flow.data[5 * slice + i]);
}

TEST_CASE("estimator failures name the frame pair") {
    const auto frames = testutil::constant_clip(4, 8, 8, 10).frames;
    const FailingFlow est;
    CHECK_THROWS_WITH_AS(compute_flow(frames, est), doctest::Contains("frame pair (0, 1)"),
                         Error);
}

TEST_CASE("preconditions: empty input and single frame") {
    CHECK_THROWS_AS(prepare_rgb({}, StreamOptions{}), ValidationError);
    const auto one = testutil::constant_clip(1, 8, 8, 10).frames;
    const BlockMatchingFlow est(8, 4);
    CHECK_THROWS_AS(compute_flow(one, est), ValidationError);
}

TEST_CASE("declared range is enforced by check_range") {
    StreamTensor t;
    t.kind = StreamKind::RGB;
    t.t = t.h = t.w = 1;
    t.c = 3;
    t.data = {0.0f, 2.0f, 0.0f};  // out of [-1, 1]
    CHECK_THROWS_AS(t.check_range(), ValidationError);
}

}  // TEST_SUITE
