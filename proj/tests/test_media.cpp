#include "doctest.h"

#include "crt/error.hpp"
#include "crt/media.hpp"
#include "test_helpers.hpp"

using namespace crt;
using testutil::TempDir;

TEST_SUITE("media") {

TEST_CASE("rvc clips round-trip losslessly") {
    TempDir dir("media");
    Rng rng(3);
    Clip clip;
    clip.fps = 25.0;
    for (int i = 0; i < 5; ++i) clip.frames.push_back(testutil::noise_image(14, 19, rng));
    save_rvc(dir.path / "c.rvc", clip);
    const Clip back = load_clip(dir.path / "c.rvc");
    CHECK(back.fps == clip.fps);
    REQUIRE(back.frames.size() == clip.frames.size());
    for (std::size_t i = 0; i < back.frames.size(); ++i)
        CHECK(back.frames[i] == clip.frames[i]);
}

TEST_CASE("a directory of ppm frames loads as a clip in name order") {
    TempDir dir("media");
    Rng rng(9);
    std::vector<Image> frames;
    for (int i = 0; i < 4; ++i) {
        frames.push_back(testutil::noise_image(10, 12, rng));
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03d.ppm", i);
        save_ppm(dir.path / name, frames.back());
    }
    const Clip clip = load_clip(dir.path);
    REQUIRE(clip.frames.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(clip.frames[i] == frames[i]);
}

TEST_CASE("ppm loader handles comments and rejects truncation") {
    TempDir dir("media");
    write_file_atomic(dir.path / "c.ppm",
                      std::string("P6\n# a comment\n2 1\n255\n") + "abcdef");
    const Image img = load_ppm(dir.path / "c.ppm");
    CHECK(img.width == 2);
    CHECK(img.height == 1);
    CHECK(img.at(0, 0, 0) == 'a');

    write_file_atomic(dir.path / "short.ppm", std::string("P6\n2 2\n255\nxy"));
    CHECK_THROWS_AS(load_ppm(dir.path / "short.ppm"), ParseError);
    write_file_atomic(dir.path / "bad.ppm", std::string("P5\n2 2\n255\n"));
    CHECK_THROWS_AS(load_ppm(dir.path / "bad.ppm"), ParseError);
}

TEST_CASE("rvc loader rejects malformed headers and truncated frames") {
    TempDir dir("media");
    write_file_atomic(dir.path / "bad_magic.rvc", std::string("RVCX\n1 1 1 25\n"));
    CHECK_THROWS_AS(load_rvc(dir.path / "bad_magic.rvc"), ParseError);
    write_file_atomic(dir.path / "bad_hdr.rvc", std::string("RVC1\n0 4 2 25\n"));
    CHECK_THROWS_AS(load_rvc(dir.path / "bad_hdr.rvc"), ParseError);
    write_file_atomic(dir.path / "short.rvc", std::string("RVC1\n2 2 2 25\n") +
                                                  std::string(12, 'x'));
    CHECK_THROWS_WITH_AS(load_rvc(dir.path / "short.rvc"),
                         doctest::Contains("truncated"), ParseError);
}

TEST_CASE("same-size bilinear resize is the identity") {
    Rng rng(5);
    const Image img = testutil::noise_image(9, 7, rng);
    CHECK(resize_bilinear(img, 9, 7) == img);
}

TEST_CASE("bilinear resize averages as expected on a 2x downscale") {
    // 2x2 block mean with half-pixel centers: each output pixel sits exactly
    // between four inputs
    Image img(2, 2);
    const std::uint8_t vals[4] = {10, 20, 30, 40};
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = vals[y * 2 + x];
    const Image small = resize_bilinear(img, 1, 1);
    CHECK(small.at(0, 0, 0) == 25);
}

TEST_CASE("atomic writes land complete or not at all") {
    TempDir dir("media");
    const std::string payload(100000, 'z');
    write_file_atomic(dir.path / "big.bin", payload);
    CHECK(read_file(dir.path / "big.bin") == payload);
    // the temp staging file never survives
    CHECK_FALSE(std::filesystem::exists(dir.path / "big.bin.tmp"));
}

}  // TEST_SUITE
