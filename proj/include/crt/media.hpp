#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace crt {

// 8-bit RGB image, row-major, interleaved channels.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // height * width * 3

    Image() = default;
    Image(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

    std::uint8_t& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width;
    }
    bool operator==(const Image& o) const {
        return height == o.height && width == o.width && data == o.data;
    }
};

struct Clip {
    std::vector<Image> frames;
    double fps = 25.0;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int height() const { return frames.empty() ? 0 : frames.front().height; }
    int width() const { return frames.empty() ? 0 : frames.front().width; }
};

// Bilinear resize with half-pixel sample centers. Values are rounded back to
// 8 bit, so resizing to the same size is the identity.
Image resize_bilinear(const Image& src, int out_h, int out_w);

// Rec.601 integer luma.
std::vector<std::uint8_t> to_luma(const Image& img);

// --- on-disk formats -------------------------------------------------------
//
// Clips are consumed either as a single .rvc file (tiny uncompressed
// container: "RVC1\n<width> <height> <frames> <fps>\n" followed by raw RGB24
// frames) or as a directory of P6 .ppm frames in lexicographic order.
// Decoding real video is out of scope; ffmpeg gets footage into either form.

Image load_ppm(const std::filesystem::path& path);
void save_ppm(const std::filesystem::path& path, const Image& img);

Clip load_clip(const std::filesystem::path& path);  // .rvc file or ppm dir
Clip load_rvc(const std::filesystem::path& path);
void save_rvc(const std::filesystem::path& path, const Clip& clip);

// write-then-rename; readers never observe partial files
void write_file_atomic(const std::filesystem::path& path, const void* data,
                       std::size_t size);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

std::string read_file(const std::filesystem::path& path);

}  // namespace crt
