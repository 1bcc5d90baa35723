#include "crt/media.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "crt/error.hpp"

namespace crt {

namespace fs = std::filesystem;

Image resize_bilinear(const Image& src, int out_h, int out_w) {
    if (src.height <= 0 || src.width <= 0)
        throw Error("resize_bilinear: empty source image");
    if (out_h <= 0 || out_w <= 0)
        throw Error("resize_bilinear: non-positive target size");
    if (out_h == src.height && out_w == src.width) return src;

    Image dst(out_h, out_w);
    const double sy = static_cast<double>(src.height) / out_h;
    const double sx = static_cast<double>(src.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = src.at(y0, x0, c) * (1.0 - wx) + src.at(y0, x1, c) * wx;
                const double bot = src.at(y1, x0, c) * (1.0 - wx) + src.at(y1, x1, c) * wx;
                const double v = top * (1.0 - wy) + bot * wy;
                dst.at(y, x, c) = static_cast<std::uint8_t>(
                    std::clamp(static_cast<int>(std::lround(v)), 0, 255));
            }
        }
    }
    return dst;
}

std::vector<std::uint8_t> to_luma(const Image& img) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(img.height) * img.width);
    const std::uint8_t* p = img.data.data();
    for (std::size_t i = 0; i < out.size(); ++i, p += 3) {
        // integer Rec.601 so the result is platform-exact
        out[i] = static_cast<std::uint8_t>((77 * p[0] + 150 * p[1] + 29 * p[2] + 128) >> 8);
    }
    return out;
}

// --- ppm --------------------------------------------------------------------

namespace {

int ppm_next_int(std::istream& in, const fs::path& path) {
    // skips whitespace and '#' comments per the netpbm grammar
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (!std::isspace(ch)) {
            break;
        }
        ch = in.get();
    }
    if (ch == EOF) throw ParseError("ppm: truncated header in " + path.string());
    int value = 0;
    bool any = false;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        any = true;
        ch = in.get();
    }
    if (!any) throw ParseError("ppm: malformed header in " + path.string());
    in.unget();
    return value;
}

}  // namespace

Image load_ppm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("ppm: cannot open " + path.string());
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '6')
        throw ParseError("ppm: not a P6 file: " + path.string());
    const int w = ppm_next_int(in, path);
    const int h = ppm_next_int(in, path);
    const int maxval = ppm_next_int(in, path);
    if (maxval != 255) throw ParseError("ppm: only maxval 255 supported: " + path.string());
    in.get();  // single whitespace after maxval
    Image img(h, w);
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (!in) throw ParseError("ppm: truncated pixel data in " + path.string());
    return img;
}

void save_ppm(const fs::path& path, const Image& img) {
    std::string payload = "P6\n" + std::to_string(img.width) + " " +
                          std::to_string(img.height) + "\n255\n";
    payload.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
    write_file_atomic(path, payload);
}

// --- rvc --------------------------------------------------------------------

Clip load_rvc(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("rvc: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "RVC1")
        throw ParseError("rvc: bad magic in " + path.string());
    if (!std::getline(in, line)) throw ParseError("rvc: missing header in " + path.string());
    std::istringstream hdr(line);
    int w = 0, h = 0, t = 0;
    double fps = 0.0;
    if (!(hdr >> w >> h >> t >> fps) || w <= 0 || h <= 0 || t <= 0 || fps <= 0)
        throw ParseError("rvc: malformed header in " + path.string());
    Clip clip;
    clip.fps = fps;
    clip.frames.reserve(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) {
        Image img(h, w);
        in.read(reinterpret_cast<char*>(img.data.data()),
                static_cast<std::streamsize>(img.data.size()));
        if (!in)
            throw ParseError("rvc: truncated at frame " + std::to_string(i) + " in " +
                             path.string());
        clip.frames.push_back(std::move(img));
    }
    return clip;
}

void save_rvc(const fs::path& path, const Clip& clip) {
    if (clip.frames.empty()) throw Error("rvc: refusing to write empty clip");
    char hdr[96];
    std::snprintf(hdr, sizeof(hdr), "RVC1\n%d %d %d %.17g\n", clip.width(),
                  clip.height(), clip.frame_count(), clip.fps);
    std::string payload(hdr);
    for (const auto& f : clip.frames) {
        if (!f.same_shape(clip.frames.front()))
            throw Error("rvc: frames differ in shape");
        payload.append(reinterpret_cast<const char*>(f.data.data()), f.data.size());
    }
    write_file_atomic(path, payload);
}

Clip load_clip(const fs::path& path) {
    if (fs::is_directory(path)) {
        std::vector<fs::path> names;
        for (const auto& e : fs::directory_iterator(path)) {
            if (e.path().extension() == ".ppm") names.push_back(e.path());
        }
        if (names.empty()) throw IoError("clip: no .ppm frames in " + path.string());
        std::sort(names.begin(), names.end());
        Clip clip;
        clip.frames.reserve(names.size());
        for (const auto& n : names) clip.frames.push_back(load_ppm(n));
        for (const auto& f : clip.frames)
            if (!f.same_shape(clip.frames.front()))
                throw ParseError("clip: frames differ in shape under " + path.string());
        return clip;
    }
    return load_rvc(path);
}

// --- atomic writes ----------------------------------------------------------

void write_file_atomic(const fs::path& path, const void* data, std::size_t size) {
    fs::path dir = path.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for write: " + tmp.string());
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        out.flush();
        if (!out) throw IoError("short write: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("rename failed for " + path.string() + ": " + ec.message());
    }
}

void write_file_atomic(const fs::path& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace crt
