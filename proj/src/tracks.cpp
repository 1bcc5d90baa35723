#include "crt/tracks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "crt/error.hpp"

namespace crt {

TrackedClip ingest_tracks(const std::filesystem::path& track_file, Clip clip,
                          int track_id) {
    if (clip.frames.empty()) throw ValidationError("ingest_tracks: empty clip");
    for (const auto& f : clip.frames)
        if (!f.same_shape(clip.frames.front()))
            throw ValidationError("ingest_tracks: frames differ in shape");

    std::ifstream in(track_file);
    if (!in) throw IoError("tracks: cannot open " + track_file.string());

    TrackedClip out;
    out.fps = clip.fps;
    out.boxes.assign(clip.frames.size(), std::nullopt);
    const int W = clip.frames.front().width;
    const int H = clip.frames.front().height;

    std::string raw;
    int lineno = 0;
    bool id_seen = false;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        if (auto p = line.find('#'); p != std::string::npos) line.resize(p);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        long frame = 0;
        int id = 0;
        double x0, y0, x1, y1, score;
        if (!(ss >> frame >> id >> x0 >> y0 >> x1 >> y1 >> score))
            throw ParseError(track_file.string() + ":" + std::to_string(lineno) +
                             ": expected frame,id,x0,y0,x1,y1,score");
        if (id != track_id) continue;
        id_seen = true;
        if (frame < 0 || frame >= static_cast<long>(clip.frames.size()))
            throw ValidationError(track_file.string() + ":" + std::to_string(lineno) +
                                  ": frame index " + std::to_string(frame) +
                                  " outside clip of " +
                                  std::to_string(clip.frames.size()) + " frames");
        if (!(x0 >= 0 && x0 < x1 && x1 <= W && y0 >= 0 && y0 < y1 && y1 <= H))
            throw ValidationError(track_file.string() + ":" + std::to_string(lineno) +
                                  ": box outside " + std::to_string(W) + "x" +
                                  std::to_string(H) + " frame bounds");
        if (out.boxes[static_cast<std::size_t>(frame)])
            throw ValidationError(track_file.string() + ":" + std::to_string(lineno) +
                                  ": duplicate row for frame " + std::to_string(frame) +
                                  ", track " + std::to_string(track_id));
        out.boxes[static_cast<std::size_t>(frame)] = Box{x0, y0, x1, y1};
    }
    if (!id_seen)
        throw ValidationError("tracks: runner not found (track id " +
                              std::to_string(track_id) + " has no rows in " +
                              track_file.string() + ")");

    out.frames = std::move(clip.frames);
    return out;
}

std::vector<Box> interpolate_missing_boxes(const std::vector<std::optional<Box>>& boxes) {
    const std::size_t n = boxes.size();
    std::vector<Box> out(n);
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < n; ++i)
        if (boxes[i]) present.push_back(i);
    if (present.empty())
        throw ValidationError("interpolate_missing_boxes: no present box");

    for (std::size_t i = 0; i < n; ++i) {
        if (boxes[i]) {
            out[i] = *boxes[i];
            continue;
        }
        auto next = std::lower_bound(present.begin(), present.end(), i);
        if (next == present.begin()) {
            out[i] = *boxes[present.front()];  // hold at left boundary
        } else if (next == present.end()) {
            out[i] = *boxes[present.back()];  // hold at right boundary
        } else {
            const std::size_t b = *next;
            const std::size_t a = *(next - 1);
            const double t = static_cast<double>(i - a) / static_cast<double>(b - a);
            const Box& pa = *boxes[a];
            const Box& pb = *boxes[b];
            out[i] = Box{pa.x0 + t * (pb.x0 - pa.x0), pa.y0 + t * (pb.y0 - pa.y0),
                         pa.x1 + t * (pb.x1 - pa.x1), pa.y1 + t * (pb.y1 - pa.y1)};
        }
    }
    return out;
}

Box pad_box(const Box& b, double pad_frac, int frame_w, int frame_h) {
    const double px = pad_frac * b.width();
    const double py = pad_frac * b.height();
    Box out{b.x0 - px, b.y0 - py, b.x1 + px, b.y1 + py};
    out.x0 = std::max(0.0, out.x0);
    out.y0 = std::max(0.0, out.y0);
    out.x1 = std::min(static_cast<double>(frame_w), out.x1);
    out.y1 = std::min(static_cast<double>(frame_h), out.y1);
    return out;
}

PixelRect rasterize(const Box& b, int frame_w, int frame_h) {
    PixelRect r;
    r.x0 = std::clamp(static_cast<int>(std::floor(b.x0)), 0, frame_w);
    r.y0 = std::clamp(static_cast<int>(std::floor(b.y0)), 0, frame_h);
    r.x1 = std::clamp(static_cast<int>(std::ceil(b.x1)), 0, frame_w);
    r.y1 = std::clamp(static_cast<int>(std::ceil(b.y1)), 0, frame_h);
    return r;
}

}  // namespace crt
