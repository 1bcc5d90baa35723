#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "crt/media.hpp"

namespace crt {

// Axis-aligned runner box in pixel coordinates, 0 <= x0 < x1 <= W,
// 0 <= y0 < y1 <= H. Coordinates are kept fractional as emitted by the
// tracker; rasterization happens at compositing time.
struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    bool operator==(const Box&) const = default;
};

// Integer pixel rectangle, half-open: pixel (x, y) is inside iff
// x0 <= x < x1 and y0 <= y < y1.
struct PixelRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool contains(int x, int y) const {
        return x >= x0 && x < x1 && y >= y0 && y < y1;
    }
    bool operator==(const PixelRect&) const = default;
};

// Decoded frames plus the per-frame box of the designated runner. A frame the
// tracker dropped has no box; interpolate_missing_boxes fills those in before
// compositing.
struct TrackedClip {
    std::vector<Image> frames;
    std::vector<std::optional<Box>> boxes;  // one slot per frame
    double fps = 25.0;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int height() const { return frames.empty() ? 0 : frames.front().height; }
    int width() const { return frames.empty() ? 0 : frames.front().width; }
};

// Reads an external tracker export (comma-separated rows of
// frame_index,track_id,x0,y0,x1,y1,score) and aligns the rows of the
// designated track id to the clip's frames by index. Frames without a row are
// marked missing. Throws when the id never appears, when a box leaves the
// frame, or on malformed rows.
TrackedClip ingest_tracks(const std::filesystem::path& track_file, Clip clip,
                          int track_id);

// Linear interpolation between the nearest present boxes; clip boundaries
// hold the nearest present box. Requires at least one present box.
std::vector<Box> interpolate_missing_boxes(const std::vector<std::optional<Box>>& boxes);

// Expands each side by pad_frac of the box size, clamped to frame bounds.
Box pad_box(const Box& b, double pad_frac, int frame_w, int frame_h);

// floor/ceil rasterization of a (padded) box to whole pixels.
PixelRect rasterize(const Box& b, int frame_w, int frame_h);

}  // namespace crt
