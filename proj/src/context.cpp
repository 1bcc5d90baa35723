#include "crt/context.hpp"

#include <cstring>

#include "crt/error.hpp"

namespace crt {

namespace {

void require_valid(const TrackedClip& clip) {
    if (clip.frames.empty()) throw ValidationError("context: empty clip");
    for (const auto& f : clip.frames)
        if (!f.same_shape(clip.frames.front()))
            throw ValidationError("context: frames differ in shape");
    if (clip.boxes.size() != clip.frames.size())
        throw ValidationError("context: boxes/frames length mismatch");
}

}  // namespace

Image average_frame(const std::vector<Image>& frames) {
    if (frames.empty()) throw ValidationError("average_frame: empty clip");
    const Image& first = frames.front();
    std::vector<std::uint64_t> sum(first.data.size(), 0);
    for (const auto& f : frames) {
        if (!f.same_shape(first))
            throw ValidationError("average_frame: frames differ in shape");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += f.data[i];
    }
    const std::uint64_t n = frames.size();
    Image out(first.height, first.width);
    for (std::size_t i = 0; i < sum.size(); ++i) {
        // exact round-half-up of sum/n
        out.data[i] = static_cast<std::uint8_t>((2 * sum[i] + n) / (2 * n));
    }
    return out;
}

Image average_frame(const TrackedClip& clip) { return average_frame(clip.frames); }

std::vector<PixelRect> preserved_rects(const TrackedClip& clip,
                                       const ContextOptions& opts) {
    require_valid(clip);
    const int W = clip.width();
    const int H = clip.height();
    const auto boxes = interpolate_missing_boxes(clip.boxes);
    std::vector<PixelRect> rects;
    rects.reserve(boxes.size());
    for (const auto& b : boxes)
        rects.push_back(rasterize(pad_box(b, opts.box_pad_frac, W, H), W, H));
    return rects;
}

Clip apply_context(const TrackedClip& clip, ContextMode mode,
                   const ContextOptions& opts) {
    require_valid(clip);
    const auto rects = preserved_rects(clip, opts);
    const int W = clip.width();
    const int H = clip.height();

    Image tau;  // one background per clip
    if (mode == ContextMode::SB) {
        tau = average_frame(clip);
    } else {
        tau = Image(H, W, opts.neutral_value);
    }

    Clip out;
    out.fps = clip.fps;
    out.frames.reserve(clip.frames.size());
    for (std::size_t t = 0; t < clip.frames.size(); ++t) {
        const Image& src = clip.frames[t];
        const PixelRect& r = rects[t];
        Image dst = tau;
        for (int y = r.y0; y < r.y1; ++y) {
            if (r.x1 > r.x0) {
                const std::size_t off = (static_cast<std::size_t>(y) * W + r.x0) * 3;
                std::memcpy(dst.data.data() + off, src.data.data() + off,
                            static_cast<std::size_t>(r.x1 - r.x0) * 3);
            }
        }
        out.frames.push_back(std::move(dst));
    }
    return out;
}

}  // namespace crt
