#pragma once

#include "crt/kinds.hpp"
#include "crt/tracks.hpp"

namespace crt {

struct ContextOptions {
    // Pad each box side by 10% of the box size before compositing so limbs at
    // stride extremes stay inside the preserved region.
    double box_pad_frac = 0.10;
    // BB neutral fill; mid-gray has zero temporal gradient, hence zero flow.
    std::uint8_t neutral_value = 128;
};

// Per-pixel, per-channel arithmetic mean over all frames, computed in integer
// arithmetic and rounded half-up to 8 bit.
Image average_frame(const TrackedClip& clip);
Image average_frame(const std::vector<Image>& frames);

// Isolates the runner: inside the padded, rasterized box every output pixel
// equals the input pixel; outside it equals the neutral value (BB) or the
// clip's average frame (SB). The average frame is computed once per clip.
// Missing boxes are interpolated from the nearest present ones first.
Clip apply_context(const TrackedClip& clip, ContextMode mode,
                   const ContextOptions& opts = {});

// The rectangle of preserved pixels for frame t, after interpolation, padding
// and rasterization. Exposed so callers (and tests) can reason about the
// inside/outside partition apply_context commits to.
std::vector<PixelRect> preserved_rects(const TrackedClip& clip,
                                       const ContextOptions& opts = {});

}  // namespace crt
