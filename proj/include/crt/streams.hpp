#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "crt/kinds.hpp"
#include "crt/media.hpp"

namespace crt {

// Backbone input tensor, T x H x W x C float. RGB carries 3 channels scaled
// to [-1, 1]; FLOW carries (u, v) displacement clipped and scaled to [-1, 1].
// A flow tensor computed from T frames has T-1 estimated slices and is padded
// back to T by repeating the last slice.
struct StreamTensor {
    StreamKind kind = StreamKind::RGB;
    int t = 0, h = 0, w = 0, c = 0;
    std::vector<float> data;
    float range_lo = -1.0f;
    float range_hi = 1.0f;

    float& at(int ti, int y, int x, int ch) {
        return data[((static_cast<std::size_t>(ti) * h + y) * w + x) * c + ch];
    }
    float at(int ti, int y, int x, int ch) const {
        return data[((static_cast<std::size_t>(ti) * h + y) * w + x) * c + ch];
    }

    // Throws if any element violates the declared range.
    void check_range() const;
};

// Dense flow estimation between one frame pair, on 8-bit luma planes of size
// h x w. Returns an h*w*2 field of (u, v) pixel displacements mapping the
// previous frame onto the next. Estimators declare whether concurrent calls
// are safe; the harness serializes calls to non-reentrant ones.
class FlowEstimator {
public:
    virtual ~FlowEstimator() = default;
    virtual std::string name() const = 0;
    virtual bool reentrant() const = 0;
    virtual std::vector<float> estimate(const std::uint8_t* prev,
                                        const std::uint8_t* next, int h,
                                        int w) const = 0;
};

// Exhaustive-search block matching. Coarse but dependency-free, deterministic
// and accurate on rigid translations, which is what the test fixtures use.
// Ties in the matching cost prefer the smaller displacement, so constant
// regions (a BB exterior) report exactly zero motion.
class BlockMatchingFlow final : public FlowEstimator {
public:
    explicit BlockMatchingFlow(int block_size = 8, int search_radius = 20);

    std::string name() const override { return "block-matching"; }
    bool reentrant() const override { return true; }
    std::vector<float> estimate(const std::uint8_t* prev, const std::uint8_t* next,
                                int h, int w) const override;

private:
    int block_size_;
    int search_radius_;
    std::vector<std::pair<int, int>> candidates_;  // (dy, dx), nearest first
};

struct StreamOptions {
    int target_size = 224;      // backbone input H' = W'
    float flow_clip_px = 20.0f; // displacement clip bound before scaling
};

// Bilinear-resizes frames to target_size x target_size and maps 8-bit values
// linearly to [-1, 1] via v / 127.5 - 1.
StreamTensor prepare_rgb(const std::vector<Image>& frames,
                         const StreamOptions& opts = {});

// Dense flow between consecutive frames at the frames' own resolution,
// clipped to +-flow_clip_px and divided by flow_clip_px. Estimator failures
// surface as errors naming the frame pair.
StreamTensor compute_flow(const std::vector<Image>& frames,
                          const FlowEstimator& estimator,
                          const StreamOptions& opts = {});

// Resize applied before flow so the motion stream matches the backbone
// resolution; used by the extraction pipeline.
std::vector<Image> resize_frames(const std::vector<Image>& frames, int size);

}  // namespace crt
