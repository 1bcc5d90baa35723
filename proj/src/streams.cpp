#include "crt/streams.hpp"

#include <algorithm>
#include <cmath>

#include "crt/error.hpp"

namespace crt {

void StreamTensor::check_range() const {
    for (float v : data) {
        if (!(v >= range_lo && v <= range_hi))
            throw ValidationError("stream tensor value " + std::to_string(v) +
                                  " outside declared range [" +
                                  std::to_string(range_lo) + ", " +
                                  std::to_string(range_hi) + "]");
    }
}

std::vector<Image> resize_frames(const std::vector<Image>& frames, int size) {
    std::vector<Image> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(resize_bilinear(f, size, size));
    return out;
}

StreamTensor prepare_rgb(const std::vector<Image>& frames, const StreamOptions& opts) {
    if (frames.empty()) throw ValidationError("prepare_rgb: empty frame sequence");
    StreamTensor t;
    t.kind = StreamKind::RGB;
    t.t = static_cast<int>(frames.size());
    t.h = t.w = opts.target_size;
    t.c = 3;
    t.data.reserve(static_cast<std::size_t>(t.t) * t.h * t.w * 3);
    for (const auto& frame : frames) {
        const Image r = resize_bilinear(frame, opts.target_size, opts.target_size);
        for (std::uint8_t v : r.data)
            t.data.push_back(static_cast<float>(v) / 127.5f - 1.0f);
    }
    t.check_range();
    return t;
}

StreamTensor compute_flow(const std::vector<Image>& frames,
                          const FlowEstimator& estimator, const StreamOptions& opts) {
    if (frames.size() < 2) throw ValidationError("compute_flow: need at least 2 frames");
    for (const auto& f : frames)
        if (!f.same_shape(frames.front()))
            throw ValidationError("compute_flow: frames differ in shape");

    const int h = frames.front().height;
    const int w = frames.front().width;
    const float bound = opts.flow_clip_px;

    std::vector<std::vector<std::uint8_t>> luma;
    luma.reserve(frames.size());
    for (const auto& f : frames) luma.push_back(to_luma(f));

    StreamTensor t;
    t.kind = StreamKind::FLOW;
    t.t = static_cast<int>(frames.size());
    t.h = h;
    t.w = w;
    t.c = 2;
    t.data.reserve(static_cast<std::size_t>(t.t) * h * w * 2);

    const std::size_t slice = static_cast<std::size_t>(h) * w * 2;
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
        std::vector<float> field;
        try {
            field = estimator.estimate(luma[i].data(), luma[i + 1].data(), h, w);
        } catch (const std::exception& e) {
            throw Error("compute_flow: estimator '" + estimator.name() +
                        "' failed on frame pair (" + std::to_string(i) + ", " +
                        std::to_string(i + 1) + "): " + e.what());
        }
        if (field.size() != slice)
            throw Error("compute_flow: estimator '" + estimator.name() +
                        "' returned wrong field size on frame pair (" +
                        std::to_string(i) + ", " + std::to_string(i + 1) + ")");
        for (float v : field)
            t.data.push_back(std::clamp(v, -bound, bound) / bound);
    }
    // pad back to T slices by repeating the last one
    t.data.insert(t.data.end(), t.data.end() - static_cast<std::ptrdiff_t>(slice),
                  t.data.end());
    t.check_range();
    return t;
}

// --- block matching ----------------------------------------------------------

BlockMatchingFlow::BlockMatchingFlow(int block_size, int search_radius)
    : block_size_(block_size), search_radius_(search_radius) {
    if (block_size_ < 1 || search_radius_ < 0)
        throw Error("BlockMatchingFlow: bad parameters");
    for (int dy = -search_radius_; dy <= search_radius_; ++dy)
        for (int dx = -search_radius_; dx <= search_radius_; ++dx)
            candidates_.emplace_back(dy, dx);
    // nearest displacement first, so strict-improvement search breaks ties
    // toward zero motion
    std::stable_sort(candidates_.begin(), candidates_.end(),
                     [](const auto& a, const auto& b) {
                         const int ra = a.first * a.first + a.second * a.second;
                         const int rb = b.first * b.first + b.second * b.second;
                         return ra < rb;
                     });
}

std::vector<float> BlockMatchingFlow::estimate(const std::uint8_t* prev,
                                               const std::uint8_t* next, int h,
                                               int w) const {
    std::vector<float> field(static_cast<std::size_t>(h) * w * 2, 0.0f);
    for (int by = 0; by < h; by += block_size_) {
        const int y1 = std::min(by + block_size_, h);
        for (int bx = 0; bx < w; bx += block_size_) {
            const int x1 = std::min(bx + block_size_, w);

            long best_cost = -1;
            int best_dy = 0, best_dx = 0;
            for (const auto& [dy, dx] : candidates_) {
                long cost = 0;
                for (int y = by; y < y1; ++y) {
                    const int ny = std::clamp(y + dy, 0, h - 1);
                    const std::uint8_t* prow = prev + static_cast<std::size_t>(y) * w;
                    const std::uint8_t* nrow = next + static_cast<std::size_t>(ny) * w;
                    for (int x = bx; x < x1; ++x) {
                        const int nx = std::clamp(x + dx, 0, w - 1);
                        cost += std::abs(static_cast<int>(prow[x]) -
                                         static_cast<int>(nrow[nx]));
                    }
                    if (best_cost >= 0 && cost >= best_cost) break;
                }
                if (best_cost < 0 || cost < best_cost) {
                    best_cost = cost;
                    best_dy = dy;
                    best_dx = dx;
                }
            }

            for (int y = by; y < y1; ++y) {
                for (int x = bx; x < x1; ++x) {
                    const std::size_t idx = (static_cast<std::size_t>(y) * w + x) * 2;
                    field[idx] = static_cast<float>(best_dx);      // u: horizontal
                    field[idx + 1] = static_cast<float>(best_dy);  // v: vertical
                }
            }
        }
    }
    return field;
}

}  // namespace crt
