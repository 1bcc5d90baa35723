#include "crt/targets.hpp"

#include <algorithm>

#include "crt/error.hpp"

namespace crt {

std::int64_t cumulative_crt(const std::vector<std::int64_t>& segment_times) {
    if (segment_times.empty()) throw ValidationError("cumulative_crt: empty timing list");
    for (std::size_t i = 1; i < segment_times.size(); ++i) {
        if (segment_times[i] <= segment_times[i - 1])
            throw ValidationError("cumulative_crt: non-monotone arrival times (" +
                                  std::to_string(segment_times[i - 1]) + "s then " +
                                  std::to_string(segment_times[i]) + "s at index " +
                                  std::to_string(i) + ")");
    }
    std::int64_t total = segment_times.front();
    for (std::size_t i = 1; i < segment_times.size(); ++i)
        total += segment_times[i] - segment_times[i - 1];
    return total;  // telescopes to the last arrival
}

TargetScaler fit_scaler(const std::vector<std::pair<int, std::int64_t>>& train_targets,
                        int rp_count) {
    if (rp_count < 1) throw ValidationError("fit_scaler: rp_count must be positive");
    const int first_rp = 0;
    const int last_rp = rp_count - 1;
    bool have_first = false, have_last = false;
    std::int64_t min0 = 0, maxP = 0;
    for (const auto& [rp, crt] : train_targets) {
        if (rp < 0 || rp >= rp_count)
            throw ValidationError("fit_scaler: rp_index " + std::to_string(rp) +
                                  " outside [0, " + std::to_string(rp_count - 1) + "]");
        if (rp == first_rp) {
            min0 = have_first ? std::min(min0, crt) : crt;
            have_first = true;
        }
        if (rp == last_rp) {
            maxP = have_last ? std::max(maxP, crt) : crt;
            have_last = true;
        }
    }
    if (!have_first)
        throw ValidationError("fit_scaler: no training observation at the first "
                              "recording point");
    if (!have_last)
        throw ValidationError("fit_scaler: no training observation at the last "
                              "recording point");
    if (!(min0 >= 0 && min0 < maxP))
        throw ValidationError("fit_scaler: degenerate range (min0 " +
                              std::to_string(min0) + ", maxP " + std::to_string(maxP) +
                              ")");
    return TargetScaler{min0, maxP};
}

double TargetScaler::normalize(std::int64_t crt_seconds, bool* clamped) const {
    std::int64_t v = crt_seconds;
    const std::int64_t lo = min0, hi = maxP;
    const bool out = v < lo || v > hi;
    if (clamped) *clamped = out;
    v = std::clamp(v, lo, hi);
    return static_cast<double>(v - lo) / static_cast<double>(hi);
}

double TargetScaler::denormalize_error_minutes(double mae_normalized) const {
    return mae_normalized * static_cast<double>(maxP) / 60.0;
}

}  // namespace crt
