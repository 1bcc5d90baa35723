#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace crt {

// Validates a raw per-segment timing export: arrival times must be strictly
// increasing, and the telescoped cumulative time T_1 + sum(T_j - T_{j-1})
// equals the last arrival. Manifest CRTs are checked against this.
std::int64_t cumulative_crt(const std::vector<std::int64_t>& segment_times);

// Normalization of CRTs to the unit interval:
//
//   normalized = (crt - min0) / maxP
//
// where min0 is the minimum CRT over training runners at the first considered
// recording point and maxP the maximum at the last. The denominator is maxP
// alone (not maxP - min0), so the top of the range is (maxP - min0)/maxP < 1.
// Fit on the training split of the current fold only.
struct TargetScaler {
    std::int64_t min0 = 0;
    std::int64_t maxP = 1;

    // Inputs outside [min0, maxP] are clamped first; *clamped reports it so
    // the harness can log a warning record. Strictly increasing in crt.
    double normalize(std::int64_t crt_seconds, bool* clamped = nullptr) const;

    // Normalized MAE back to minutes: mae * maxP / 60.
    double denormalize_error_minutes(double mae_normalized) const;

    bool operator==(const TargetScaler&) const = default;
};

// train_targets are (rp_index, crt_seconds) pairs with rp_index relative to
// the manifest's recording-point order; rp_count = P+1. Throws when the
// training split has no observation at the first or last recording point, or
// when the fitted range is degenerate.
TargetScaler fit_scaler(const std::vector<std::pair<int, std::int64_t>>& train_targets,
                        int rp_count);

}  // namespace crt
