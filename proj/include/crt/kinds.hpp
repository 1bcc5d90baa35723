#pragma once

#include <string>

#include "crt/error.hpp"

namespace crt {

// BB keeps only the runner's (padded) box over a neutral frame; SB keeps the
// runner over the clip's average frame so the runner is the only mover.
enum class ContextMode { BB, SB };

enum class StreamKind { RGB, FLOW };

// Backbone layers exported as features: the 400-way logits, or the pooled
// 1024-channel block that feeds the classification head.
enum class TapPoint { LOGITS_400, PENULTIMATE_1024 };

enum class FusionMode { SUM, CONCAT };

inline int tap_dim(TapPoint tap) {
    return tap == TapPoint::LOGITS_400 ? 400 : 1024;
}

inline const char* to_string(ContextMode m) { return m == ContextMode::BB ? "bb" : "sb"; }
inline const char* to_string(StreamKind s) { return s == StreamKind::RGB ? "rgb" : "flow"; }
inline const char* to_string(TapPoint t) {
    return t == TapPoint::LOGITS_400 ? "logits400" : "pen1024";
}
inline const char* to_string(FusionMode f) { return f == FusionMode::SUM ? "sum" : "concat"; }

inline ContextMode context_from_string(const std::string& s) {
    if (s == "bb") return ContextMode::BB;
    if (s == "sb") return ContextMode::SB;
    throw Error("unknown context mode '" + s + "' (expected bb|sb)");
}

inline StreamKind stream_from_string(const std::string& s) {
    if (s == "rgb") return StreamKind::RGB;
    if (s == "flow") return StreamKind::FLOW;
    throw Error("unknown stream '" + s + "' (expected rgb|flow)");
}

inline TapPoint tap_from_string(const std::string& s) {
    if (s == "logits400" || s == "400") return TapPoint::LOGITS_400;
    if (s == "pen1024" || s == "1024") return TapPoint::PENULTIMATE_1024;
    throw Error("unknown tap point '" + s + "' (expected 400|1024)");
}

inline FusionMode fusion_from_string(const std::string& s) {
    if (s == "sum") return FusionMode::SUM;
    if (s == "concat") return FusionMode::CONCAT;
    throw Error("unknown fusion mode '" + s + "' (expected sum|concat)");
}

}  // namespace crt
