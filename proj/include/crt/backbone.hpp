#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crt/kinds.hpp"
#include "crt/streams.hpp"

namespace crt {

struct StreamSet {
    bool rgb = false;
    bool flow = false;

    static StreamSet single(StreamKind k) {
        return k == StreamKind::RGB ? StreamSet{true, false} : StreamSet{false, true};
    }
    static StreamSet both() { return StreamSet{true, true}; }
    bool is_single() const { return rgb != flow; }
    bool is_both() const { return rgb && flow; }
    bool disjoint(const StreamSet& o) const { return !(rgb && o.rgb) && !(flow && o.flow); }
    StreamSet united(const StreamSet& o) const { return StreamSet{rgb || o.rgb, flow || o.flow}; }
    bool operator==(const StreamSet&) const = default;
};

std::string to_string(const StreamSet& s);

// Fixed-length feature vector with full provenance: where it was tapped, how
// streams were fused, which context pre-processing produced the input.
struct Embedding {
    std::vector<float> vector;
    TapPoint tap = TapPoint::LOGITS_400;
    std::optional<FusionMode> fusion;  // nullopt = single stream
    StreamSet streams;
    ContextMode context = ContextMode::BB;

    int dim() const { return static_cast<int>(vector.size()); }
};

// dim must be consistent with (tap, fusion, streams): single stream and SUM
// keep {400, 1024}, CONCAT doubles to {800, 2048}. Throws otherwise.
void validate_embedding(const Embedding& e);

// expected dimension for one ablation cell
int cell_dim(TapPoint tap, const StreamSet& streams, std::optional<FusionMode> fusion);

// What one forward pass exposes. The two penultimate pools are reported
// separately; how they combine into the 1024-dim embedding is decided in
// extract_embedding, not inside the adapter.
struct TapFeatures {
    std::vector<float> logits;    // 400
    std::vector<float> avg_pool;  // 1024
    std::vector<float> max_pool;  // 1024
};

// A loaded single-stream backbone. RGB and FLOW use their own pretrained
// weights and are separate instances. Instances are not required to be
// reentrant; callers serialize forward() per instance.
class Backbone {
public:
    virtual ~Backbone() = default;
    virtual std::string name() const = 0;
    virtual StreamKind stream() const = 0;
    virtual std::string weights_tag() const = 0;  // content hash or stub tag
    virtual TapFeatures forward(const StreamTensor& input) const = 0;
};

// Test backbone: a fixed seeded random projection of summary statistics of
// the input tensor. Deterministic for fixed (tag, stream), sensitive to the
// input content, and shaped exactly like the real taps, so every downstream
// stage runs without heavyweight weights.
class StubBackbone final : public Backbone {
public:
    explicit StubBackbone(StreamKind stream, std::string tag = "stub-v1");

    std::string name() const override { return "stub"; }
    StreamKind stream() const override { return stream_; }
    std::string weights_tag() const override { return tag_; }
    TapFeatures forward(const StreamTensor& input) const override;

    // statistics vector the projections act on; exposed for tests
    static std::vector<double> summarize(const StreamTensor& input);
    static constexpr int kStatsDim = 36;

private:
    StreamKind stream_;
    std::string tag_;
    std::vector<double> proj_logits_;  // 400 x kStatsDim
    std::vector<double> proj_avg_;     // 1024 x kStatsDim
    std::vector<double> proj_max_;     // 1024 x kStatsDim
};

// Real runs: weight files are pinned by SHA-256 in a config and the forward
// pass is delegated to an external inference command (typically a small
// wrapper around the published Kinetics-400 two-stream checkpoints). The
// command template may use {input}, {output}, {stream} and {weights}
// placeholders; input/output are exchanged through the tensor/feature file
// formats documented in the README.
struct WeightsEntry {
    std::filesystem::path path;
    std::string sha256;
};

struct WeightsConfig {
    WeightsEntry rgb;
    WeightsEntry flow;
    std::string command;
};

// Parses the JSON config and verifies each weight file's hash; a mismatch or
// missing file throws before any work starts.
WeightsConfig load_weights_config(const std::filesystem::path& path);

class ProcessBackbone final : public Backbone {
public:
    ProcessBackbone(StreamKind stream, WeightsEntry weights, std::string command_template);

    std::string name() const override { return "process"; }
    StreamKind stream() const override { return stream_; }
    std::string weights_tag() const override { return weights_.sha256; }
    TapFeatures forward(const StreamTensor& input) const override;

private:
    StreamKind stream_;
    WeightsEntry weights_;
    std::string command_;
};

// Tensor/feature exchange files used by ProcessBackbone (and by the CLI's
// stub-forward helper, which makes the protocol testable end to end).
void save_stream_tensor(const std::filesystem::path& path, const StreamTensor& t);
StreamTensor load_stream_tensor(const std::filesystem::path& path);
void save_tap_features(const std::filesystem::path& path, const TapFeatures& f);
TapFeatures load_tap_features(const std::filesystem::path& path);

// "stub" or a weights-config path.
std::unique_ptr<Backbone> make_backbone(StreamKind stream, const std::string& spec);

// Reduces one forward pass to the requested tap: the 400 logits as-is, or the
// elementwise average of the avg/max penultimate pools (1024 values).
std::vector<float> tap_vector(const TapFeatures& f, TapPoint tap);

// Runs the forward pass and stamps provenance. For PENULTIMATE_1024 the
// avg-pool and max-pool vectors are combined by elementwise average, keeping
// the dimension at 1024.
Embedding extract_embedding(const Backbone& backbone, const StreamTensor& input,
                            TapPoint tap, ContextMode context);

// SUM: elementwise, dimension preserved, commutative. CONCAT: canonical RGB
// block first regardless of argument order, dimension doubled. Requires equal
// taps, equal contexts, equal dims and disjoint streams.
Embedding fuse(const Embedding& a, const Embedding& b, FusionMode mode);

}  // namespace crt
