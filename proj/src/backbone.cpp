#include "crt/backbone.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "crt/error.hpp"
#include "crt/media.hpp"
#include "crt/rng.hpp"
#include "crt/sha256.hpp"

namespace crt {

namespace fs = std::filesystem;

std::string to_string(const StreamSet& s) {
    if (s.is_both()) return "rgb+flow";
    if (s.rgb) return "rgb";
    if (s.flow) return "flow";
    return "none";
}

int cell_dim(TapPoint tap, const StreamSet& streams, std::optional<FusionMode> fusion) {
    const int base = tap_dim(tap);
    if (streams.is_single()) return base;
    if (!streams.is_both()) throw ValidationError("cell_dim: empty stream set");
    if (!fusion) throw ValidationError("cell_dim: two streams need a fusion mode");
    return *fusion == FusionMode::CONCAT ? 2 * base : base;
}

void validate_embedding(const Embedding& e) {
    if (e.streams.is_single() && e.fusion)
        throw ValidationError("embedding: single stream must not carry a fusion mode");
    if (e.streams.is_both() && !e.fusion)
        throw ValidationError("embedding: fused streams missing fusion mode");
    const int expect = cell_dim(e.tap, e.streams, e.fusion);
    if (e.dim() != expect)
        throw ValidationError("embedding: dim " + std::to_string(e.dim()) +
                              " inconsistent with (tap " + to_string(e.tap) +
                              ", streams " + to_string(e.streams) + ", fusion " +
                              (e.fusion ? to_string(*e.fusion) : "none") +
                              "), expected " + std::to_string(expect));
}

// --- stub --------------------------------------------------------------------

StubBackbone::StubBackbone(StreamKind stream, std::string tag)
    : stream_(stream), tag_(std::move(tag)) {
    auto fill = [&](std::vector<double>& proj, int out_dim, const char* which) {
        const std::string salt = tag_ + "/" + to_string(stream_) + "/" + which;
        Rng rng(fnv1a64(salt.data(), salt.size()));
        proj.resize(static_cast<std::size_t>(out_dim) * kStatsDim);
        const double scale = 1.0 / std::sqrt(static_cast<double>(kStatsDim));
        for (auto& v : proj) v = rng.normal() * scale;
    };
    fill(proj_logits_, 400, "logits");
    fill(proj_avg_, 1024, "avgpool");
    fill(proj_max_, 1024, "maxpool");
}

std::vector<double> StubBackbone::summarize(const StreamTensor& input) {
    if (input.t <= 0 || input.h <= 0 || input.w <= 0 || input.c <= 0)
        throw ValidationError("stub backbone: empty input tensor");
    // 4 temporal x 2x2 spatial cells, (mean, mean|v|) each, plus global
    // moments: 36 values total
    std::vector<double> sum(16, 0.0), abs_sum(16, 0.0);
    std::vector<std::int64_t> count(16, 0);
    double gsum = 0.0, gsq = 0.0;
    double gmin = input.data.empty() ? 0.0 : input.data[0];
    double gmax = gmin;
    for (int ti = 0; ti < input.t; ++ti) {
        const int tb = std::min(ti * 4 / input.t, 3);
        for (int y = 0; y < input.h; ++y) {
            const int yb = y * 2 / input.h;
            for (int x = 0; x < input.w; ++x) {
                const int xb = x * 2 / input.w;
                const int cell = (tb * 2 + yb) * 2 + xb;
                for (int ch = 0; ch < input.c; ++ch) {
                    const double v = input.at(ti, y, x, ch);
                    sum[cell] += v;
                    abs_sum[cell] += std::abs(v);
                    ++count[cell];
                    gsum += v;
                    gsq += v * v;
                    if (v < gmin) gmin = v;
                    if (v > gmax) gmax = v;
                }
            }
        }
    }
    std::vector<double> stats;
    stats.reserve(kStatsDim);
    for (int i = 0; i < 16; ++i) {
        const double n = count[i] > 0 ? static_cast<double>(count[i]) : 1.0;
        stats.push_back(sum[i] / n);
        stats.push_back(abs_sum[i] / n);
    }
    const double total = static_cast<double>(input.data.size());
    const double mean = gsum / total;
    const double var = std::max(0.0, gsq / total - mean * mean);
    stats.push_back(mean);
    stats.push_back(std::sqrt(var));
    stats.push_back(gmin);
    stats.push_back(gmax);
    return stats;
}

TapFeatures StubBackbone::forward(const StreamTensor& input) const {
    if (input.kind != stream_)
        throw ValidationError(std::string("stub backbone: input stream ") +
                              to_string(input.kind) + " does not match loaded " +
                              to_string(stream_) + " weights");
    const std::vector<double> stats = summarize(input);
    auto project = [&](const std::vector<double>& proj, int out_dim) {
        std::vector<float> out(static_cast<std::size_t>(out_dim));
        for (int j = 0; j < out_dim; ++j) {
            double acc = 0.0;
            const double* row = proj.data() + static_cast<std::size_t>(j) * kStatsDim;
            for (int i = 0; i < kStatsDim; ++i) acc += row[i] * stats[i];
            out[static_cast<std::size_t>(j)] = static_cast<float>(acc);
        }
        return out;
    };
    TapFeatures f;
    f.logits = project(proj_logits_, 400);
    f.avg_pool = project(proj_avg_, 1024);
    f.max_pool = project(proj_max_, 1024);
    return f;
}

// --- tensor / feature exchange files -----------------------------------------

void save_stream_tensor(const fs::path& path, const StreamTensor& t) {
    char hdr[160];
    std::snprintf(hdr, sizeof(hdr), "CRTT1\n%s %d %d %d %d %.9g %.9g\n",
                  to_string(t.kind), t.t, t.h, t.w, t.c, t.range_lo, t.range_hi);
    std::string payload(hdr);
    payload.append(reinterpret_cast<const char*>(t.data.data()),
                   t.data.size() * sizeof(float));
    write_file_atomic(path, payload);
}

StreamTensor load_stream_tensor(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("tensor: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "CRTT1")
        throw ParseError("tensor: bad magic in " + path.string());
    if (!std::getline(in, line)) throw ParseError("tensor: missing header");
    std::istringstream hdr(line);
    std::string kind;
    StreamTensor t;
    if (!(hdr >> kind >> t.t >> t.h >> t.w >> t.c >> t.range_lo >> t.range_hi))
        throw ParseError("tensor: malformed header in " + path.string());
    t.kind = stream_from_string(kind);
    const std::size_t n =
        static_cast<std::size_t>(t.t) * t.h * t.w * static_cast<std::size_t>(t.c);
    t.data.resize(n);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw ParseError("tensor: truncated data in " + path.string());
    return t;
}

void save_tap_features(const fs::path& path, const TapFeatures& f) {
    char hdr[96];
    std::snprintf(hdr, sizeof(hdr), "CRTE1\n%zu %zu %zu\n", f.logits.size(),
                  f.avg_pool.size(), f.max_pool.size());
    std::string payload(hdr);
    auto append = [&payload](const std::vector<float>& v) {
        payload.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
    };
    append(f.logits);
    append(f.avg_pool);
    append(f.max_pool);
    write_file_atomic(path, payload);
}

TapFeatures load_tap_features(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("features: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "CRTE1")
        throw ParseError("features: bad magic in " + path.string());
    if (!std::getline(in, line)) throw ParseError("features: missing header");
    std::istringstream hdr(line);
    std::size_t nl = 0, na = 0, nm = 0;
    if (!(hdr >> nl >> na >> nm))
        throw ParseError("features: malformed header in " + path.string());
    TapFeatures f;
    auto read_vec = [&](std::vector<float>& v, std::size_t n) {
        v.resize(n);
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (!in) throw ParseError("features: truncated data in " + path.string());
    };
    read_vec(f.logits, nl);
    read_vec(f.avg_pool, na);
    read_vec(f.max_pool, nm);
    return f;
}

// --- process adapter ----------------------------------------------------------

WeightsConfig load_weights_config(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("weights config: " + path.string() + ": " + e.what());
    }
    auto entry = [&](const char* key) {
        if (!j.contains(key))
            throw ValidationError("weights config: missing '" + std::string(key) +
                                  "' in " + path.string());
        WeightsEntry w;
        w.path = fs::path(j[key].at("path").get<std::string>());
        if (w.path.is_relative()) w.path = path.parent_path() / w.path;
        w.sha256 = j[key].at("sha256").get<std::string>();
        if (!fs::exists(w.path))
            throw ValidationError("weights config: file not found: " + w.path.string());
        const std::string actual = sha256_file(w.path);
        if (actual != w.sha256)
            throw ValidationError("weights config: hash mismatch for " + w.path.string() +
                                  ": expected " + w.sha256 + ", file is " + actual);
        return w;
    };
    WeightsConfig cfg;
    cfg.rgb = entry("rgb");
    cfg.flow = entry("flow");
    cfg.command = j.at("command").get<std::string>();
    return cfg;
}

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out.push_back(c);
    }
    out.push_back('\'');
    return out;
}

fs::path unique_temp(const char* suffix) {
    static std::atomic<std::uint64_t> counter{0};
    const std::uint64_t n = counter.fetch_add(1);
    char name[96];
    std::snprintf(name, sizeof(name), "crt_%llu_%llu%s",
                  static_cast<unsigned long long>(::getpid()),
                  static_cast<unsigned long long>(n), suffix);
    return fs::temp_directory_path() / name;
}

}  // namespace

ProcessBackbone::ProcessBackbone(StreamKind stream, WeightsEntry weights,
                                 std::string command_template)
    : stream_(stream), weights_(std::move(weights)), command_(std::move(command_template)) {
    if (command_.empty()) throw ValidationError("process backbone: empty command");
}

TapFeatures ProcessBackbone::forward(const StreamTensor& input) const {
    if (input.kind != stream_)
        throw ValidationError(std::string("process backbone: input stream ") +
                              to_string(input.kind) + " does not match loaded " +
                              to_string(stream_) + " weights");
    const fs::path in_path = unique_temp("_in.crtt");
    const fs::path out_path = unique_temp("_out.crte");
    save_stream_tensor(in_path, input);

    std::string cmd = command_;
    cmd = replace_all(cmd, "{input}", shell_quote(in_path.string()));
    cmd = replace_all(cmd, "{output}", shell_quote(out_path.string()));
    cmd = replace_all(cmd, "{stream}", to_string(stream_));
    cmd = replace_all(cmd, "{weights}", shell_quote(weights_.path.string()));

    const int rc = std::system(cmd.c_str());
    auto cleanup = [&]() {
        std::error_code ec;
        fs::remove(in_path, ec);
        fs::remove(out_path, ec);
    };
    if (rc != 0) {
        cleanup();
        throw Error("process backbone: command failed (status " + std::to_string(rc) +
                    "): " + cmd);
    }
    TapFeatures f;
    try {
        f = load_tap_features(out_path);
    } catch (...) {
        cleanup();
        throw;
    }
    cleanup();
    if (f.logits.size() != 400 || f.avg_pool.size() != 1024 || f.max_pool.size() != 1024)
        throw Error("process backbone: command returned wrong feature sizes (" +
                    std::to_string(f.logits.size()) + "/" +
                    std::to_string(f.avg_pool.size()) + "/" +
                    std::to_string(f.max_pool.size()) + ")");
    return f;
}

std::unique_ptr<Backbone> make_backbone(StreamKind stream, const std::string& spec) {
    if (spec == "stub" || spec.empty())
        return std::make_unique<StubBackbone>(stream);
    const WeightsConfig cfg = load_weights_config(spec);
    return std::make_unique<ProcessBackbone>(
        stream, stream == StreamKind::RGB ? cfg.rgb : cfg.flow, cfg.command);
}

// --- extraction & fusion -------------------------------------------------------

std::vector<float> tap_vector(const TapFeatures& f, TapPoint tap) {
    if (tap == TapPoint::LOGITS_400) return f.logits;
    if (f.avg_pool.size() != f.max_pool.size())
        throw Error("extract: avg/max pool size mismatch");
    std::vector<float> out(f.avg_pool.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = 0.5f * (f.avg_pool[i] + f.max_pool[i]);
    return out;
}

Embedding extract_embedding(const Backbone& backbone, const StreamTensor& input,
                            TapPoint tap, ContextMode context) {
    const TapFeatures f = backbone.forward(input);
    Embedding e;
    e.vector = tap_vector(f, tap);
    e.tap = tap;
    e.streams = StreamSet::single(input.kind);
    e.context = context;
    validate_embedding(e);
    return e;
}

Embedding fuse(const Embedding& a, const Embedding& b, FusionMode mode) {
    if (a.tap != b.tap)
        throw ValidationError("fuse: tap mismatch (" + std::string(to_string(a.tap)) +
                              " vs " + to_string(b.tap) + ")");
    if (a.context != b.context)
        throw ValidationError("fuse: context mismatch (" +
                              std::string(to_string(a.context)) + " vs " +
                              to_string(b.context) + ")");
    if (a.dim() != b.dim())
        throw ValidationError("fuse: dim mismatch (" + std::to_string(a.dim()) + " vs " +
                              std::to_string(b.dim()) + ")");
    if (!a.streams.disjoint(b.streams))
        throw ValidationError("fuse: overlapping streams (" + to_string(a.streams) +
                              " vs " + to_string(b.streams) + ")");

    Embedding out;
    out.tap = a.tap;
    out.context = a.context;
    out.fusion = mode;
    out.streams = a.streams.united(b.streams);
    if (mode == FusionMode::SUM) {
        out.vector.resize(a.vector.size());
        for (std::size_t i = 0; i < out.vector.size(); ++i)
            out.vector[i] = a.vector[i] + b.vector[i];
    } else {
        if (!a.streams.is_single() || !b.streams.is_single())
            throw ValidationError("fuse: concat expects two single-stream embeddings");
        // canonical order: RGB block first, regardless of argument order
        const Embedding& first = a.streams.rgb ? a : b;
        const Embedding& second = a.streams.rgb ? b : a;
        out.vector.reserve(a.vector.size() * 2);
        out.vector.insert(out.vector.end(), first.vector.begin(), first.vector.end());
        out.vector.insert(out.vector.end(), second.vector.begin(), second.vector.end());
    }
    validate_embedding(out);
    return out;
}

}  // namespace crt
