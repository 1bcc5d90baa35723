#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crt/kinds.hpp"

namespace crt {

struct CacheKey {
    std::string runner_id;
    std::string rp_id;
    ContextMode context = ContextMode::BB;
    StreamKind stream = StreamKind::RGB;
    TapPoint tap = TapPoint::LOGITS_400;

    bool operator==(const CacheKey&) const = default;
};

struct EmbeddingCacheEntry {
    CacheKey key;
    std::vector<float> vector;
    int dim = 0;                // must equal vector.size()
    std::string config_tag;     // hash of the producing configuration
};

// Backbone outputs are the pipeline's dominant cost, so they are cached on
// disk: one little-endian float32 payload per key plus a plain-text sidecar
// (dim, dtype, checksum, config tag). Layout is one directory per
// (context, tap) with file names from (runner, rp, stream):
//
//   <root>/bb_logits400/runner_001__RP84__rgb.f32
//   <root>/bb_logits400/runner_001__RP84__rgb.meta
//
// Writes are write-then-rename, so concurrent writers to the same key are
// last-writer-wins and readers never see partial entries.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }

    // Throws on dim/vector-length mismatch and on I/O failure.
    void write(const EmbeddingCacheEntry& entry) const;

    // Absent key is a nullopt, not an error. A present-but-corrupt entry
    // (checksum or size mismatch) throws IoError.
    std::optional<EmbeddingCacheEntry> read(const CacheKey& key) const;

    bool contains(const CacheKey& key) const;

    // True when payload+sidecar exist and the checksum verifies; used by
    // `extract` to re-extract corrupt entries instead of trusting them.
    bool verify(const CacheKey& key) const;

    void remove(const CacheKey& key) const;

    std::filesystem::path payload_path(const CacheKey& key) const;
    std::filesystem::path sidecar_path(const CacheKey& key) const;

private:
    std::filesystem::path root_;
};

}  // namespace crt
