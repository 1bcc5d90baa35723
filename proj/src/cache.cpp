#include "crt/cache.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "crt/error.hpp"
#include "crt/media.hpp"
#include "crt/rng.hpp"

namespace crt {

namespace fs = std::filesystem;

namespace {

std::string entry_stem(const CacheKey& key) {
    return key.runner_id + "__" + key.rp_id + "__" + to_string(key.stream);
}

std::string entry_dir(const CacheKey& key) {
    return std::string(to_string(key.context)) + "_" + to_string(key.tap);
}

}  // namespace

fs::path EmbeddingCache::payload_path(const CacheKey& key) const {
    return root_ / entry_dir(key) / (entry_stem(key) + ".f32");
}

fs::path EmbeddingCache::sidecar_path(const CacheKey& key) const {
    return root_ / entry_dir(key) / (entry_stem(key) + ".meta");
}

void EmbeddingCache::write(const EmbeddingCacheEntry& entry) const {
    if (entry.dim != static_cast<int>(entry.vector.size()))
        throw ValidationError("cache: declared dim " + std::to_string(entry.dim) +
                              " != vector length " +
                              std::to_string(entry.vector.size()));
    if (entry.dim <= 0) throw ValidationError("cache: empty vector");

    const std::size_t nbytes = entry.vector.size() * sizeof(float);
    const std::uint64_t checksum = fnv1a64(entry.vector.data(), nbytes);

    write_file_atomic(payload_path(entry.key), entry.vector.data(), nbytes);

    char cs[32];
    std::snprintf(cs, sizeof(cs), "%016llx", static_cast<unsigned long long>(checksum));
    std::ostringstream meta;
    meta << "dim " << entry.dim << "\n"
         << "dtype f32\n"
         << "checksum " << cs << "\n"
         << "config " << entry.config_tag << "\n";
    write_file_atomic(sidecar_path(entry.key), meta.str());
}

std::optional<EmbeddingCacheEntry> EmbeddingCache::read(const CacheKey& key) const {
    const fs::path payload = payload_path(key);
    const fs::path sidecar = sidecar_path(key);
    if (!fs::exists(payload) || !fs::exists(sidecar)) return std::nullopt;

    EmbeddingCacheEntry entry;
    entry.key = key;
    std::uint64_t expect_checksum = 0;
    {
        std::ifstream meta(sidecar);
        if (!meta) throw IoError("cache: cannot open sidecar " + sidecar.string());
        std::string k, v;
        try {
            while (meta >> k >> v) {
                if (k == "dim") entry.dim = std::stoi(v);
                else if (k == "checksum") expect_checksum = std::stoull(v, nullptr, 16);
                else if (k == "config") entry.config_tag = v;
                else if (k == "dtype" && v != "f32")
                    throw IoError("cache: unsupported dtype '" + v + "' in " +
                                  sidecar.string());
            }
        } catch (const std::logic_error&) {  // stoi/stoull on mangled text
            throw IoError("cache: corrupt sidecar: " + sidecar.string());
        }
        if (entry.dim <= 0)
            throw IoError("cache: sidecar missing dim: " + sidecar.string());
    }

    const std::string bytes = read_file(payload);
    if (bytes.size() != static_cast<std::size_t>(entry.dim) * sizeof(float))
        throw IoError("cache: payload size mismatch for " + payload.string() +
                      " (sidecar dim " + std::to_string(entry.dim) + ")");
    if (fnv1a64(bytes.data(), bytes.size()) != expect_checksum)
        throw IoError("cache: checksum mismatch for " + payload.string());

    entry.vector.resize(static_cast<std::size_t>(entry.dim));
    std::memcpy(entry.vector.data(), bytes.data(), bytes.size());
    return entry;
}

bool EmbeddingCache::contains(const CacheKey& key) const {
    return fs::exists(payload_path(key)) && fs::exists(sidecar_path(key));
}

bool EmbeddingCache::verify(const CacheKey& key) const {
    if (!contains(key)) return false;
    try {
        read(key);
        return true;
    } catch (const Error&) {
        return false;
    }
}

void EmbeddingCache::remove(const CacheKey& key) const {
    std::error_code ec;
    fs::remove(payload_path(key), ec);
    fs::remove(sidecar_path(key), ec);
}

}  // namespace crt
