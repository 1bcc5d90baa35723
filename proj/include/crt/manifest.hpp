#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace crt {

// One (runner, recording point) unit of the dataset.
struct ObservationRecord {
    std::string runner_id;
    std::string rp_id;
    std::string clip_path;
    std::string track_path;
    std::int64_t crt_seconds = 0;  // cumulative race time, integer seconds
    int source_line = 0;           // manifest line, for error messages

    bool operator==(const ObservationRecord& o) const {
        return runner_id == o.runner_id && rp_id == o.rp_id &&
               clip_path == o.clip_path && track_path == o.track_path &&
               crt_seconds == o.crt_seconds;
    }
};

// Dataset manifest. On disk this is a line-oriented UTF-8 file:
//
//   # comment
//   @rps RP84,RP95,RP110
//   @fps 25
//   @clip_seconds 7
//   runner_001,RP84,clips/runner_001_rp84.rvc,tracks/runner_001_rp84.csv,41520
//
// Records are comma separated in the field order above. '@' lines are header
// directives, '#' lines are ignored. The @rps order defines recording-point
// order along the course.
struct Manifest {
    std::vector<ObservationRecord> records;
    std::vector<std::string> recording_points;  // ordered, length P+1
    double fps = 25.0;
    double clip_seconds = 7.0;

    int rp_index(const std::string& rp_id) const;  // -1 when unknown
    std::size_t rp_count() const { return recording_points.size(); }

    bool operator==(const Manifest& o) const {
        return records == o.records && recording_points == o.recording_points &&
               fps == o.fps && clip_seconds == o.clip_seconds;
    }
};

// Parses and validates. Throws ParseError with the offending line number on
// malformed input and ValidationError on invariant violations (duplicate
// (runner, RP) pair, unknown RP, non-monotone per-runner CRT, empty manifest).
Manifest load_manifest(const std::filesystem::path& path);

// Validation only; load_manifest calls this after parsing.
void validate_manifest(const Manifest& m);

void save_manifest(const std::filesystem::path& path, const Manifest& m);

// Identifiers become cache/store file names, so they are restricted to a
// filename-safe alphabet at load time.
bool valid_identifier(const std::string& id);

}  // namespace crt
