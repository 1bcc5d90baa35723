#include "crt/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "crt/error.hpp"
#include "crt/media.hpp"

namespace crt {

bool valid_identifier(const std::string& id) {
    if (id.empty()) return false;
    for (char c : id) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
              c == '.'))
            return false;
    }
    return true;
}

int Manifest::rp_index(const std::string& rp_id) const {
    for (std::size_t i = 0; i < recording_points.size(); ++i)
        if (recording_points[i] == rp_id) return static_cast<int>(i);
    return -1;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line,
                             const std::string& what) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("manifest: cannot open " + path.string());

    Manifest m;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = strip(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line[0] == '@') {
            std::istringstream ss(line);
            std::string key;
            ss >> key;
            if (key == "@rps") {
                std::string rest = strip(line.substr(4));
                for (const auto& tokRaw : split(rest, ',')) {
                    const std::string tok = strip(tokRaw);
                    if (!valid_identifier(tok))
                        parse_fail(path, lineno, "bad recording-point id '" + tok + "'");
                    m.recording_points.push_back(tok);
                }
            } else if (key == "@fps") {
                double v;
                if (!(ss >> v) || v <= 0) parse_fail(path, lineno, "bad @fps value");
                m.fps = v;
            } else if (key == "@clip_seconds") {
                double v;
                if (!(ss >> v) || v <= 0)
                    parse_fail(path, lineno, "bad @clip_seconds value");
                m.clip_seconds = v;
            } else {
                parse_fail(path, lineno, "unknown directive '" + key + "'");
            }
            continue;
        }

        const auto fields = split(line, ',');
        if (fields.size() != 5)
            parse_fail(path, lineno,
                       "expected 5 comma-separated fields "
                       "(runner_id,rp_id,clip_path,track_path,crt_seconds), got " +
                           std::to_string(fields.size()));
        ObservationRecord rec;
        rec.runner_id = strip(fields[0]);
        rec.rp_id = strip(fields[1]);
        rec.clip_path = strip(fields[2]);
        rec.track_path = strip(fields[3]);
        rec.source_line = lineno;
        if (!valid_identifier(rec.runner_id))
            parse_fail(path, lineno, "bad runner_id '" + rec.runner_id + "'");
        if (!valid_identifier(rec.rp_id))
            parse_fail(path, lineno, "bad rp_id '" + rec.rp_id + "'");
        const std::string crt = strip(fields[4]);
        try {
            std::size_t pos = 0;
            rec.crt_seconds = std::stoll(crt, &pos);
            if (pos != crt.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            parse_fail(path, lineno, "bad crt_seconds '" + crt + "'");
        }
        if (rec.crt_seconds < 0)
            parse_fail(path, lineno, "crt_seconds must be non-negative");
        m.records.push_back(std::move(rec));
    }

    validate_manifest(m);
    return m;
}

void validate_manifest(const Manifest& m) {
    if (m.recording_points.empty())
        throw ValidationError("manifest: no @rps directive (recording points unknown)");
    {
        std::set<std::string> seen;
        for (const auto& rp : m.recording_points)
            if (!seen.insert(rp).second)
                throw ValidationError("manifest: duplicate recording point '" + rp + "'");
    }
    if (m.records.empty()) throw ValidationError("manifest: empty manifest");

    std::map<std::pair<std::string, std::string>, int> first_line;
    for (const auto& rec : m.records) {
        if (m.rp_index(rec.rp_id) < 0)
            throw ValidationError("manifest:" + std::to_string(rec.source_line) +
                                  ": unknown recording point '" + rec.rp_id + "'");
        auto key = std::make_pair(rec.runner_id, rec.rp_id);
        auto [it, inserted] = first_line.emplace(key, rec.source_line);
        if (!inserted)
            throw ValidationError("manifest: duplicate (" + rec.runner_id + ", " +
                                  rec.rp_id + ") at lines " + std::to_string(it->second) +
                                  " and " + std::to_string(rec.source_line));
    }

    // per-runner CRT must be strictly increasing along recording-point order
    std::map<std::string, std::vector<std::pair<int, const ObservationRecord*>>> per_runner;
    for (const auto& rec : m.records)
        per_runner[rec.runner_id].emplace_back(m.rp_index(rec.rp_id), &rec);
    for (auto& [runner, obs] : per_runner) {
        std::sort(obs.begin(), obs.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 1; i < obs.size(); ++i) {
            if (obs[i].second->crt_seconds <= obs[i - 1].second->crt_seconds)
                throw ValidationError(
                    "manifest: non-monotone CRT for runner '" + runner + "': " +
                    std::to_string(obs[i - 1].second->crt_seconds) + "s at " +
                    obs[i - 1].second->rp_id + " vs " +
                    std::to_string(obs[i].second->crt_seconds) + "s at " +
                    obs[i].second->rp_id);
        }
    }
}

void save_manifest(const std::filesystem::path& path, const Manifest& m) {
    std::ostringstream out;
    out << "@rps ";
    for (std::size_t i = 0; i < m.recording_points.size(); ++i) {
        if (i) out << ",";
        out << m.recording_points[i];
    }
    out << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "@fps %.17g\n", m.fps);
    out << buf;
    std::snprintf(buf, sizeof(buf), "@clip_seconds %.17g\n", m.clip_seconds);
    out << buf;
    for (const auto& rec : m.records) {
        out << rec.runner_id << "," << rec.rp_id << "," << rec.clip_path << ","
            << rec.track_path << "," << rec.crt_seconds << "\n";
    }
    write_file_atomic(path, out.str());
}

}  // namespace crt
