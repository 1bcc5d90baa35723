#pragma once

#include <iostream>
#include <string>
#include <utility>
#include <vector>

namespace crt {

using LogFields = std::vector<std::pair<std::string, std::string>>;

// One structured line on stderr: "[level] event key=value ...". Values with
// spaces are quoted so lines stay machine-splittable.
inline void log_line(const char* level, const std::string& event, const LogFields& fields) {
    std::ostream& out = std::cerr;
    out << "[" << level << "] " << event;
    for (const auto& [k, v] : fields) {
        out << " " << k << "=";
        if (v.find_first_of(" \t\"") != std::string::npos) {
            out << '"';
            for (char c : v) {
                if (c == '"') out << '\\';
                out << c;
            }
            out << '"';
        } else {
            out << v;
        }
    }
    out << "\n";
}

inline void log_info(const std::string& event, const LogFields& fields = {}) {
    log_line("info", event, fields);
}
inline void log_warn(const std::string& event, const LogFields& fields = {}) {
    log_line("warn", event, fields);
}
inline void log_error(const std::string& event, const LogFields& fields = {}) {
    log_line("error", event, fields);
}

}  // namespace crt
