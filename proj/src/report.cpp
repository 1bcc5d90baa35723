#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "crt/error.hpp"
#include "crt/evaluation.hpp"
#include "crt/media.hpp"

namespace crt {

namespace {

using nlohmann::json;

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["tap"] = to_string(c.tap);
    j["streams"] = to_string(c.streams);
    j["fusion"] = c.fusion ? json(to_string(*c.fusion)) : json(nullptr);
    j["context"] = to_string(c.context);
    j["regressor"] = to_string(c.regressor);
    j["folds"] = c.folds;
    j["repetitions"] = c.repetitions;
    j["seed"] = c.seed;
    j["group_by_runner"] = c.group_by_runner;
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    c.tap = tap_from_string(j.at("tap").get<std::string>());
    const std::string streams = j.at("streams").get<std::string>();
    if (streams == "rgb+flow")
        c.streams = StreamSet::both();
    else
        c.streams = StreamSet::single(stream_from_string(streams));
    if (j.at("fusion").is_null())
        c.fusion = std::nullopt;
    else
        c.fusion = fusion_from_string(j.at("fusion").get<std::string>());
    c.context = context_from_string(j.at("context").get<std::string>());
    c.regressor = regressor_from_string(j.at("regressor").get<std::string>());
    c.folds = j.at("folds").get<int>();
    c.repetitions = j.at("repetitions").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.group_by_runner = j.at("group_by_runner").get<bool>();
    return c;
}

}  // namespace

void save_report_jsonl(const std::filesystem::path& path, const EvaluationReport& report) {
    std::ostringstream out;
    json hdr;
    hdr["type"] = "report";
    hdr["version"] = 1;
    hdr["label"] = report.config.cell_label();
    hdr["config"] = config_to_json(report.config);
    hdr["mae_normalized"] = report.mae_normalized;
    hdr["mae_minutes"] = report.mae_minutes;
    hdr["quartiles"] = {{"cumulative", report.quartiles.cumulative},
                        {"per_bucket", report.quartiles.per_bucket},
                        {"boundaries", report.quartiles.boundaries}};
    hdr["scaler"] = {{"min0", report.scaler.min0}, {"maxP", report.scaler.maxP}};
    hdr["clamped_targets"] = report.clamped_targets;
    hdr["rows"] = report.fold_predictions.size();
    out << hdr.dump() << "\n";
    for (const auto& r : report.fold_predictions) {
        json row;
        row["type"] = "row";
        row["rep"] = r.repetition;
        row["fold"] = r.fold;
        row["runner"] = r.runner_id;
        row["rp"] = r.rp_id;
        row["y_true"] = r.y_true;
        row["y_pred"] = r.y_pred;
        out << row.dump() << "\n";
    }
    write_file_atomic(path, out.str());
}

EvaluationReport load_report_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("report: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("report: empty file " + path.string());

    EvaluationReport report;
    try {
        const json hdr = json::parse(line);
        if (hdr.at("type") != "report") throw ParseError("report: first record is not a header");
        report.config = config_from_json(hdr.at("config"));
        report.mae_normalized = hdr.at("mae_normalized").get<double>();
        report.mae_minutes = hdr.at("mae_minutes").get<double>();
        const auto& q = hdr.at("quartiles");
        report.quartiles.cumulative = q.at("cumulative").get<std::array<double, 4>>();
        report.quartiles.per_bucket = q.at("per_bucket").get<std::array<double, 4>>();
        report.quartiles.boundaries = q.at("boundaries").get<std::array<double, 3>>();
        report.scaler.min0 = hdr.at("scaler").at("min0").get<std::int64_t>();
        report.scaler.maxP = hdr.at("scaler").at("maxP").get<std::int64_t>();
        report.clamped_targets = hdr.at("clamped_targets").get<int>();
        const std::size_t expect_rows = hdr.at("rows").get<std::size_t>();

        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json row = json::parse(line);
            if (row.at("type") != "row") throw ParseError("report: unexpected record type");
            PredictionRow r;
            r.repetition = row.at("rep").get<int>();
            r.fold = row.at("fold").get<int>();
            r.runner_id = row.at("runner").get<std::string>();
            r.rp_id = row.at("rp").get<std::string>();
            r.y_true = row.at("y_true").get<double>();
            r.y_pred = row.at("y_pred").get<double>();
            report.fold_predictions.push_back(std::move(r));
        }
        if (report.fold_predictions.size() != expect_rows)
            throw ParseError("report: header declares " + std::to_string(expect_rows) +
                             " rows, file has " +
                             std::to_string(report.fold_predictions.size()));
    } catch (const json::exception& e) {
        throw ParseError("report: " + path.string() + ": " + e.what());
    }
    return report;
}

double recompute_mae(const EvaluationReport& report) {
    if (report.fold_predictions.empty())
        throw ValidationError("recompute_mae: report has no rows");
    double s = 0.0;
    for (const auto& r : report.fold_predictions) s += std::abs(r.y_true - r.y_pred);
    return s / static_cast<double>(report.fold_predictions.size());
}

// --- rendering ---------------------------------------------------------------

namespace {

struct GridIndex {
    std::vector<std::string> cells;       // row labels, first-appearance order
    std::vector<RegressorKind> columns;   // column order
    // mae by (cell, regressor)
    std::vector<std::vector<double>> mae;

    explicit GridIndex(const std::vector<EvaluationReport>& reports) {
        for (const auto& r : reports) {
            const std::string label = r.config.cell_label();
            if (std::find(cells.begin(), cells.end(), label) == cells.end())
                cells.push_back(label);
            if (std::find(columns.begin(), columns.end(), r.config.regressor) ==
                columns.end())
                columns.push_back(r.config.regressor);
        }
        mae.assign(cells.size(),
                   std::vector<double>(columns.size(), std::nan("")));
        for (const auto& r : reports) {
            const auto ci = static_cast<std::size_t>(
                std::find(cells.begin(), cells.end(), r.config.cell_label()) -
                cells.begin());
            const auto ri = static_cast<std::size_t>(
                std::find(columns.begin(), columns.end(), r.config.regressor) -
                columns.begin());
            mae[ci][ri] = r.mae_normalized;
        }
    }
};

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

// display width of the UTF-8 labels (the union sign is 3 bytes, 1 column)
std::size_t display_width(const std::string& s) {
    std::size_t w = 0;
    for (std::size_t i = 0; i < s.size();) {
        const auto c = static_cast<unsigned char>(s[i]);
        i += c < 0x80 ? 1 : c < 0xe0 ? 2 : c < 0xf0 ? 3 : 4;
        ++w;
    }
    return w;
}

}  // namespace

std::string render_table_text(const std::vector<EvaluationReport>& reports) {
    if (reports.empty()) return "(no reports)\n";
    const GridIndex grid(reports);

    std::size_t label_w = std::string("#Embedd.-Stream-Cont.").size();
    for (const auto& c : grid.cells) label_w = std::max(label_w, display_width(c));

    std::ostringstream out;
    out << "#Embedd.-Stream-Cont.";
    for (std::size_t p = std::string("#Embedd.-Stream-Cont.").size(); p < label_w; ++p)
        out << ' ';
    for (RegressorKind k : grid.columns) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "  %6s", upper(to_string(k)).c_str());
        out << buf;
    }
    out << "\n";

    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        if (i > 0 && i % 4 == 0) out << "\n";  // block separator, four rows per block
        out << grid.cells[i];
        for (std::size_t p = display_width(grid.cells[i]); p < label_w; ++p) out << ' ';
        for (std::size_t j = 0; j < grid.columns.size(); ++j) {
            char buf[16];
            if (std::isnan(grid.mae[i][j]))
                std::snprintf(buf, sizeof(buf), "  %6s", "-");
            else
                std::snprintf(buf, sizeof(buf), "  %6.3f", grid.mae[i][j]);
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

std::string render_table_csv(const std::vector<EvaluationReport>& reports) {
    std::ostringstream out;
    out << "cell,regressor,mae_normalized,mae_minutes,clamped_targets,rows\n";
    for (const auto& r : reports) {
        char buf[64];
        out << r.config.cell_label() << "," << to_string(r.config.regressor) << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", r.mae_normalized);
        out << buf << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", r.mae_minutes);
        out << buf << "," << r.clamped_targets << "," << r.fold_predictions.size() << "\n";
    }
    return out.str();
}

std::string render_quartiles_csv(const std::vector<EvaluationReport>& reports) {
    std::ostringstream out;
    out << "cell,regressor,quartile,cumulative_mae,bucket_mae\n";
    for (const auto& r : reports) {
        for (int q = 0; q < 4; ++q) {
            char buf[64];
            out << r.config.cell_label() << "," << to_string(r.config.regressor) << ",Q"
                << (q + 1) << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", r.quartiles.cumulative[static_cast<std::size_t>(q)]);
            out << buf << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", r.quartiles.per_bucket[static_cast<std::size_t>(q)]);
            out << buf << "\n";
        }
    }
    return out.str();
}

std::string render_quartiles_svg(const std::vector<EvaluationReport>& reports) {
    const int width = 640, height = 420;
    const int ml = 60, mr = 160, mt = 30, mb = 50;
    const double plot_w = width - ml - mr;
    const double plot_h = height - mt - mb;

    double max_mae = 1e-9;
    for (const auto& r : reports)
        for (double v : r.quartiles.cumulative) max_mae = std::max(max_mae, v);
    max_mae *= 1.1;

    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // axes
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << mt + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w
        << "\" y2=\"" << mt + plot_h << "\" stroke=\"black\"/>\n";
    for (int q = 0; q < 4; ++q) {
        const double x = ml + plot_w * (q + 0.5) / 4.0;
        svg << "<text x=\"" << x << "\" y=\"" << mt + plot_h + 20
            << "\" text-anchor=\"middle\" font-size=\"12\">Q" << (q + 1) << "</text>\n";
    }
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = max_mae * tick / 4.0;
        const double y = mt + plot_h * (1.0 - static_cast<double>(tick) / 4.0);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", v);
        svg << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << buf << "</text>\n";
        svg << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + plot_w
            << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
    }
    svg << "<text x=\"" << ml - 45 << "\" y=\"" << mt + plot_h / 2
        << "\" font-size=\"12\" transform=\"rotate(-90 " << ml - 45 << " "
        << mt + plot_h / 2 << ")\" text-anchor=\"middle\">MAE</text>\n";

    int series = 0;
    for (const auto& r : reports) {
        const char* color = palette[series % 8];
        std::ostringstream points;
        for (int q = 0; q < 4; ++q) {
            const double x = ml + plot_w * (q + 0.5) / 4.0;
            const double y =
                mt + plot_h * (1.0 - r.quartiles.cumulative[static_cast<std::size_t>(q)] / max_mae);
            points << x << "," << y << " ";
        }
        svg << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\" points=\"" << points.str() << "\"/>\n";
        const double ly = mt + 16 + 16 * series;
        svg << "<line x1=\"" << ml + plot_w + 10 << "\" y1=\"" << ly - 4 << "\" x2=\""
            << ml + plot_w + 30 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << ml + plot_w + 35 << "\" y=\"" << ly
            << "\" font-size=\"11\">" << r.config.cell_label() << " "
            << upper(to_string(r.config.regressor)) << "</text>\n";
        ++series;
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace crt
