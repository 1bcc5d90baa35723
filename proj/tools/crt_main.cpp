// crt - cumulative race time regression pipeline
//
//   preprocess   isolate the runner in every clip (bb / sb contexts)
//   extract      run the two-stream backbone, populate the embedding cache
//   evaluate     repeated k-fold cross-validation for one configuration
//   ablate       full 16-cell grid x regressors, result table + curves
//   report       print a stored report's MAE (normalized or minutes)
//   gridsearch   small hyperparameter sweep for one regressor family

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"

#include "crt/backbone.hpp"
#include "crt/error.hpp"
#include "crt/log.hpp"
#include "crt/pipeline.hpp"

namespace {

struct CliState {
    std::string config_path;
    crt::PipelineConfig cfg;

    // flag staging (only applied when the user passed them)
    std::string manifest, store, cache, out, backbone, params_path;
    std::string contexts, taps, regressors;
    int folds = -1, reps = -1, workers = -1, track_id = -1, input_size = -1;
    long long seed = -1;
    bool stub = false, force = false, group_by_runner = false;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// config file < CRT_CACHE_ROOT < flags
void finalize(CliState& s, const CLI::App& cmd) {
    if (!s.config_path.empty()) s.cfg = crt::load_pipeline_config(s.config_path);

    if (const char* env = std::getenv("CRT_CACHE_ROOT"); env && *env)
        s.cfg.cache_dir = env;

    auto passed = [&](const char* name) {
        const CLI::Option* opt = cmd.get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    if (passed("--manifest")) s.cfg.manifest_path = s.manifest;
    if (passed("--store")) s.cfg.store_dir = s.store;
    if (passed("--cache")) s.cfg.cache_dir = s.cache;
    if (passed("--out")) s.cfg.out_dir = s.out;
    if (passed("--weights")) s.cfg.backbone_spec = s.backbone;
    if (s.stub) s.cfg.backbone_spec = "stub";
    if (passed("--params")) s.cfg.params = crt::load_regressor_params(s.params_path);
    if (passed("--context")) {
        s.cfg.contexts.clear();
        if (s.contexts == "both") {
            s.cfg.contexts = {crt::ContextMode::BB, crt::ContextMode::SB};
        } else {
            for (const auto& c : split_list(s.contexts))
                s.cfg.contexts.push_back(crt::context_from_string(c));
        }
    }
    if (passed("--tap")) {
        s.cfg.taps.clear();
        if (s.taps == "both") {
            s.cfg.taps = {crt::TapPoint::LOGITS_400, crt::TapPoint::PENULTIMATE_1024};
        } else {
            for (const auto& t : split_list(s.taps))
                s.cfg.taps.push_back(crt::tap_from_string(t));
        }
    }
    if (passed("--regressors")) {
        s.cfg.regressors.clear();
        if (s.regressors == "all") {
            s.cfg.regressors = crt::all_regressor_kinds();
        } else {
            for (const auto& r : split_list(s.regressors))
                s.cfg.regressors.push_back(crt::regressor_from_string(r));
        }
    }
    if (s.folds > 0) s.cfg.folds = s.folds;
    if (s.reps > 0) s.cfg.repetitions = s.reps;
    if (s.seed >= 0) s.cfg.seed = static_cast<std::uint64_t>(s.seed);
    if (s.workers > 0) s.cfg.workers = s.workers;
    if (s.track_id >= 0) s.cfg.track_id = s.track_id;
    if (s.input_size > 0) s.cfg.input_size = s.input_size;
    if (s.force) s.cfg.force = true;
    if (s.group_by_runner) s.cfg.group_by_runner = true;
}

void add_common_flags(CLI::App* cmd, CliState& s) {
    cmd->add_option("--config", s.config_path, "pipeline config JSON; flags override it");
    cmd->add_option("--manifest", s.manifest, "dataset manifest file");
    cmd->add_option("--store", s.store, "processed clip store directory");
    cmd->add_option("--cache", s.cache,
                    "embedding cache root (CRT_CACHE_ROOT overrides config)");
    cmd->add_option("--out", s.out, "output directory for reports");
    cmd->add_option("--workers", s.workers, "worker pool size");
    cmd->add_option("--seed", s.seed, "base seed; repetition r uses seed+r");
}

// cell flags for evaluate/gridsearch
struct CellFlags {
    std::string tap = "1024", streams = "both", fusion = "concat", context = "sb",
                regressor = "mlp";
};

crt::ExperimentConfig build_cell(const CellFlags& f, const crt::PipelineConfig& cfg) {
    crt::ExperimentConfig cell;
    cell.tap = crt::tap_from_string(f.tap);
    if (f.streams == "both" || f.streams == "rgb+flow") {
        cell.streams = crt::StreamSet::both();
        cell.fusion = crt::fusion_from_string(f.fusion);
    } else {
        cell.streams = crt::StreamSet::single(crt::stream_from_string(f.streams));
        cell.fusion = std::nullopt;
    }
    cell.context = crt::context_from_string(f.context);
    cell.regressor = crt::regressor_from_string(f.regressor);
    cell.folds = cfg.folds;
    cell.repetitions = cfg.repetitions;
    cell.seed = cfg.seed;
    cell.group_by_runner = cfg.group_by_runner;
    cell.validate();
    return cell;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cumulative race time regression from short race footage"};
    app.require_subcommand(1);

    CliState s;

    auto* preprocess = app.add_subcommand("preprocess", "isolate the runner per clip");
    add_common_flags(preprocess, s);
    preprocess->add_option("--context", s.contexts, "bb, sb or both (default both)");
    preprocess->add_option("--track-id", s.track_id, "designated runner track id");
    preprocess->add_flag("--force", s.force, "recompute existing outputs");

    auto* extract = app.add_subcommand("extract", "populate the embedding cache");
    add_common_flags(extract, s);
    extract->add_option("--context", s.contexts, "bb, sb or both (default both)");
    extract->add_option("--tap", s.taps, "400, 1024 or both (default both)");
    extract->add_option("--weights", s.backbone, "weights config JSON (hash-pinned)");
    extract->add_flag("--stub", s.stub, "use the deterministic test backbone");
    extract->add_option("--size", s.input_size, "backbone input resolution (default 224)");
    extract->add_flag("--force", s.force, "recompute existing cache entries");

    CellFlags cell_flags;
    auto* evaluate = app.add_subcommand("evaluate", "cross-validate one configuration");
    add_common_flags(evaluate, s);
    evaluate->add_option("--tap", cell_flags.tap, "400 or 1024");
    evaluate->add_option("--streams", cell_flags.streams, "rgb, flow or both");
    evaluate->add_option("--fusion", cell_flags.fusion, "sum or concat (two streams)");
    evaluate->add_option("--context", cell_flags.context, "bb or sb");
    evaluate->add_option("--regressor", cell_flags.regressor, "lr|rf|gb|svm|mlp");
    evaluate->add_option("--folds", s.folds, "cross-validation folds (default 10)");
    evaluate->add_option("--repetitions", s.reps, "protocol repetitions (default 20)");
    evaluate->add_flag("--group-by-runner", s.group_by_runner,
                       "runner-disjoint folds (leakage-strict variant)");
    evaluate->add_option("--params", s.params_path, "regressor hyperparameter JSON");

    auto* ablate = app.add_subcommand("ablate", "run the full 16-cell grid");
    add_common_flags(ablate, s);
    ablate->add_option("--regressors", s.regressors, "comma list or 'all'");
    ablate->add_option("--folds", s.folds, "cross-validation folds (default 10)");
    ablate->add_option("--repetitions", s.reps, "protocol repetitions (default 20)");
    ablate->add_flag("--group-by-runner", s.group_by_runner,
                     "runner-disjoint folds (leakage-strict variant)");
    ablate->add_option("--params", s.params_path, "regressor hyperparameter JSON");

    std::string report_path, report_units = "minutes";
    auto* report = app.add_subcommand("report", "print a stored report's MAE");
    report->add_option("--in", report_path, "report JSONL file")->required();
    report->add_option("--units", report_units, "minutes or normalized");

    auto* grid = app.add_subcommand("gridsearch", "hyperparameter sweep for one cell");
    add_common_flags(grid, s);
    grid->add_option("--tap", cell_flags.tap, "400 or 1024");
    grid->add_option("--streams", cell_flags.streams, "rgb, flow or both");
    grid->add_option("--fusion", cell_flags.fusion, "sum or concat");
    grid->add_option("--context", cell_flags.context, "bb or sb");
    grid->add_option("--regressor", cell_flags.regressor, "family to sweep");
    grid->add_option("--folds", s.folds, "cross-validation folds");
    grid->add_option("--repetitions", s.reps, "protocol repetitions");

    // internal: makes the external-command backbone protocol testable with the
    // stub; used as the {input}/{output} command in tests
    std::string sf_in, sf_out;
    auto* stub_forward = app.add_subcommand("stub-forward", "");
    stub_forward->group("");  // hidden
    stub_forward->add_option("--input", sf_in)->required();
    stub_forward->add_option("--output", sf_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (stub_forward->parsed()) {
            const crt::StreamTensor t = crt::load_stream_tensor(sf_in);
            const crt::StubBackbone backbone(t.kind);
            crt::save_tap_features(sf_out, backbone.forward(t));
            return crt::kExitOk;
        }

        auto* parsed = app.get_subcommands().front();
        finalize(s, *parsed);

        if (preprocess->parsed()) return crt::preprocess_command(s.cfg);
        if (extract->parsed()) return crt::extract_command(s.cfg);
        if (evaluate->parsed())
            return crt::evaluate_command(s.cfg, build_cell(cell_flags, s.cfg));
        if (ablate->parsed()) return crt::ablate_command(s.cfg);
        if (report->parsed()) return crt::report_command(report_path, report_units);
        if (grid->parsed())
            return crt::gridsearch_command(s.cfg, build_cell(cell_flags, s.cfg));
    } catch (const crt::Error& e) {
        crt::log_error("command_failed", {{"error", e.what()}});
        return crt::kExitConfig;
    } catch (const std::exception& e) {
        crt::log_error("command_failed", {{"error", e.what()}});
        return crt::kExitConfig;
    }
    return crt::kExitConfig;
}
