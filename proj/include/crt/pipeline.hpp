#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crt/evaluation.hpp"

namespace crt {

// Everything the CLI commands need, assembled from the config file, flag
// overrides and the CRT_CACHE_ROOT environment variable (flags win over env,
// env wins over file). Serializable so reports can name the exact setup.
struct PipelineConfig {
    std::filesystem::path manifest_path;
    std::filesystem::path store_dir;   // processed clip store
    std::filesystem::path cache_dir;   // embedding cache root
    std::filesystem::path out_dir = "reports";
    std::string backbone_spec = "stub";  // "stub" or a weights-config path
    std::vector<ContextMode> contexts = {ContextMode::BB, ContextMode::SB};
    std::vector<TapPoint> taps = {TapPoint::LOGITS_400, TapPoint::PENULTIMATE_1024};
    std::vector<RegressorKind> regressors = all_regressor_kinds();
    int folds = 10;
    int repetitions = 20;
    std::uint64_t seed = 1;
    int workers = 1;
    int track_id = 1;      // designated runner id in the track files
    int input_size = 224;  // backbone input resolution
    bool force = false;
    bool group_by_runner = false;
    RegressorParams params;
};

// Reads the JSON config file; unknown keys are rejected so typos do not
// silently fall back to defaults.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void save_pipeline_config(const std::filesystem::path& path, const PipelineConfig& cfg);

std::filesystem::path processed_clip_path(const PipelineConfig& cfg,
                                          const ObservationRecord& rec, ContextMode mode);

// Exit codes shared by every command: 0 success, 1 partial failure
// (some observations failed), 2 configuration/precondition error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitConfig = 2;

// One processed clip per (observation, context mode); existing outputs are
// skipped unless cfg.force. Per-observation failures are logged and
// summarized, not fatal.
int preprocess_command(const PipelineConfig& cfg);

// Populates the embedding cache over (observation x context x stream x tap).
// Valid entries are skipped unless cfg.force; corrupt entries are re-extracted
// with a warning. Weight hashes are verified before any work.
int extract_command(const PipelineConfig& cfg);

// Single-cell evaluation; writes <out>/report.jsonl and <out>/report.txt.
int evaluate_command(const PipelineConfig& cfg, const ExperimentConfig& cell);

// Full grid over enumerate_cells() x cfg.regressors; writes per-cell JSONL
// reports plus table.txt/table.csv and quartiles.csv/quartiles.svg.
int ablate_command(const PipelineConfig& cfg);

// Prints the stored MAE of a report, converted via its embedded scaler.
int report_command(const std::filesystem::path& report_path, const std::string& units);

// Small hyperparameter sweep for one regressor family on one cell,
// reporting the best setting by pooled MAE.
int gridsearch_command(const PipelineConfig& cfg, const ExperimentConfig& cell);

}  // namespace crt
