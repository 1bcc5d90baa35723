#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crt/cache.hpp"
#include "crt/manifest.hpp"
#include "crt/regression.hpp"
#include "crt/targets.hpp"

namespace crt {

// One cell of the ablation grid plus the cross-validation protocol knobs.
struct ExperimentConfig {
    TapPoint tap = TapPoint::LOGITS_400;
    StreamSet streams = StreamSet::both();
    std::optional<FusionMode> fusion = FusionMode::CONCAT;  // present iff both streams
    ContextMode context = ContextMode::SB;
    RegressorKind regressor = RegressorKind::MLP;
    int folds = 10;
    int repetitions = 20;
    std::uint64_t seed = 1;
    bool group_by_runner = false;  // runner-disjoint folds (leakage-strict variant)

    void validate() const;
    int embedding_dim() const { return cell_dim(tap, streams, fusion); }

    // Result-table label, e.g. "2048-RGB∪Flow-SB" or "400-Flow-BB".
    std::string cell_label() const;
};

struct PredictionRow {
    int repetition = 0;
    int fold = 0;
    std::string runner_id;
    std::string rp_id;
    double y_true = 0.0;
    double y_pred = 0.0;
};

struct QuartileCurve {
    std::array<double, 4> cumulative{};  // MAE over rows with y_true <= boundary(q);
                                         // Q4 is the overall MAE, computed identically
    std::array<double, 4> per_bucket{};  // bucket-local MAE, for transparency
    std::array<double, 3> boundaries{};  // 25/50/75th percentiles of y_true
};

struct EvaluationReport {
    ExperimentConfig config;
    double mae_normalized = 0.0;
    double mae_minutes = 0.0;
    QuartileCurve quartiles;
    std::vector<PredictionRow> fold_predictions;
    TargetScaler scaler;  // fit on the full dataset; converts MAE to minutes
    int clamped_targets = 0;  // test CRTs clamped into the fold scaler's range
};

// k disjoint test sets covering [0, n); sizes differ by at most one;
// deterministic in seed. Returns (train, test) index pairs, test ascending.
std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(
    int n, int k, std::uint64_t seed);

// Runner-disjoint variant: folds partition the distinct group labels.
std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split_grouped(
    const std::vector<std::string>& groups, int k, std::uint64_t seed);

double mae(const std::vector<double>& y_true, const std::vector<double>& y_pred);

// Test seam: replaces the regressor behind the harness, e.g. with an oracle
// that knows the true targets, to validate fold bookkeeping end to end.
struct TrainContext {
    RegressorKind kind;
    const FeatureMatrix& x_train;
    const std::vector<double>& y_train;
    std::uint64_t seed;
    TargetScaler scaler;
    const RegressorParams& params;
};
using PredictFn = std::function<double(const double* x, int dim)>;
using TrainerFn = std::function<PredictFn(const TrainContext&)>;

struct RunOptions {
    RegressorParams params;
    int workers = 1;
    TrainerFn trainer;  // empty = train()/predict() on config.regressor
    // test hook: receives every fold's train-only scaler
    std::function<void(int rep, int fold, const TargetScaler&)> scaler_probe;
};

// The repeated cross-validation protocol: per repetition r the fold split is
// seeded with base_seed + r; per fold the target scaler is fit on the train
// split only, the regressor is trained on normalized targets and scored on
// the held-out fold. All (repetition, fold) predictions are pooled into one
// MAE. Requires every needed cache entry to be present.
EvaluationReport run_experiment(const ExperimentConfig& config, const Manifest& manifest,
                                const EmbeddingCache& cache, const RunOptions& opts = {});

QuartileCurve quartile_curve(const std::vector<PredictionRow>& rows);

// The 16 (tap, streams, fusion, context) cells in result-table order: four
// blocks (logits-BB, logits-SB, penultimate-BB, penultimate-SB) of four rows
// (RGB, Flow, sum, concat).
struct CellSpec {
    TapPoint tap;
    StreamSet streams;
    std::optional<FusionMode> fusion;
    ContextMode context;
};
std::vector<CellSpec> enumerate_cells();

// Cache keys required for a cell but not present; empty means ready to run.
std::vector<CacheKey> missing_cells(const Manifest& manifest, const EmbeddingCache& cache,
                                    const ExperimentConfig& config);

// Full grid: every cell x every regressor, reports in row-major
// (cell, regressor) order with identical protocol seeds so cells share folds.
std::vector<EvaluationReport> ablation_grid(const Manifest& manifest,
                                            const EmbeddingCache& cache,
                                            const std::vector<RegressorKind>& regressors,
                                            const ExperimentConfig& protocol,
                                            const RunOptions& opts = {});

// --- report files (report.cpp) ------------------------------------------------

// Line-delimited records: one header object, then one object per prediction
// row. Byte-stable for identical runs; no timestamps inside.
void save_report_jsonl(const std::filesystem::path& path, const EvaluationReport& report);
EvaluationReport load_report_jsonl(const std::filesystem::path& path);

// mae_normalized recomputed from stored rows; must match the stored scalar.
double recompute_mae(const EvaluationReport& report);

// Result-table rendering (text mirrors the 16x5 layout; csv is one cell per line).
std::string render_table_text(const std::vector<EvaluationReport>& reports);
std::string render_table_csv(const std::vector<EvaluationReport>& reports);

// Quartile degradation curves as raw values and a standalone SVG plot.
std::string render_quartiles_csv(const std::vector<EvaluationReport>& reports);
std::string render_quartiles_svg(const std::vector<EvaluationReport>& reports);

}  // namespace crt
