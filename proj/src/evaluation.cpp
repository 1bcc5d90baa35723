#include "crt/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "crt/error.hpp"
#include "crt/rng.hpp"

namespace crt {

void ExperimentConfig::validate() const {
    if (!streams.rgb && !streams.flow)
        throw ValidationError("experiment config: empty stream set");
    if (streams.is_both() && !fusion)
        throw ValidationError("experiment config: two streams need a fusion mode");
    if (streams.is_single() && fusion)
        throw ValidationError("experiment config: fusion given for a single stream");
    if (folds < 2) throw ValidationError("experiment config: folds must be >= 2");
    if (repetitions < 1) throw ValidationError("experiment config: repetitions must be >= 1");
}

std::string ExperimentConfig::cell_label() const {
    std::string stream_part;
    if (streams.is_both())
        stream_part = (*fusion == FusionMode::SUM) ? "RGB+Flow" : "RGB∪Flow";
    else
        stream_part = streams.rgb ? "RGB" : "Flow";
    const std::string ctx = context == ContextMode::BB ? "BB" : "SB";
    return std::to_string(embedding_dim()) + "-" + stream_part + "-" + ctx;
}

// --- folds ----------------------------------------------------------------------

std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(
    int n, int k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("kfold_split: k must be >= 2");
    if (k > n)
        throw ValidationError("kfold_split: k = " + std::to_string(k) + " > n = " +
                              std::to_string(n));
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);

    std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
    out.reserve(static_cast<std::size_t>(k));
    const int base = n / k;
    const int rem = n % k;
    int pos = 0;
    for (int f = 0; f < k; ++f) {
        const int size = base + (f < rem ? 1 : 0);
        std::vector<int> test(idx.begin() + pos, idx.begin() + pos + size);
        std::vector<int> train;
        train.reserve(static_cast<std::size_t>(n - size));
        train.insert(train.end(), idx.begin(), idx.begin() + pos);
        train.insert(train.end(), idx.begin() + pos + size, idx.end());
        std::sort(test.begin(), test.end());
        std::sort(train.begin(), train.end());
        out.emplace_back(std::move(train), std::move(test));
        pos += size;
    }
    return out;
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split_grouped(
    const std::vector<std::string>& groups, int k, std::uint64_t seed) {
    std::vector<std::string> distinct;
    for (const auto& g : groups)
        if (std::find(distinct.begin(), distinct.end(), g) == distinct.end())
            distinct.push_back(g);
    const int ng = static_cast<int>(distinct.size());
    if (k < 2) throw ValidationError("kfold_split_grouped: k must be >= 2");
    if (k > ng)
        throw ValidationError("kfold_split_grouped: k = " + std::to_string(k) +
                              " > distinct groups = " + std::to_string(ng));
    Rng rng(seed);
    rng.shuffle(distinct);

    std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
    const int base = ng / k;
    const int rem = ng % k;
    int pos = 0;
    for (int f = 0; f < k; ++f) {
        const int size = base + (f < rem ? 1 : 0);
        std::vector<std::string> held(distinct.begin() + pos, distinct.begin() + pos + size);
        pos += size;
        std::vector<int> test, train;
        for (std::size_t i = 0; i < groups.size(); ++i) {
            if (std::find(held.begin(), held.end(), groups[i]) != held.end())
                test.push_back(static_cast<int>(i));
            else
                train.push_back(static_cast<int>(i));
        }
        out.emplace_back(std::move(train), std::move(test));
    }
    return out;
}

double mae(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    if (y_true.size() != y_pred.size())
        throw ValidationError("mae: length mismatch (" + std::to_string(y_true.size()) +
                              " vs " + std::to_string(y_pred.size()) + ")");
    if (y_true.empty()) throw ValidationError("mae: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) s += std::abs(y_true[i] - y_pred[i]);
    return s / static_cast<double>(y_true.size());
}

namespace {

double rows_mae(const std::vector<PredictionRow>& rows) {
    double s = 0.0;
    for (const auto& r : rows) s += std::abs(r.y_true - r.y_pred);
    return s / static_cast<double>(rows.size());
}

double percentile(std::vector<double> sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// bounded worker pool over [0, total); tasks must not throw
void parallel_for(int total, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, total));
    if (workers == 1) {
        for (int i = 0; i < total; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < total; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

QuartileCurve quartile_curve(const std::vector<PredictionRow>& rows) {
    if (rows.empty()) throw ValidationError("quartile_curve: no prediction rows");
    std::vector<double> ys;
    ys.reserve(rows.size());
    for (const auto& r : rows) ys.push_back(r.y_true);
    std::sort(ys.begin(), ys.end());

    QuartileCurve curve;
    curve.boundaries = {percentile(ys, 0.25), percentile(ys, 0.50), percentile(ys, 0.75)};

    for (int q = 0; q < 3; ++q) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& r : rows) {
            if (r.y_true <= curve.boundaries[static_cast<std::size_t>(q)]) {
                sum += std::abs(r.y_true - r.y_pred);
                ++count;
            }
        }
        curve.cumulative[static_cast<std::size_t>(q)] =
            count ? sum / static_cast<double>(count) : 0.0;
    }
    // Q4 is the overall MAE, same accumulation order as the report scalar
    curve.cumulative[3] = rows_mae(rows);

    for (int q = 0; q < 4; ++q) {
        const double lo = q == 0 ? -std::numeric_limits<double>::infinity()
                                 : curve.boundaries[static_cast<std::size_t>(q - 1)];
        const double hi = q == 3 ? std::numeric_limits<double>::infinity()
                                 : curve.boundaries[static_cast<std::size_t>(q)];
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& r : rows) {
            if (r.y_true > lo && r.y_true <= hi) {
                sum += std::abs(r.y_true - r.y_pred);
                ++count;
            }
        }
        curve.per_bucket[static_cast<std::size_t>(q)] =
            count ? sum / static_cast<double>(count) : 0.0;
    }
    return curve;
}

// --- cache assembly ---------------------------------------------------------------

namespace {

Embedding read_single(const EmbeddingCache& cache, const ObservationRecord& rec,
                      ContextMode context, TapPoint tap, StreamKind stream) {
    CacheKey key{rec.runner_id, rec.rp_id, context, stream, tap};
    auto entry = cache.read(key);
    if (!entry)
        throw Error("missing cache entry " + rec.runner_id + "/" + rec.rp_id + "/" +
                    to_string(context) + "/" + to_string(stream) + "/" + to_string(tap));
    Embedding e;
    e.vector = std::move(entry->vector);
    e.tap = tap;
    e.streams = StreamSet::single(stream);
    e.context = context;
    validate_embedding(e);
    return e;
}

Embedding assemble_embedding(const EmbeddingCache& cache, const ObservationRecord& rec,
                             const ExperimentConfig& config) {
    if (config.streams.is_single()) {
        const StreamKind k = config.streams.rgb ? StreamKind::RGB : StreamKind::FLOW;
        return read_single(cache, rec, config.context, config.tap, k);
    }
    Embedding rgb = read_single(cache, rec, config.context, config.tap, StreamKind::RGB);
    Embedding flow = read_single(cache, rec, config.context, config.tap, StreamKind::FLOW);
    return fuse(rgb, flow, *config.fusion);
}

}  // namespace

std::vector<CellSpec> enumerate_cells() {
    std::vector<CellSpec> cells;
    for (TapPoint tap : {TapPoint::LOGITS_400, TapPoint::PENULTIMATE_1024}) {
        for (ContextMode ctx : {ContextMode::BB, ContextMode::SB}) {
            cells.push_back({tap, StreamSet::single(StreamKind::RGB), std::nullopt, ctx});
            cells.push_back({tap, StreamSet::single(StreamKind::FLOW), std::nullopt, ctx});
            cells.push_back({tap, StreamSet::both(), FusionMode::SUM, ctx});
            cells.push_back({tap, StreamSet::both(), FusionMode::CONCAT, ctx});
        }
    }
    return cells;
}

std::vector<CacheKey> missing_cells(const Manifest& manifest, const EmbeddingCache& cache,
                                    const ExperimentConfig& config) {
    std::vector<CacheKey> missing;
    std::vector<StreamKind> needed;
    if (config.streams.rgb) needed.push_back(StreamKind::RGB);
    if (config.streams.flow) needed.push_back(StreamKind::FLOW);
    for (const auto& rec : manifest.records) {
        for (StreamKind s : needed) {
            CacheKey key{rec.runner_id, rec.rp_id, config.context, s, config.tap};
            if (!cache.contains(key)) missing.push_back(key);
        }
    }
    return missing;
}

// --- the protocol -------------------------------------------------------------------

EvaluationReport run_experiment(const ExperimentConfig& config, const Manifest& manifest,
                                const EmbeddingCache& cache, const RunOptions& opts) {
    config.validate();
    const int n = static_cast<int>(manifest.records.size());
    const int rp_count = static_cast<int>(manifest.rp_count());

    // load every observation's embedding once
    const int dim = config.embedding_dim();
    FeatureMatrix x(n, dim);
    std::vector<std::int64_t> crt(static_cast<std::size_t>(n));
    std::vector<int> rp_idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& rec = manifest.records[static_cast<std::size_t>(i)];
        const Embedding e = assemble_embedding(cache, rec, config);
        for (int j = 0; j < dim; ++j) x.at(i, j) = e.vector[static_cast<std::size_t>(j)];
        crt[static_cast<std::size_t>(i)] = rec.crt_seconds;
        rp_idx[static_cast<std::size_t>(i)] = manifest.rp_index(rec.rp_id);
    }

    // report-level scaler: fit on the whole dataset, used only to express the
    // pooled MAE in minutes (per-fold training always refits on train alone)
    std::vector<std::pair<int, std::int64_t>> all_pairs;
    all_pairs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        all_pairs.emplace_back(rp_idx[static_cast<std::size_t>(i)],
                               crt[static_cast<std::size_t>(i)]);
    const TargetScaler full_scaler = fit_scaler(all_pairs, rp_count);

    // precompute fold splits: repetition r is seeded base_seed + r so any
    // single repetition reruns identically on its own
    std::vector<std::vector<std::pair<std::vector<int>, std::vector<int>>>> splits;
    splits.reserve(static_cast<std::size_t>(config.repetitions));
    std::vector<std::string> runner_groups;
    if (config.group_by_runner)
        for (const auto& rec : manifest.records) runner_groups.push_back(rec.runner_id);
    for (int r = 0; r < config.repetitions; ++r) {
        const std::uint64_t rep_seed = config.seed + static_cast<std::uint64_t>(r);
        splits.push_back(config.group_by_runner
                             ? kfold_split_grouped(runner_groups, config.folds, rep_seed)
                             : kfold_split(n, config.folds, rep_seed));
    }

    struct CellResult {
        std::vector<PredictionRow> rows;
        int clamped = 0;
        std::exception_ptr error;
    };
    const int total_cells = config.repetitions * config.folds;
    std::vector<CellResult> results(static_cast<std::size_t>(total_cells));

    auto run_cell = [&](int cell) {
        CellResult& res = results[static_cast<std::size_t>(cell)];
        const int r = cell / config.folds;
        const int f = cell % config.folds;
        try {
            const auto& [train_idx, test_idx] = splits[static_cast<std::size_t>(r)]
                                                      [static_cast<std::size_t>(f)];
            std::vector<std::pair<int, std::int64_t>> train_pairs;
            train_pairs.reserve(train_idx.size());
            for (int i : train_idx)
                train_pairs.emplace_back(rp_idx[static_cast<std::size_t>(i)],
                                         crt[static_cast<std::size_t>(i)]);
            const TargetScaler scaler = fit_scaler(train_pairs, rp_count);
            if (opts.scaler_probe) opts.scaler_probe(r, f, scaler);

            FeatureMatrix x_train(static_cast<int>(train_idx.size()), dim);
            std::vector<double> y_train(train_idx.size());
            for (std::size_t i = 0; i < train_idx.size(); ++i) {
                std::copy(x.row(train_idx[i]), x.row(train_idx[i]) + dim,
                          x_train.row(static_cast<int>(i)));
                y_train[i] = scaler.normalize(crt[static_cast<std::size_t>(train_idx[i])]);
            }

            const std::uint64_t rep_seed = config.seed + static_cast<std::uint64_t>(r);
            const std::uint64_t cell_seed = mix_seed(rep_seed, static_cast<std::uint64_t>(f));
            PredictFn predict;
            if (opts.trainer) {
                predict = opts.trainer(
                    TrainContext{config.regressor, x_train, y_train, cell_seed, scaler,
                                 opts.params});
            } else {
                auto model = std::make_shared<TrainedRegressor>(
                    train(config.regressor, x_train, y_train, cell_seed, opts.params));
                predict = [model](const double* xi, int d) { return model->predict(xi, d); };
            }

            res.rows.reserve(test_idx.size());
            for (int i : test_idx) {
                bool clamped = false;
                const double y_true =
                    scaler.normalize(crt[static_cast<std::size_t>(i)], &clamped);
                if (clamped) ++res.clamped;
                const double y_pred = predict(x.row(i), dim);
                const auto& rec = manifest.records[static_cast<std::size_t>(i)];
                res.rows.push_back(
                    PredictionRow{r, f, rec.runner_id, rec.rp_id, y_true, y_pred});
            }
        } catch (const std::exception& e) {
            res.error = std::make_exception_ptr(
                Error("cell " + config.cell_label() + "/" + to_string(config.regressor) +
                      " repetition " + std::to_string(r) + " fold " + std::to_string(f) +
                      ": " + e.what()));
        }
    };

    parallel_for(total_cells, opts.workers, run_cell);

    for (const auto& res : results)
        if (res.error) std::rethrow_exception(res.error);

    EvaluationReport report;
    report.config = config;
    report.scaler = full_scaler;
    for (auto& res : results) {
        report.clamped_targets += res.clamped;
        report.fold_predictions.insert(report.fold_predictions.end(), res.rows.begin(),
                                       res.rows.end());
    }
    report.quartiles = quartile_curve(report.fold_predictions);
    report.mae_normalized = report.quartiles.cumulative[3];
    report.mae_minutes = full_scaler.denormalize_error_minutes(report.mae_normalized);
    return report;
}

std::vector<EvaluationReport> ablation_grid(const Manifest& manifest,
                                            const EmbeddingCache& cache,
                                            const std::vector<RegressorKind>& regressors,
                                            const ExperimentConfig& protocol,
                                            const RunOptions& opts) {
    if (regressors.empty()) throw ValidationError("ablation_grid: no regressors");
    std::vector<EvaluationReport> reports;
    for (const CellSpec& cell : enumerate_cells()) {
        for (RegressorKind kind : regressors) {
            ExperimentConfig config = protocol;
            config.tap = cell.tap;
            config.streams = cell.streams;
            config.fusion = cell.fusion;
            config.context = cell.context;
            config.regressor = kind;
            reports.push_back(run_experiment(config, manifest, cache, opts));
        }
    }
    return reports;
}

}  // namespace crt
