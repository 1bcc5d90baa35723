#include "crt/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"

#include "crt/backbone.hpp"
#include "crt/context.hpp"
#include "crt/error.hpp"
#include "crt/log.hpp"
#include "crt/media.hpp"
#include "crt/rng.hpp"
#include "crt/streams.hpp"

namespace crt {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
    return p.is_absolute() ? p : base / p;
}

// worker pool over observations; fn must handle its own failures
void for_each_record(const Manifest& manifest, int workers,
                     const std::function<void(const ObservationRecord&)>& fn) {
    const int n = static_cast<int>(manifest.records.size());
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (const auto& rec : manifest.records) fn(rec);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                fn(manifest.records[static_cast<std::size_t>(i)]);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

fs::path processed_clip_path(const PipelineConfig& cfg, const ObservationRecord& rec,
                             ContextMode mode) {
    return cfg.store_dir / to_string(mode) / (rec.runner_id + "__" + rec.rp_id + ".rvc");
}

// --- config file -----------------------------------------------------------------

PipelineConfig load_pipeline_config(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("pipeline config: " + path.string() + ": " + e.what());
    }
    static const std::set<std::string> known = {
        "version",  "manifest",    "store_dir", "cache_dir",       "out_dir",
        "backbone", "contexts",    "taps",      "regressors",      "folds",
        "repetitions", "seed",     "workers",   "track_id",        "input_size",
        "group_by_runner", "regressor_params"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key))
            throw ValidationError("pipeline config: unknown key '" + key + "' in " +
                                  path.string());
    }

    PipelineConfig cfg;
    const fs::path base = path.parent_path();
    if (j.contains("manifest")) cfg.manifest_path = resolve(base, j["manifest"].get<std::string>());
    if (j.contains("store_dir")) cfg.store_dir = resolve(base, j["store_dir"].get<std::string>());
    if (j.contains("cache_dir")) cfg.cache_dir = resolve(base, j["cache_dir"].get<std::string>());
    if (j.contains("out_dir")) cfg.out_dir = resolve(base, j["out_dir"].get<std::string>());
    if (j.contains("backbone")) {
        cfg.backbone_spec = j["backbone"].get<std::string>();
        if (cfg.backbone_spec != "stub")
            cfg.backbone_spec = resolve(base, cfg.backbone_spec).string();
    }
    if (j.contains("contexts")) {
        cfg.contexts.clear();
        for (const auto& c : j["contexts"]) cfg.contexts.push_back(context_from_string(c.get<std::string>()));
    }
    if (j.contains("taps")) {
        cfg.taps.clear();
        for (const auto& t : j["taps"]) cfg.taps.push_back(tap_from_string(t.get<std::string>()));
    }
    if (j.contains("regressors")) {
        cfg.regressors.clear();
        for (const auto& r : j["regressors"])
            cfg.regressors.push_back(regressor_from_string(r.get<std::string>()));
    }
    if (j.contains("folds")) cfg.folds = j["folds"].get<int>();
    if (j.contains("repetitions")) cfg.repetitions = j["repetitions"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
    if (j.contains("track_id")) cfg.track_id = j["track_id"].get<int>();
    if (j.contains("input_size")) cfg.input_size = j["input_size"].get<int>();
    if (j.contains("group_by_runner")) cfg.group_by_runner = j["group_by_runner"].get<bool>();
    if (j.contains("regressor_params"))
        cfg.params = parse_regressor_params(j["regressor_params"].dump());
    return cfg;
}

void save_pipeline_config(const fs::path& path, const PipelineConfig& cfg) {
    nlohmann::json j;
    j["version"] = 1;
    j["manifest"] = cfg.manifest_path.string();
    j["store_dir"] = cfg.store_dir.string();
    j["cache_dir"] = cfg.cache_dir.string();
    j["out_dir"] = cfg.out_dir.string();
    j["backbone"] = cfg.backbone_spec;
    std::vector<std::string> ctxs, taps, regs;
    for (auto c : cfg.contexts) ctxs.emplace_back(to_string(c));
    for (auto t : cfg.taps) taps.emplace_back(to_string(t));
    for (auto r : cfg.regressors) regs.emplace_back(to_string(r));
    j["contexts"] = ctxs;
    j["taps"] = taps;
    j["regressors"] = regs;
    j["folds"] = cfg.folds;
    j["repetitions"] = cfg.repetitions;
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    j["track_id"] = cfg.track_id;
    j["input_size"] = cfg.input_size;
    j["group_by_runner"] = cfg.group_by_runner;
    write_file_atomic(path, j.dump(2) + "\n");
}

// --- preprocess --------------------------------------------------------------------

int preprocess_command(const PipelineConfig& cfg) {
    const Manifest manifest = load_manifest(cfg.manifest_path);
    const fs::path base = cfg.manifest_path.parent_path();

    std::atomic<int> done{0}, skipped{0}, failed{0};
    for_each_record(manifest, cfg.workers, [&](const ObservationRecord& rec) {
        for (ContextMode mode : cfg.contexts) {
            const fs::path out = processed_clip_path(cfg, rec, mode);
            try {
                if (!cfg.force && fs::exists(out)) {
                    ++skipped;
                    continue;
                }
                const Clip clip = load_clip(resolve(base, rec.clip_path));
                const TrackedClip tracked =
                    ingest_tracks(resolve(base, rec.track_path), clip, cfg.track_id);
                const Clip processed = apply_context(tracked, mode);
                save_rvc(out, processed);
                ++done;
            } catch (const std::exception& e) {
                ++failed;
                log_error("preprocess_failed", {{"runner", rec.runner_id},
                                                {"rp", rec.rp_id},
                                                {"context", to_string(mode)},
                                                {"error", e.what()}});
            }
        }
    });

    log_info("preprocess_done", {{"processed", std::to_string(done.load())},
                                 {"skipped", std::to_string(skipped.load())},
                                 {"failed", std::to_string(failed.load())}});
    return failed.load() > 0 ? kExitPartial : kExitOk;
}

// --- extract -----------------------------------------------------------------------

int extract_command(const PipelineConfig& cfg) {
    const Manifest manifest = load_manifest(cfg.manifest_path);
    const EmbeddingCache cache(cfg.cache_dir);

    // weight hashes are checked here, before any extraction starts
    const std::unique_ptr<Backbone> rgb_backbone =
        make_backbone(StreamKind::RGB, cfg.backbone_spec);
    const std::unique_ptr<Backbone> flow_backbone =
        make_backbone(StreamKind::FLOW, cfg.backbone_spec);
    std::mutex rgb_mutex, flow_mutex;  // forward passes serialized per instance

    const BlockMatchingFlow estimator;
    std::mutex estimator_mutex;  // taken only when the estimator is not reentrant
    const StreamOptions stream_opts{cfg.input_size, 20.0f};
    auto estimate_flow = [&](const std::vector<Image>& frames) {
        if (estimator.reentrant()) return compute_flow(frames, estimator, stream_opts);
        std::lock_guard<std::mutex> lock(estimator_mutex);
        return compute_flow(frames, estimator, stream_opts);
    };

    auto config_tag = [&](const Backbone& bb, TapPoint tap) {
        const std::string s = bb.weights_tag() + "/" + to_string(bb.stream()) + "/" +
                              to_string(tap) + "/" + std::to_string(cfg.input_size);
        char buf[24];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(s.data(), s.size())));
        return std::string(buf);
    };

    std::atomic<int> written{0}, skipped{0}, failed{0}, repaired{0};
    for_each_record(manifest, cfg.workers, [&](const ObservationRecord& rec) {
        for (ContextMode mode : cfg.contexts) {
            try {
                // decide which entries still need computing
                std::vector<CacheKey> todo;
                for (TapPoint tap : cfg.taps) {
                    for (StreamKind stream : {StreamKind::RGB, StreamKind::FLOW}) {
                        CacheKey key{rec.runner_id, rec.rp_id, mode, stream, tap};
                        if (!cfg.force && cache.contains(key)) {
                            if (cache.verify(key)) {
                                ++skipped;
                                continue;
                            }
                            ++repaired;
                            log_warn("cache_entry_corrupt", {{"runner", rec.runner_id},
                                                             {"rp", rec.rp_id},
                                                             {"context", to_string(mode)},
                                                             {"stream", to_string(stream)},
                                                             {"tap", to_string(tap)}});
                        }
                        todo.push_back(key);
                    }
                }
                if (todo.empty()) continue;

                const Clip processed = load_clip(processed_clip_path(cfg, rec, mode));
                const std::vector<Image> resized =
                    resize_frames(processed.frames, cfg.input_size);

                TapFeatures rgb_feats, flow_feats;
                bool have_rgb = false, have_flow = false;
                for (const CacheKey& key : todo) {
                    const Backbone& bb =
                        key.stream == StreamKind::RGB ? *rgb_backbone : *flow_backbone;
                    if (key.stream == StreamKind::RGB && !have_rgb) {
                        const StreamTensor t = prepare_rgb(resized, stream_opts);
                        std::lock_guard<std::mutex> lock(rgb_mutex);
                        rgb_feats = bb.forward(t);
                        have_rgb = true;
                    }
                    if (key.stream == StreamKind::FLOW && !have_flow) {
                        const StreamTensor t = estimate_flow(resized);
                        std::lock_guard<std::mutex> lock(flow_mutex);
                        flow_feats = bb.forward(t);
                        have_flow = true;
                    }
                    const TapFeatures& feats =
                        key.stream == StreamKind::RGB ? rgb_feats : flow_feats;
                    EmbeddingCacheEntry entry;
                    entry.key = key;
                    entry.vector = tap_vector(feats, key.tap);
                    entry.dim = static_cast<int>(entry.vector.size());
                    entry.config_tag = config_tag(bb, key.tap);
                    cache.write(entry);
                    ++written;
                }
            } catch (const std::exception& e) {
                ++failed;
                log_error("extract_failed", {{"runner", rec.runner_id},
                                             {"rp", rec.rp_id},
                                             {"context", to_string(mode)},
                                             {"error", e.what()}});
            }
        }
    });

    log_info("extract_done", {{"written", std::to_string(written.load())},
                              {"skipped", std::to_string(skipped.load())},
                              {"repaired", std::to_string(repaired.load())},
                              {"failed", std::to_string(failed.load())}});
    return failed.load() > 0 ? kExitPartial : kExitOk;
}

// --- evaluate / ablate ---------------------------------------------------------------

namespace {

int preflight_missing(const Manifest& manifest, const EmbeddingCache& cache,
                      const std::vector<ExperimentConfig>& configs) {
    std::set<std::string> printed;
    int missing_total = 0;
    for (const auto& config : configs) {
        for (const CacheKey& key : missing_cells(manifest, cache, config)) {
            const std::string desc = key.runner_id + "/" + key.rp_id + "/" +
                                     to_string(key.context) + "/" + to_string(key.stream) +
                                     "/" + to_string(key.tap);
            if (printed.insert(desc).second) {
                ++missing_total;
                log_error("missing_cache_entry", {{"entry", desc}});
            }
        }
    }
    if (missing_total > 0)
        log_error("evaluation_blocked",
                  {{"missing_entries", std::to_string(missing_total)},
                   {"hint", "run `crt extract` first"}});
    return missing_total;
}

std::string report_file_name(const ExperimentConfig& c) {
    std::string stream_part;
    if (c.streams.is_both())
        stream_part = to_string(*c.fusion);
    else
        stream_part = c.streams.rgb ? "rgb" : "flow";
    return "report_" + std::to_string(c.embedding_dim()) + "_" + stream_part + "_" +
           to_string(c.context) + "_" + to_string(c.regressor) + ".jsonl";
}

}  // namespace

int evaluate_command(const PipelineConfig& cfg, const ExperimentConfig& cell) {
    const Manifest manifest = load_manifest(cfg.manifest_path);
    const EmbeddingCache cache(cfg.cache_dir);
    if (preflight_missing(manifest, cache, {cell}) > 0) return kExitConfig;

    RunOptions opts;
    opts.params = cfg.params;
    opts.workers = cfg.workers;
    const EvaluationReport report = run_experiment(cell, manifest, cache, opts);

    fs::create_directories(cfg.out_dir);
    save_report_jsonl(cfg.out_dir / "report.jsonl", report);
    write_file_atomic(cfg.out_dir / "report.txt", render_table_text({report}));

    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s %s: MAE %.6f (%.1f min over %zu predictions)\n",
                  report.config.cell_label().c_str(), to_string(report.config.regressor),
                  report.mae_normalized, report.mae_minutes,
                  report.fold_predictions.size());
    std::cout << buf;
    return kExitOk;
}

int ablate_command(const PipelineConfig& cfg) {
    const Manifest manifest = load_manifest(cfg.manifest_path);
    const EmbeddingCache cache(cfg.cache_dir);

    ExperimentConfig protocol;
    protocol.folds = cfg.folds;
    protocol.repetitions = cfg.repetitions;
    protocol.seed = cfg.seed;
    protocol.group_by_runner = cfg.group_by_runner;

    std::vector<ExperimentConfig> configs;
    for (const CellSpec& cell : enumerate_cells()) {
        ExperimentConfig c = protocol;
        c.tap = cell.tap;
        c.streams = cell.streams;
        c.fusion = cell.fusion;
        c.context = cell.context;
        configs.push_back(c);
    }
    if (preflight_missing(manifest, cache, configs) > 0) return kExitConfig;

    RunOptions opts;
    opts.params = cfg.params;
    opts.workers = cfg.workers;
    const std::vector<EvaluationReport> reports =
        ablation_grid(manifest, cache, cfg.regressors, protocol, opts);

    fs::create_directories(cfg.out_dir);
    for (const auto& r : reports)
        save_report_jsonl(cfg.out_dir / report_file_name(r.config), r);
    const std::string table = render_table_text(reports);
    write_file_atomic(cfg.out_dir / "table.txt", table);
    write_file_atomic(cfg.out_dir / "table.csv", render_table_csv(reports));
    write_file_atomic(cfg.out_dir / "quartiles.csv", render_quartiles_csv(reports));
    write_file_atomic(cfg.out_dir / "quartiles.svg", render_quartiles_svg(reports));
    std::cout << table;
    return kExitOk;
}

int report_command(const fs::path& report_path, const std::string& units) {
    const EvaluationReport report = load_report_jsonl(report_path);
    const double recomputed = recompute_mae(report);
    if (std::abs(recomputed - report.mae_normalized) > 1e-12)
        throw ValidationError("report: stored MAE " +
                              std::to_string(report.mae_normalized) +
                              " does not match rows (" + std::to_string(recomputed) + ")");
    char buf[160];
    if (units == "minutes") {
        std::snprintf(buf, sizeof(buf), "%s %s: %.1f min\n",
                      report.config.cell_label().c_str(),
                      to_string(report.config.regressor),
                      report.scaler.denormalize_error_minutes(report.mae_normalized));
    } else if (units == "normalized") {
        std::snprintf(buf, sizeof(buf), "%s %s: %.6f\n",
                      report.config.cell_label().c_str(),
                      to_string(report.config.regressor), report.mae_normalized);
    } else {
        throw ValidationError("report: unknown units '" + units +
                              "' (expected minutes|normalized)");
    }
    std::cout << buf;
    return kExitOk;
}

// --- grid search -----------------------------------------------------------------------

int gridsearch_command(const PipelineConfig& cfg, const ExperimentConfig& cell) {
    const Manifest manifest = load_manifest(cfg.manifest_path);
    const EmbeddingCache cache(cfg.cache_dir);
    if (preflight_missing(manifest, cache, {cell}) > 0) return kExitConfig;

    struct Combo {
        std::string label;
        RegressorParams params;
    };
    std::vector<Combo> combos;
    const RegressorParams base = cfg.params;
    switch (cell.regressor) {
        case RegressorKind::LINEAR:
            for (double l : {1e-10, 1e-8, 1e-6, 1e-4}) {
                Combo c{"ridge_lambda=" + std::to_string(l), base};
                c.params.linear.ridge_lambda = l;
                combos.push_back(std::move(c));
            }
            break;
        case RegressorKind::RANDOM_FOREST:
            for (int trees : {100, 200})
                for (int leaf : {2, 5}) {
                    Combo c{"n_trees=" + std::to_string(trees) +
                                " min_leaf=" + std::to_string(leaf),
                            base};
                    c.params.forest.n_trees = trees;
                    c.params.forest.min_samples_leaf = leaf;
                    combos.push_back(std::move(c));
                }
            break;
        case RegressorKind::GRADIENT_BOOSTING:
            for (int est : {100, 200})
                for (double lr : {0.05, 0.1}) {
                    Combo c{"n_estimators=" + std::to_string(est) +
                                " lr=" + std::to_string(lr),
                            base};
                    c.params.boosting.n_estimators = est;
                    c.params.boosting.learning_rate = lr;
                    combos.push_back(std::move(c));
                }
            break;
        case RegressorKind::SVM:
            for (double cc : {1.0, 10.0, 100.0})
                for (double eps : {0.005, 0.01, 0.05}) {
                    Combo c{"c=" + std::to_string(cc) + " epsilon=" + std::to_string(eps),
                            base};
                    c.params.svm.c = cc;
                    c.params.svm.epsilon = eps;
                    combos.push_back(std::move(c));
                }
            break;
        case RegressorKind::MLP:
            for (auto [h1, h2] : {std::pair{512, 256}, std::pair{256, 128}})
                for (double lr : {1e-3, 3e-3}) {
                    Combo c{"hidden=" + std::to_string(h1) + "/" + std::to_string(h2) +
                                " lr=" + std::to_string(lr),
                            base};
                    c.params.mlp.hidden1 = h1;
                    c.params.mlp.hidden2 = h2;
                    c.params.mlp.learning_rate = lr;
                    combos.push_back(std::move(c));
                }
            break;
    }

    std::string best_label;
    RegressorParams best_params;
    double best_mae = std::numeric_limits<double>::infinity();
    for (const Combo& combo : combos) {
        RunOptions opts;
        opts.params = combo.params;
        opts.workers = cfg.workers;
        const EvaluationReport report = run_experiment(cell, manifest, cache, opts);
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-40s MAE %.6f\n", combo.label.c_str(),
                      report.mae_normalized);
        std::cout << buf;
        if (report.mae_normalized < best_mae) {
            best_mae = report.mae_normalized;
            best_label = combo.label;
            best_params = combo.params;
        }
    }
    std::cout << "best: " << best_label << "\n";
    fs::create_directories(cfg.out_dir);
    save_regressor_params(cfg.out_dir / "best_params.json", best_params);
    return kExitOk;
}

}  // namespace crt
