#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "crt/backbone.hpp"

namespace crt {

// The five regressor families of the ablation. Parsed from the short names
// used in result tables: lr, rf, gb, svm, mlp.
enum class RegressorKind { LINEAR, RANDOM_FOREST, GRADIENT_BOOSTING, SVM, MLP };

const char* to_string(RegressorKind k);
RegressorKind regressor_from_string(const std::string& s);
std::vector<RegressorKind> all_regressor_kinds();

// Row-major feature matrix; embeddings are widened to double for training.
struct FeatureMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    FeatureMatrix() = default;
    FeatureMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c) {}

    double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
};

FeatureMatrix to_features(const std::vector<Embedding>& xs);

// --- hyperparameters ---------------------------------------------------------
//
// The MLP shape is fixed at two hidden layers with batch normalization;
// widths, optimizer settings and every non-MLP knob are surfaced as config
// and can be loaded from a versioned JSON file (see load_regressor_params).

struct LinearParams {
    double ridge_lambda = 1e-8;  // relative to mean Gram diagonal
};

struct ForestParams {
    int n_trees = 100;
    int max_depth = 0;  // 0 = unlimited
    int min_samples_leaf = 2;
    double feature_frac = 1.0 / 3.0;  // per-split feature subsample
};

struct BoostingParams {
    int n_estimators = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_samples_leaf = 2;
};

struct SvmParams {
    // epsilon-SVR with RBF kernel, solved by dual coordinate descent on
    // centered targets (no explicit bias term).
    double c = 10.0;
    double epsilon = 0.01;
    double gamma = 0.0;  // 0 = 1 / (dim * var(X)), the usual "scale"
    int max_passes = 1000;
    double tol = 1e-4;  // relative beta movement per pass
};

struct MlpParams {
    int hidden1 = 512;
    int hidden2 = 256;
    double learning_rate = 1e-3;  // Adam
    int batch_size = 32;
    int max_epochs = 500;
    // Early stopping on a held-out slice; engaged only when the slice reaches
    // 4 samples, otherwise the full epoch budget runs.
    int patience = 20;
    double val_fraction = 0.1;
};

struct RegressorParams {
    LinearParams linear;
    ForestParams forest;
    BoostingParams boosting;
    SvmParams svm;
    MlpParams mlp;
};

RegressorParams load_regressor_params(const std::filesystem::path& json_path);
RegressorParams parse_regressor_params(const std::string& json_text);
void save_regressor_params(const std::filesystem::path& json_path,
                           const RegressorParams& p);

// --- training / prediction ---------------------------------------------------

namespace detail {
struct Model;
}

// Immutable fitted model. Copies share the underlying parameters, so a fitted
// regressor can be used for prediction from many threads at once.
class TrainedRegressor {
public:
    RegressorKind kind() const { return kind_; }
    int input_dim() const { return input_dim_; }
    std::uint64_t seed() const { return seed_; }
    double train_loss() const { return train_loss_; }

    // Finite raw model output, clipped to [0, 1]; rejects wrong-length input.
    double predict(const double* x, int dim) const;
    double predict(const std::vector<double>& x) const;
    double predict(const Embedding& e) const;

    void save(const std::filesystem::path& path) const;
    void save(std::ostream& out) const;
    static TrainedRegressor load(const std::filesystem::path& path);
    static TrainedRegressor load(std::istream& in);

private:
    friend TrainedRegressor train(RegressorKind, const FeatureMatrix&,
                                  const std::vector<double>&, std::uint64_t,
                                  const RegressorParams&);
    std::shared_ptr<const detail::Model> model_;
    RegressorKind kind_ = RegressorKind::LINEAR;
    int input_dim_ = 0;
    std::uint64_t seed_ = 0;
    double train_loss_ = 0.0;
};

// Fits one model. Requires |X| == |y| >= 2, a consistent feature dimension
// and finite inputs. train_loss records the mean squared error of the raw
// model outputs on the training data. Identical (kind, params, seed, data)
// reproduce identical predictions.
TrainedRegressor train(RegressorKind kind, const FeatureMatrix& x,
                       const std::vector<double>& y, std::uint64_t seed,
                       const RegressorParams& params = {});

TrainedRegressor train(RegressorKind kind, const std::vector<Embedding>& x,
                       const std::vector<double>& y, std::uint64_t seed,
                       const RegressorParams& params = {});

// Training objective: (1/N) sum of squared differences.
double mse(const std::vector<double>& y_true, const std::vector<double>& y_pred);

// Validates the hand-written MLP backward pass: max per-parameter relative
// difference between analytic gradients and central finite differences of the
// loss on one full batch, training mode (batch statistics).
double mlp_gradient_check(const FeatureMatrix& x, const std::vector<double>& y,
                          const MlpParams& params, std::uint64_t seed);

}  // namespace crt
