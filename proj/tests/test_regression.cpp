#include <cmath>
#include <sstream>

#include "doctest.h"

#include "crt/error.hpp"
#include "crt/regression.hpp"
#include "crt/rng.hpp"

using namespace crt;

namespace {

// Planted linear model with low-rank features: x = z P with a latent factor
// vector z, y = v.z + 0.5 (+ noise). The signal is recoverable by
// construction even when dim greatly exceeds the sample count, because every
// sample (train and test) lives in the same latent span — the same structure
// backbone embeddings have.
struct Planted {
    FeatureMatrix x;
    std::vector<double> y;
    FeatureMatrix x_test;
    std::vector<double> y_test;
};

Planted plant_linear(int n_train, int n_test, int dim, int latent, double noise,
                     std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> proj(static_cast<std::size_t>(latent) * dim);
    for (auto& v : proj) v = rng.normal() / std::sqrt(static_cast<double>(latent));
    std::vector<double> v(static_cast<std::size_t>(latent));
    for (auto& c : v) c = rng.normal();
    double norm = 0.0;
    for (double c : v) norm += c * c;
    norm = std::sqrt(norm);
    for (auto& c : v) c *= 0.12 / norm;  // keeps scores clear of the clamp bounds

    auto gen = [&](int n, FeatureMatrix& x, std::vector<double>& y) {
        x = FeatureMatrix(n, dim);
        y.resize(static_cast<std::size_t>(n));
        std::vector<double> z(static_cast<std::size_t>(latent));
        for (int i = 0; i < n; ++i) {
            double score = 0.5;
            for (int k = 0; k < latent; ++k) {
                z[static_cast<std::size_t>(k)] = rng.normal();
                score += v[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(k)];
            }
            for (int j = 0; j < dim; ++j) {
                double s = 0.0;
                for (int k = 0; k < latent; ++k)
                    s += z[static_cast<std::size_t>(k)] *
                         proj[static_cast<std::size_t>(k) * dim + j];
                x.at(i, j) = s;
            }
            y[static_cast<std::size_t>(i)] =
                std::clamp(score + noise * rng.normal(), 0.02, 0.98);
        }
    };
    Planted p;
    gen(n_train, p.x, p.y);
    gen(n_test, p.x_test, p.y_test);
    return p;
}

double test_mae(const TrainedRegressor& model, const Planted& p) {
    double s = 0.0;
    for (int i = 0; i < p.x_test.rows; ++i)
        s += std::abs(model.predict(p.x_test.row(i), p.x_test.cols) -
                      p.y_test[static_cast<std::size_t>(i)]);
    return s / p.x_test.rows;
}

}  // namespace

TEST_SUITE("regression") {

TEST_CASE("mse matches hand oracles") {
    CHECK(mse({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(mse({0.0, 1.0}, {1.0, 0.0}) == 1.0);   // (1 + 1) / 2
    CHECK(mse({0.5}, {0.0}) == 0.25);
    CHECK_THROWS_AS(mse({1.0}, {1.0, 2.0}), ValidationError);
    CHECK_THROWS_AS(mse({}, {}), ValidationError);
}

TEST_CASE("mse properties: non-negative, zero iff equal, symmetric") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(10), b(10);
        for (auto& v : a) v = rng.uniform();
        for (auto& v : b) v = rng.uniform();
        const double ab = mse(a, b);
        CHECK(ab >= 0.0);
        CHECK(ab == mse(b, a));
        CHECK(mse(a, a) == 0.0);
        if (a != b) CHECK(ab > 0.0);
    }
}

TEST_CASE("linear regression fits an exact linear target to machine precision") {
    Rng rng(17);
    const int n = 40, d = 5;
    FeatureMatrix x(n, d);
    std::vector<double> y(n);
    const std::vector<double> w = {0.2, -0.1, 0.05, 0.3, -0.25};
    for (int i = 0; i < n; ++i) {
        double s = 0.4;
        for (int j = 0; j < d; ++j) {
            x.at(i, j) = rng.uniform(-1.0, 1.0);
            s += w[static_cast<std::size_t>(j)] * x.at(i, j);
        }
        y[static_cast<std::size_t>(i)] = s;
    }
    const TrainedRegressor model = train(RegressorKind::LINEAR, x, y, 1);
    CHECK(model.train_loss() <= 1e-10);
    // a training point reproduces its own target
    CHECK(std::abs(model.predict(x.row(0), d) - y[0]) <= 1e-8);
}

TEST_CASE("linear residuals are orthogonal to features on full-rank tall data") {
    Rng rng(29);
    const int n = 200, d = 8;
    FeatureMatrix x(n, d);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) x.at(i, j) = rng.normal();
        y[static_cast<std::size_t>(i)] = rng.uniform();  // arbitrary target
    }
    const TrainedRegressor model = train(RegressorKind::LINEAR, x, y, 1);
    std::vector<double> resid(n);
    for (int i = 0; i < n; ++i) {
        // raw (unclipped) residual via the model on in-range targets
        resid[static_cast<std::size_t>(i)] =
            y[static_cast<std::size_t>(i)] - model.predict(x.row(i), d);
    }
    for (int j = 0; j < d; ++j) {
        double dot = 0.0;
        for (int i = 0; i < n; ++i) dot += x.at(i, j) * resid[static_cast<std::size_t>(i)];
        CHECK(std::abs(dot / n) <= 1e-6);
    }
}

TEST_CASE("wide data (p > n) is handled through the dual solve") {
    const Planted p = plant_linear(60, 40, 256, 16, 0.0, 5);
    const TrainedRegressor model = train(RegressorKind::LINEAR, p.x, p.y, 1);
    CHECK(model.train_loss() <= 1e-8);  // interpolation regime
    CHECK(test_mae(model, p) <= 0.05);  // signal carried by the min-norm fit
}

TEST_CASE("constant targets are reproduced by every family") {
    Rng rng(41);
    const int n = 24, d = 6;
    FeatureMatrix x(n, d);
    for (auto& v : x.data) v = rng.normal();
    const std::vector<double> y(n, 0.4);

    RegressorParams params;
    params.mlp.hidden1 = 16;
    params.mlp.hidden2 = 8;
    params.mlp.batch_size = 8;
    params.mlp.max_epochs = 400;
    params.mlp.learning_rate = 3e-3;

    for (RegressorKind kind : all_regressor_kinds()) {
        const TrainedRegressor model = train(kind, x, y, 3, params);
        const double tol = kind == RegressorKind::MLP ? 0.02 : 1e-6;
        for (int i = 0; i < 5; ++i)
            CHECK(std::abs(model.predict(x.row(i), d) - 0.4) <= tol);
    }
}

TEST_CASE("planted high-dimensional signal: linear head") {
    const Planted p = plant_linear(300, 100, 2048, 32, 0.01, 7);
    const TrainedRegressor model = train(RegressorKind::LINEAR, p.x, p.y, 1);
    CHECK(test_mae(model, p) <= 0.02);
}

TEST_CASE("planted high-dimensional signal: mlp head") {
    const Planted p = plant_linear(300, 100, 2048, 32, 0.01, 8);
    RegressorParams params;
    params.mlp.hidden1 = 64;
    params.mlp.hidden2 = 32;
    params.mlp.batch_size = 8;
    params.mlp.max_epochs = 200;
    params.mlp.patience = 30;
    params.mlp.learning_rate = 3e-3;
    const TrainedRegressor model = train(RegressorKind::MLP, p.x, p.y, 5, params);
    CHECK(test_mae(model, p) <= 0.02);
}

TEST_CASE("forest and boosting recover a nonlinear signal") {
    Rng rng(55);
    const int n = 240, d = 12;
    FeatureMatrix x(n, d);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) x.at(i, j) = rng.uniform(-1.0, 1.0);
        y[static_cast<std::size_t>(i)] =
            x.at(i, 0) > 0.0 ? 0.8 : (x.at(i, 1) > 0.0 ? 0.45 : 0.2);
    }
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    double baseline = 0.0;
    for (double v : y) baseline += std::abs(v - mean);
    baseline /= n;

    RegressorParams params;
    params.forest.n_trees = 60;
    for (RegressorKind kind : {RegressorKind::RANDOM_FOREST,
                               RegressorKind::GRADIENT_BOOSTING, RegressorKind::SVM}) {
        const TrainedRegressor model = train(kind, x, y, 9, params);
        double fit_mae = 0.0;
        for (int i = 0; i < n; ++i)
            fit_mae += std::abs(model.predict(x.row(i), d) - y[static_cast<std::size_t>(i)]);
        fit_mae /= n;
        CHECK(fit_mae < 0.4 * baseline);
    }
}

TEST_CASE("raw outputs are clipped into the unit interval") {
    Rng rng(61);
    const int n = 30, d = 3;
    FeatureMatrix x(n, d);
    for (auto& v : x.data) v = rng.normal();
    const TrainedRegressor high = train(RegressorKind::LINEAR, x, std::vector<double>(n, 1.3), 1);
    CHECK(high.predict(x.row(0), d) == 1.0);
    const TrainedRegressor low = train(RegressorKind::LINEAR, x, std::vector<double>(n, -0.2), 1);
    CHECK(low.predict(x.row(0), d) == 0.0);
}

TEST_CASE("input validation: shape, NaN, dim mismatch") {
    FeatureMatrix x(4, 2);
    std::vector<double> y = {0.1, 0.2, 0.3};
    CHECK_THROWS_AS(train(RegressorKind::LINEAR, x, y, 1), ValidationError);  // |X| != |y|

    y.push_back(0.4);
    x.at(2, 1) = std::nan("");
    CHECK_THROWS_WITH_AS(train(RegressorKind::LINEAR, x, y, 1),
                         doctest::Contains("non-finite"), ValidationError);

    x.at(2, 1) = 0.0;
    const TrainedRegressor model = train(RegressorKind::LINEAR, x, y, 1);
    std::vector<double> probe = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(model.predict(probe), ValidationError);

    FeatureMatrix one(1, 2);
    CHECK_THROWS_AS(train(RegressorKind::LINEAR, one, {0.5}, 1), ValidationError);
}

TEST_CASE("seed determinism: equal seeds reproduce predictions bitwise") {
    const Planted p = plant_linear(80, 20, 24, 12, 0.02, 13);
    RegressorParams params;
    params.forest.n_trees = 30;
    params.mlp.hidden1 = 12;
    params.mlp.hidden2 = 6;
    params.mlp.max_epochs = 40;
    for (RegressorKind kind : {RegressorKind::RANDOM_FOREST, RegressorKind::MLP}) {
        const TrainedRegressor a = train(kind, p.x, p.y, 777, params);
        const TrainedRegressor b = train(kind, p.x, p.y, 777, params);
        for (int i = 0; i < p.x_test.rows; ++i)
            REQUIRE(a.predict(p.x_test.row(i), p.x_test.cols) ==
                    b.predict(p.x_test.row(i), p.x_test.cols));
        // and a different seed moves at least one prediction
        const TrainedRegressor c = train(kind, p.x, p.y, 778, params);
        bool any_diff = false;
        for (int i = 0; i < p.x_test.rows; ++i)
            any_diff |= a.predict(p.x_test.row(i), p.x_test.cols) !=
                        c.predict(p.x_test.row(i), p.x_test.cols);
        CHECK(any_diff);
    }
}

TEST_CASE("mlp analytic gradients match central finite differences") {
    // the 3-sample, 8-dim fixture
    Rng rng(19);
    FeatureMatrix x(3, 8);
    for (auto& v : x.data) v = rng.normal();
    const std::vector<double> y = {0.25, 0.5, 0.75};
    MlpParams params;
    params.hidden1 = 6;
    params.hidden2 = 4;
    const double worst = mlp_gradient_check(x, y, params, 23);
    CHECK(worst <= 1e-4);
}

TEST_CASE("models serialize and re-score identically") {
    const Planted p = plant_linear(60, 10, 16, 8, 0.02, 21);
    RegressorParams params;
    params.forest.n_trees = 20;
    params.boosting.n_estimators = 30;
    params.mlp.hidden1 = 10;
    params.mlp.hidden2 = 5;
    params.mlp.max_epochs = 30;
    for (RegressorKind kind : all_regressor_kinds()) {
        const TrainedRegressor model = train(kind, p.x, p.y, 99, params);
        std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
        model.save(buf);
        const TrainedRegressor back = TrainedRegressor::load(buf);
        CHECK(back.kind() == kind);
        CHECK(back.input_dim() == model.input_dim());
        CHECK(back.seed() == model.seed());
        CHECK(back.train_loss() == model.train_loss());
        for (int i = 0; i < p.x_test.rows; ++i)
            REQUIRE(back.predict(p.x_test.row(i), p.x_test.cols) ==
                    model.predict(p.x_test.row(i), p.x_test.cols));
    }
}

TEST_CASE("regressor params round-trip through the versioned config file") {
    RegressorParams p;
    p.linear.ridge_lambda = 1e-6;
    p.forest.n_trees = 321;
    p.svm.c = 42.0;
    p.mlp.hidden1 = 128;
    const auto path = std::filesystem::temp_directory_path() / "crt_params_test.json";
    save_regressor_params(path, p);
    const RegressorParams back = load_regressor_params(path);
    CHECK(back.linear.ridge_lambda == p.linear.ridge_lambda);
    CHECK(back.forest.n_trees == 321);
    CHECK(back.svm.c == 42.0);
    CHECK(back.mlp.hidden1 == 128);
    CHECK(back.mlp.hidden2 == p.mlp.hidden2);  // untouched default
    std::filesystem::remove(path);
}

}  // TEST_SUITE
