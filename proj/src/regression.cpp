#include "crt/regression.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "crt/error.hpp"
#include "crt/media.hpp"
#include "reg_internal.hpp"

namespace crt {

const char* to_string(RegressorKind k) {
    switch (k) {
        case RegressorKind::LINEAR: return "lr";
        case RegressorKind::RANDOM_FOREST: return "rf";
        case RegressorKind::GRADIENT_BOOSTING: return "gb";
        case RegressorKind::SVM: return "svm";
        case RegressorKind::MLP: return "mlp";
    }
    return "?";
}

RegressorKind regressor_from_string(const std::string& s) {
    if (s == "lr" || s == "linear") return RegressorKind::LINEAR;
    if (s == "rf" || s == "random_forest") return RegressorKind::RANDOM_FOREST;
    if (s == "gb" || s == "gradient_boosting") return RegressorKind::GRADIENT_BOOSTING;
    if (s == "svm") return RegressorKind::SVM;
    if (s == "mlp") return RegressorKind::MLP;
    throw Error("unknown regressor '" + s + "' (expected lr|rf|gb|svm|mlp)");
}

std::vector<RegressorKind> all_regressor_kinds() {
    return {RegressorKind::LINEAR, RegressorKind::RANDOM_FOREST,
            RegressorKind::GRADIENT_BOOSTING, RegressorKind::SVM, RegressorKind::MLP};
}

FeatureMatrix to_features(const std::vector<Embedding>& xs) {
    if (xs.empty()) throw ValidationError("to_features: empty embedding list");
    FeatureMatrix m(static_cast<int>(xs.size()), xs.front().dim());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].dim() != m.cols)
            throw ValidationError("to_features: embedding dim " +
                                  std::to_string(xs[i].dim()) + " at row " +
                                  std::to_string(i) + " differs from " +
                                  std::to_string(m.cols));
        for (int j = 0; j < m.cols; ++j)
            m.at(static_cast<int>(i), j) = xs[i].vector[static_cast<std::size_t>(j)];
    }
    return m;
}

double mse(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    if (y_true.size() != y_pred.size())
        throw ValidationError("mse: length mismatch (" + std::to_string(y_true.size()) +
                              " vs " + std::to_string(y_pred.size()) + ")");
    if (y_true.empty()) throw ValidationError("mse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double e = y_true[i] - y_pred[i];
        s += e * e;
    }
    return s / static_cast<double>(y_true.size());
}

// --- binary payload helpers ---------------------------------------------------

namespace detail {

void put_i32(std::ostream& out, std::int32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((static_cast<std::uint32_t>(v) >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(&v), 8);
}

void put_f64_vec(std::ostream& out, const std::vector<double>& v) {
    put_i32(out, static_cast<std::int32_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::int32_t get_i32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("model payload: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return static_cast<std::int32_t>(v);
}

double get_f64(std::istream& in) {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw IoError("model payload: truncated");
    return v;
}

std::vector<double> get_f64_vec(std::istream& in) {
    const std::int32_t n = get_i32(in);
    if (n < 0) throw IoError("model payload: negative vector length");
    std::vector<double> v(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw IoError("model payload: truncated");
    return v;
}

}  // namespace detail

// --- train / predict ------------------------------------------------------------

TrainedRegressor train(RegressorKind kind, const FeatureMatrix& x,
                       const std::vector<double>& y, std::uint64_t seed,
                       const RegressorParams& params) {
    if (x.rows != static_cast<int>(y.size()))
        throw ValidationError("train: |X| = " + std::to_string(x.rows) + " but |y| = " +
                              std::to_string(y.size()));
    if (x.rows < 2) throw ValidationError("train: need at least 2 samples");
    if (x.cols < 1) throw ValidationError("train: empty feature dimension");
    for (double v : x.data)
        if (!std::isfinite(v)) throw ValidationError("train: non-finite value in X");
    for (double v : y)
        if (!std::isfinite(v)) throw ValidationError("train: non-finite value in y");

    std::unique_ptr<detail::Model> model;
    switch (kind) {
        case RegressorKind::LINEAR: model = detail::train_linear(x, y, params.linear); break;
        case RegressorKind::RANDOM_FOREST:
            model = detail::train_forest(x, y, seed, params.forest);
            break;
        case RegressorKind::GRADIENT_BOOSTING:
            model = detail::train_boosting(x, y, params.boosting);
            break;
        case RegressorKind::SVM: model = detail::train_svr(x, y, params.svm); break;
        case RegressorKind::MLP: model = detail::train_mlp(x, y, seed, params.mlp); break;
    }

    TrainedRegressor out;
    out.kind_ = kind;
    out.input_dim_ = x.cols;
    out.seed_ = seed;
    std::vector<double> pred(static_cast<std::size_t>(x.rows));
    for (int i = 0; i < x.rows; ++i)
        pred[static_cast<std::size_t>(i)] = model->predict_raw(x.row(i));
    out.train_loss_ = mse(y, pred);
    out.model_ = std::move(model);
    return out;
}

TrainedRegressor train(RegressorKind kind, const std::vector<Embedding>& x,
                       const std::vector<double>& y, std::uint64_t seed,
                       const RegressorParams& params) {
    return train(kind, to_features(x), y, seed, params);
}

double TrainedRegressor::predict(const double* x, int dim) const {
    if (!model_) throw Error("predict: model not trained");
    if (dim != input_dim_)
        throw ValidationError("predict: input dim " + std::to_string(dim) +
                              " != model input dim " + std::to_string(input_dim_));
    const double raw = model_->predict_raw(x);
    if (!std::isfinite(raw)) throw Error("predict: non-finite model output");
    return std::clamp(raw, 0.0, 1.0);  // targets live in [0, 1]
}

double TrainedRegressor::predict(const std::vector<double>& x) const {
    return predict(x.data(), static_cast<int>(x.size()));
}

double TrainedRegressor::predict(const Embedding& e) const {
    std::vector<double> x(e.vector.begin(), e.vector.end());
    return predict(x.data(), e.dim());
}

// --- model files -----------------------------------------------------------------

void TrainedRegressor::save(std::ostream& out) const {
    if (!model_) throw Error("save: model not trained");
    char hdr[128];
    std::snprintf(hdr, sizeof(hdr), "CRTM1 %s %d %llu %.17g\n", to_string(kind_),
                  input_dim_, static_cast<unsigned long long>(seed_), train_loss_);
    out << hdr;
    model_->save_payload(out);
}

void TrainedRegressor::save(const std::filesystem::path& path) const {
    std::ostringstream ss(std::ios::binary);
    save(ss);
    write_file_atomic(path, ss.str());
}

TrainedRegressor TrainedRegressor::load(std::istream& in) {
    std::string magic, kind_s;
    TrainedRegressor out;
    unsigned long long seed = 0;
    in >> magic >> kind_s >> out.input_dim_ >> seed >> out.train_loss_;
    if (!in || magic != "CRTM1") throw ParseError("model file: bad header");
    in.get();  // newline
    out.seed_ = seed;
    out.kind_ = regressor_from_string(kind_s);
    switch (out.kind_) {
        case RegressorKind::LINEAR: out.model_ = detail::load_linear(in); break;
        case RegressorKind::RANDOM_FOREST: out.model_ = detail::load_forest(in); break;
        case RegressorKind::GRADIENT_BOOSTING: out.model_ = detail::load_boosting(in); break;
        case RegressorKind::SVM: out.model_ = detail::load_svr(in); break;
        case RegressorKind::MLP: out.model_ = detail::load_mlp(in); break;
    }
    return out;
}

TrainedRegressor TrainedRegressor::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("model file: cannot open " + path.string());
    return load(in);
}

// --- params config ----------------------------------------------------------------

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RegressorParams load_regressor_params(const std::filesystem::path& json_path) {
    try {
        return parse_regressor_params(read_file(json_path));
    } catch (const ParseError& e) {
        throw ParseError("regressor params: " + json_path.string() + ": " + e.what());
    }
}

RegressorParams parse_regressor_params(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what());
    }
    RegressorParams p;
    if (j.contains("linear")) {
        maybe(j["linear"], "ridge_lambda", p.linear.ridge_lambda);
    }
    if (j.contains("random_forest")) {
        const auto& f = j["random_forest"];
        maybe(f, "n_trees", p.forest.n_trees);
        maybe(f, "max_depth", p.forest.max_depth);
        maybe(f, "min_samples_leaf", p.forest.min_samples_leaf);
        maybe(f, "feature_frac", p.forest.feature_frac);
    }
    if (j.contains("gradient_boosting")) {
        const auto& g = j["gradient_boosting"];
        maybe(g, "n_estimators", p.boosting.n_estimators);
        maybe(g, "learning_rate", p.boosting.learning_rate);
        maybe(g, "max_depth", p.boosting.max_depth);
        maybe(g, "min_samples_leaf", p.boosting.min_samples_leaf);
    }
    if (j.contains("svm")) {
        const auto& s = j["svm"];
        maybe(s, "c", p.svm.c);
        maybe(s, "epsilon", p.svm.epsilon);
        maybe(s, "gamma", p.svm.gamma);
        maybe(s, "max_passes", p.svm.max_passes);
        maybe(s, "tol", p.svm.tol);
    }
    if (j.contains("mlp")) {
        const auto& m = j["mlp"];
        maybe(m, "hidden1", p.mlp.hidden1);
        maybe(m, "hidden2", p.mlp.hidden2);
        maybe(m, "learning_rate", p.mlp.learning_rate);
        maybe(m, "batch_size", p.mlp.batch_size);
        maybe(m, "max_epochs", p.mlp.max_epochs);
        maybe(m, "patience", p.mlp.patience);
        maybe(m, "val_fraction", p.mlp.val_fraction);
    }
    return p;
}

void save_regressor_params(const std::filesystem::path& json_path,
                           const RegressorParams& p) {
    nlohmann::json j;
    j["version"] = 1;
    j["linear"] = {{"ridge_lambda", p.linear.ridge_lambda}};
    j["random_forest"] = {{"n_trees", p.forest.n_trees},
                          {"max_depth", p.forest.max_depth},
                          {"min_samples_leaf", p.forest.min_samples_leaf},
                          {"feature_frac", p.forest.feature_frac}};
    j["gradient_boosting"] = {{"n_estimators", p.boosting.n_estimators},
                              {"learning_rate", p.boosting.learning_rate},
                              {"max_depth", p.boosting.max_depth},
                              {"min_samples_leaf", p.boosting.min_samples_leaf}};
    j["svm"] = {{"c", p.svm.c},
                {"epsilon", p.svm.epsilon},
                {"gamma", p.svm.gamma},
                {"max_passes", p.svm.max_passes},
                {"tol", p.svm.tol}};
    j["mlp"] = {{"hidden1", p.mlp.hidden1},
                {"hidden2", p.mlp.hidden2},
                {"learning_rate", p.mlp.learning_rate},
                {"batch_size", p.mlp.batch_size},
                {"max_epochs", p.mlp.max_epochs},
                {"patience", p.mlp.patience},
                {"val_fraction", p.mlp.val_fraction}};
    write_file_atomic(json_path, j.dump(2) + "\n");
}

}  // namespace crt
