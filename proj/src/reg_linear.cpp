#include <cmath>
#include <istream>
#include <ostream>

#include "crt/error.hpp"
#include "crt/linalg.hpp"
#include "reg_internal.hpp"

namespace crt::detail {

namespace {

// Ridge regression with a tiny relative penalty, solved in whichever space is
// smaller: normal equations on the p x p Gram matrix when p <= n, otherwise
// the equivalent dual n x n system (embeddings are often wider than the
// training split, e.g. 2048 features vs ~410 samples).
class LinearModel final : public Model {
public:
    LinearModel(std::vector<double> weights, double intercept)
        : weights_(std::move(weights)), intercept_(intercept) {}

    double predict_raw(const double* x) const override {
        return intercept_ + linalg::dot(weights_.data(), x, weights_.size());
    }

    void save_payload(std::ostream& out) const override {
        put_f64(out, intercept_);
        put_f64_vec(out, weights_);
    }

private:
    std::vector<double> weights_;
    double intercept_;
};

}  // namespace

std::unique_ptr<Model> train_linear(const FeatureMatrix& x, const std::vector<double>& y,
                                    const LinearParams& p) {
    const std::size_t n = static_cast<std::size_t>(x.rows);
    const std::size_t d = static_cast<std::size_t>(x.cols);

    std::vector<double> xmean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.row(static_cast<int>(i));
        for (std::size_t j = 0; j < d; ++j) xmean[j] += row[j];
    }
    for (auto& m : xmean) m /= static_cast<double>(n);
    double ymean = 0.0;
    for (double v : y) ymean += v;
    ymean /= static_cast<double>(n);

    std::vector<double> xc(n * d);
    std::vector<double> yc(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.row(static_cast<int>(i));
        for (std::size_t j = 0; j < d; ++j) xc[i * d + j] = row[j] - xmean[j];
        yc[i] = y[i] - ymean;
    }

    std::vector<double> w(d, 0.0);
    if (d <= n) {
        std::vector<double> gram(d * d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = xc.data() + i * d;
            for (std::size_t a = 0; a < d; ++a) {
                const double ra = row[a];
                if (ra == 0.0) continue;
                double* grow = gram.data() + a * d;
                for (std::size_t b = a; b < d; ++b) grow[b] += ra * row[b];
            }
        }
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < a; ++b) gram[a * d + b] = gram[b * d + a];
        double trace = 0.0;
        for (std::size_t j = 0; j < d; ++j) trace += gram[j * d + j];
        const double lambda = p.ridge_lambda * (trace / static_cast<double>(d)) + 1e-300;
        for (std::size_t j = 0; j < d; ++j) gram[j * d + j] += lambda;
        const std::vector<double> rhs = linalg::matvec_t(xc, n, d, yc);
        w = linalg::solve_spd(std::move(gram), rhs, d);
    } else {
        std::vector<double> k(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j)
                k[i * n + j] = linalg::dot(xc.data() + i * d, xc.data() + j * d, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j) k[i * n + j] = k[j * n + i];
        double trace = 0.0;
        for (std::size_t i = 0; i < n; ++i) trace += k[i * n + i];
        const double lambda = p.ridge_lambda * (trace / static_cast<double>(n)) + 1e-300;
        for (std::size_t i = 0; i < n; ++i) k[i * n + i] += lambda;
        const std::vector<double> alpha = linalg::solve_spd(std::move(k), yc, n);
        w = linalg::matvec_t(xc, n, d, alpha);
    }

    const double intercept = ymean - linalg::dot(w.data(), xmean.data(), d);
    return std::make_unique<LinearModel>(std::move(w), intercept);
}

std::unique_ptr<Model> load_linear(std::istream& in) {
    const double intercept = get_f64(in);
    std::vector<double> w = get_f64_vec(in);
    return std::make_unique<LinearModel>(std::move(w), intercept);
}

}  // namespace crt::detail
