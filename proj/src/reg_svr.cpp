#include <cmath>
#include <istream>
#include <ostream>

#include "crt/error.hpp"
#include "reg_internal.hpp"

namespace crt::detail {

namespace {

double rbf(const double* a, const double* b, std::size_t d, double gamma) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return std::exp(-gamma * s);
}

// epsilon-SVR on centered targets without an explicit bias. Keeping the mean
// outside the kernel expansion removes the equality constraint from the dual,
// so plain cyclic coordinate descent with a soft-threshold update converges
// to the optimum of
//   min_beta 1/2 beta^T K beta - y^T beta + eps * |beta|_1,  |beta_i| <= C.
class SvrModel final : public Model {
public:
    SvrModel(std::vector<double> support, std::vector<double> beta, int dim,
             double gamma, double y_mean)
        : support_(std::move(support)), beta_(std::move(beta)), dim_(dim),
          gamma_(gamma), y_mean_(y_mean) {}

    double predict_raw(const double* x) const override {
        double s = y_mean_;
        const std::size_t d = static_cast<std::size_t>(dim_);
        for (std::size_t i = 0; i < beta_.size(); ++i)
            s += beta_[i] * rbf(support_.data() + i * d, x, d, gamma_);
        return s;
    }

    void save_payload(std::ostream& out) const override {
        put_i32(out, dim_);
        put_f64(out, gamma_);
        put_f64(out, y_mean_);
        put_f64_vec(out, beta_);
        put_f64_vec(out, support_);
    }

private:
    std::vector<double> support_;  // n_sv x dim
    std::vector<double> beta_;
    int dim_;
    double gamma_;
    double y_mean_;
};

}  // namespace

std::unique_ptr<Model> train_svr(const FeatureMatrix& x, const std::vector<double>& y,
                                 const SvmParams& p) {
    const std::size_t n = static_cast<std::size_t>(x.rows);
    const std::size_t d = static_cast<std::size_t>(x.cols);
    if (p.c <= 0) throw Error("svm: C must be positive");
    if (p.epsilon < 0) throw Error("svm: epsilon must be non-negative");

    double gamma = p.gamma;
    if (gamma <= 0.0) {
        // 1 / (dim * var(X)) over all matrix entries
        double mean = 0.0, sq = 0.0;
        for (double v : x.data) {
            mean += v;
            sq += v * v;
        }
        const double total = static_cast<double>(x.data.size());
        mean /= total;
        const double var = std::max(1e-12, sq / total - mean * mean);
        gamma = 1.0 / (static_cast<double>(d) * var);
    }

    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(n);
    std::vector<double> yc(n);
    for (std::size_t i = 0; i < n; ++i) yc[i] = y[i] - y_mean;

    std::vector<double> kernel(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = rbf(x.row(static_cast<int>(i)), x.row(static_cast<int>(j)), d, gamma);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }

    std::vector<double> beta(n, 0.0);
    std::vector<double> k_beta(n, 0.0);  // running K * beta
    for (int pass = 0; pass < p.max_passes; ++pass) {
        double max_delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double kii = kernel[i * n + i];
            const double r = yc[i] - (k_beta[i] - kii * beta[i]);
            double target = 0.0;
            if (r > p.epsilon)
                target = (r - p.epsilon) / kii;
            else if (r < -p.epsilon)
                target = (r + p.epsilon) / kii;
            target = std::clamp(target, -p.c, p.c);
            const double delta = target - beta[i];
            if (delta != 0.0) {
                const double* krow = kernel.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) k_beta[j] += krow[j] * delta;
                beta[i] = target;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        if (max_delta < p.tol * p.c) break;
    }

    // keep only support vectors
    std::vector<double> support;
    std::vector<double> sv_beta;
    for (std::size_t i = 0; i < n; ++i) {
        if (beta[i] != 0.0) {
            const double* row = x.row(static_cast<int>(i));
            support.insert(support.end(), row, row + d);
            sv_beta.push_back(beta[i]);
        }
    }
    return std::make_unique<SvrModel>(std::move(support), std::move(sv_beta),
                                      static_cast<int>(d), gamma, y_mean);
}

std::unique_ptr<Model> load_svr(std::istream& in) {
    const std::int32_t dim = get_i32(in);
    const double gamma = get_f64(in);
    const double y_mean = get_f64(in);
    std::vector<double> beta = get_f64_vec(in);
    std::vector<double> support = get_f64_vec(in);
    return std::make_unique<SvrModel>(std::move(support), std::move(beta), dim, gamma,
                                      y_mean);
}

}  // namespace crt::detail
