#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "crt/error.hpp"
#include "crt/rng.hpp"
#include "reg_internal.hpp"

namespace crt::detail {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;  // running = m*running + (1-m)*batch

// x -> W1 -> BN -> ReLU -> W2 -> BN -> ReLU -> w3.z + b3 -> sigmoid.
// Linear layers feeding a batch-norm carry no bias (the BN shift absorbs it).
// All parameters live in one flat vector so the finite-difference gradient
// check can perturb them uniformly.
struct MlpNet {
    int d = 0, h1 = 0, h2 = 0;
    std::vector<double> params;
    std::vector<double> running;  // mean1, var1, mean2, var2

    int w1_off() const { return 0; }
    int g1_off() const { return h1 * d; }
    int b1_off() const { return g1_off() + h1; }
    int w2_off() const { return b1_off() + h1; }
    int g2_off() const { return w2_off() + h2 * h1; }
    int b2_off() const { return g2_off() + h2; }
    int w3_off() const { return b2_off() + h2; }
    int b3_off() const { return w3_off() + h2; }
    int param_count() const { return b3_off() + 1; }

    void init(std::uint64_t seed) {
        params.assign(static_cast<std::size_t>(param_count()), 0.0);
        running.assign(static_cast<std::size_t>(2 * (h1 + h2)), 0.0);
        for (int j = 0; j < h1 + h2; ++j) running[static_cast<std::size_t>(h1 + h2 + j)] = 1.0;

        Rng rng(seed);
        const double s1 = std::sqrt(2.0 / d);
        for (int i = 0; i < h1 * d; ++i) params[static_cast<std::size_t>(w1_off() + i)] = rng.normal() * s1;
        const double s2 = std::sqrt(2.0 / h1);
        for (int i = 0; i < h2 * h1; ++i) params[static_cast<std::size_t>(w2_off() + i)] = rng.normal() * s2;
        const double s3 = std::sqrt(1.0 / h2);
        for (int i = 0; i < h2; ++i) params[static_cast<std::size_t>(w3_off() + i)] = rng.normal() * s3;
        for (int i = 0; i < h1; ++i) params[static_cast<std::size_t>(g1_off() + i)] = 1.0;
        for (int i = 0; i < h2; ++i) params[static_cast<std::size_t>(g2_off() + i)] = 1.0;
    }

    // Training-mode loss (batch statistics) over the m x d batch; when grad
    // is non-null it receives dLoss/dparams and the running stats are
    // updated. Mean squared error per Eq-style 1/m normalization.
    double loss_and_grad(const double* x, const double* y, int m,
                         std::vector<double>* grad, bool update_running) {
        const auto& P = params;
        std::vector<double> z1(static_cast<std::size_t>(m) * h1);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < h1; ++j) {
                const double* w = P.data() + w1_off() + static_cast<std::size_t>(j) * d;
                const double* xi = x + static_cast<std::size_t>(i) * d;
                double s = 0.0;
                for (int k = 0; k < d; ++k) s += w[k] * xi[k];
                z1[static_cast<std::size_t>(i) * h1 + j] = s;
            }

        std::vector<double> mu1(h1), var1(h1), zh1(z1.size()), a1(z1.size());
        bn_forward(z1.data(), m, h1, P.data() + g1_off(), P.data() + b1_off(),
                   mu1.data(), var1.data(), zh1.data(), a1.data());
        std::vector<double> r1(a1.size());
        for (std::size_t i = 0; i < a1.size(); ++i) r1[i] = a1[i] > 0.0 ? a1[i] : 0.0;

        std::vector<double> z2(static_cast<std::size_t>(m) * h2);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < h2; ++j) {
                const double* w = P.data() + w2_off() + static_cast<std::size_t>(j) * h1;
                const double* ri = r1.data() + static_cast<std::size_t>(i) * h1;
                double s = 0.0;
                for (int k = 0; k < h1; ++k) s += w[k] * ri[k];
                z2[static_cast<std::size_t>(i) * h2 + j] = s;
            }

        std::vector<double> mu2(h2), var2(h2), zh2(z2.size()), a2(z2.size());
        bn_forward(z2.data(), m, h2, P.data() + g2_off(), P.data() + b2_off(),
                   mu2.data(), var2.data(), zh2.data(), a2.data());
        std::vector<double> r2(a2.size());
        for (std::size_t i = 0; i < a2.size(); ++i) r2[i] = a2[i] > 0.0 ? a2[i] : 0.0;

        std::vector<double> out(static_cast<std::size_t>(m));
        double loss = 0.0;
        for (int i = 0; i < m; ++i) {
            const double* ri = r2.data() + static_cast<std::size_t>(i) * h2;
            double s = P[static_cast<std::size_t>(b3_off())];
            const double* w = P.data() + w3_off();
            for (int k = 0; k < h2; ++k) s += w[k] * ri[k];
            out[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-s));
            const double e = out[static_cast<std::size_t>(i)] - y[i];
            loss += e * e;
        }
        loss /= static_cast<double>(m);

        if (update_running) {
            for (int j = 0; j < h1; ++j) {
                running[static_cast<std::size_t>(j)] =
                    kBnMomentum * running[static_cast<std::size_t>(j)] + (1 - kBnMomentum) * mu1[static_cast<std::size_t>(j)];
                running[static_cast<std::size_t>(h1 + h2 + j)] =
                    kBnMomentum * running[static_cast<std::size_t>(h1 + h2 + j)] + (1 - kBnMomentum) * var1[static_cast<std::size_t>(j)];
            }
            for (int j = 0; j < h2; ++j) {
                running[static_cast<std::size_t>(h1 + j)] =
                    kBnMomentum * running[static_cast<std::size_t>(h1 + j)] + (1 - kBnMomentum) * mu2[static_cast<std::size_t>(j)];
                running[static_cast<std::size_t>(h1 + h2 + h1 + j)] =
                    kBnMomentum * running[static_cast<std::size_t>(h1 + h2 + h1 + j)] + (1 - kBnMomentum) * var2[static_cast<std::size_t>(j)];
            }
        }

        if (!grad) return loss;
        grad->assign(params.size(), 0.0);
        auto& G = *grad;

        // output layer
        std::vector<double> dr2(static_cast<std::size_t>(m) * h2, 0.0);
        for (int i = 0; i < m; ++i) {
            const double o = out[static_cast<std::size_t>(i)];
            const double dpre = 2.0 * (o - y[i]) / static_cast<double>(m) * o * (1.0 - o);
            G[static_cast<std::size_t>(b3_off())] += dpre;
            const double* ri = r2.data() + static_cast<std::size_t>(i) * h2;
            for (int k = 0; k < h2; ++k) {
                G[static_cast<std::size_t>(w3_off() + k)] += dpre * ri[k];
                dr2[static_cast<std::size_t>(i) * h2 + k] =
                    dpre * P[static_cast<std::size_t>(w3_off() + k)];
            }
        }

        // relu 2 -> bn 2 -> linear 2
        std::vector<double> da2(dr2.size());
        for (std::size_t i = 0; i < dr2.size(); ++i) da2[i] = a2[i] > 0.0 ? dr2[i] : 0.0;
        std::vector<double> dz2(da2.size());
        bn_backward(z2.data(), zh2.data(), da2.data(), m, h2, P.data() + g2_off(),
                    mu2.data(), var2.data(), G.data() + g2_off(), G.data() + b2_off(),
                    dz2.data());

        std::vector<double> dr1(static_cast<std::size_t>(m) * h1, 0.0);
        for (int i = 0; i < m; ++i) {
            const double* ri = r1.data() + static_cast<std::size_t>(i) * h1;
            for (int j = 0; j < h2; ++j) {
                const double dz = dz2[static_cast<std::size_t>(i) * h2 + j];
                if (dz == 0.0) continue;
                double* gw = G.data() + w2_off() + static_cast<std::size_t>(j) * h1;
                const double* w = P.data() + w2_off() + static_cast<std::size_t>(j) * h1;
                double* dri = dr1.data() + static_cast<std::size_t>(i) * h1;
                for (int k = 0; k < h1; ++k) {
                    gw[k] += dz * ri[k];
                    dri[k] += dz * w[k];
                }
            }
        }

        // relu 1 -> bn 1 -> linear 1
        std::vector<double> da1(dr1.size());
        for (std::size_t i = 0; i < dr1.size(); ++i) da1[i] = a1[i] > 0.0 ? dr1[i] : 0.0;
        std::vector<double> dz1(da1.size());
        bn_backward(z1.data(), zh1.data(), da1.data(), m, h1, P.data() + g1_off(),
                    mu1.data(), var1.data(), G.data() + g1_off(), G.data() + b1_off(),
                    dz1.data());

        for (int i = 0; i < m; ++i) {
            const double* xi = x + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < h1; ++j) {
                const double dz = dz1[static_cast<std::size_t>(i) * h1 + j];
                if (dz == 0.0) continue;
                double* gw = G.data() + w1_off() + static_cast<std::size_t>(j) * d;
                for (int k = 0; k < d; ++k) gw[k] += dz * xi[k];
            }
        }
        return loss;
    }

    double predict(const double* x) const {
        const auto& P = params;
        std::vector<double> r1(static_cast<std::size_t>(h1));
        for (int j = 0; j < h1; ++j) {
            const double* w = P.data() + w1_off() + static_cast<std::size_t>(j) * d;
            double s = 0.0;
            for (int k = 0; k < d; ++k) s += w[k] * x[k];
            const double inv = 1.0 / std::sqrt(running[static_cast<std::size_t>(h1 + h2 + j)] + kBnEps);
            const double a = P[static_cast<std::size_t>(g1_off() + j)] *
                                 ((s - running[static_cast<std::size_t>(j)]) * inv) +
                             P[static_cast<std::size_t>(b1_off() + j)];
            r1[static_cast<std::size_t>(j)] = a > 0.0 ? a : 0.0;
        }
        std::vector<double> r2(static_cast<std::size_t>(h2));
        for (int j = 0; j < h2; ++j) {
            const double* w = P.data() + w2_off() + static_cast<std::size_t>(j) * h1;
            double s = 0.0;
            for (int k = 0; k < h1; ++k) s += w[k] * r1[static_cast<std::size_t>(k)];
            const double inv =
                1.0 / std::sqrt(running[static_cast<std::size_t>(h1 + h2 + h1 + j)] + kBnEps);
            const double a = P[static_cast<std::size_t>(g2_off() + j)] *
                                 ((s - running[static_cast<std::size_t>(h1 + j)]) * inv) +
                             P[static_cast<std::size_t>(b2_off() + j)];
            r2[static_cast<std::size_t>(j)] = a > 0.0 ? a : 0.0;
        }
        double s = P[static_cast<std::size_t>(b3_off())];
        for (int k = 0; k < h2; ++k)
            s += P[static_cast<std::size_t>(w3_off() + k)] * r2[static_cast<std::size_t>(k)];
        return 1.0 / (1.0 + std::exp(-s));
    }

private:
    static void bn_forward(const double* z, int m, int h, const double* gamma,
                           const double* beta, double* mu, double* var, double* zh,
                           double* a) {
        for (int j = 0; j < h; ++j) {
            double s = 0.0;
            for (int i = 0; i < m; ++i) s += z[static_cast<std::size_t>(i) * h + j];
            mu[j] = s / m;
            double v = 0.0;
            for (int i = 0; i < m; ++i) {
                const double c = z[static_cast<std::size_t>(i) * h + j] - mu[j];
                v += c * c;
            }
            var[j] = v / m;  // biased, matching the backward pass
            const double inv = 1.0 / std::sqrt(var[j] + kBnEps);
            for (int i = 0; i < m; ++i) {
                const std::size_t idx = static_cast<std::size_t>(i) * h + j;
                zh[idx] = (z[idx] - mu[j]) * inv;
                a[idx] = gamma[j] * zh[idx] + beta[j];
            }
        }
    }

    static void bn_backward(const double* z, const double* zh, const double* da, int m,
                            int h, const double* gamma, const double* mu,
                            const double* var, double* dgamma, double* dbeta,
                            double* dz) {
        for (int j = 0; j < h; ++j) {
            const double inv = 1.0 / std::sqrt(var[j] + kBnEps);
            double sum_da = 0.0, sum_da_zh = 0.0, sum_dzh_c = 0.0, sum_dzh = 0.0, sum_c = 0.0;
            for (int i = 0; i < m; ++i) {
                const std::size_t idx = static_cast<std::size_t>(i) * h + j;
                sum_da += da[idx];
                sum_da_zh += da[idx] * zh[idx];
                const double dzh = da[idx] * gamma[j];
                const double c = z[idx] - mu[j];
                sum_dzh += dzh;
                sum_dzh_c += dzh * c;
                sum_c += c;
            }
            dgamma[j] += sum_da_zh;
            dbeta[j] += sum_da;
            const double dvar = sum_dzh_c * (-0.5) * inv * inv * inv;
            const double dmu = -inv * sum_dzh + dvar * (-2.0 / m) * sum_c;
            for (int i = 0; i < m; ++i) {
                const std::size_t idx = static_cast<std::size_t>(i) * h + j;
                const double dzh = da[idx] * gamma[j];
                const double c = z[idx] - mu[j];
                dz[idx] = dzh * inv + dvar * 2.0 * c / m + dmu / m;
            }
        }
    }
};

class MlpModel final : public Model {
public:
    explicit MlpModel(MlpNet net) : net_(std::move(net)) {}

    double predict_raw(const double* x) const override { return net_.predict(x); }

    void save_payload(std::ostream& out) const override {
        put_i32(out, net_.d);
        put_i32(out, net_.h1);
        put_i32(out, net_.h2);
        put_f64_vec(out, net_.params);
        put_f64_vec(out, net_.running);
    }

private:
    MlpNet net_;
};

struct Adam {
    std::vector<double> m, v;
    double lr;
    int step = 0;

    Adam(std::size_t n, double learning_rate) : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}

    void update(std::vector<double>& params, const std::vector<double>& grad) {
        ++step;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double bc1 = 1.0 - std::pow(b1, step);
        const double bc2 = 1.0 - std::pow(b2, step);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (1 - b1) * grad[i];
            v[i] = b2 * v[i] + (1 - b2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
};

std::vector<double> gather_rows(const FeatureMatrix& x, const std::vector<int>& idx) {
    std::vector<double> out(idx.size() * static_cast<std::size_t>(x.cols));
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(x.row(idx[i]), x.row(idx[i]) + x.cols,
                  out.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(x.cols)));
    return out;
}

}  // namespace

std::unique_ptr<Model> train_mlp(const FeatureMatrix& x, const std::vector<double>& y,
                                 std::uint64_t seed, const MlpParams& p) {
    if (p.hidden1 < 1 || p.hidden2 < 1) throw Error("mlp: hidden widths must be positive");
    if (p.batch_size < 2) throw Error("mlp: batch_size must be at least 2 (batch norm)");
    const int n = x.rows;

    MlpNet net;
    net.d = x.cols;
    net.h1 = p.hidden1;
    net.h2 = p.hidden2;
    net.init(seed);

    Rng rng(mix_seed(seed, 0x6d6c70));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    // Hold out a validation slice for early stopping. A handful of samples is
    // a noise signal that freezes training at an arbitrary snapshot, so the
    // slice must reach a minimum size or training just runs the full budget.
    int n_val = static_cast<int>(std::lround(p.val_fraction * n));
    n_val = std::min(n_val, std::max(0, n - 2));
    if (n_val < 4) n_val = 0;
    std::vector<int> val_idx(order.begin(), order.begin() + n_val);
    std::vector<int> train_idx(order.begin() + n_val, order.end());
    const int n_train = static_cast<int>(train_idx.size());

    const std::vector<double> val_x = gather_rows(x, val_idx);

    Adam adam(net.params.size(), p.learning_rate);
    std::vector<double> grad;
    std::vector<double> best_params = net.params;
    std::vector<double> best_running = net.running;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;

    std::vector<double> batch_x;
    std::vector<double> batch_y;
    for (int epoch = 0; epoch < p.max_epochs; ++epoch) {
        rng.shuffle(train_idx);
        int pos = 0;
        while (pos < n_train) {
            int take = std::min(p.batch_size, n_train - pos);
            // batch norm needs at least two samples; fold a trailing
            // singleton into this batch
            if (n_train - pos - take == 1) take += 1;
            std::vector<int> batch(train_idx.begin() + pos,
                                   train_idx.begin() + pos + take);
            pos += take;
            batch_x = gather_rows(x, batch);
            batch_y.resize(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i)
                batch_y[i] = y[static_cast<std::size_t>(batch[i])];
            net.loss_and_grad(batch_x.data(), batch_y.data(),
                              static_cast<int>(batch.size()), &grad, true);
            adam.update(net.params, grad);
        }

        if (n_val > 0) {
            double val_mse = 0.0;
            for (int i = 0; i < n_val; ++i) {
                const double pred = net.predict(val_x.data() +
                                                static_cast<std::size_t>(i) * net.d);
                const double e = pred - y[static_cast<std::size_t>(val_idx[static_cast<std::size_t>(i)])];
                val_mse += e * e;
            }
            val_mse /= n_val;
            if (val_mse < best_val - 1e-12) {
                best_val = val_mse;
                best_params = net.params;
                best_running = net.running;
                since_best = 0;
            } else if (++since_best >= p.patience) {
                break;
            }
        }
    }

    if (n_val > 0) {
        net.params = std::move(best_params);
        net.running = std::move(best_running);
    }
    return std::make_unique<MlpModel>(std::move(net));
}

std::unique_ptr<Model> load_mlp(std::istream& in) {
    MlpNet net;
    net.d = get_i32(in);
    net.h1 = get_i32(in);
    net.h2 = get_i32(in);
    net.params = get_f64_vec(in);
    net.running = get_f64_vec(in);
    if (static_cast<int>(net.params.size()) != net.param_count())
        throw Error("mlp: corrupt payload");
    return std::make_unique<MlpModel>(std::move(net));
}

}  // namespace crt::detail

// --- gradient check -----------------------------------------------------------

namespace crt {

double mlp_gradient_check(const FeatureMatrix& x, const std::vector<double>& y,
                          const MlpParams& params, std::uint64_t seed) {
    detail::MlpNet net;
    net.d = x.cols;
    net.h1 = params.hidden1;
    net.h2 = params.hidden2;
    net.init(seed);

    std::vector<double> grad;
    net.loss_and_grad(x.data.data(), y.data(), x.rows, &grad, false);

    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        const double saved = net.params[i];
        net.params[i] = saved + h;
        const double lp = net.loss_and_grad(x.data.data(), y.data(), x.rows, nullptr, false);
        net.params[i] = saved - h;
        const double lm = net.loss_and_grad(x.data.data(), y.data(), x.rows, nullptr, false);
        net.params[i] = saved;
        const double fd = (lp - lm) / (2.0 * h);
        const double rel = std::abs(grad[i] - fd) / std::max(1e-6, std::abs(grad[i]) + std::abs(fd));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace crt
