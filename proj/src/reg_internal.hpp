#pragma once

// Internal seams between the regression front-end and the per-family
// implementations. Not installed; include only from src/.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "crt/regression.hpp"

namespace crt::detail {

struct Model {
    virtual ~Model() = default;
    virtual double predict_raw(const double* x) const = 0;
    virtual void save_payload(std::ostream& out) const = 0;
};

// binary little-endian helpers shared by the payload writers
void put_i32(std::ostream& out, std::int32_t v);
void put_f64(std::ostream& out, double v);
void put_f64_vec(std::ostream& out, const std::vector<double>& v);
std::int32_t get_i32(std::istream& in);
double get_f64(std::istream& in);
std::vector<double> get_f64_vec(std::istream& in);

std::unique_ptr<Model> train_linear(const FeatureMatrix& x, const std::vector<double>& y,
                                    const LinearParams& p);
std::unique_ptr<Model> load_linear(std::istream& in);

std::unique_ptr<Model> train_forest(const FeatureMatrix& x, const std::vector<double>& y,
                                    std::uint64_t seed, const ForestParams& p);
std::unique_ptr<Model> load_forest(std::istream& in);

std::unique_ptr<Model> train_boosting(const FeatureMatrix& x, const std::vector<double>& y,
                                      const BoostingParams& p);
std::unique_ptr<Model> load_boosting(std::istream& in);

std::unique_ptr<Model> train_svr(const FeatureMatrix& x, const std::vector<double>& y,
                                 const SvmParams& p);
std::unique_ptr<Model> load_svr(std::istream& in);

std::unique_ptr<Model> train_mlp(const FeatureMatrix& x, const std::vector<double>& y,
                                 std::uint64_t seed, const MlpParams& p);
std::unique_ptr<Model> load_mlp(std::istream& in);

}  // namespace crt::detail
