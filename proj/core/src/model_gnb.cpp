#include <cmath>

#include "mait/model.hpp"
#include "mait/stats.hpp"

namespace mait::detail {

TrainedModel fit_gnb(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                     std::span<const double> w) {
    const std::size_t d = x.cols;
    const double smoothing = std::pow(10.0, spec.hyper("var_smoothing_exp", -9.0));

    TrainedModel m;
    m.spec = spec;
    m.class_log_prior.resize(2);
    m.class_mean = Matrix(2, d);
    m.class_var = Matrix(2, d);

    double wsum[2] = {0.0, 0.0};
    for (std::size_t r = 0; r < x.rows; ++r) wsum[y[r] == 1] += w[r];
    const double total = wsum[0] + wsum[1];
    m.class_log_prior[0] = std::log(wsum[0] / total);
    m.class_log_prior[1] = std::log(wsum[1] / total);

    for (std::size_t c = 0; c < d; ++c) {
        double sx[2] = {0.0, 0.0};
        for (std::size_t r = 0; r < x.rows; ++r) sx[y[r] == 1] += w[r] * x.at(r, c);
        const double mu[2] = {sx[0] / wsum[0], sx[1] / wsum[1]};
        double ss[2] = {0.0, 0.0};
        for (std::size_t r = 0; r < x.rows; ++r) {
            const double diff = x.at(r, c) - mu[y[r] == 1];
            ss[y[r] == 1] += w[r] * diff * diff;
        }
        for (int k = 0; k < 2; ++k) {
            m.class_mean.at(k, c) = mu[k];
            m.class_var.at(k, c) = ss[k] / wsum[k];
        }
    }

    // additive smoothing plus a hard floor, both relative to the largest
    // overall feature variance
    double max_var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        const auto col = x.column(c);
        max_var = std::max(max_var, weighted_variance(col, w));
    }
    const double add = smoothing * max_var;
    const double floor = 1e-9 * max_var;
    for (int k = 0; k < 2; ++k) {
        for (std::size_t c = 0; c < d; ++c) {
            double& v = m.class_var.at(k, c);
            v += add;
            if (v < floor) v = floor;
            if (v <= 0.0) v = 1e-12; // all-constant features
        }
    }
    return m;
}

} // namespace mait::detail
