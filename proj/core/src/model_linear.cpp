#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mait/error.hpp"
#include "mait/model.hpp"

namespace mait::detail {

namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

// weighted mean logistic loss (smooth part only)
double logistic_loss(const Matrix& x, std::span<const int> y, std::span<const double> w,
                     const std::vector<double>& beta, double intercept, double total_weight) {
    double loss = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) {
        const auto row = x.row(r);
        double m = intercept;
        for (std::size_t c = 0; c < x.cols; ++c) m += beta[c] * row[c];
        loss += w[r] * (log1pexp(m) - static_cast<double>(y[r]) * m);
    }
    return loss / total_weight;
}

} // namespace

TrainedModel fit_logreg_l1(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                           std::span<const double> w) {
    const double lambda = spec.hyper("lambda", 1e-2);
    const int max_iter = static_cast<int>(spec.hyper("max_iter", 500));
    const double tol = spec.hyper("tol", 1e-7);
    const std::size_t n = x.rows, d = x.cols;

    double total_weight = 0.0;
    for (double v : w) total_weight += v;

    std::vector<double> beta(d, 0.0);
    double intercept = 0.0;
    double step = 1.0;

    std::vector<double> grad(d), margins(n), probs(n);
    double loss = logistic_loss(x, y, w, beta, intercept, total_weight);

    for (int iter = 0; iter < max_iter; ++iter) {
        for (std::size_t r = 0; r < n; ++r) {
            const auto row = x.row(r);
            double m = intercept;
            for (std::size_t c = 0; c < d; ++c) m += beta[c] * row[c];
            margins[r] = m;
            probs[r] = sigmoid(m);
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double g = w[r] * (probs[r] - static_cast<double>(y[r]));
            grad_b += g;
            const auto row = x.row(r);
            for (std::size_t c = 0; c < d; ++c) grad[c] += g * row[c];
        }
        for (double& g : grad) g /= total_weight;
        grad_b /= total_weight;

        // backtracking proximal step; the intercept is unpenalized
        step = std::min(step * 2.0, 1e6);
        std::vector<double> next(d);
        double next_b = 0.0, next_loss = 0.0;
        for (;;) {
            for (std::size_t c = 0; c < d; ++c)
                next[c] = soft_threshold(beta[c] - step * grad[c], step * lambda);
            next_b = intercept - step * grad_b;
            next_loss = logistic_loss(x, y, w, next, next_b, total_weight);
            double quad = loss;
            double sq = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = next[c] - beta[c];
                quad += grad[c] * diff;
                sq += diff * diff;
            }
            const double diff_b = next_b - intercept;
            quad += grad_b * diff_b;
            sq += diff_b * diff_b;
            quad += sq / (2.0 * step);
            if (next_loss <= quad + 1e-15 || step < 1e-12) break;
            step *= 0.5;
        }

        double max_change = std::fabs(next_b - intercept);
        for (std::size_t c = 0; c < d; ++c)
            max_change = std::max(max_change, std::fabs(next[c] - beta[c]));
        beta = std::move(next);
        intercept = next_b;
        loss = next_loss;
        if (max_change < tol) break;
    }

    TrainedModel m;
    m.spec = spec;
    m.coefficients = std::move(beta);
    m.intercept = intercept;
    return m;
}

TrainedModel fit_linear_reg(const ModelSpec& spec, const Matrix& x, std::span<const double> y) {
    const std::size_t n = x.rows, d = x.cols;
    Eigen::MatrixXd xe(n, d + 1);
    Eigen::VectorXd ye(n);
    for (std::size_t r = 0; r < n; ++r) {
        xe(r, 0) = 1.0;
        for (std::size_t c = 0; c < d; ++c) xe(r, c + 1) = x.at(r, c);
        ye(r) = y[r];
    }
    Eigen::MatrixXd a = xe.transpose() * xe;
    Eigen::VectorXd rhs = xe.transpose() * ye;

    Eigen::VectorXd sol = a.ldlt().solve(rhs);
    const double resid = (a * sol - rhs).norm();
    if (!sol.allFinite() || resid > 1e-8 * (rhs.norm() + 1.0)) {
        // singular normal equations: ridge jitter
        a.diagonal().array() += 1e-10;
        sol = a.ldlt().solve(rhs);
    }

    TrainedModel m;
    m.spec = spec;
    m.intercept = sol(0);
    m.coefficients.resize(d);
    for (std::size_t c = 0; c < d; ++c) m.coefficients[c] = sol(c + 1);
    return m;
}

} // namespace mait::detail
