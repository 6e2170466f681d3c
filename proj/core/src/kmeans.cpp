#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mait/error.hpp"
#include "mait/explain.hpp"
#include "mait/rng.hpp"

namespace mait {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        ss += diff * diff;
    }
    return ss;
}

KMeansResult kmeans_once(const Matrix& x, int k, int max_iter, double tol, Rng& rng) {
    const std::size_t n = x.rows, d = x.cols;
    Matrix centroids(k, d);

    // k-means++ seeding
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    std::size_t first = rng.index(n);
    std::copy(x.row(first).begin(), x.row(first).end(), centroids.row(0).begin());
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            min_d2[r] = std::min(min_d2[r], sq_dist(x.row(r), centroids.row(c - 1)));
            total += min_d2[r];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform01() * total;
            double acc = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                acc += min_d2[r];
                if (acc >= target) {
                    pick = r;
                    break;
                }
            }
        } else {
            pick = rng.index(n);
        }
        std::copy(x.row(pick).begin(), x.row(pick).end(), centroids.row(c).begin());
    }

    std::vector<int> labels(n, 0);
    double prev_inertia = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        double inertia = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (int c = 0; c < k; ++c) {
                const double d2 = sq_dist(x.row(r), centroids.row(c));
                if (d2 < best) {
                    best = d2;
                    best_c = c;
                }
            }
            labels[r] = best_c;
            inertia += best;
        }

        Matrix next(k, d);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t r = 0; r < n; ++r) {
            ++counts[labels[r]];
            for (std::size_t c = 0; c < d; ++c) next.at(labels[r], c) += x.at(r, c);
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // revive an empty cluster at the point farthest from its centroid
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t r = 0; r < n; ++r) {
                    const double d2 = sq_dist(x.row(r), centroids.row(labels[r]));
                    if (d2 > far_d) {
                        far_d = d2;
                        far = r;
                    }
                }
                std::copy(x.row(far).begin(), x.row(far).end(), next.row(c).begin());
                labels[far] = c;
                counts[c] = 1;
            } else {
                for (std::size_t cc = 0; cc < d; ++cc)
                    next.at(c, cc) /= static_cast<double>(counts[c]);
            }
        }
        centroids = std::move(next);
        if (prev_inertia - inertia < tol && iter > 0) {
            prev_inertia = inertia;
            break;
        }
        prev_inertia = inertia;
    }

    // final assignment against the converged centroids
    double inertia = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        double best = std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (int c = 0; c < k; ++c) {
            const double d2 = sq_dist(x.row(r), centroids.row(c));
            if (d2 < best) {
                best = d2;
                best_c = c;
            }
        }
        labels[r] = best_c;
        inertia += best;
    }
    return {std::move(labels), std::move(centroids), inertia};
}

} // namespace

KMeansResult kmeans(const Matrix& x, int k, int restarts, int max_iter, double tol,
                    std::uint64_t seed) {
    if (k < 1) throw ArgumentError("kmeans: k must be >= 1");
    if (x.rows < static_cast<std::size_t>(k)) throw ArgumentError("kmeans: fewer rows than k");
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int rs = 0; rs < restarts; ++rs) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(rs)));
        auto res = kmeans_once(x, k, max_iter, tol, rng);
        if (res.inertia < best.inertia) best = std::move(res);
    }
    return best;
}

double mean_silhouette(const Matrix& x, std::span<const int> labels, int k) {
    const std::size_t n = x.rows;
    if (k < 2) return 0.0;
    std::vector<std::size_t> counts(k, 0);
    for (int l : labels) ++counts[l];

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> mean_dist(k, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            mean_dist[labels[j]] += std::sqrt(sq_dist(x.row(i), x.row(j)));
        }
        const int own = labels[i];
        double a = counts[own] > 1 ? mean_dist[own] / static_cast<double>(counts[own] - 1) : 0.0;
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == own || counts[c] == 0) continue;
            b = std::min(b, mean_dist[c] / static_cast<double>(counts[c]));
        }
        if (counts[own] <= 1 || !std::isfinite(b)) continue; // silhouette 0 by convention
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

} // namespace mait
