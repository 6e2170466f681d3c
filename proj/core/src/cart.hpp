#pragma once

#include <span>

#include "mait/matrix.hpp"
#include "mait/model.hpp"
#include "mait/rng.hpp"

namespace mait::detail {

struct CartParams {
    bool classification = true; // weighted Gini vs weighted variance criterion
    int min_leaf = 1;
    int max_depth = -1; // -1 = unlimited
    std::size_t mtry = 0; // non-constant candidate features per split; 0 = all
};

// Leaf value is the weighted mean target (class-1 fraction for 0/1 targets).
// Split rule: x <= threshold goes left, threshold is an observed value.
// Ties in gain break to the lowest feature index, then lowest threshold.
Tree build_cart_tree(const Matrix& x, std::span<const double> targets,
                     std::span<const double> weights, std::span<const std::size_t> rows,
                     const CartParams& params, Rng& rng);

} // namespace mait::detail
