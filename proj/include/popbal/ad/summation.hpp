#pragma once

#include <cstddef>
#include <span>

namespace popbal::ad {

/// Sum with a fixed pairwise tree: sequential below 9 terms, otherwise the
/// halves [0, n/2) and [n/2, n) are summed recursively. The tree depends only
/// on the length, so every scalar type reduces in the same order.
template <typename T>
T pairwise_sum(std::span<const T> x) {
    const std::size_t n = x.size();
    if (n == 0) return T(0.0);
    if (n <= 8) {
        T s = x[0];
        for (std::size_t k = 1; k < n; ++k) s = s + x[k];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x.first(h)) + pairwise_sum(x.subspan(h));
}

}  // namespace popbal::ad
