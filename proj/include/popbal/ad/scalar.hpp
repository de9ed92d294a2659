#pragma once

// Glue that lets numerical code be written once over `double`, `Dual` and
// `Var`.

#include "popbal/ad/dual.hpp"
#include "popbal/ad/summation.hpp"
#include "popbal/ad/tape.hpp"

#include <cmath>
#include <span>
#include <type_traits>
#include <vector>

namespace popbal::ad {

inline double primal(double x) { return x; }
inline double primal(const Dual& x) { return x.value; }
inline double primal(const Var& x) { return x.value(); }

template <typename T>
concept Scalar = std::is_same_v<T, double> || std::is_same_v<T, Dual> || std::is_same_v<T, Var>;

/// Pairwise sum of w_k * x_k. The products are formed first and then reduced
/// with `pairwise_sum`, so all scalar types produce the same primal bits.
inline double weighted_sum(std::span<const double> x, std::span<const double> w) {
    thread_local std::vector<double> terms;
    terms.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) terms[k] = w[k] * x[k];
    return pairwise_sum(std::span<const double>(terms));
}

inline Dual weighted_sum(std::span<const Dual> x, std::span<const double> w) {
    thread_local std::vector<Dual> terms;
    terms.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) terms[k] = w[k] * x[k];
    return pairwise_sum(std::span<const Dual>(terms));
}

/// Plain sum through the same tree.
template <Scalar T>
T tree_sum(std::span<const T> x) {
    if constexpr (std::is_same_v<T, Var>) {
        thread_local std::vector<double> ones;
        ones.assign(x.size(), 1.0);
        return weighted_sum(x, std::span<const double>(ones));
    } else {
        return pairwise_sum(x);
    }
}

}  // namespace popbal::ad
