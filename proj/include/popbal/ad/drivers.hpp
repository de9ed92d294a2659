#pragma once

// Entry points for differentiating a program written over the scalar types.
// A program is any callable accepting `const std::vector<T>&` and returning
// `std::vector<T>`, generic in T (a template lambda works).

#include "popbal/ad/dual.hpp"
#include "popbal/ad/tape.hpp"
#include "popbal/error.hpp"

#include <string>
#include <vector>

namespace popbal::ad {

struct DirectionalResult {
    std::vector<double> values;
    std::vector<double> derivatives;
};

struct GradientResult {
    double value = 0.0;
    std::vector<double> gradient;
};

enum class Mode { forward, reverse };

using Matrix = std::vector<std::vector<double>>;

/// One forward pass: every output and its derivative along `direction`.
template <typename Fn>
DirectionalResult forward_directional(Fn&& fn, const std::vector<double>& x, const std::vector<double>& direction) {
    if (direction.size() != x.size()) throw ContractError("direction size does not match input size");
    std::vector<Dual> xd(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xd[i] = Dual(x[i], direction[i]);
    const std::vector<Dual> y = fn(xd);
    DirectionalResult r;
    r.values.reserve(y.size());
    r.derivatives.reserve(y.size());
    for (const Dual& d : y) {
        r.values.push_back(d.value);
        r.derivatives.push_back(d.tangent);
    }
    return r;
}

/// Records `fn` on a fresh tape and runs one backward pass.
template <typename Fn>
GradientResult reverse_gradient(Fn&& fn, const std::vector<double>& x) {
    Tape tape;
    TapeScope scope(tape);
    std::vector<Var> xv;
    xv.reserve(x.size());
    for (double v : x) xv.push_back(Var::input(v));
    const std::vector<Var> y = fn(xv);
    if (y.size() != 1) {
        throw ContractError("reverse_gradient needs exactly one output, got " + std::to_string(y.size()));
    }
    return {y[0].value(), tape.gradient(y[0].index())};
}

/// Jacobian d y_r / d x_c. Forward mode assembles one column per pass,
/// reverse mode records once and runs one backward pass per row.
template <typename Fn>
Matrix jacobian(Fn&& fn, const std::vector<double>& x, Mode mode) {
    if (mode == Mode::forward) {
        Matrix J;
        for (std::size_t c = 0; c < x.size(); ++c) {
            std::vector<double> e(x.size(), 0.0);
            e[c] = 1.0;
            const auto col = forward_directional(fn, x, e);
            if (J.empty()) J.assign(col.derivatives.size(), std::vector<double>(x.size(), 0.0));
            for (std::size_t r = 0; r < col.derivatives.size(); ++r) J[r][c] = col.derivatives[r];
        }
        return J;
    }
    Tape tape;
    TapeScope scope(tape);
    std::vector<Var> xv;
    xv.reserve(x.size());
    for (double v : x) xv.push_back(Var::input(v));
    const std::vector<Var> y = fn(xv);
    Matrix J;
    J.reserve(y.size());
    for (const Var& out : y) J.push_back(tape.gradient(out.index()));
    return J;
}

}  // namespace popbal::ad
