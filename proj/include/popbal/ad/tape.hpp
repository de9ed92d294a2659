#pragma once

// Reverse-mode automatic differentiation: an operation tape and the `Var`
// scalar that records onto it.
//
// Every active operation appends one node holding its operand indices and the
// local partial derivatives with respect to them. Operand indices always refer
// to earlier nodes, so a single reverse sweep over the node array propagates
// adjoints. Passive values (constants, or anything not depending on a
// registered input) never touch the tape.

#include "popbal/ad/summation.hpp"
#include "popbal/error.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

namespace popbal::ad {

enum class Op : std::uint8_t {
    input,
    add,
    sub,
    mul,
    div,
    neg,
    add_c,  // a + c
    c_sub,  // c - a
    sub_c,  // a - c
    mul_c,  // a * c
    div_c,  // a / c
    c_div,  // c / a
    exp,
    log,
    sin,
    cos,
    sqrt,
    abs,
    pow_c,  // a ^ c
    wsum,   // pairwise sum of w_k * x_k
    custom, // fused primitive with caller-supplied partials
};

/// Primal evaluator of a fused primitive, called on replay with the operand
/// values in recorded order.
using CustomFn = double (*)(std::span<const double>);

class Tape {
public:
    using Index = std::int32_t;
    static constexpr Index passive = -1;

    Tape() { arg_begin_.push_back(0); const_begin_.push_back(0); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    /// The tape that active `Var` arithmetic on this thread records onto.
    static Tape* active() { return active_; }

    std::size_t size() const { return ops_.size(); }
    std::size_t operand_count() const { return args_.size(); }
    std::span<const Index> inputs() const { return inputs_; }
    Op op(std::size_t node) const { return ops_[node]; }
    std::span<const Index> operands(std::size_t node) const {
        return {args_.data() + arg_begin_[node], args_.data() + arg_begin_[node + 1]};
    }

    /// Approximate heap footprint in bytes.
    std::size_t bytes() const {
        return ops_.capacity() + 4 * (arg_begin_.capacity() + const_begin_.capacity() + args_.capacity()) +
               8 * (partials_.capacity() + consts_.capacity() + input_values_.capacity() + custom_fns_.capacity());
    }

    void clear() {
        ops_.clear();
        arg_begin_.assign(1, 0);
        const_begin_.assign(1, 0);
        args_.clear();
        partials_.clear();
        consts_.clear();
        inputs_.clear();
        input_values_.clear();
        custom_fns_.clear();
    }

    Index add_input(double value) {
        const Index id = push(Op::input);
        inputs_.push_back(id);
        input_values_.push_back(value);
        return id;
    }

    Index add_unary(Op op, Index a, double da) {
        args_.push_back(a);
        partials_.push_back(da);
        return push(op);
    }

    Index add_unary_c(Op op, Index a, double da, double c) {
        args_.push_back(a);
        partials_.push_back(da);
        consts_.push_back(c);
        return push(op);
    }

    Index add_binary(Op op, Index a, double da, Index b, double db) {
        args_.push_back(a);
        args_.push_back(b);
        partials_.push_back(da);
        partials_.push_back(db);
        return push(op);
    }

    /// Weighted sum node. `terms` supplies, per summand, either an active
    /// operand with its weight or (index == passive) the already-formed
    /// constant product.
    Index add_wsum(std::span<const Index> idx, std::span<const double> weight_or_term) {
        args_.insert(args_.end(), idx.begin(), idx.end());
        partials_.insert(partials_.end(), weight_or_term.begin(), weight_or_term.end());
        return push(Op::wsum);
    }

    /// Fused primitive: `fn(values)` is its primal, `partials` its local
    /// derivatives. Passive operands are recorded with index `passive`; their
    /// values are kept so replay can reproduce the call.
    Index add_custom(CustomFn fn, std::span<const Index> idx, std::span<const double> partials,
                     std::span<const double> values) {
        args_.insert(args_.end(), idx.begin(), idx.end());
        partials_.insert(partials_.end(), partials.begin(), partials.end());
        consts_.push_back(static_cast<double>(custom_fns_.size()));
        consts_.insert(consts_.end(), values.begin(), values.end());
        custom_fns_.push_back(fn);
        return push(Op::custom);
    }

    /// Reverse sweep seeded with d(output)/d(output) = 1. Returns the adjoint
    /// of every node.
    std::vector<double> adjoints(Index output) const {
        std::vector<double> adj(size(), 0.0);
        if (output == passive) return adj;
        adj[static_cast<std::size_t>(output)] = 1.0;
        for (std::size_t n = static_cast<std::size_t>(output) + 1; n-- > 0;) {
            const double a = adj[n];
            if (a == 0.0) continue;
            for (std::uint32_t k = arg_begin_[n]; k < arg_begin_[n + 1]; ++k) {
                const Index arg = args_[k];
                if (arg != passive) adj[static_cast<std::size_t>(arg)] += partials_[k] * a;
            }
        }
        return adj;
    }

    /// d(output)/d(input_i) for every registered input, in registration order.
    std::vector<double> gradient(Index output) const {
        const auto adj = adjoints(output);
        std::vector<double> g;
        g.reserve(inputs_.size());
        for (Index in : inputs_) g.push_back(adj[static_cast<std::size_t>(in)]);
        return g;
    }

    /// Re-evaluates every node from the stored operation records. With the
    /// recorded input values this reproduces the primal trace bit for bit;
    /// with other inputs it evaluates the same straight-line program.
    std::vector<double> replay(std::span<const double> input_values) const {
        if (input_values.size() != inputs_.size()) {
            throw ContractError("replay: expected " + std::to_string(inputs_.size()) + " input values");
        }
        std::vector<double> v(size(), 0.0);
        std::size_t next_input = 0;
        std::vector<double> terms;
        for (std::size_t n = 0; n < size(); ++n) {
            const std::uint32_t ab = arg_begin_[n];
            const std::uint32_t cb = const_begin_[n];
            auto x = [&](std::uint32_t k) { return v[static_cast<std::size_t>(args_[ab + k])]; };
            switch (ops_[n]) {
                case Op::input: v[n] = input_values[next_input++]; break;
                case Op::add: v[n] = x(0) + x(1); break;
                case Op::sub: v[n] = x(0) - x(1); break;
                case Op::mul: v[n] = x(0) * x(1); break;
                case Op::div: v[n] = x(0) / x(1); break;
                case Op::neg: v[n] = -x(0); break;
                case Op::add_c: v[n] = x(0) + consts_[cb]; break;
                case Op::c_sub: v[n] = consts_[cb] - x(0); break;
                case Op::sub_c: v[n] = x(0) - consts_[cb]; break;
                case Op::mul_c: v[n] = x(0) * consts_[cb]; break;
                case Op::div_c: v[n] = x(0) / consts_[cb]; break;
                case Op::c_div: v[n] = consts_[cb] / x(0); break;
                case Op::exp: v[n] = std::exp(x(0)); break;
                case Op::log: v[n] = std::log(x(0)); break;
                case Op::sin: v[n] = std::sin(x(0)); break;
                case Op::cos: v[n] = std::cos(x(0)); break;
                case Op::sqrt: v[n] = std::sqrt(x(0)); break;
                case Op::abs: v[n] = std::abs(x(0)); break;
                case Op::pow_c: v[n] = std::pow(x(0), consts_[cb]); break;
                case Op::wsum: {
                    terms.clear();
                    for (std::uint32_t k = ab; k < arg_begin_[n + 1]; ++k) {
                        terms.push_back(args_[k] == passive ? partials_[k]
                                                            : partials_[k] * v[static_cast<std::size_t>(args_[k])]);
                    }
                    v[n] = pairwise_sum(std::span<const double>(terms));
                    break;
                }
                case Op::custom: {
                    terms.clear();
                    for (std::uint32_t k = ab; k < arg_begin_[n + 1]; ++k) {
                        terms.push_back(args_[k] == passive ? consts_[cb + 1 + (k - ab)]
                                                            : v[static_cast<std::size_t>(args_[k])]);
                    }
                    const auto fn = custom_fns_[static_cast<std::size_t>(consts_[cb])];
                    v[n] = fn(std::span<const double>(terms));
                    break;
                }
            }
        }
        return v;
    }

    std::span<const double> input_values() const { return input_values_; }

private:
    friend class TapeScope;

    Index push(Op op) {
        if (ops_.size() >= static_cast<std::size_t>(std::numeric_limits<Index>::max()) ||
            args_.size() >= std::numeric_limits<std::uint32_t>::max() ||
            consts_.size() >= std::numeric_limits<std::uint32_t>::max()) {
            throw ContractError("tape capacity exceeded");
        }
        ops_.push_back(op);
        arg_begin_.push_back(static_cast<std::uint32_t>(args_.size()));
        const_begin_.push_back(static_cast<std::uint32_t>(consts_.size()));
        return static_cast<Index>(ops_.size() - 1);
    }

    std::vector<Op> ops_;
    std::vector<std::uint32_t> arg_begin_;
    std::vector<std::uint32_t> const_begin_;
    std::vector<Index> args_;
    std::vector<double> partials_;
    std::vector<double> consts_;
    std::vector<Index> inputs_;
    std::vector<double> input_values_;
    std::vector<CustomFn> custom_fns_;

    static inline thread_local Tape* active_ = nullptr;
};

/// Makes `tape` the recording target for the current thread while in scope.
class TapeScope {
public:
    explicit TapeScope(Tape& tape) : previous_(Tape::active_) { Tape::active_ = &tape; }
    ~TapeScope() { Tape::active_ = previous_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

/// Reverse-mode scalar. A default or double-constructed Var is passive.
class Var {
public:
    using Index = Tape::Index;

    constexpr Var() = default;
    constexpr Var(double v) : value_(v) {}  // NOLINT(google-explicit-constructor)

    /// Registers a new independent variable on the active tape.
    static Var input(double v) {
        Var r(v);
        r.index_ = tape().add_input(v);
        return r;
    }

    /// Records a fused primitive whose primal `value` equals `fn` applied to
    /// the operand values, with the given local partials.
    static Var custom(CustomFn fn, std::span<const Var> operands, std::span<const double> partials, double value) {
        thread_local std::vector<Index> idx;
        thread_local std::vector<double> vals;
        idx.clear();
        vals.clear();
        bool any_active = false;
        for (const Var& o : operands) {
            idx.push_back(o.index_);
            vals.push_back(o.value_);
            any_active = any_active || o.active();
        }
        if (!any_active) return Var(value);
        return make(value, tape().add_custom(fn, idx, partials, vals));
    }

    double value() const { return value_; }
    Index index() const { return index_; }
    bool active() const { return index_ != Tape::passive; }

    Var& operator+=(const Var& o) { return *this = *this + o; }
    Var& operator-=(const Var& o) { return *this = *this - o; }
    Var& operator*=(const Var& o) { return *this = *this * o; }
    Var& operator/=(const Var& o) { return *this = *this / o; }

    friend Var operator+(const Var& a, const Var& b) {
        const double v = a.value_ + b.value_;
        if (a.active() && b.active()) return make(v, tape().add_binary(Op::add, a.index_, 1.0, b.index_, 1.0));
        if (a.active()) return make(v, tape().add_unary_c(Op::add_c, a.index_, 1.0, b.value_));
        if (b.active()) return make(v, tape().add_unary_c(Op::add_c, b.index_, 1.0, a.value_));
        return Var(v);
    }
    friend Var operator-(const Var& a, const Var& b) {
        const double v = a.value_ - b.value_;
        if (a.active() && b.active()) return make(v, tape().add_binary(Op::sub, a.index_, 1.0, b.index_, -1.0));
        if (a.active()) return make(v, tape().add_unary_c(Op::sub_c, a.index_, 1.0, b.value_));
        if (b.active()) return make(v, tape().add_unary_c(Op::c_sub, b.index_, -1.0, a.value_));
        return Var(v);
    }
    friend Var operator*(const Var& a, const Var& b) {
        const double v = a.value_ * b.value_;
        if (a.active() && b.active())
            return make(v, tape().add_binary(Op::mul, a.index_, b.value_, b.index_, a.value_));
        if (a.active()) return make(v, tape().add_unary_c(Op::mul_c, a.index_, b.value_, b.value_));
        if (b.active()) return make(v, tape().add_unary_c(Op::mul_c, b.index_, a.value_, a.value_));
        return Var(v);
    }
    friend Var operator/(const Var& a, const Var& b) {
        const double v = a.value_ / b.value_;
        if (a.active() && b.active())
            return make(v, tape().add_binary(Op::div, a.index_, 1.0 / b.value_, b.index_, -v / b.value_));
        if (a.active()) return make(v, tape().add_unary_c(Op::div_c, a.index_, 1.0 / b.value_, b.value_));
        if (b.active()) return make(v, tape().add_unary_c(Op::c_div, b.index_, -v / b.value_, a.value_));
        return Var(v);
    }
    friend Var operator-(const Var& a) {
        if (!a.active()) return Var(-a.value_);
        return make(-a.value_, tape().add_unary(Op::neg, a.index_, -1.0));
    }

    // Mixed overloads avoid an implicit conversion on every constant operand.
    friend Var operator+(const Var& a, double b) { return a + Var(b); }
    friend Var operator+(double a, const Var& b) { return Var(a) + b; }
    friend Var operator-(const Var& a, double b) { return a - Var(b); }
    friend Var operator-(double a, const Var& b) { return Var(a) - b; }
    friend Var operator*(const Var& a, double b) { return a * Var(b); }
    friend Var operator*(double a, const Var& b) { return Var(a) * b; }
    friend Var operator/(const Var& a, double b) { return a / Var(b); }
    friend Var operator/(double a, const Var& b) { return Var(a) / b; }

    friend bool operator==(const Var& a, const Var& b) { return a.value_ == b.value_; }
    friend auto operator<=>(const Var& a, const Var& b) { return a.value_ <=> b.value_; }
    friend bool operator==(const Var& a, double b) { return a.value_ == b; }
    friend auto operator<=>(const Var& a, double b) { return a.value_ <=> b; }

    friend Var exp(const Var& a) {
        const double e = std::exp(a.value_);
        return a.active() ? make(e, tape().add_unary(Op::exp, a.index_, e)) : Var(e);
    }
    friend Var log(const Var& a) {
        const double l = std::log(a.value_);
        return a.active() ? make(l, tape().add_unary(Op::log, a.index_, 1.0 / a.value_)) : Var(l);
    }
    friend Var sin(const Var& a) {
        const double s = std::sin(a.value_);
        return a.active() ? make(s, tape().add_unary(Op::sin, a.index_, std::cos(a.value_))) : Var(s);
    }
    friend Var cos(const Var& a) {
        const double c = std::cos(a.value_);
        return a.active() ? make(c, tape().add_unary(Op::cos, a.index_, -std::sin(a.value_))) : Var(c);
    }
    friend Var sqrt(const Var& a) {
        const double r = std::sqrt(a.value_);
        return a.active() ? make(r, tape().add_unary(Op::sqrt, a.index_, 0.5 / r)) : Var(r);
    }
    // sign(0) = 0, matching Dual.
    friend Var abs(const Var& a) {
        const double s = a.value_ > 0.0 ? 1.0 : (a.value_ < 0.0 ? -1.0 : 0.0);
        return a.active() ? make(std::abs(a.value_), tape().add_unary(Op::abs, a.index_, s)) : Var(std::abs(a.value_));
    }
    friend Var pow(const Var& a, double p) {
        const double v = std::pow(a.value_, p);
        if (!a.active()) return Var(v);
        const double d = p == 0.0 ? 0.0 : p * std::pow(a.value_, p - 1.0);
        return make(v, tape().add_unary_c(Op::pow_c, a.index_, d, p));
    }
    friend Var pow(const Var& a, const Var& b) { return exp(b * log(a)); }

    // The selected operand is returned unchanged; ties pick the first argument.
    friend Var min(const Var& a, const Var& b) { return b.value_ < a.value_ ? b : a; }
    friend Var max(const Var& a, const Var& b) { return b.value_ > a.value_ ? b : a; }

    friend std::ostream& operator<<(std::ostream& os, const Var& v) {
        return os << v.value_ << (v.active() ? " [active]" : "");
    }

private:
    friend Var weighted_sum(std::span<const Var> values, std::span<const double> weights);

    static Var make(double v, Index idx) {
        Var r(v);
        r.index_ = idx;
        return r;
    }

    static Tape& tape() {
        Tape* t = Tape::active();
        if (t == nullptr) throw ContractError("active Var used without a recording tape");
        return *t;
    }

    double value_ = 0.0;
    Index index_ = Tape::passive;
};

/// Pairwise sum of w_k * x_k recorded as a single n-ary node.
inline Var weighted_sum(std::span<const Var> values, std::span<const double> weights) {
    thread_local std::vector<double> terms;
    thread_local std::vector<Tape::Index> idx;
    thread_local std::vector<double> coeff;
    terms.resize(values.size());
    idx.clear();
    coeff.clear();
    bool any_active = false;
    for (std::size_t k = 0; k < values.size(); ++k) {
        terms[k] = weights[k] * values[k].value_;
        any_active = any_active || values[k].active();
    }
    const double v = pairwise_sum(std::span<const double>(terms));
    if (!any_active) return Var(v);
    idx.reserve(values.size());
    coeff.reserve(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        idx.push_back(values[k].index_);
        coeff.push_back(values[k].active() ? weights[k] : terms[k]);
    }
    return Var::make(v, Var::tape().add_wsum(idx, coeff));
}

}  // namespace popbal::ad
