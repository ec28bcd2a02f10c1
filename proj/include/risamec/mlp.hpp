#pragma once

// Dense feed-forward network with ReLU hidden layers, manual backprop, and the
// optimizers used to train it. Parameters live in one flat vector so that
// soft updates, checkpoints and finite-difference checks treat them uniformly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "risamec/geometry.hpp"

namespace risamec {

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OutputActivation { Identity, Tanh };

class Mlp {
public:
    // Post-activation values of every layer, input first.
    struct Tape {
        std::vector<std::vector<double>> acts;
    };

    Mlp() = default;

    Mlp(std::vector<int> sizes, OutputActivation out) : sizes_(std::move(sizes)), out_(out)
    {
        if (sizes_.size() < 2)
            throw ShapeError("Mlp: need at least input and output sizes");
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            if (sizes_[l] < 1 || sizes_[l + 1] < 1)
                throw ShapeError("Mlp: layer sizes must be positive");
            offsets_.push_back(n);
            n += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
        }
        params_.assign(n, 0.0);
    }

    const std::vector<int>& sizes() const { return sizes_; }
    OutputActivation output_activation() const { return out_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    std::size_t num_layers() const { return offsets_.size(); }
    std::size_t num_params() const { return params_.size(); }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    /// Uniform in +-1/sqrt(fan_in) for every weight and bias.
    template <class Rng>
    void init_uniform(Rng& rng)
    {
        for (std::size_t l = 0; l < num_layers(); ++l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
            std::uniform_real_distribution<double> u(-bound, bound);
            const std::size_t count = static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
            for (std::size_t i = 0; i < count; ++i)
                params_[offsets_[l] + i] = u(rng);
        }
    }

    std::vector<double> forward(std::span<const double> x) const
    {
        Tape tape;
        return forward(x, tape);
    }

    std::vector<double> forward(std::span<const double> x, Tape& tape) const
    {
        if (x.size() != static_cast<std::size_t>(input_size()))
            throw ShapeError("Mlp::forward: expected input of length " + std::to_string(input_size())
                             + ", got " + std::to_string(x.size()));
        tape.acts.resize(sizes_.size());
        tape.acts[0].assign(x.begin(), x.end());
        for (std::size_t l = 0; l < num_layers(); ++l) {
            const auto in = static_cast<std::size_t>(sizes_[l]);
            const auto out = static_cast<std::size_t>(sizes_[l + 1]);
            const double* w = params_.data() + offsets_[l];
            const double* b = w + in * out;
            const auto& a = tape.acts[l];
            auto& z = tape.acts[l + 1];
            z.resize(out);
            const bool last = l + 1 == num_layers();
            for (std::size_t j = 0; j < out; ++j) {
                double s = b[j];
                const double* row = w + j * in;
                for (std::size_t i = 0; i < in; ++i)
                    s += row[i] * a[i];
                if (!last)
                    z[j] = s > 0.0 ? s : 0.0;
                else
                    z[j] = out_ == OutputActivation::Tanh ? std::tanh(s) : s;
            }
        }
        return tape.acts.back();
    }

    /// Backpropagates dL/d(output) through the recorded pass. Parameter
    /// gradients are accumulated into `grad` (skipped when it is empty);
    /// returns dL/d(input).
    std::vector<double> backward(const Tape& tape, std::span<const double> grad_out,
                                 std::span<double> grad) const
    {
        const bool want_params = !grad.empty();
        if (want_params && grad.size() != params_.size())
            throw ShapeError("Mlp::backward: gradient buffer has wrong size");
        std::vector<double> delta(grad_out.begin(), grad_out.end());
        if (out_ == OutputActivation::Tanh) {
            const auto& y = tape.acts.back();
            for (std::size_t j = 0; j < delta.size(); ++j)
                delta[j] *= 1.0 - y[j] * y[j];
        }
        std::vector<double> prev;
        for (std::size_t l = num_layers(); l-- > 0;) {
            const auto in = static_cast<std::size_t>(sizes_[l]);
            const auto out = static_cast<std::size_t>(sizes_[l + 1]);
            const double* w = params_.data() + offsets_[l];
            const auto& a = tape.acts[l];
            prev.assign(in, 0.0);
            for (std::size_t j = 0; j < out; ++j) {
                const double d = delta[j];
                if (d == 0.0)
                    continue;
                const double* row = w + j * in;
                if (want_params) {
                    double* gw = grad.data() + offsets_[l];
                    gw[in * out + j] += d;
                    double* grow = gw + j * in;
                    for (std::size_t i = 0; i < in; ++i)
                        grow[i] += d * a[i];
                }
                for (std::size_t i = 0; i < in; ++i)
                    prev[i] += d * row[i];
            }
            if (l > 0) {
                // ReLU gate of the layer below
                for (std::size_t i = 0; i < in; ++i)
                    if (!(a[i] > 0.0))
                        prev[i] = 0.0;
            }
            delta.swap(prev);
        }
        return delta;
    }

    // Column-per-sample activations of a batched pass, input first.
    struct BatchTape {
        std::vector<Eigen::MatrixXd> acts;
    };

    /// Batched forward pass; `x` holds one sample per column.
    const Eigen::MatrixXd& forward_batch(const Eigen::MatrixXd& x, BatchTape& tape) const
    {
        if (x.rows() != input_size())
            throw ShapeError("Mlp::forward_batch: expected " + std::to_string(input_size()) + " input rows, got "
                             + std::to_string(x.rows()));
        tape.acts.resize(sizes_.size());
        tape.acts[0] = x;
        for (std::size_t l = 0; l < num_layers(); ++l) {
            auto& z = tape.acts[l + 1];
            z.noalias() = weight(l) * tape.acts[l];
            z.colwise() += bias(l);
            if (l + 1 < num_layers())
                z = z.cwiseMax(0.0);
            else if (out_ == OutputActivation::Tanh)
                z = z.array().tanh().matrix();
        }
        return tape.acts.back();
    }

    /// Batched counterpart of backward(); gradients are summed over columns.
    Eigen::MatrixXd backward_batch(const BatchTape& tape, const Eigen::MatrixXd& grad_out,
                                   std::span<double> grad) const
    {
        const bool want_params = !grad.empty();
        if (want_params && grad.size() != params_.size())
            throw ShapeError("Mlp::backward_batch: gradient buffer has wrong size");
        Eigen::MatrixXd delta = grad_out;
        if (out_ == OutputActivation::Tanh)
            delta.array() *= 1.0 - tape.acts.back().array().square();
        for (std::size_t l = num_layers(); l-- > 0;) {
            const auto in = static_cast<Eigen::Index>(sizes_[l]);
            const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
            const auto& a = tape.acts[l];
            if (want_params) {
                double* gw = grad.data() + offsets_[l];
                Eigen::Map<RowMatrix> gW(gw, out, in);
                Eigen::Map<Eigen::VectorXd> gb(gw + in * out, out);
                gW.noalias() += delta * a.transpose();
                gb += delta.rowwise().sum();
            }
            Eigen::MatrixXd prev = weight(l).transpose() * delta;
            if (l > 0)
                prev = (a.array() > 0.0).select(prev, 0.0);
            delta.swap(prev);
        }
        return delta;
    }

private:
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Eigen::Map<const RowMatrix> weight(std::size_t l) const
    {
        return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
    }

    Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const
    {
        return {params_.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1],
                sizes_[l + 1]};
    }

    std::vector<int> sizes_;
    OutputActivation out_ = OutputActivation::Identity;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

/// target <- eta * source + (1 - eta) * target
inline void soft_update(Mlp& target, const Mlp& source, double eta)
{
    if (target.num_params() != source.num_params() || target.sizes() != source.sizes())
        throw ShapeError("soft_update: network shapes differ");
    auto t = target.params();
    auto s = source.params();
    if (eta == 1.0) {
        std::copy(s.begin(), s.end(), t.begin());
        return;
    }
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] += eta * (s[i] - t[i]);
}

enum class OptimizerKind { Adam, Sgd };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0; // L2 coefficient added to the gradient
};

// Gradient-descent step on a flat parameter vector: plain SGD or Adam.
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(OptimizerConfig cfg, std::size_t n) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

    const OptimizerConfig& config() const { return cfg_; }
    std::vector<double>& first_moment() { return m_; }
    std::vector<double>& second_moment() { return v_; }
    const std::vector<double>& first_moment() const { return m_; }
    const std::vector<double>& second_moment() const { return v_; }
    long long steps() const { return t_; }
    void set_steps(long long t) { t_ = t; }

    void step(std::span<double> params, std::span<const double> grad)
    {
        if (params.size() != grad.size() || params.size() != m_.size())
            throw ShapeError("Optimizer::step: size mismatch");
        for (double g : grad)
            if (!std::isfinite(g))
                throw DivergenceError("non-finite gradient");
        const double lr = cfg_.learning_rate;
        if (lr == 0.0)
            return;
        ++t_;
        if (cfg_.kind == OptimizerKind::Sgd) {
            for (std::size_t i = 0; i < params.size(); ++i)
                params[i] -= lr * (grad[i] + cfg_.weight_decay * params[i]);
            return;
        }
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grad[i] + cfg_.weight_decay * params[i];
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
            params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
        }
    }

private:
    OptimizerConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    long long t_ = 0;
};

} // namespace risamec
