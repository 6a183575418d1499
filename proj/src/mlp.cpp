#include "stlfunnel/mlp.hpp"

#include "stlfunnel/error.hpp"

#include <cmath>
#include <random>

namespace stlfunnel {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes))
{
    if (sizes_.size() < 2) {
        throw DomainError("a network needs an input and an output layer");
    }
    for (int s : sizes_) {
        if (s < 1) {
            throw DomainError("layer widths must be positive");
        }
    }
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
        layers_.push_back({Eigen::MatrixXd::Zero(sizes_[i + 1], sizes_[i]), Eigen::VectorXd::Zero(sizes_[i + 1])});
    }
}

Mlp Mlp::he_uniform(std::vector<int> sizes, std::uint64_t seed)
{
    Mlp net(std::move(sizes));
    std::mt19937_64 rng(seed);
    for (auto& layer : net.layers_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.cols()));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
            for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
                layer.weights(i, j) = u(rng);
            }
        }
    }
    return net;
}

std::size_t Mlp::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers_) {
        n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    }
    return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs) const
{
    if (inputs.rows() != input_size()) {
        throw DomainError("network expects " + std::to_string(input_size()) + " inputs, got " +
                          std::to_string(inputs.rows()));
    }
    Eigen::MatrixXd x = inputs;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Eigen::MatrixXd z = layers_[i].weights * x;
        z.colwise() += layers_[i].bias;
        if (i + 1 < layers_.size()) {
            z = z.cwiseMax(0.0);
        }
        x = std::move(z);
    }
    return x;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs, Tape& tape) const
{
    if (inputs.rows() != input_size()) {
        throw DomainError("network expects " + std::to_string(input_size()) + " inputs, got " +
                          std::to_string(inputs.rows()));
    }
    tape.activations.clear();
    tape.activations.push_back(inputs);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Eigen::MatrixXd z = layers_[i].weights * tape.activations.back();
        z.colwise() += layers_[i].bias;
        if (i + 1 < layers_.size()) {
            z = z.cwiseMax(0.0);
        }
        tape.activations.push_back(std::move(z));
    }
    return tape.activations.back();
}

LayerStack Mlp::backward(const Tape& tape, const Eigen::MatrixXd& output_grad) const
{
    LayerStack grads(layers_.size());
    Eigen::MatrixXd delta = output_grad;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const Eigen::MatrixXd& input = tape.activations[i];
        grads[i].weights = delta * input.transpose();
        grads[i].bias = delta.rowwise().sum();
        if (i > 0) {
            Eigen::MatrixXd back = layers_[i].weights.transpose() * delta;
            // rectifier derivative, taken as 0 at the kink
            delta = (input.array() > 0.0).select(back, 0.0);
        }
    }
    return grads;
}

Eigen::VectorXd Mlp::flatten() const { return stlfunnel::flatten(layers_); }

void Mlp::assign(const Eigen::VectorXd& params)
{
    if (static_cast<std::size_t>(params.size()) != parameter_count()) {
        throw DomainError("parameter vector has wrong length");
    }
    Eigen::Index k = 0;
    for (auto& l : layers_) {
        const auto nw = l.weights.size();
        l.weights = Eigen::Map<const Eigen::MatrixXd>(params.data() + k, l.weights.rows(), l.weights.cols());
        k += nw;
        l.bias = params.segment(k, l.bias.size());
        k += l.bias.size();
    }
}

bool Mlp::finite() const
{
    for (const auto& l : layers_) {
        if (!l.weights.allFinite() || !l.bias.allFinite()) {
            return false;
        }
    }
    return true;
}

LayerStack zeros_like(const Mlp& net)
{
    LayerStack out;
    for (const auto& l : net.layers()) {
        out.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    return out;
}

Eigen::VectorXd flatten(const LayerStack& stack)
{
    Eigen::Index n = 0;
    for (const auto& l : stack) {
        n += l.weights.size() + l.bias.size();
    }
    Eigen::VectorXd out(n);
    Eigen::Index k = 0;
    for (const auto& l : stack) {
        out.segment(k, l.weights.size()) = Eigen::Map<const Eigen::VectorXd>(l.weights.data(), l.weights.size());
        k += l.weights.size();
        out.segment(k, l.bias.size()) = l.bias;
        k += l.bias.size();
    }
    return out;
}

Optimizer::Optimizer(OptimizerConfig cfg, const Mlp& net) : cfg_(cfg), m_(zeros_like(net)), v_(zeros_like(net))
{
    if (!(cfg_.learning_rate > 0.0)) {
        throw DomainError("learning rate must be positive");
    }
}

void Optimizer::apply(Mlp& net, const LayerStack& grads)
{
    auto& layers = net.layers();
    if (grads.size() != layers.size() || m_.size() != layers.size()) {
        throw DomainError("gradient shape does not match the network");
    }
    ++steps_;
    const double lr = cfg_.learning_rate;
    if (cfg_.kind == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            layers[i].weights -= lr * grads[i].weights;
            layers[i].bias -= lr * grads[i].bias;
        }
        return;
    }
    const double b1 = cfg_.beta1;
    const double b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double eps = cfg_.epsilon;
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        update(layers[i].weights, m_[i].weights, v_[i].weights, grads[i].weights);
        update(layers[i].bias, m_[i].bias, v_[i].bias, grads[i].bias);
    }
}

void Optimizer::restore(std::int64_t steps, LayerStack m, LayerStack v)
{
    if (m.size() != m_.size() || v.size() != v_.size()) {
        throw DomainError("optimizer moments do not match the network");
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i].weights.rows() != m_[i].weights.rows() || m[i].weights.cols() != m_[i].weights.cols() ||
            v[i].weights.rows() != v_[i].weights.rows() || v[i].weights.cols() != v_[i].weights.cols()) {
            throw DomainError("optimizer moments do not match the network");
        }
    }
    steps_ = steps;
    m_ = std::move(m);
    v_ = std::move(v);
}

} // namespace stlfunnel
