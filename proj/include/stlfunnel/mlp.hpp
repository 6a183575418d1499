#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace stlfunnel {

struct DenseLayer {
    Eigen::MatrixXd weights; // out x in
    Eigen::VectorXd bias;    // out
};

/// Per-layer gradients or optimizer moments, shaped like the network.
using LayerStack = std::vector<DenseLayer>;

/// Fully connected network: rectifier hidden layers, linear output.
/// Inputs and outputs are column-major batches, one sample per column.
class Mlp {
public:
    Mlp() = default;
    /// Zero-initialized network with layer widths `sizes` (input first, output last).
    explicit Mlp(std::vector<int> sizes);

    /// He-uniform weights, zero biases.
    static Mlp he_uniform(std::vector<int> sizes, std::uint64_t seed);

    const std::vector<int>& sizes() const { return sizes_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    LayerStack& layers() { return layers_; }
    const LayerStack& layers() const { return layers_; }
    std::size_t parameter_count() const;

    Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;

    /// Activations of every layer, input first; needed by backward().
    struct Tape {
        std::vector<Eigen::MatrixXd> activations;
    };
    Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, Tape& tape) const;

    /// Parameter gradients of sum_ij output_grad(i,j) * output(i,j).
    LayerStack backward(const Tape& tape, const Eigen::MatrixXd& output_grad) const;

    /// Parameters flattened layer by layer: weights column-major, then bias.
    Eigen::VectorXd flatten() const;
    void assign(const Eigen::VectorXd& params);

    bool finite() const;

private:
    std::vector<int> sizes_;
    LayerStack layers_;
};

LayerStack zeros_like(const Mlp& net);
Eigen::VectorXd flatten(const LayerStack& stack);

enum class OptimizerKind { Adam, Sgd };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Gradient descent step on a network; Adam keeps first and second moments.
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(OptimizerConfig cfg, const Mlp& net);

    void apply(Mlp& net, const LayerStack& grads);

    const OptimizerConfig& config() const { return cfg_; }
    std::int64_t steps() const { return steps_; }
    const LayerStack& first_moment() const { return m_; }
    const LayerStack& second_moment() const { return v_; }

    /// Restores serialized state; shapes must match the network given at construction.
    void restore(std::int64_t steps, LayerStack m, LayerStack v);

private:
    OptimizerConfig cfg_;
    std::int64_t steps_ = 0;
    LayerStack m_;
    LayerStack v_;
};

} // namespace stlfunnel
