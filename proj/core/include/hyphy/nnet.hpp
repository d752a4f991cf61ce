#pragma once

#include <iosfwd>

#include "hyphy/common.hpp"

namespace hyphy {
namespace nnet {

enum class Hidden { relu, identity };
enum class Output { softmax, linear };

struct NetworkSpec {
    std::vector<int> layer_sizes;  // input, hidden..., output
    Hidden hidden_activation = Hidden::relu;
    Output output_activation = Output::softmax;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
    void validate() const {
        if (layer_sizes.size() < 2) throw std::invalid_argument("NetworkSpec: need at least 2 layers");
        for (int s : layer_sizes)
            if (s < 1) throw std::invalid_argument("NetworkSpec: layer sizes must be positive");
    }
};

struct NetworkParams {
    std::vector<MatD> weights;  // (out x in) per layer
    std::vector<VecD> biases;

    void check_shapes(const NetworkSpec& spec) const;
};

/// Seeded fan-in-scaled uniform init, biases zero.
NetworkParams init_params(const NetworkSpec& spec, Rng& rng);

struct Gradients {
    std::vector<MatD> weights;
    std::vector<VecD> biases;

    void setZero(const NetworkParams& like);
    Gradients& axpy(double a, const Gradients& other);  // this += a * other
};

/// Forward pass; batch columns are samples.
MatD forward_batch(const NetworkSpec& spec, const NetworkParams& params, const MatD& x);
VecD forward(const NetworkSpec& spec, const NetworkParams& params, const VecD& x);

/// Mean cross-entropy of softmax outputs against integer labels (clamped at 1e-12).
double cross_entropy(const MatD& probs, const std::vector<int>& labels);

struct BackpropResult {
    Gradients grads;
    MatD input_grad;  // d loss / d input, same shape as x
    double loss = 0.0;
    MatD probs;  // outputs of the forward pass
};

/// Gradients of the mean cross-entropy over the batch w.r.t. every parameter
/// and the inputs. Requires a softmax output layer.
BackpropResult grad_cross_entropy(const NetworkSpec& spec, const NetworkParams& params,
                                  const MatD& x, const std::vector<int>& labels);

/// Backprop an arbitrary upstream gradient at the (pre-activation) output layer.
/// Used to chain composed networks.
BackpropResult grad_upstream(const NetworkSpec& spec, const NetworkParams& params, const MatD& x,
                             const MatD& output_grad);

struct OptimizerState {
    std::vector<MatD> m_w, v_w;
    std::vector<VecD> m_b, v_b;
    long step = 0;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

OptimizerState init_adam(const NetworkParams& params, double learning_rate);

/// One bias-corrected Adam update; deterministic given inputs.
void adam_step(OptimizerState& state, NetworkParams& params, const Gradients& grads);

/// Versioned text checkpoint (layer-tagged parameter arrays with a spec header).
void save_checkpoint(std::ostream& os, const NetworkSpec& spec, const NetworkParams& params);
void load_checkpoint(std::istream& is, NetworkSpec& spec, NetworkParams& params);
void save_checkpoint_file(const std::string& path, const NetworkSpec& spec, const NetworkParams& params);
void load_checkpoint_file(const std::string& path, NetworkSpec& spec, NetworkParams& params);

}  // namespace nnet
}  // namespace hyphy
