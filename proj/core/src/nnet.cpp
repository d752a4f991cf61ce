#include "hyphy/nnet.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace hyphy {
namespace nnet {

void NetworkParams::check_shapes(const NetworkSpec& spec) const {
    spec.validate();
    if (weights.size() != size_t(spec.num_layers()) || biases.size() != weights.size())
        throw std::invalid_argument("NetworkParams: layer count mismatch");
    for (int l = 0; l < spec.num_layers(); ++l) {
        if (weights[l].rows() != spec.layer_sizes[l + 1] || weights[l].cols() != spec.layer_sizes[l] ||
            biases[l].size() != spec.layer_sizes[l + 1])
            throw std::invalid_argument("NetworkParams: shape mismatch at layer " + std::to_string(l));
    }
}

NetworkParams init_params(const NetworkSpec& spec, Rng& rng) {
    spec.validate();
    NetworkParams p;
    for (int l = 0; l < spec.num_layers(); ++l) {
        const int n_in = spec.layer_sizes[l];
        const int n_out = spec.layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / n_in);
        MatD w(n_out, n_in);
        for (int i = 0; i < n_out; ++i)
            for (int j = 0; j < n_in; ++j) w(i, j) = rng.uniform(-limit, limit);
        p.weights.push_back(std::move(w));
        p.biases.push_back(VecD::Zero(n_out));
    }
    return p;
}

void Gradients::setZero(const NetworkParams& like) {
    weights.clear();
    biases.clear();
    for (const auto& w : like.weights) weights.push_back(MatD::Zero(w.rows(), w.cols()));
    for (const auto& b : like.biases) biases.push_back(VecD::Zero(b.size()));
}

Gradients& Gradients::axpy(double a, const Gradients& other) {
    for (size_t l = 0; l < weights.size(); ++l) {
        weights[l] += a * other.weights[l];
        biases[l] += a * other.biases[l];
    }
    return *this;
}

namespace {

// max-subtracted softmax over columns
MatD softmax_cols(const MatD& z) {
    MatD p(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const VecD e = (z.col(c).array() - z.col(c).maxCoeff()).exp();
        p.col(c) = e / e.sum();
    }
    return p;
}

struct ForwardCache {
    std::vector<MatD> pre;   // pre-activations per layer
    std::vector<MatD> post;  // post-activations; post[0] = input
};

ForwardCache run_forward(const NetworkSpec& spec, const NetworkParams& params, const MatD& x) {
    if (x.rows() != spec.input_dim()) throw std::invalid_argument("forward: input dimension mismatch");
    params.check_shapes(spec);
    ForwardCache cache;
    cache.post.push_back(x);
    for (int l = 0; l < spec.num_layers(); ++l) {
        MatD z = (params.weights[l] * cache.post.back()).colwise() + params.biases[l];
        cache.pre.push_back(z);
        if (l + 1 < spec.num_layers()) {
            if (spec.hidden_activation == Hidden::relu) z = z.cwiseMax(0.0);
            cache.post.push_back(std::move(z));
        } else {
            if (spec.output_activation == Output::softmax) z = softmax_cols(z);
            cache.post.push_back(std::move(z));
        }
    }
    return cache;
}

BackpropResult run_backward(const NetworkSpec& spec, const NetworkParams& params,
                            ForwardCache&& cache, MatD delta /* grad at output pre-activation */) {
    BackpropResult res;
    res.probs = cache.post.back();
    res.grads.setZero(params);
    for (int l = spec.num_layers() - 1; l >= 0; --l) {
        if (l < spec.num_layers() - 1 && spec.hidden_activation == Hidden::relu)
            delta = delta.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
        res.grads.weights[l] = delta * cache.post[l].transpose();
        res.grads.biases[l] = delta.rowwise().sum();
        if (l > 0)
            delta = params.weights[l].transpose() * delta;
        else
            res.input_grad = params.weights[l].transpose() * delta;
    }
    return res;
}

}  // namespace

MatD forward_batch(const NetworkSpec& spec, const NetworkParams& params, const MatD& x) {
    return run_forward(spec, params, x).post.back();
}

VecD forward(const NetworkSpec& spec, const NetworkParams& params, const VecD& x) {
    return forward_batch(spec, params, x);
}

double cross_entropy(const MatD& probs, const std::vector<int>& labels) {
    if (probs.cols() != Eigen::Index(labels.size()))
        throw std::invalid_argument("cross_entropy: label count mismatch");
    double loss = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c)
        loss -= std::log(std::max(probs(labels[size_t(c)], c), 1e-12));
    return loss / double(probs.cols());
}

BackpropResult grad_cross_entropy(const NetworkSpec& spec, const NetworkParams& params,
                                  const MatD& x, const std::vector<int>& labels) {
    if (spec.output_activation != Output::softmax)
        throw std::invalid_argument("grad_cross_entropy: requires a softmax output layer");
    if (x.cols() != Eigen::Index(labels.size()) || x.cols() == 0)
        throw std::invalid_argument("grad_cross_entropy: empty batch or label count mismatch");
    ForwardCache cache = run_forward(spec, params, x);
    const MatD& probs = cache.post.back();
    // softmax + cross-entropy composite: d loss / d logits = (probs - onehot) / batch
    MatD delta = probs;
    for (Eigen::Index c = 0; c < x.cols(); ++c) delta(labels[size_t(c)], c) -= 1.0;
    delta /= double(x.cols());
    double loss = cross_entropy(probs, labels);
    BackpropResult res = run_backward(spec, params, std::move(cache), std::move(delta));
    res.loss = loss;
    return res;
}

BackpropResult grad_upstream(const NetworkSpec& spec, const NetworkParams& params, const MatD& x,
                             const MatD& output_grad) {
    if (spec.output_activation != Output::linear)
        throw std::invalid_argument("grad_upstream: requires a linear output layer");
    ForwardCache cache = run_forward(spec, params, x);
    return run_backward(spec, params, std::move(cache), MatD(output_grad));
}

OptimizerState init_adam(const NetworkParams& params, double learning_rate) {
    OptimizerState s;
    s.learning_rate = learning_rate;
    for (const auto& w : params.weights) {
        s.m_w.push_back(MatD::Zero(w.rows(), w.cols()));
        s.v_w.push_back(MatD::Zero(w.rows(), w.cols()));
    }
    for (const auto& b : params.biases) {
        s.m_b.push_back(VecD::Zero(b.size()));
        s.v_b.push_back(VecD::Zero(b.size()));
    }
    return s;
}

void adam_step(OptimizerState& state, NetworkParams& params, const Gradients& grads) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (size_t l = 0; l < params.weights.size(); ++l) {
        state.m_w[l] = state.beta1 * state.m_w[l] + (1.0 - state.beta1) * grads.weights[l];
        state.v_w[l] = state.beta2 * state.v_w[l] + (1.0 - state.beta2) * grads.weights[l].cwiseAbs2();
        params.weights[l].array() -= state.learning_rate * (state.m_w[l].array() / bc1) /
                                     ((state.v_w[l].array() / bc2).sqrt() + state.eps);
        state.m_b[l] = state.beta1 * state.m_b[l] + (1.0 - state.beta1) * grads.biases[l];
        state.v_b[l] = state.beta2 * state.v_b[l] + (1.0 - state.beta2) * grads.biases[l].cwiseAbs2();
        params.biases[l].array() -= state.learning_rate * (state.m_b[l].array() / bc1) /
                                    ((state.v_b[l].array() / bc2).sqrt() + state.eps);
    }
}

namespace {
constexpr const char* kCheckpointMagic = "#hyphy-net-v1";

std::string activation_name(Hidden h) { return h == Hidden::relu ? "relu" : "identity"; }
std::string activation_name(Output o) { return o == Output::softmax ? "softmax" : "linear"; }
}  // namespace

void save_checkpoint(std::ostream& os, const NetworkSpec& spec, const NetworkParams& params) {
    params.check_shapes(spec);
    os << kCheckpointMagic << " layers=";
    for (size_t i = 0; i < spec.layer_sizes.size(); ++i)
        os << (i ? "," : "") << spec.layer_sizes[i];
    os << " hidden=" << activation_name(spec.hidden_activation)
       << " output=" << activation_name(spec.output_activation) << "\n";
    os << std::setprecision(17);
    for (int l = 0; l < spec.num_layers(); ++l) {
        os << "W" << l << "\n";
        for (Eigen::Index i = 0; i < params.weights[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < params.weights[l].cols(); ++j)
                os << (j ? "," : "") << params.weights[l](i, j);
            os << "\n";
        }
        os << "b" << l << "\n";
        for (Eigen::Index i = 0; i < params.biases[l].size(); ++i)
            os << (i ? "," : "") << params.biases[l][i];
        os << "\n";
    }
}

void load_checkpoint(std::istream& is, NetworkSpec& spec, NetworkParams& params) {
    std::string header;
    if (!std::getline(is, header) || header.rfind(kCheckpointMagic, 0) != 0)
        throw std::runtime_error("checkpoint: bad or missing header");
    spec = NetworkSpec{};
    std::istringstream hs(header.substr(std::string(kCheckpointMagic).size()));
    std::string token;
    while (hs >> token) {
        const auto eq = token.find('=');
        const std::string key = token.substr(0, eq), val = token.substr(eq + 1);
        if (key == "layers") {
            std::istringstream vs(val);
            std::string num;
            while (std::getline(vs, num, ',')) spec.layer_sizes.push_back(std::stoi(num));
        } else if (key == "hidden") {
            spec.hidden_activation = val == "relu" ? Hidden::relu : Hidden::identity;
        } else if (key == "output") {
            spec.output_activation = val == "softmax" ? Output::softmax : Output::linear;
        } else {
            throw std::runtime_error("checkpoint: unknown header field " + key);
        }
    }
    spec.validate();
    params = NetworkParams{};
    const auto read_row = [&](Eigen::Index n) {
        std::string line;
        if (!std::getline(is, line)) throw std::runtime_error("checkpoint: truncated");
        VecD row(n);
        std::istringstream ls(line);
        std::string cell;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::getline(ls, cell, ',')) throw std::runtime_error("checkpoint: short row");
            row[i] = std::stod(cell);
        }
        return row;
    };
    for (int l = 0; l < spec.num_layers(); ++l) {
        std::string tag;
        if (!std::getline(is, tag) || tag != "W" + std::to_string(l))
            throw std::runtime_error("checkpoint: expected W" + std::to_string(l));
        MatD w(spec.layer_sizes[l + 1], spec.layer_sizes[l]);
        for (Eigen::Index i = 0; i < w.rows(); ++i) w.row(i) = read_row(w.cols()).transpose();
        params.weights.push_back(std::move(w));
        if (!std::getline(is, tag) || tag != "b" + std::to_string(l))
            throw std::runtime_error("checkpoint: expected b" + std::to_string(l));
        params.biases.push_back(read_row(spec.layer_sizes[l + 1]));
    }
    params.check_shapes(spec);
}

void save_checkpoint_file(const std::string& path, const NetworkSpec& spec, const NetworkParams& params) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    save_checkpoint(os, spec, params);
}

void load_checkpoint_file(const std::string& path, NetworkSpec& spec, NetworkParams& params) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    load_checkpoint(is, spec, params);
}

}  // namespace nnet
}  // namespace hyphy
