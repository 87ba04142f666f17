#include "quitlab/mlp.hpp"

#include <cmath>

#include "quitlab/errors.hpp"
#include "quitlab/rng.hpp"

namespace quitlab {

bool operator==(const MlpConfig& a, const MlpConfig& b) {
    return a.input_dim == b.input_dim && a.hidden_dims == b.hidden_dims &&
           a.output_dim == b.output_dim && a.final_l2_normalize == b.final_l2_normalize &&
           a.seed == b.seed;
}

Mlp::Mlp(const MlpConfig& config) : config_(config) {
    if (config_.input_dim < 1 || config_.output_dim < 1) {
        throw DataError("mlp: dimensions must be positive");
    }
    for (std::size_t h : config_.hidden_dims) {
        if (h < 1) throw DataError("mlp: hidden dimensions must be positive");
    }
    std::vector<std::size_t> dims;
    dims.push_back(config_.input_dim);
    dims.insert(dims.end(), config_.hidden_dims.begin(), config_.hidden_dims.end());
    dims.push_back(config_.output_dim);

    Rng rng(config_.seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.in = dims[l];
        layer.out = dims[l + 1];
        layer.w.resize(layer.in * layer.out);
        layer.b.assign(layer.out, 0.0);
        double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (double& w : layer.w) w = rng.uniform(-bound, bound);
        layers_.push_back(std::move(layer));
    }
}

Embedding Mlp::forward(const Embedding& features) const {
    Trace trace;
    return forward_traced(features, trace);
}

Embedding Mlp::forward_traced(const Embedding& features, Trace& trace) const {
    if (features.size() != config_.input_dim) {
        throw DataError("mlp: feature dimension " + std::to_string(features.size()) +
                        " does not match input_dim " + std::to_string(config_.input_dim));
    }
    trace.inputs.clear();
    trace.pre_acts.clear();
    Embedding x = features;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        trace.inputs.push_back(x);
        Embedding z(layer.out, 0.0);
        for (std::size_t r = 0; r < layer.out; ++r) {
            double acc = layer.b[r];
            const double* row = layer.w.data() + r * layer.in;
            for (std::size_t c = 0; c < layer.in; ++c) acc += row[c] * x[c];
            z[r] = acc;
        }
        trace.pre_acts.push_back(z);
        if (l + 1 < layers_.size()) {
            for (double& v : z) v = v > 0.0 ? v : 0.0;
        }
        x = std::move(z);
    }
    trace.degenerate_norm = false;
    if (config_.final_l2_normalize) {
        NormalizeResult n = l2_normalize(x);
        trace.degenerate_norm = n.degenerate;
        x = std::move(n.value);
    }
    trace.output = x;
    return x;
}

Mlp::Gradients Mlp::zero_gradients() const {
    Gradients g;
    for (const Layer& layer : layers_) {
        g.weights.emplace_back(layer.w.size(), 0.0);
        g.biases.emplace_back(layer.b.size(), 0.0);
    }
    return g;
}

Embedding Mlp::backward(const Trace& trace, const Embedding& output_grad,
                        Gradients& grads) const {
    if (trace.pre_acts.size() != layers_.size()) {
        throw DataError("mlp: trace does not match model depth");
    }
    if (output_grad.size() != config_.output_dim) {
        throw DataError("mlp: output gradient dimension mismatch");
    }

    Embedding g = output_grad;
    if (config_.final_l2_normalize && !trace.degenerate_norm) {
        // y = z / ||z||: dL/dz = (dL/dy - (dL/dy . y) y) / ||z||.
        const Embedding& z = trace.pre_acts.back();
        const Embedding& y = trace.output;
        double norm = 0.0;
        for (double v : z) norm += v * v;
        norm = std::sqrt(norm);
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = (g[i] - dot * y[i]) / norm;
    }

    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& layer = layers_[li];
        const Embedding& input = trace.inputs[li];
        std::vector<double>& gw = grads.weights[li];
        std::vector<double>& gb = grads.biases[li];
        Embedding g_in(layer.in, 0.0);
        for (std::size_t r = 0; r < layer.out; ++r) {
            double gr = g[r];
            gb[r] += gr;
            double* wrow = gw.data() + r * layer.in;
            const double* row = layer.w.data() + r * layer.in;
            for (std::size_t c = 0; c < layer.in; ++c) {
                wrow[c] += gr * input[c];
                g_in[c] += gr * row[c];
            }
        }
        if (li > 0) {
            const Embedding& pre = trace.pre_acts[li - 1];
            for (std::size_t c = 0; c < g_in.size(); ++c) {
                if (pre[c] <= 0.0) g_in[c] = 0.0;
            }
        }
        g = std::move(g_in);
    }
    return g;
}

void Mlp::sgd_step(const Gradients& grads, double lr) {
    if (grads.weights.size() != layers_.size()) {
        throw DataError("mlp: gradient shape does not match model");
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Layer& layer = layers_[l];
        if (grads.weights[l].size() != layer.w.size() || grads.biases[l].size() != layer.b.size()) {
            throw DataError("mlp: gradient shape does not match layer " + std::to_string(l));
        }
        for (std::size_t i = 0; i < layer.w.size(); ++i) layer.w[i] -= lr * grads.weights[l][i];
        for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] -= lr * grads.biases[l][i];
    }
}

std::size_t Mlp::num_parameters() const {
    std::size_t n = 0;
    for (const Layer& layer : layers_) n += layer.w.size() + layer.b.size();
    return n;
}

double Mlp::get_parameter(std::size_t i) const {
    for (const Layer& layer : layers_) {
        if (i < layer.w.size()) return layer.w[i];
        i -= layer.w.size();
        if (i < layer.b.size()) return layer.b[i];
        i -= layer.b.size();
    }
    throw DataError("mlp: parameter index out of range");
}

void Mlp::set_parameter(std::size_t i, double value) {
    for (Layer& layer : layers_) {
        if (i < layer.w.size()) {
            layer.w[i] = value;
            return;
        }
        i -= layer.w.size();
        if (i < layer.b.size()) {
            layer.b[i] = value;
            return;
        }
        i -= layer.b.size();
    }
    throw DataError("mlp: parameter index out of range");
}

nlohmann::json Mlp::weights_to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& layer : layers_) {
        layers.push_back({{"in", layer.in}, {"out", layer.out}, {"w", layer.w}, {"b", layer.b}});
    }
    return {{"layers", layers}};
}

void Mlp::weights_from_json(const nlohmann::json& j) {
    if (!j.contains("layers") || !j.at("layers").is_array() ||
        j.at("layers").size() != layers_.size()) {
        throw DataError("mlp: weight payload does not match model depth");
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const nlohmann::json& jl = j.at("layers").at(l);
        Layer& layer = layers_[l];
        if (jl.at("in").get<std::size_t>() != layer.in ||
            jl.at("out").get<std::size_t>() != layer.out) {
            throw DataError("mlp: weight payload shape mismatch at layer " + std::to_string(l));
        }
        auto w = jl.at("w").get<std::vector<double>>();
        auto b = jl.at("b").get<std::vector<double>>();
        if (w.size() != layer.w.size() || b.size() != layer.b.size()) {
            throw DataError("mlp: weight payload size mismatch at layer " + std::to_string(l));
        }
        layer.w = std::move(w);
        layer.b = std::move(b);
    }
}

}  // namespace quitlab
