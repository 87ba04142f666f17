#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "quitlab/embedding.hpp"

namespace quitlab {

struct MlpConfig {
    std::size_t input_dim = 32;
    std::vector<std::size_t> hidden_dims = {64};
    std::size_t output_dim = 16;
    bool final_l2_normalize = true;
    std::uint64_t seed = 1;
};

bool operator==(const MlpConfig& a, const MlpConfig& b);

// Small ReLU MLP mapping raw features to embeddings. Weights initialize
// uniform within +/- 1/sqrt(fan_in) from the config seed, biases zero.
class Mlp {
  public:
    explicit Mlp(const MlpConfig& config);

    const MlpConfig& config() const { return config_; }

    Embedding forward(const Embedding& features) const;

    // Everything backward() needs from one forward evaluation.
    struct Trace {
        std::vector<Embedding> inputs;     // input to each linear layer
        std::vector<Embedding> pre_acts;   // linear output of each layer
        Embedding output;
        bool degenerate_norm = false;      // pre-norm vector below epsilon
    };
    Embedding forward_traced(const Embedding& features, Trace& trace) const;

    struct Gradients {
        std::vector<std::vector<double>> weights;  // per layer, row-major
        std::vector<std::vector<double>> biases;
    };
    Gradients zero_gradients() const;

    // Chain rule from dL/d(output) through normalization, linears, and ReLUs.
    // Accumulates parameter gradients into grads and returns dL/d(features).
    // ReLU takes subgradient 0 at exactly 0, matching the hinge convention.
    Embedding backward(const Trace& trace, const Embedding& output_grad,
                       Gradients& grads) const;

    void sgd_step(const Gradients& grads, double lr);

    // Flat parameter view (layer by layer, weights then biases) for
    // finite-difference probing.
    std::size_t num_parameters() const;
    double get_parameter(std::size_t i) const;
    void set_parameter(std::size_t i, double value);

    nlohmann::json weights_to_json() const;
    void weights_from_json(const nlohmann::json& j);

  private:
    struct Layer {
        std::size_t in = 0;
        std::size_t out = 0;
        std::vector<double> w;  // row-major out x in
        std::vector<double> b;
    };

    MlpConfig config_;
    std::vector<Layer> layers_;
};

}  // namespace quitlab
