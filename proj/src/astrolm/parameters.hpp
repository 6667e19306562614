#pragma once

#include <functional>
#include <string>
#include <vector>

#include "astrolm/model_config.hpp"
#include "astrolm/tensor.hpp"

namespace astrolm {

struct LayerParams {
    Matrix q_w, q_b;
    Matrix k_w, k_b;
    Matrix v_w, v_b;
    Matrix o_w, o_b;
    Matrix attn_ln_gain, attn_ln_bias;
    Matrix ff1_w, ff1_b;
    Matrix ff2_w, ff2_b;
    Matrix ff_ln_gain, ff_ln_bias;
};

// Every weight of the encoder plus its heads. Gradients reuse this container
// (same shapes, zero-initialized).
struct Parameters {
    ModelConfig config;

    Matrix token_embedding;     // vocab_size x hidden
    Matrix position_embedding;  // max_positions x hidden
    Matrix segment_embedding;   // type_vocab_size x hidden
    Matrix embed_ln_gain, embed_ln_bias;

    std::vector<LayerParams> layers;

    Matrix pooler_w, pooler_b;       // tanh projection of the [CLS] state
    Matrix mlm_w, mlm_b;             // hidden -> vocab
    Matrix nsp_w, nsp_b;             // hidden -> 2
    Matrix token_cls_w, token_cls_b; // hidden -> num_labels

    // Truncated-normal weights (std 0.02, cut at 2 std), zero biases,
    // unit layer-norm gains. Fully determined by config.seed.
    static Parameters init(const ModelConfig& config);

    // All-zero tensors at the shapes the config dictates.
    static Parameters zeros(const ModelConfig& config);

    // Same shapes, all values zero.
    Parameters zeros_like() const;

    // Visits every tensor in a fixed order; used by the optimizer, the
    // checkpoint writer, and the gradient checker.
    void for_each_tensor(const std::function<void(const std::string&, Matrix&)>& fn);
    void for_each_tensor(
        const std::function<void(const std::string&, const Matrix&)>& fn) const;

    Matrix* find_tensor(const std::string& name);

    bool same_shape_as(const Parameters& other) const;
    bool all_finite() const;
};

using Gradients = Parameters;

}  // namespace astrolm
