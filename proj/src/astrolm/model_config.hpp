#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace astrolm {

struct ModelConfig {
    uint32_t num_layers = 2;
    uint32_t hidden_dim = 64;
    uint32_t num_heads = 4;
    uint32_t ff_dim = 128;
    uint32_t max_positions = 128;
    uint32_t vocab_size = 0;
    uint32_t type_vocab_size = 2;
    uint32_t num_labels = 2;
    double dropout_rate = 0.0;
    uint64_t seed = 42;

    uint32_t head_dim() const { return hidden_dim / num_heads; }

    void validate() const;

    nlohmann::ordered_json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

}  // namespace astrolm
