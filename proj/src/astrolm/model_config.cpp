#include "astrolm/model_config.hpp"

#include "astrolm/error.hpp"

namespace astrolm {

void ModelConfig::validate() const {
    if (num_layers < 1 || hidden_dim < 1 || num_heads < 1 || ff_dim < 1 ||
        max_positions < 1 || vocab_size < 1 || type_vocab_size < 1 || num_labels < 1) {
        raise(ErrorCode::invalid_argument, "model config dimensions must all be >= 1");
    }
    if (hidden_dim % num_heads != 0) {
        raise(ErrorCode::invalid_argument,
              "hidden_dim " + std::to_string(hidden_dim) + " not divisible by num_heads " +
                  std::to_string(num_heads));
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        raise(ErrorCode::invalid_argument, "dropout_rate must be in [0, 1)");
    }
}

nlohmann::ordered_json ModelConfig::to_json() const {
    return {{"num_layers", num_layers},
            {"hidden_dim", hidden_dim},
            {"num_heads", num_heads},
            {"ff_dim", ff_dim},
            {"max_positions", max_positions},
            {"vocab_size", vocab_size},
            {"type_vocab_size", type_vocab_size},
            {"num_labels", num_labels},
            {"dropout_rate", dropout_rate},
            {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.num_layers = j.value("num_layers", c.num_layers);
        c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
        c.num_heads = j.value("num_heads", c.num_heads);
        c.ff_dim = j.value("ff_dim", c.ff_dim);
        c.max_positions = j.value("max_positions", c.max_positions);
        c.vocab_size = j.value("vocab_size", c.vocab_size);
        c.type_vocab_size = j.value("type_vocab_size", c.type_vocab_size);
        c.num_labels = j.value("num_labels", c.num_labels);
        c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::parse, std::string("bad model config: ") + e.what());
    }
    return c;
}

}  // namespace astrolm
