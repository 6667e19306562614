#pragma once

#include <string>

#include "json.hpp"

#include "astrolm/parameters.hpp"

namespace astrolm {

// Self-describing container: model config, an extras JSON object (tagset,
// inline vocab, pooling mode, ... depending on the producing stage) and the
// named tensors with explicit dims, row-major, little-endian float64.
// load(save(p)) reproduces every value bitwise.
struct Checkpoint {
    Parameters params;
    nlohmann::ordered_json extras = nlohmann::ordered_json::object();
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace astrolm
