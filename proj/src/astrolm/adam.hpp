#pragma once

#include <cstdint>

#include "astrolm/parameters.hpp"

namespace astrolm {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // Linear warmup to `lr` over warmup_steps, then linear decay to zero at
    // total_steps. total_steps == 0 means a constant rate.
    uint64_t warmup_steps = 0;
    uint64_t total_steps = 0;
};

class AdamOptimizer {
public:
    AdamOptimizer(const ModelConfig& shapes, const AdamConfig& config);

    // One update; returns the learning rate that was applied.
    double step(Parameters& params, const Gradients& grads);

    double rate_at(uint64_t step) const;
    uint64_t steps_taken() const { return t_; }

private:
    AdamConfig cfg_;
    uint64_t t_ = 0;
    Parameters m_;
    Parameters v_;
};

}  // namespace astrolm
