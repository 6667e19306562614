#include "astrolm/adam.hpp"

#include <cmath>

#include "astrolm/error.hpp"

namespace astrolm {

AdamOptimizer::AdamOptimizer(const ModelConfig& shapes, const AdamConfig& config)
    : cfg_(config), m_(Parameters::zeros(shapes)), v_(Parameters::zeros(shapes)) {
    if (cfg_.lr <= 0.0) {
        raise(ErrorCode::invalid_argument, "learning rate must be positive");
    }
}

double AdamOptimizer::rate_at(uint64_t step) const {
    if (cfg_.total_steps == 0) return cfg_.lr;
    if (cfg_.warmup_steps > 0 && step <= cfg_.warmup_steps) {
        return cfg_.lr * static_cast<double>(step) / static_cast<double>(cfg_.warmup_steps);
    }
    if (cfg_.total_steps <= cfg_.warmup_steps) return cfg_.lr;
    const double remaining = static_cast<double>(cfg_.total_steps) - static_cast<double>(step);
    const double span =
        static_cast<double>(cfg_.total_steps) - static_cast<double>(cfg_.warmup_steps);
    return cfg_.lr * std::max(0.0, remaining / span);
}

double AdamOptimizer::step(Parameters& params, const Gradients& grads) {
    ++t_;
    const double lr = rate_at(t_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

    std::vector<Matrix*> ps, ms, vs;
    std::vector<const Matrix*> gs;
    params.for_each_tensor([&](const std::string&, Matrix& m) { ps.push_back(&m); });
    m_.for_each_tensor([&](const std::string&, Matrix& m) { ms.push_back(&m); });
    v_.for_each_tensor([&](const std::string&, Matrix& m) { vs.push_back(&m); });
    grads.for_each_tensor([&](const std::string&, const Matrix& m) { gs.push_back(&m); });

    for (std::size_t t = 0; t < ps.size(); ++t) {
        Matrix& p = *ps[t];
        Matrix& m = *ms[t];
        Matrix& v = *vs[t];
        const Matrix& g = *gs[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
    }
    return lr;
}

}  // namespace astrolm
