#include "astrolm/parameters.hpp"

#include "astrolm/error.hpp"
#include "astrolm/rng.hpp"

namespace astrolm {

namespace {

// const_cast keeps the two visitor overloads in one place; the const
// overload hands out const references only.
template <typename P, typename F>
void visit_tensors(P& p, F&& fn) {
    fn("embeddings.token", p.token_embedding);
    fn("embeddings.position", p.position_embedding);
    fn("embeddings.segment", p.segment_embedding);
    fn("embeddings.ln_gain", p.embed_ln_gain);
    fn("embeddings.ln_bias", p.embed_ln_bias);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        auto& l = p.layers[i];
        const std::string prefix = "layer" + std::to_string(i) + ".";
        fn(prefix + "attn.q_w", l.q_w);
        fn(prefix + "attn.q_b", l.q_b);
        fn(prefix + "attn.k_w", l.k_w);
        fn(prefix + "attn.k_b", l.k_b);
        fn(prefix + "attn.v_w", l.v_w);
        fn(prefix + "attn.v_b", l.v_b);
        fn(prefix + "attn.o_w", l.o_w);
        fn(prefix + "attn.o_b", l.o_b);
        fn(prefix + "attn.ln_gain", l.attn_ln_gain);
        fn(prefix + "attn.ln_bias", l.attn_ln_bias);
        fn(prefix + "ffn.w1", l.ff1_w);
        fn(prefix + "ffn.b1", l.ff1_b);
        fn(prefix + "ffn.w2", l.ff2_w);
        fn(prefix + "ffn.b2", l.ff2_b);
        fn(prefix + "ffn.ln_gain", l.ff_ln_gain);
        fn(prefix + "ffn.ln_bias", l.ff_ln_bias);
    }
    fn("pooler.w", p.pooler_w);
    fn("pooler.b", p.pooler_b);
    fn("mlm.w", p.mlm_w);
    fn("mlm.b", p.mlm_b);
    fn("nsp.w", p.nsp_w);
    fn("nsp.b", p.nsp_b);
    fn("token_cls.w", p.token_cls_w);
    fn("token_cls.b", p.token_cls_b);
}

Parameters make_shapes(const ModelConfig& config) {
    config.validate();
    const std::size_t h = config.hidden_dim;
    Parameters p;
    p.config = config;
    p.token_embedding = Matrix(config.vocab_size, h);
    p.position_embedding = Matrix(config.max_positions, h);
    p.segment_embedding = Matrix(config.type_vocab_size, h);
    p.embed_ln_gain = Matrix(1, h);
    p.embed_ln_bias = Matrix(1, h);
    p.layers.resize(config.num_layers);
    for (auto& l : p.layers) {
        l.q_w = Matrix(h, h);
        l.q_b = Matrix(1, h);
        l.k_w = Matrix(h, h);
        l.k_b = Matrix(1, h);
        l.v_w = Matrix(h, h);
        l.v_b = Matrix(1, h);
        l.o_w = Matrix(h, h);
        l.o_b = Matrix(1, h);
        l.attn_ln_gain = Matrix(1, h);
        l.attn_ln_bias = Matrix(1, h);
        l.ff1_w = Matrix(h, config.ff_dim);
        l.ff1_b = Matrix(1, config.ff_dim);
        l.ff2_w = Matrix(config.ff_dim, h);
        l.ff2_b = Matrix(1, h);
        l.ff_ln_gain = Matrix(1, h);
        l.ff_ln_bias = Matrix(1, h);
    }
    p.pooler_w = Matrix(h, h);
    p.pooler_b = Matrix(1, h);
    p.mlm_w = Matrix(h, config.vocab_size);
    p.mlm_b = Matrix(1, config.vocab_size);
    p.nsp_w = Matrix(h, 2);
    p.nsp_b = Matrix(1, 2);
    p.token_cls_w = Matrix(h, config.num_labels);
    p.token_cls_b = Matrix(1, config.num_labels);
    return p;
}

bool is_ln_gain(const std::string& name) { return name.ends_with("ln_gain"); }

bool is_weight(const std::string& name) {
    return name.ends_with("_w") || name.ends_with(".w") || name.ends_with(".w1") ||
           name.ends_with(".w2") || name.starts_with("embeddings.") ;
}

}  // namespace

Parameters Parameters::init(const ModelConfig& config) {
    Parameters p = make_shapes(config);
    Rng rng(mix_seed(config.seed, 0x70617261ULL));  // independent init stream
    p.for_each_tensor([&](const std::string& name, Matrix& m) {
        if (is_ln_gain(name)) {
            m.fill(1.0);
        } else if (is_weight(name) && !name.ends_with("ln_bias")) {
            for (std::size_t i = 0; i < m.size(); ++i) {
                m[i] = rng.next_trunc_normal(0.02, 2.0);
            }
        }
        // biases and layer-norm shifts stay zero
    });
    return p;
}

Parameters Parameters::zeros(const ModelConfig& config) {
    return make_shapes(config);
}

Parameters Parameters::zeros_like() const {
    return make_shapes(config);
}

void Parameters::for_each_tensor(
    const std::function<void(const std::string&, Matrix&)>& fn) {
    visit_tensors(*this, fn);
}

void Parameters::for_each_tensor(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
    visit_tensors(*this, fn);
}

Matrix* Parameters::find_tensor(const std::string& name) {
    Matrix* out = nullptr;
    for_each_tensor([&](const std::string& n, Matrix& m) {
        if (n == name) out = &m;
    });
    return out;
}

bool Parameters::same_shape_as(const Parameters& other) const {
    if (layers.size() != other.layers.size()) return false;
    bool ok = true;
    std::size_t i = 0;
    std::vector<const Matrix*> mine, theirs;
    for_each_tensor([&](const std::string&, const Matrix& m) { mine.push_back(&m); });
    other.for_each_tensor([&](const std::string&, const Matrix& m) { theirs.push_back(&m); });
    if (mine.size() != theirs.size()) return false;
    for (; i < mine.size(); ++i) {
        if (!mine[i]->same_shape(*theirs[i])) ok = false;
    }
    return ok;
}

bool Parameters::all_finite() const {
    bool ok = true;
    for_each_tensor([&](const std::string&, const Matrix& m) {
        if (!astrolm::all_finite(m)) ok = false;
    });
    return ok;
}

}  // namespace astrolm
