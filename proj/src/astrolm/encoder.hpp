#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "astrolm/parameters.hpp"
#include "astrolm/tokenizer.hpp"

namespace astrolm {

// A batch of encodings flattened to (batch * seq) vectors. All sequences
// must share one length.
struct Batch {
    std::size_t batch_size = 0;
    std::size_t seq_len = 0;
    std::vector<uint32_t> ids;
    std::vector<uint8_t> segments;
    std::vector<uint8_t> attention;
    std::vector<uint8_t> specials;

    static Batch from_encodings(std::span<const Encoding> encodings);

    std::size_t flat(std::size_t b, std::size_t l) const { return b * seq_len + l; }
    std::size_t flat_size() const { return batch_size * seq_len; }
};

struct LayerNormCache {
    Matrix normalized;            // x-hat
    std::vector<double> inv_std;  // per row
};

struct DropoutMask {
    double rate = 0.0;
    std::vector<uint8_t> keep;
    bool active() const { return rate > 0.0 && !keep.empty(); }
};

struct LayerCache {
    Matrix input;
    Matrix q, k, v;
    Matrix attn_probs;  // (batch * heads * seq) x seq, post-softmax
    DropoutMask attn_probs_drop;
    Matrix context;     // concatenated head outputs, before the output proj
    DropoutMask attn_out_drop;
    LayerNormCache ln1;
    Matrix y1;          // attention block output = FFN input
    Matrix ff1_pre;
    Matrix ff1_act;
    DropoutMask ffn_drop;
    LayerNormCache ln2;
};

// Dropout is counter-based: the mask at a given (seed, step, site, index)
// is a pure function of the key, so training runs replay exactly.
struct DropoutKey {
    uint64_t seed = 0;
    uint64_t step = 0;
};

struct EncoderForward {
    std::size_t batch_size = 0;
    std::size_t seq_len = 0;
    Matrix hidden;  // (batch * seq) x hidden
    Matrix pooled;  // batch x hidden, tanh-projected [CLS]

    LayerNormCache emb_ln;
    DropoutMask emb_drop;
    std::vector<LayerCache> layers;
    bool train_mode = false;
};

// Masked positions contribute nothing: they receive additive -inf before the
// softmax. With train_mode off the pass is deterministic and dropout-free.
EncoderForward encoder_forward(const Parameters& params, const Batch& batch, bool train_mode,
                               DropoutKey key = {});

// Accumulates into `grads`. d_pooled may be empty when no loss touched the
// pooled output; d_hidden must be (batch*seq) x hidden.
void encoder_backward(const Parameters& params, const Batch& batch, const EncoderForward& fwd,
                      const Matrix& d_hidden, const Matrix& d_pooled, Gradients& grads);

// Mean cross-entropy over the masked positions only. Accumulates head
// gradients and the hidden-state gradient when the out-params are non-null.
double mlm_loss(const Parameters& params, const EncoderForward& fwd,
                std::span<const std::size_t> masked_positions,
                std::span<const uint32_t> target_ids, Gradients* grads, Matrix* d_hidden);

// Two-way cross-entropy on the pooled vectors; labels are 1 for is_next.
double nsp_loss(const Parameters& params, const EncoderForward& fwd,
                std::span<const uint8_t> is_next, Gradients* grads, Matrix* d_pooled);

// Mean cross-entropy over positions with label_mask set.
double token_classification_loss(const Parameters& params, const EncoderForward& fwd,
                                 std::span<const uint32_t> gold_labels,
                                 std::span<const uint8_t> label_mask, Gradients* grads,
                                 Matrix* d_hidden);

Matrix nsp_logits(const Parameters& params, const EncoderForward& fwd);
Matrix token_classification_logits(const Parameters& params, const EncoderForward& fwd);

// Arithmetic mean of hidden states over attended positions, one row per
// sequence.
Matrix mean_pool(const EncoderForward& fwd, const Batch& batch);
void mean_pool_backward(const Matrix& d_pooled_mean, const Batch& batch, Matrix& d_hidden);

// Shared softmax cross-entropy: returns the mean loss over rows; when
// d_logits is non-null it receives (softmax - onehot) / rows.
double softmax_cross_entropy(const Matrix& logits, std::span<const uint32_t> targets,
                             Matrix* d_logits);

}  // namespace astrolm
