#include "astrolm/encoder.hpp"

#include <cmath>
#include <limits>

#include "astrolm/error.hpp"
#include "astrolm/rng.hpp"

namespace astrolm {

namespace {

constexpr double kLayerNormEps = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865476));
}

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865476));
    const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014327;
    return cdf + x * pdf;
}

// Dropout site ids, mixed into the counter-based key so every site draws an
// independent mask.
enum Site : uint64_t {
    kSiteEmbeddings = 0,
    kSiteLayerBase = 1,  // layer i uses kSiteLayerBase + 3*i + {0,1,2}
};

DropoutMask make_dropout_mask(double rate, std::size_t n, const DropoutKey& key,
                              uint64_t site) {
    DropoutMask mask;
    mask.rate = rate;
    if (rate <= 0.0) return mask;
    mask.keep.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const uint64_t h = mix_seed(key.seed, key.step, site, i);
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        mask.keep[i] = u >= rate ? 1 : 0;
    }
    return mask;
}

void apply_dropout(Matrix& m, const DropoutMask& mask) {
    if (!mask.active()) return;
    const double scale = 1.0 / (1.0 - mask.rate);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = mask.keep[i] ? m[i] * scale : 0.0;
    }
}

void dropout_backward(Matrix& d, const DropoutMask& mask) {
    if (!mask.active()) return;
    const double scale = 1.0 / (1.0 - mask.rate);
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = mask.keep[i] ? d[i] * scale : 0.0;
    }
}

// y = gain * (x - mean) / sqrt(var + eps) + bias, per row.
void layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, Matrix& y,
                LayerNormCache& cache) {
    const std::size_t rows = x.rows(), h = x.cols();
    y = Matrix(rows, h);
    cache.normalized = Matrix(rows, h);
    cache.inv_std.assign(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * h;
        double mean = 0.0;
        for (std::size_t j = 0; j < h; ++j) mean += xr[j];
        mean /= static_cast<double>(h);
        double var = 0.0;
        for (std::size_t j = 0; j < h; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(h);
        const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
        cache.inv_std[r] = inv_std;
        double* nr = cache.normalized.data() + r * h;
        double* yr = y.data() + r * h;
        for (std::size_t j = 0; j < h; ++j) {
            nr[j] = (xr[j] - mean) * inv_std;
            yr[j] = gain[j] * nr[j] + bias[j];
        }
    }
}

// dx for y = LN(x); also accumulates the gain/bias gradients.
void layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& gain,
                         Matrix& dgain, Matrix& dbias, Matrix& dx) {
    const std::size_t rows = dy.rows(), h = dy.cols();
    dx = Matrix(rows, h);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* dyr = dy.data() + r * h;
        const double* nr = cache.normalized.data() + r * h;
        double sum_dn = 0.0, sum_dn_n = 0.0;
        for (std::size_t j = 0; j < h; ++j) {
            const double dn = dyr[j] * gain[j];
            sum_dn += dn;
            sum_dn_n += dn * nr[j];
            dgain[j] += dyr[j] * nr[j];
            dbias[j] += dyr[j];
        }
        const double inv_h = 1.0 / static_cast<double>(h);
        const double r_std = cache.inv_std[r];
        double* dxr = dx.data() + r * h;
        for (std::size_t j = 0; j < h; ++j) {
            const double dn = dyr[j] * gain[j];
            dxr[j] = r_std * (dn - sum_dn * inv_h - nr[j] * (sum_dn_n * inv_h));
        }
    }
}

void validate_batch(const Parameters& params, const Batch& batch) {
    const auto& cfg = params.config;
    if (batch.batch_size == 0 || batch.seq_len == 0) {
        raise(ErrorCode::invalid_argument, "empty batch");
    }
    if (batch.seq_len > cfg.max_positions) {
        raise(ErrorCode::invalid_argument,
              "sequence length " + std::to_string(batch.seq_len) + " exceeds max_positions " +
                  std::to_string(cfg.max_positions));
    }
    for (std::size_t i = 0; i < batch.ids.size(); ++i) {
        if (batch.ids[i] >= cfg.vocab_size) {
            raise(ErrorCode::invalid_argument,
                  "token id " + std::to_string(batch.ids[i]) + " out of range for vocab_size " +
                      std::to_string(cfg.vocab_size));
        }
        if (batch.segments[i] >= cfg.type_vocab_size) {
            raise(ErrorCode::invalid_argument, "segment id out of range");
        }
    }
}

}  // namespace

Batch Batch::from_encodings(std::span<const Encoding> encodings) {
    Batch batch;
    if (encodings.empty()) {
        raise(ErrorCode::invalid_argument, "cannot build a batch from zero encodings");
    }
    batch.batch_size = encodings.size();
    batch.seq_len = encodings[0].length();
    for (const auto& e : encodings) {
        if (e.length() != batch.seq_len) {
            raise(ErrorCode::invalid_argument, "encodings in a batch must share one length");
        }
        batch.ids.insert(batch.ids.end(), e.ids.begin(), e.ids.end());
        batch.segments.insert(batch.segments.end(), e.segment_ids.begin(), e.segment_ids.end());
        batch.attention.insert(batch.attention.end(), e.attention_mask.begin(),
                               e.attention_mask.end());
        batch.specials.insert(batch.specials.end(), e.special_mask.begin(),
                              e.special_mask.end());
    }
    return batch;
}

EncoderForward encoder_forward(const Parameters& params, const Batch& batch, bool train_mode,
                               DropoutKey key) {
    validate_batch(params, batch);
    const auto& cfg = params.config;
    const std::size_t h = cfg.hidden_dim;
    const std::size_t nh = cfg.num_heads;
    const std::size_t dh = cfg.head_dim();
    const std::size_t B = batch.batch_size;
    const std::size_t L = batch.seq_len;
    const std::size_t n = B * L;
    const double rate = train_mode ? cfg.dropout_rate : 0.0;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    EncoderForward fwd;
    fwd.batch_size = B;
    fwd.seq_len = L;
    fwd.train_mode = train_mode;

    // Embedding sum, layer norm, dropout.
    Matrix embedded(n, h);
    for (std::size_t p = 0; p < n; ++p) {
        const double* tok = params.token_embedding.data() + batch.ids[p] * h;
        const double* pos = params.position_embedding.data() + (p % L) * h;
        const double* seg = params.segment_embedding.data() + batch.segments[p] * h;
        double* out = embedded.data() + p * h;
        for (std::size_t j = 0; j < h; ++j) out[j] = tok[j] + pos[j] + seg[j];
    }
    Matrix x;
    layer_norm(embedded, params.embed_ln_gain, params.embed_ln_bias, x, fwd.emb_ln);
    fwd.emb_drop = make_dropout_mask(rate, n * h, key, kSiteEmbeddings);
    apply_dropout(x, fwd.emb_drop);

    fwd.layers.resize(cfg.num_layers);
    for (std::size_t li = 0; li < cfg.num_layers; ++li) {
        const LayerParams& lp = params.layers[li];
        LayerCache& lc = fwd.layers[li];
        lc.input = x;

        affine(x, lp.q_w, lp.q_b, lc.q);
        affine(x, lp.k_w, lp.k_b, lc.k);
        affine(x, lp.v_w, lp.v_b, lc.v);

        lc.attn_probs = Matrix(B * nh * L, L);
        lc.context = Matrix(n, h);
        std::vector<double> scores(L);
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t hd = 0; hd < nh; ++hd) {
                const std::size_t col0 = hd * dh;
                for (std::size_t i = 0; i < L; ++i) {
                    const double* qi = lc.q.data() + batch.flat(b, i) * h + col0;
                    double max_score = -kInf;
                    for (std::size_t j = 0; j < L; ++j) {
                        if (!batch.attention[batch.flat(b, j)]) {
                            scores[j] = -kInf;
                            continue;
                        }
                        const double* kj = lc.k.data() + batch.flat(b, j) * h + col0;
                        double s = 0.0;
                        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
                        s *= scale;
                        scores[j] = s;
                        if (s > max_score) max_score = s;
                    }
                    double* probs = lc.attn_probs.data() + ((b * nh + hd) * L + i) * L;
                    double denom = 0.0;
                    for (std::size_t j = 0; j < L; ++j) {
                        const double e =
                            scores[j] == -kInf ? 0.0 : std::exp(scores[j] - max_score);
                        probs[j] = e;
                        denom += e;
                    }
                    for (std::size_t j = 0; j < L; ++j) probs[j] /= denom;
                }
            }
        }
        lc.attn_probs_drop =
            make_dropout_mask(rate, lc.attn_probs.size(), key, kSiteLayerBase + 3 * li);
        Matrix probs_dropped = lc.attn_probs;
        apply_dropout(probs_dropped, lc.attn_probs_drop);

        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t hd = 0; hd < nh; ++hd) {
                const std::size_t col0 = hd * dh;
                for (std::size_t i = 0; i < L; ++i) {
                    const double* probs = probs_dropped.data() + ((b * nh + hd) * L + i) * L;
                    double* ci = lc.context.data() + batch.flat(b, i) * h + col0;
                    for (std::size_t j = 0; j < L; ++j) {
                        const double p = probs[j];
                        if (p == 0.0) continue;
                        const double* vj = lc.v.data() + batch.flat(b, j) * h + col0;
                        for (std::size_t c = 0; c < dh; ++c) ci[c] += p * vj[c];
                    }
                }
            }
        }

        Matrix attn_out;
        affine(lc.context, lp.o_w, lp.o_b, attn_out);
        lc.attn_out_drop =
            make_dropout_mask(rate, attn_out.size(), key, kSiteLayerBase + 3 * li + 1);
        apply_dropout(attn_out, lc.attn_out_drop);

        Matrix residual1(n, h);
        for (std::size_t i = 0; i < n * h; ++i) residual1[i] = x[i] + attn_out[i];
        layer_norm(residual1, lp.attn_ln_gain, lp.attn_ln_bias, lc.y1, lc.ln1);

        affine(lc.y1, lp.ff1_w, lp.ff1_b, lc.ff1_pre);
        lc.ff1_act = lc.ff1_pre;
        for (std::size_t i = 0; i < lc.ff1_act.size(); ++i) {
            lc.ff1_act[i] = gelu(lc.ff1_pre[i]);
        }
        Matrix ffn_out;
        affine(lc.ff1_act, lp.ff2_w, lp.ff2_b, ffn_out);
        lc.ffn_drop = make_dropout_mask(rate, ffn_out.size(), key, kSiteLayerBase + 3 * li + 2);
        apply_dropout(ffn_out, lc.ffn_drop);

        Matrix residual2(n, h);
        for (std::size_t i = 0; i < n * h; ++i) residual2[i] = lc.y1[i] + ffn_out[i];
        layer_norm(residual2, lp.ff_ln_gain, lp.ff_ln_bias, x, lc.ln2);
    }

    fwd.hidden = x;

    // Pooled output: tanh projection of the [CLS] state.
    Matrix cls(B, h);
    for (std::size_t b = 0; b < B; ++b) {
        const double* src = fwd.hidden.data() + batch.flat(b, 0) * h;
        double* dst = cls.data() + b * h;
        for (std::size_t j = 0; j < h; ++j) dst[j] = src[j];
    }
    affine(cls, params.pooler_w, params.pooler_b, fwd.pooled);
    for (std::size_t i = 0; i < fwd.pooled.size(); ++i) {
        fwd.pooled[i] = std::tanh(fwd.pooled[i]);
    }
    return fwd;
}

void encoder_backward(const Parameters& params, const Batch& batch, const EncoderForward& fwd,
                      const Matrix& d_hidden, const Matrix& d_pooled, Gradients& grads) {
    const auto& cfg = params.config;
    const std::size_t h = cfg.hidden_dim;
    const std::size_t nh = cfg.num_heads;
    const std::size_t dh = cfg.head_dim();
    const std::size_t B = batch.batch_size;
    const std::size_t L = batch.seq_len;
    const std::size_t n = B * L;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix dx = d_hidden;
    if (dx.empty()) dx = Matrix(n, h);

    // Pooler.
    if (!d_pooled.empty()) {
        Matrix d_pre(B, h);
        for (std::size_t i = 0; i < d_pre.size(); ++i) {
            const double t = fwd.pooled[i];
            d_pre[i] = d_pooled[i] * (1.0 - t * t);
        }
        Matrix cls(B, h);
        for (std::size_t b = 0; b < B; ++b) {
            const double* src = fwd.hidden.data() + batch.flat(b, 0) * h;
            for (std::size_t j = 0; j < h; ++j) cls(b, j) = src[j];
        }
        matmul_at_add(cls, d_pre, grads.pooler_w);
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t j = 0; j < h; ++j) grads.pooler_b[j] += d_pre(b, j);
        }
        Matrix d_cls;
        matmul_bt(d_pre, params.pooler_w, d_cls);
        for (std::size_t b = 0; b < B; ++b) {
            double* dst = dx.data() + batch.flat(b, 0) * h;
            for (std::size_t j = 0; j < h; ++j) dst[j] += d_cls(b, j);
        }
    }

    for (std::size_t li = cfg.num_layers; li-- > 0;) {
        const LayerParams& lp = params.layers[li];
        const LayerCache& lc = fwd.layers[li];
        LayerParams& lg = grads.layers[li];

        // x_out = LN2(y1 + ffn_out)
        Matrix d_res2;
        layer_norm_backward(dx, lc.ln2, lp.ff_ln_gain, lg.ff_ln_gain, lg.ff_ln_bias, d_res2);

        Matrix d_ffn_out = d_res2;
        dropout_backward(d_ffn_out, lc.ffn_drop);

        // ffn_out = gelu(y1 W1 + b1) W2 + b2
        matmul_at_add(lc.ff1_act, d_ffn_out, lg.ff2_w);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < h; ++j) lg.ff2_b[j] += d_ffn_out(r, j);
        }
        Matrix d_act;
        matmul_bt(d_ffn_out, lp.ff2_w, d_act);
        for (std::size_t i = 0; i < d_act.size(); ++i) {
            d_act[i] *= gelu_grad(lc.ff1_pre[i]);
        }
        matmul_at_add(lc.y1, d_act, lg.ff1_w);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < cfg.ff_dim; ++j) lg.ff1_b[j] += d_act(r, j);
        }
        Matrix d_y1;
        matmul_bt(d_act, lp.ff1_w, d_y1);
        for (std::size_t i = 0; i < d_y1.size(); ++i) d_y1[i] += d_res2[i];

        // y1 = LN1(x + attn_out)
        Matrix d_res1;
        layer_norm_backward(d_y1, lc.ln1, lp.attn_ln_gain, lg.attn_ln_gain, lg.attn_ln_bias,
                            d_res1);

        Matrix d_attn_out = d_res1;
        dropout_backward(d_attn_out, lc.attn_out_drop);

        // attn_out = context o_w + o_b
        matmul_at_add(lc.context, d_attn_out, lg.o_w);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < h; ++j) lg.o_b[j] += d_attn_out(r, j);
        }
        Matrix d_context;
        matmul_bt(d_attn_out, lp.o_w, d_context);

        // Attention core.
        Matrix d_q(n, h), d_k(n, h), d_v(n, h);
        std::vector<double> d_probs(L), d_scores(L);
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t hd = 0; hd < nh; ++hd) {
                const std::size_t col0 = hd * dh;
                for (std::size_t i = 0; i < L; ++i) {
                    const std::size_t prow = (b * nh + hd) * L + i;
                    const double* probs = lc.attn_probs.data() + prow * L;
                    const double* dci = d_context.data() + batch.flat(b, i) * h + col0;

                    // d(dropped probs) then back through dropout.
                    for (std::size_t j = 0; j < L; ++j) {
                        const double* vj = lc.v.data() + batch.flat(b, j) * h + col0;
                        double acc = 0.0;
                        for (std::size_t c = 0; c < dh; ++c) acc += dci[c] * vj[c];
                        d_probs[j] = acc;
                    }
                    if (lc.attn_probs_drop.active()) {
                        const double inv_keep = 1.0 / (1.0 - lc.attn_probs_drop.rate);
                        for (std::size_t j = 0; j < L; ++j) {
                            d_probs[j] =
                                lc.attn_probs_drop.keep[prow * L + j] ? d_probs[j] * inv_keep : 0.0;
                        }
                    }
                    // dV accumulates the dropped probabilities actually used.
                    for (std::size_t j = 0; j < L; ++j) {
                        double p = probs[j];
                        if (lc.attn_probs_drop.active()) {
                            p = lc.attn_probs_drop.keep[prow * L + j]
                                    ? p / (1.0 - lc.attn_probs_drop.rate)
                                    : 0.0;
                        }
                        if (p == 0.0) continue;
                        double* dvj = d_v.data() + batch.flat(b, j) * h + col0;
                        for (std::size_t c = 0; c < dh; ++c) dvj[c] += p * dci[c];
                    }

                    // Softmax backward; masked columns have probs == 0.
                    double dot = 0.0;
                    for (std::size_t j = 0; j < L; ++j) dot += d_probs[j] * probs[j];
                    for (std::size_t j = 0; j < L; ++j) {
                        d_scores[j] = probs[j] * (d_probs[j] - dot);
                    }

                    const double* qi = lc.q.data() + batch.flat(b, i) * h + col0;
                    double* dqi = d_q.data() + batch.flat(b, i) * h + col0;
                    for (std::size_t j = 0; j < L; ++j) {
                        const double ds = d_scores[j] * scale;
                        if (ds == 0.0) continue;
                        const double* kj = lc.k.data() + batch.flat(b, j) * h + col0;
                        double* dkj = d_k.data() + batch.flat(b, j) * h + col0;
                        for (std::size_t c = 0; c < dh; ++c) {
                            dqi[c] += ds * kj[c];
                            dkj[c] += ds * qi[c];
                        }
                    }
                }
            }
        }

        // Projections back to the layer input.
        Matrix d_input(n, h);
        auto backprop_proj = [&](const Matrix& d_out, const Matrix& w, Matrix& gw, Matrix& gb) {
            matmul_at_add(lc.input, d_out, gw);
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t j = 0; j < h; ++j) gb[j] += d_out(r, j);
            }
            Matrix d_in;
            matmul_bt(d_out, w, d_in);
            for (std::size_t i = 0; i < d_input.size(); ++i) d_input[i] += d_in[i];
        };
        backprop_proj(d_q, lp.q_w, lg.q_w, lg.q_b);
        backprop_proj(d_k, lp.k_w, lg.k_w, lg.k_b);
        backprop_proj(d_v, lp.v_w, lg.v_w, lg.v_b);

        // Residual from the attention block.
        for (std::size_t i = 0; i < d_input.size(); ++i) d_input[i] += d_res1[i];
        dx = std::move(d_input);
    }

    // Embeddings.
    dropout_backward(dx, fwd.emb_drop);
    Matrix d_embedded;
    layer_norm_backward(dx, fwd.emb_ln, params.embed_ln_gain, grads.embed_ln_gain,
                        grads.embed_ln_bias, d_embedded);
    for (std::size_t p = 0; p < n; ++p) {
        const double* src = d_embedded.data() + p * h;
        double* tok = grads.token_embedding.data() + batch.ids[p] * h;
        double* pos = grads.position_embedding.data() + (p % L) * h;
        double* seg = grads.segment_embedding.data() + batch.segments[p] * h;
        for (std::size_t j = 0; j < h; ++j) {
            tok[j] += src[j];
            pos[j] += src[j];
            seg[j] += src[j];
        }
    }
}

double softmax_cross_entropy(const Matrix& logits, std::span<const uint32_t> targets,
                             Matrix* d_logits) {
    const std::size_t rows = logits.rows(), k = logits.cols();
    if (rows == 0 || targets.size() != rows) {
        raise(ErrorCode::invalid_argument, "softmax_cross_entropy: bad target length");
    }
    if (d_logits != nullptr) *d_logits = Matrix(rows, k);
    double total = 0.0;
    const double inv_rows = 1.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* zr = logits.data() + r * k;
        if (targets[r] >= k) {
            raise(ErrorCode::invalid_argument, "softmax_cross_entropy: target out of range");
        }
        double max_z = zr[0];
        for (std::size_t j = 1; j < k; ++j) max_z = std::max(max_z, zr[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(zr[j] - max_z);
        const double lse = max_z + std::log(denom);
        total += lse - zr[targets[r]];
        if (d_logits != nullptr) {
            double* dr = d_logits->data() + r * k;
            for (std::size_t j = 0; j < k; ++j) {
                const double p = std::exp(zr[j] - lse);
                dr[j] = (p - (j == targets[r] ? 1.0 : 0.0)) * inv_rows;
            }
        }
    }
    return total * inv_rows;
}

namespace {

// Gathered cross-entropy head shared by MLM and token classification:
// logits = gather(hidden, positions) W + b.
double gathered_head_loss(const Matrix& hidden, const Matrix& w, const Matrix& b,
                          std::span<const std::size_t> positions,
                          std::span<const uint32_t> targets, Matrix* gw, Matrix* gb,
                          Matrix* d_hidden) {
    const std::size_t h = hidden.cols();
    Matrix gathered(positions.size(), h);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const double* src = hidden.data() + positions[i] * h;
        double* dst = gathered.data() + i * h;
        for (std::size_t j = 0; j < h; ++j) dst[j] = src[j];
    }
    Matrix logits;
    affine(gathered, w, b, logits);
    Matrix d_logits;
    const bool want_grads = gw != nullptr || d_hidden != nullptr;
    const double loss =
        softmax_cross_entropy(logits, targets, want_grads ? &d_logits : nullptr);
    if (gw != nullptr) {
        matmul_at_add(gathered, d_logits, *gw);
        for (std::size_t r = 0; r < d_logits.rows(); ++r) {
            for (std::size_t j = 0; j < d_logits.cols(); ++j) (*gb)[j] += d_logits(r, j);
        }
    }
    if (d_hidden != nullptr) {
        Matrix d_gathered;
        matmul_bt(d_logits, w, d_gathered);
        for (std::size_t i = 0; i < positions.size(); ++i) {
            double* dst = d_hidden->data() + positions[i] * h;
            const double* src = d_gathered.data() + i * h;
            for (std::size_t j = 0; j < h; ++j) dst[j] += src[j];
        }
    }
    return loss;
}

}  // namespace

double mlm_loss(const Parameters& params, const EncoderForward& fwd,
                std::span<const std::size_t> masked_positions,
                std::span<const uint32_t> target_ids, Gradients* grads, Matrix* d_hidden) {
    if (masked_positions.empty()) {
        raise(ErrorCode::invalid_argument, "mlm_loss requires at least one masked position");
    }
    if (masked_positions.size() != target_ids.size()) {
        raise(ErrorCode::invalid_argument, "masked_positions/target_ids length mismatch");
    }
    const std::size_t flat = fwd.batch_size * fwd.seq_len;
    for (std::size_t p : masked_positions) {
        if (p >= flat) {
            raise(ErrorCode::invalid_argument, "masked position out of range");
        }
    }
    for (uint32_t t : target_ids) {
        if (t >= params.config.vocab_size) {
            raise(ErrorCode::invalid_argument, "mlm target id out of range");
        }
    }
    return gathered_head_loss(fwd.hidden, params.mlm_w, params.mlm_b, masked_positions,
                              target_ids, grads != nullptr ? &grads->mlm_w : nullptr,
                              grads != nullptr ? &grads->mlm_b : nullptr, d_hidden);
}

double nsp_loss(const Parameters& params, const EncoderForward& fwd,
                std::span<const uint8_t> is_next, Gradients* grads, Matrix* d_pooled) {
    if (is_next.size() != fwd.batch_size) {
        raise(ErrorCode::invalid_argument, "nsp labels must match the batch size");
    }
    Matrix logits;
    affine(fwd.pooled, params.nsp_w, params.nsp_b, logits);
    std::vector<uint32_t> targets(is_next.size());
    for (std::size_t i = 0; i < is_next.size(); ++i) targets[i] = is_next[i] ? 1 : 0;
    Matrix d_logits;
    const bool want_grads = grads != nullptr || d_pooled != nullptr;
    const double loss = softmax_cross_entropy(logits, targets, want_grads ? &d_logits : nullptr);
    if (grads != nullptr) {
        matmul_at_add(fwd.pooled, d_logits, grads->nsp_w);
        for (std::size_t r = 0; r < d_logits.rows(); ++r) {
            for (std::size_t j = 0; j < 2; ++j) grads->nsp_b[j] += d_logits(r, j);
        }
    }
    if (d_pooled != nullptr) {
        Matrix d_p;
        matmul_bt(d_logits, params.nsp_w, d_p);
        if (d_pooled->empty()) *d_pooled = Matrix(fwd.batch_size, params.config.hidden_dim);
        for (std::size_t i = 0; i < d_p.size(); ++i) (*d_pooled)[i] += d_p[i];
    }
    return loss;
}

double token_classification_loss(const Parameters& params, const EncoderForward& fwd,
                                 std::span<const uint32_t> gold_labels,
                                 std::span<const uint8_t> label_mask, Gradients* grads,
                                 Matrix* d_hidden) {
    const std::size_t flat = fwd.batch_size * fwd.seq_len;
    if (gold_labels.size() != flat || label_mask.size() != flat) {
        raise(ErrorCode::invalid_argument,
              "token_classification_loss requires per-position labels and mask");
    }
    std::vector<std::size_t> positions;
    std::vector<uint32_t> targets;
    for (std::size_t p = 0; p < flat; ++p) {
        if (!label_mask[p]) continue;
        if (gold_labels[p] >= params.config.num_labels) {
            raise(ErrorCode::invalid_argument, "gold label out of range");
        }
        positions.push_back(p);
        targets.push_back(gold_labels[p]);
    }
    if (positions.empty()) {
        raise(ErrorCode::invalid_argument, "all positions are masked out of the loss");
    }
    return gathered_head_loss(fwd.hidden, params.token_cls_w, params.token_cls_b, positions,
                              targets, grads != nullptr ? &grads->token_cls_w : nullptr,
                              grads != nullptr ? &grads->token_cls_b : nullptr, d_hidden);
}

Matrix nsp_logits(const Parameters& params, const EncoderForward& fwd) {
    Matrix logits;
    affine(fwd.pooled, params.nsp_w, params.nsp_b, logits);
    return logits;
}

Matrix token_classification_logits(const Parameters& params, const EncoderForward& fwd) {
    Matrix logits;
    affine(fwd.hidden, params.token_cls_w, params.token_cls_b, logits);
    return logits;
}

Matrix mean_pool(const EncoderForward& fwd, const Batch& batch) {
    const std::size_t h = fwd.hidden.cols();
    Matrix pooled(batch.batch_size, h);
    for (std::size_t b = 0; b < batch.batch_size; ++b) {
        double count = 0.0;
        double* out = pooled.data() + b * h;
        for (std::size_t l = 0; l < batch.seq_len; ++l) {
            if (!batch.attention[batch.flat(b, l)]) continue;
            count += 1.0;
            const double* src = fwd.hidden.data() + batch.flat(b, l) * h;
            for (std::size_t j = 0; j < h; ++j) out[j] += src[j];
        }
        if (count == 0.0) {
            raise(ErrorCode::invalid_argument,
                  "mean_pool: sequence " + std::to_string(b) + " has no attended positions");
        }
        for (std::size_t j = 0; j < h; ++j) out[j] /= count;
    }
    return pooled;
}

void mean_pool_backward(const Matrix& d_pooled_mean, const Batch& batch, Matrix& d_hidden) {
    const std::size_t h = d_pooled_mean.cols();
    for (std::size_t b = 0; b < batch.batch_size; ++b) {
        double count = 0.0;
        for (std::size_t l = 0; l < batch.seq_len; ++l) {
            if (batch.attention[batch.flat(b, l)]) count += 1.0;
        }
        const double* src = d_pooled_mean.data() + b * h;
        for (std::size_t l = 0; l < batch.seq_len; ++l) {
            if (!batch.attention[batch.flat(b, l)]) continue;
            double* dst = d_hidden.data() + batch.flat(b, l) * h;
            for (std::size_t j = 0; j < h; ++j) dst[j] += src[j] / count;
        }
    }
}

}  // namespace astrolm
