#include "astrolm/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "astrolm/adam.hpp"
#include "astrolm/encoder.hpp"
#include "astrolm/error.hpp"
#include "astrolm/rng.hpp"

namespace astrolm {

std::vector<NspPair> make_nsp_pairs(const Corpus& corpus, uint64_t seed) {
    std::size_t docs_with_adjacency = 0;
    for (const auto& doc : corpus.documents) {
        if (doc.paragraphs.size() >= 2) ++docs_with_adjacency;
    }
    if (docs_with_adjacency < 2) {
        raise(ErrorCode::invalid_argument,
              "make_nsp_pairs needs at least 2 documents with at least 2 paragraphs each");
    }

    // Flat list of (doc, paragraph) for negative sampling.
    std::vector<std::pair<std::size_t, std::size_t>> all_paragraphs;
    for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
        for (std::size_t p = 0; p < corpus.documents[d].paragraphs.size(); ++p) {
            all_paragraphs.emplace_back(d, p);
        }
    }

    std::vector<NspPair> pairs;
    Rng rng(mix_seed(seed, 0x6e7370ULL));  // "nsp"
    for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
        const auto& doc = corpus.documents[d];
        for (std::size_t p = 0; p + 1 < doc.paragraphs.size(); ++p) {
            NspPair pair;
            pair.segment_a = doc.paragraphs[p];
            if (rng.next_bool(0.5)) {
                pair.segment_b = doc.paragraphs[p + 1];
                pair.is_next = true;
            } else {
                // Uniform over paragraphs of other documents.
                std::size_t pick;
                do {
                    pick = rng.next_below(all_paragraphs.size());
                } while (all_paragraphs[pick].first == d);
                const auto [nd, np] = all_paragraphs[pick];
                pair.segment_b = corpus.documents[nd].paragraphs[np];
                pair.is_next = false;
            }
            pairs.push_back(std::move(pair));
        }
    }
    return pairs;
}

PretrainExample apply_masking(const Encoding& encoding, const Vocabulary& vocab, uint64_t seed,
                              const MaskingOptions& options) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < encoding.length(); ++i) {
        if (encoding.attention_mask[i] && !encoding.special_mask[i]) {
            eligible.push_back(i);
        }
    }
    if (eligible.empty()) {
        raise(ErrorCode::invalid_argument, "apply_masking: no eligible positions");
    }

    PretrainExample example;
    example.encoding = encoding;
    Rng rng(mix_seed(seed, 0x6d61736bULL));  // "mask"

    std::vector<std::size_t> selected;
    for (std::size_t pos : eligible) {
        if (rng.next_bool(options.select_prob)) selected.push_back(pos);
    }
    if (selected.empty()) {
        selected.push_back(eligible.front());
    }

    const uint32_t regular_tokens =
        static_cast<uint32_t>(vocab.size()) - static_cast<uint32_t>(kNumSpecials);
    for (std::size_t pos : selected) {
        example.masked_positions.push_back(pos);
        example.original_ids.push_back(encoding.ids[pos]);
        const double u = rng.next_double();
        if (u < options.mask_token_frac) {
            example.encoding.ids[pos] = kMaskId;
            example.encoding.tokens[pos] = std::string(kSpecialTokens[kMaskId]);
        } else if (u < options.mask_token_frac + options.random_token_frac &&
                   regular_tokens > 0) {
            const uint32_t id =
                static_cast<uint32_t>(kNumSpecials + rng.next_below(regular_tokens));
            example.encoding.ids[pos] = id;
            example.encoding.tokens[pos] = vocab.token(id);
        }
        // else: left unchanged, but still predicted
    }
    return example;
}

std::string TrainLog::to_csv() const {
    std::string out = "step,mlm_loss,nsp_loss,lr\n";
    char buf[128];
    for (const auto& e : steps) {
        std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g\n",
                      static_cast<unsigned long long>(e.step), e.mlm_loss, e.nsp_loss, e.lr);
        out += buf;
    }
    return out;
}

PretrainResult pretrain(const Corpus& corpus, const Vocabulary& vocab,
                        const ModelConfig& config, const PretrainHyper& hyper) {
    config.validate();
    if (config.vocab_size != vocab.size()) {
        raise(ErrorCode::invalid_argument, "config.vocab_size does not match the vocabulary");
    }
    if (hyper.batch_size == 0) {
        raise(ErrorCode::invalid_argument, "batch_size must be >= 1");
    }
    if (corpus.documents.empty()) {
        raise(ErrorCode::invalid_argument, "cannot pretrain on an empty corpus");
    }

    PretrainResult result;
    result.params = Parameters::init(config);
    if (hyper.epochs == 0) return result;

    const auto pairs = make_nsp_pairs(corpus, hyper.seed);
    std::vector<PretrainExample> examples;
    examples.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        Encoding enc = encode_pair(pairs[i].segment_a, pairs[i].segment_b, vocab, hyper.max_len);
        PretrainExample ex = apply_masking(enc, vocab, mix_seed(hyper.seed, 0x6578ULL, i));
        ex.is_next = pairs[i].is_next;
        examples.push_back(std::move(ex));
    }

    const std::size_t steps_per_epoch =
        (examples.size() + hyper.batch_size - 1) / hyper.batch_size;
    AdamConfig adam_cfg;
    adam_cfg.lr = hyper.lr;
    adam_cfg.warmup_steps = hyper.warmup_steps;
    adam_cfg.total_steps = steps_per_epoch * hyper.epochs;
    AdamOptimizer optimizer(config, adam_cfg);

    std::vector<std::size_t> order(examples.size());
    uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        result.log.epoch_starts.push_back(step + 1);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(mix_seed(hyper.seed, 0x73687566ULL, epoch));  // "shuf"
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
        }

        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
            const std::size_t count = std::min(hyper.batch_size, order.size() - start);
            std::vector<Encoding> encodings;
            std::vector<uint8_t> is_next;
            std::vector<std::size_t> masked_positions;
            std::vector<uint32_t> targets;
            encodings.reserve(count);
            for (std::size_t bi = 0; bi < count; ++bi) {
                const PretrainExample& ex = examples[order[start + bi]];
                encodings.push_back(ex.encoding);
                is_next.push_back(ex.is_next ? 1 : 0);
                for (std::size_t mi = 0; mi < ex.masked_positions.size(); ++mi) {
                    masked_positions.push_back(bi * hyper.max_len + ex.masked_positions[mi]);
                    targets.push_back(ex.original_ids[mi]);
                }
            }
            const Batch batch = Batch::from_encodings(encodings);

            ++step;
            EncoderForward fwd = encoder_forward(result.params, batch, true,
                                                 DropoutKey{hyper.seed, step});
            Gradients grads = Parameters::zeros(config);
            Matrix d_hidden(batch.flat_size(), config.hidden_dim);
            Matrix d_pooled(batch.batch_size, config.hidden_dim);
            const double mlm =
                mlm_loss(result.params, fwd, masked_positions, targets, &grads, &d_hidden);
            const double nsp = nsp_loss(result.params, fwd, is_next, &grads, &d_pooled);
            if (!std::isfinite(mlm) || !std::isfinite(nsp)) {
                raise(ErrorCode::numeric,
                      "pretraining diverged at step " + std::to_string(step));
            }
            encoder_backward(result.params, batch, fwd, d_hidden, d_pooled, grads);
            const double lr = optimizer.step(result.params, grads);
            result.log.steps.push_back({step, mlm, nsp, lr});
        }
    }
    return result;
}

}  // namespace astrolm
