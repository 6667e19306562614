#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "astrolm/corpus.hpp"
#include "astrolm/parameters.hpp"
#include "astrolm/tokenizer.hpp"

namespace astrolm {

struct NspPair {
    std::string segment_a;
    std::string segment_b;
    bool is_next = false;
};

// For each adjacent paragraph pair: a fair coin picks the true successor or
// a uniformly random paragraph from a different document. Deterministic per
// seed; negatives never come from segment_a's own document.
std::vector<NspPair> make_nsp_pairs(const Corpus& corpus, uint64_t seed);

struct MaskingOptions {
    double select_prob = 0.15;       // per eligible position
    double mask_token_frac = 0.8;    // of selected: replace with [MASK]
    double random_token_frac = 0.1;  // of selected: replace with a random token
};

struct PretrainExample {
    Encoding encoding;  // ids after masking
    bool is_next = false;
    std::vector<std::size_t> masked_positions;
    std::vector<uint32_t> original_ids;  // what the masked positions held
};

// 15% / 80-10-10 by default. If sampling selects nothing, the first eligible
// position is forced so every example carries an MLM signal.
PretrainExample apply_masking(const Encoding& encoding, const Vocabulary& vocab, uint64_t seed,
                              const MaskingOptions& options = {});

struct PretrainHyper {
    double lr = 1e-3;
    std::size_t batch_size = 8;
    std::size_t epochs = 1;
    uint64_t warmup_steps = 0;
    uint64_t seed = 42;
    std::size_t max_len = 64;
    MaskingOptions masking;
};

struct TrainLogEntry {
    uint64_t step = 0;
    double mlm_loss = 0.0;
    double nsp_loss = 0.0;
    double lr = 0.0;
};

struct TrainLog {
    std::vector<TrainLogEntry> steps;
    std::vector<uint64_t> epoch_starts;  // first step number of each epoch

    std::string to_csv() const;  // step,mlm_loss,nsp_loss,lr
};

struct PretrainResult {
    Parameters params;
    TrainLog log;
};

// Adam with linear warmup then linear decay; total loss = MLM + NSP.
// Bitwise reproducible per seed. Divergence (non-finite loss) aborts with
// the offending step number.
PretrainResult pretrain(const Corpus& corpus, const Vocabulary& vocab,
                        const ModelConfig& config, const PretrainHyper& hyper);

}  // namespace astrolm
