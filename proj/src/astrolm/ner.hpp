#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "astrolm/conll.hpp"
#include "astrolm/metrics.hpp"
#include "astrolm/parameters.hpp"
#include "astrolm/rng.hpp"
#include "astrolm/tagset.hpp"
#include "astrolm/tokenizer.hpp"

namespace astrolm {

// Word-level encoding for token classification: each word's label sits on
// its first subword; the remaining subwords are masked out of the loss.
struct AlignedEncoding {
    Encoding encoding;
    std::vector<std::size_t> word_positions;  // first-subword index per included word
    std::size_t included_words = 0;           // prefix of the word list that fit
};

AlignedEncoding encode_words(std::span<const std::string> words, const Vocabulary& vocab,
                             std::size_t max_len);

// Rewrites orphan I-t to B-t so every prediction is valid IOB2.
std::vector<std::string> repair_iob2(std::vector<std::string> labels, const TagSet& tagset);

struct FinetuneHyper {
    double lr = 5e-4;
    std::size_t batch_size = 16;
    std::size_t epochs = 10;
    uint64_t warmup_steps = 0;
    uint64_t seed = 42;
    std::size_t max_len = 64;
};

// Either a finetuned encoder with its classification head, or the
// frequency-based random baseline. Both predict through the same interface.
class Tagger {
public:
    static Tagger from_model(Parameters params, Vocabulary vocab, TagSet tagset,
                             std::size_t max_len);
    static Tagger random_baseline(TagSet tagset, std::vector<double> label_frequencies,
                                  uint64_t seed);

    std::vector<std::string> predict(std::span<const std::string> tokens) const;
    // Dataset-level prediction; for the random baseline the sampling stream
    // runs over all tokens in order, deterministic per (seed, position).
    std::vector<std::vector<std::string>> predict_all(
        std::span<const LabeledSequence> sequences) const;

    void save(const std::string& path) const;
    static Tagger load(const std::string& path);

    const TagSet& tagset() const { return tagset_; }
    bool is_random() const { return random_; }
    const Parameters& params() const { return params_; }

private:
    Tagger() = default;

    bool random_ = false;
    TagSet tagset_;
    // model mode
    Parameters params_;
    Vocabulary vocab_;
    std::size_t max_len_ = 64;
    // random mode
    std::vector<double> frequencies_;
    uint64_t seed_ = 0;

    std::vector<std::string> predict_model(std::span<const std::string> tokens) const;
    std::vector<std::string> sample_labels(std::size_t count, Rng& rng) const;
};

// Trains encoder plus classification head on IOB2 data. Training order is
// derived from the seed alone (examples are canonicalized first), so
// shuffling the input file does not change the result.
Tagger finetune(const Parameters& checkpoint, std::span<const LabeledSequence> train,
                const TagSet& tagset, const Vocabulary& vocab, const FinetuneHyper& hyper);

// Gold label distribution over the tag set (sums to 1).
std::vector<double> label_frequencies(std::span<const LabeledSequence> sequences,
                                      const TagSet& tagset);

struct NerEvaluation {
    ConfusionMatrix confusion;
    MetricsReport metrics;
    SpanMetrics span;
    std::vector<PerLabelEntry> per_label;
};

NerEvaluation evaluate_predictions(std::span<const LabeledSequence> gold,
                                   std::span<const std::vector<std::string>> predictions,
                                   const TagSet& tagset);
NerEvaluation evaluate_tagger(const Tagger& tagger, std::span<const LabeledSequence> gold);

nlohmann::ordered_json evaluation_to_json(const NerEvaluation& eval, const TagSet& tagset,
                                          const std::string& model_name,
                                          const std::string& split);

}  // namespace astrolm
