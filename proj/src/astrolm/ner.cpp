#include "astrolm/ner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "astrolm/adam.hpp"
#include "astrolm/checkpoint.hpp"
#include "astrolm/encoder.hpp"
#include "astrolm/error.hpp"

namespace astrolm {

AlignedEncoding encode_words(std::span<const std::string> words, const Vocabulary& vocab,
                             std::size_t max_len) {
    if (max_len < 2) {
        raise(ErrorCode::invalid_argument, "encode_words requires max_len >= 2");
    }
    AlignedEncoding out;
    std::vector<std::vector<std::string>> per_word;
    per_word.reserve(words.size());
    for (const auto& w : words) per_word.push_back(wordpiece_pieces(w, vocab));

    std::vector<std::string> pieces;
    for (const auto& wp : per_word) {
        if (1 + pieces.size() + wp.size() > max_len - 1) break;  // whole-word truncation
        out.word_positions.push_back(1 + pieces.size());         // after [CLS]
        pieces.insert(pieces.end(), wp.begin(), wp.end());
        ++out.included_words;
    }

    Encoding& enc = out.encoding;
    auto push = [&](uint32_t id, const std::string& tok, uint8_t attended, uint8_t special) {
        enc.ids.push_back(id);
        enc.segment_ids.push_back(0);
        enc.attention_mask.push_back(attended);
        enc.special_mask.push_back(special);
        enc.tokens.push_back(tok);
    };
    push(kClsId, std::string(kSpecialTokens[kClsId]), 1, 1);
    for (const auto& p : pieces) push(*vocab.id_of(p), p, 1, 0);
    push(kSepId, std::string(kSpecialTokens[kSepId]), 1, 1);
    while (enc.ids.size() < max_len) push(kPadId, std::string(kSpecialTokens[kPadId]), 0, 1);
    return out;
}

std::vector<std::string> repair_iob2(std::vector<std::string> labels, const TagSet& tagset) {
    std::string_view prev_type;
    for (auto& label : labels) {
        const auto id = tagset.label_id(label);
        if (!id) {
            raise(ErrorCode::invalid_argument, "label \"" + label + "\" not in the tag set");
        }
        if (tagset.is_inside(*id)) {
            const std::string_view type = std::string_view(label).substr(2);
            if (prev_type != type) {
                label = "B-" + std::string(type);
            }
            prev_type = type;
        } else if (tagset.is_begin(*id)) {
            prev_type = std::string_view(label).substr(2);
        } else {
            prev_type = {};
        }
    }
    return labels;
}

// ---------------------------------------------------------------------------
// Tagger
// ---------------------------------------------------------------------------

Tagger Tagger::from_model(Parameters params, Vocabulary vocab, TagSet tagset,
                          std::size_t max_len) {
    if (params.config.num_labels != tagset.num_labels()) {
        raise(ErrorCode::invalid_argument, "model head size does not match the tag set");
    }
    Tagger t;
    t.random_ = false;
    t.params_ = std::move(params);
    t.vocab_ = std::move(vocab);
    t.tagset_ = std::move(tagset);
    t.max_len_ = max_len;
    return t;
}

Tagger Tagger::random_baseline(TagSet tagset, std::vector<double> label_frequencies,
                               uint64_t seed) {
    if (label_frequencies.size() != tagset.num_labels()) {
        raise(ErrorCode::invalid_argument,
              "frequency vector size does not match the label count");
    }
    double sum = 0.0;
    for (double f : label_frequencies) {
        if (f < 0.0) {
            raise(ErrorCode::invalid_argument, "label frequencies must be nonnegative");
        }
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        raise(ErrorCode::invalid_argument, "label frequencies must sum to 1");
    }
    Tagger t;
    t.random_ = true;
    t.tagset_ = std::move(tagset);
    t.frequencies_ = std::move(label_frequencies);
    t.seed_ = seed;
    return t;
}

std::vector<std::string> Tagger::sample_labels(std::size_t count, Rng& rng) const {
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double u = rng.next_double();
        double acc = 0.0;
        uint32_t pick = static_cast<uint32_t>(tagset_.num_labels()) - 1;
        for (std::size_t k = 0; k < frequencies_.size(); ++k) {
            acc += frequencies_[k];
            if (u < acc) {
                pick = static_cast<uint32_t>(k);
                break;
            }
        }
        out.push_back(tagset_.label(pick));
    }
    return out;
}

std::vector<std::string> Tagger::predict_model(std::span<const std::string> tokens) const {
    const AlignedEncoding aligned = encode_words(tokens, vocab_, max_len_);
    const Batch batch = Batch::from_encodings(std::span(&aligned.encoding, 1));
    const EncoderForward fwd = encoder_forward(params_, batch, false);
    const Matrix logits = token_classification_logits(params_, fwd);
    std::vector<std::string> labels(tokens.size(), "O");
    for (std::size_t w = 0; w < aligned.included_words; ++w) {
        const double* row = logits.data() + aligned.word_positions[w] * logits.cols();
        uint32_t best = 0;
        for (std::size_t k = 1; k < logits.cols(); ++k) {
            if (row[k] > row[best]) best = static_cast<uint32_t>(k);
        }
        labels[w] = tagset_.label(best);
    }
    return repair_iob2(std::move(labels), tagset_);
}

std::vector<std::string> Tagger::predict(std::span<const std::string> tokens) const {
    if (tokens.empty()) {
        raise(ErrorCode::invalid_argument, "predict requires at least one token");
    }
    if (random_) {
        Rng rng(mix_seed(seed_, 0x72616e64ULL));  // "rand"
        return repair_iob2(sample_labels(tokens.size(), rng), tagset_);
    }
    return predict_model(tokens);
}

std::vector<std::vector<std::string>> Tagger::predict_all(
    std::span<const LabeledSequence> sequences) const {
    std::vector<std::vector<std::string>> out;
    out.reserve(sequences.size());
    if (random_) {
        Rng rng(mix_seed(seed_, 0x72616e64ULL));
        for (const auto& seq : sequences) {
            out.push_back(repair_iob2(sample_labels(seq.tokens.size(), rng), tagset_));
        }
    } else {
        for (const auto& seq : sequences) {
            out.push_back(predict_model(seq.tokens));
        }
    }
    return out;
}

void Tagger::save(const std::string& path) const {
    Checkpoint ckpt;
    nlohmann::ordered_json extras;
    extras["kind"] = "tagger";
    extras["tagset"] = tagset_.types();
    if (random_) {
        extras["random_baseline"] = true;
        extras["frequencies"] = frequencies_;
        extras["seed"] = seed_;
        // A tensor table is still required; store an empty 1-label model.
        ModelConfig cfg;
        cfg.vocab_size = kNumSpecials;
        cfg.num_labels = static_cast<uint32_t>(tagset_.num_labels());
        ckpt.params = Parameters::zeros(cfg);
    } else {
        extras["random_baseline"] = false;
        extras["vocab"] = vocab_.tokens();
        extras["lowercase"] = vocab_.lowercase();
        extras["max_len"] = max_len_;
        ckpt.params = params_;
    }
    ckpt.extras = std::move(extras);
    save_checkpoint(ckpt, path);
}

Tagger Tagger::load(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    const auto& extras = ckpt.extras;
    if (extras.value("kind", std::string()) != "tagger") {
        raise(ErrorCode::parse, path + ": not a tagger checkpoint");
    }
    TagSet tagset = TagSet::from_types(extras.at("tagset").get<std::vector<std::string>>());
    if (extras.value("random_baseline", false)) {
        return random_baseline(std::move(tagset),
                               extras.at("frequencies").get<std::vector<double>>(),
                               extras.at("seed").get<uint64_t>());
    }
    Vocabulary vocab(extras.at("vocab").get<std::vector<std::string>>(),
                     extras.value("lowercase", false));
    return from_model(std::move(ckpt.params), std::move(vocab), std::move(tagset),
                      extras.at("max_len").get<std::size_t>());
}

// ---------------------------------------------------------------------------
// Finetuning
// ---------------------------------------------------------------------------

namespace {

struct TrainExample {
    Encoding encoding;
    std::vector<uint32_t> gold;       // per flat position
    std::vector<uint8_t> label_mask;  // first subwords of included words
};

std::string canonical_key(const LabeledSequence& seq) {
    std::string key;
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        key += seq.tokens[i];
        key += '\x1f';
        key += seq.labels[i];
        key += '\x1e';
    }
    key += section_tag_name(seq.section);
    return key;
}

}  // namespace

Tagger finetune(const Parameters& checkpoint, std::span<const LabeledSequence> train,
                const TagSet& tagset, const Vocabulary& vocab, const FinetuneHyper& hyper) {
    if (train.empty()) {
        raise(ErrorCode::invalid_argument, "finetune requires training sequences");
    }
    if (checkpoint.config.vocab_size != vocab.size()) {
        raise(ErrorCode::invalid_argument, "checkpoint vocab_size does not match the vocabulary");
    }
    if (hyper.batch_size == 0) {
        raise(ErrorCode::invalid_argument, "batch_size must be >= 1");
    }

    // Re-head the checkpoint when the label count differs: shared tensors are
    // copied, the classification head is freshly initialized.
    ModelConfig config = checkpoint.config;
    config.num_labels = static_cast<uint32_t>(tagset.num_labels());
    Parameters params = Parameters::init(config);
    {
        std::vector<std::pair<std::string, const Matrix*>> source;
        checkpoint.for_each_tensor([&](const std::string& name, const Matrix& m) {
            source.emplace_back(name, &m);
        });
        std::size_t i = 0;
        params.for_each_tensor([&](const std::string& name, Matrix& m) {
            if (source[i].first != name) {
                raise(ErrorCode::state, "tensor order mismatch while re-heading");
            }
            if (m.same_shape(*source[i].second)) {
                m = *source[i].second;
            }
            ++i;
        });
    }

    // Examples, in input order.
    std::vector<TrainExample> examples;
    examples.reserve(train.size());
    for (const auto& seq : train) {
        if (seq.tokens.empty()) continue;
        AlignedEncoding aligned = encode_words(seq.tokens, vocab, hyper.max_len);
        TrainExample ex;
        ex.gold.assign(hyper.max_len, 0);
        ex.label_mask.assign(hyper.max_len, 0);
        for (std::size_t w = 0; w < aligned.included_words; ++w) {
            const auto id = tagset.label_id(seq.labels[w]);
            if (!id) {
                raise(ErrorCode::invalid_argument,
                      "label \"" + seq.labels[w] + "\" not in the tag set");
            }
            ex.gold[aligned.word_positions[w]] = *id;
            ex.label_mask[aligned.word_positions[w]] = 1;
        }
        ex.encoding = std::move(aligned.encoding);
        examples.push_back(std::move(ex));
    }
    if (examples.empty()) {
        raise(ErrorCode::invalid_argument, "no usable training sequences");
    }

    // Canonical order, so the seeded shuffle is independent of input order.
    std::vector<std::size_t> canon(train.size());
    std::iota(canon.begin(), canon.end(), 0);
    {
        std::vector<std::string> keys;
        keys.reserve(train.size());
        for (const auto& seq : train) keys.push_back(canonical_key(seq));
        std::stable_sort(canon.begin(), canon.end(),
                         [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    }

    const std::size_t steps_per_epoch =
        (examples.size() + hyper.batch_size - 1) / hyper.batch_size;
    AdamConfig adam_cfg;
    adam_cfg.lr = hyper.lr;
    adam_cfg.warmup_steps = hyper.warmup_steps;
    adam_cfg.total_steps = steps_per_epoch * hyper.epochs;
    AdamOptimizer optimizer(config, adam_cfg);

    uint64_t step = 0;
    std::vector<std::size_t> order = canon;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        order = canon;
        Rng shuffle_rng(mix_seed(hyper.seed, 0x736875ULL, epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
        }
        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
            const std::size_t count = std::min(hyper.batch_size, order.size() - start);
            std::vector<Encoding> encodings;
            std::vector<uint32_t> gold;
            std::vector<uint8_t> mask;
            for (std::size_t bi = 0; bi < count; ++bi) {
                const TrainExample& ex = examples[order[start + bi]];
                encodings.push_back(ex.encoding);
                gold.insert(gold.end(), ex.gold.begin(), ex.gold.end());
                mask.insert(mask.end(), ex.label_mask.begin(), ex.label_mask.end());
            }
            const Batch batch = Batch::from_encodings(encodings);
            ++step;
            EncoderForward fwd =
                encoder_forward(params, batch, true, DropoutKey{hyper.seed, step});
            Gradients grads = Parameters::zeros(config);
            Matrix d_hidden(batch.flat_size(), config.hidden_dim);
            const double loss =
                token_classification_loss(params, fwd, gold, mask, &grads, &d_hidden);
            if (!std::isfinite(loss)) {
                raise(ErrorCode::numeric, "finetuning diverged at step " + std::to_string(step));
            }
            encoder_backward(params, batch, fwd, d_hidden, Matrix(), grads);
            optimizer.step(params, grads);
        }
    }

    return Tagger::from_model(std::move(params), vocab, tagset, hyper.max_len);
}

std::vector<double> label_frequencies(std::span<const LabeledSequence> sequences,
                                      const TagSet& tagset) {
    std::vector<uint64_t> counts(tagset.num_labels(), 0);
    uint64_t total = 0;
    for (const auto& seq : sequences) {
        for (const auto& label : seq.labels) {
            const auto id = tagset.label_id(label);
            if (!id) {
                raise(ErrorCode::invalid_argument,
                      "label \"" + label + "\" not in the tag set");
            }
            ++counts[*id];
            ++total;
        }
    }
    if (total == 0) {
        raise(ErrorCode::invalid_argument, "no labels to count");
    }
    std::vector<double> freqs(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        freqs[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    }
    return freqs;
}

NerEvaluation evaluate_predictions(std::span<const LabeledSequence> gold,
                                   std::span<const std::vector<std::string>> predictions,
                                   const TagSet& tagset) {
    std::vector<uint32_t> gold_ids, pred_ids;
    if (gold.size() != predictions.size()) {
        raise(ErrorCode::invalid_argument, "gold/prediction sequence count mismatch");
    }
    for (std::size_t s = 0; s < gold.size(); ++s) {
        if (gold[s].labels.size() != predictions[s].size()) {
            raise(ErrorCode::invalid_argument,
                  "sequence " + std::to_string(s) + " has misaligned predictions");
        }
        for (std::size_t i = 0; i < gold[s].labels.size(); ++i) {
            const auto g = tagset.label_id(gold[s].labels[i]);
            const auto p = tagset.label_id(predictions[s][i]);
            if (!g || !p) {
                raise(ErrorCode::invalid_argument, "label not in the tag set");
            }
            gold_ids.push_back(*g);
            pred_ids.push_back(*p);
        }
    }
    NerEvaluation eval;
    eval.confusion = confusion_matrix(gold_ids, pred_ids, tagset.num_labels());
    eval.metrics = metrics_report(eval.confusion);
    eval.span = span_metrics(gold, predictions, tagset);
    eval.per_label = per_label_report(gold, predictions, tagset);
    return eval;
}

NerEvaluation evaluate_tagger(const Tagger& tagger, std::span<const LabeledSequence> gold) {
    const auto predictions = tagger.predict_all(gold);
    return evaluate_predictions(gold, predictions, tagger.tagset());
}

nlohmann::ordered_json evaluation_to_json(const NerEvaluation& eval, const TagSet& tagset,
                                          const std::string& model_name,
                                          const std::string& split) {
    nlohmann::ordered_json j;
    j["model"] = model_name;
    j["split"] = split;
    j["metrics"] = {{"mcc", eval.metrics.mcc},
                    {"micro_f1", eval.metrics.micro_f1},
                    {"micro_precision", eval.metrics.micro_precision},
                    {"micro_recall", eval.metrics.micro_recall},
                    {"accuracy", eval.metrics.accuracy}};
    j["span_metrics"] = {{"precision", eval.span.precision},
                         {"recall", eval.span.recall},
                         {"f1", eval.span.f1}};
    nlohmann::ordered_json per_label = nlohmann::ordered_json::array();
    for (const auto& e : eval.per_label) {
        per_label.push_back({{"type", e.type},
                             {"precision", e.precision},
                             {"recall", e.recall},
                             {"support", e.support},
                             {"section_affinity", e.section_affinity}});
    }
    j["per_label"] = std::move(per_label);
    j["tagset"] = tagset.types();
    return j;
}

}  // namespace astrolm
