#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "astrolm/conll.hpp"
#include "astrolm/tagset.hpp"

namespace astrolm {

// K x K counts; entry (gold, pred). Token-level over IOB2 labels, O included.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t num_labels)
        : k_(num_labels), counts_(num_labels * num_labels, 0) {}

    std::size_t num_labels() const { return k_; }
    uint64_t at(std::size_t gold, std::size_t pred) const { return counts_[gold * k_ + pred]; }
    void add(uint32_t gold, uint32_t pred, uint64_t count = 1);

    uint64_t total() const;
    uint64_t trace() const;
    uint64_t gold_count(std::size_t label) const;  // row sum
    uint64_t pred_count(std::size_t label) const;  // column sum

private:
    std::size_t k_ = 0;
    std::vector<uint64_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const uint32_t> gold, std::span<const uint32_t> pred,
                                 std::size_t num_labels);

// Generalized multiclass MCC from the full confusion matrix. Both
// denominator factors zero out to an MCC of 0 by convention.
double mcc(const ConfusionMatrix& m);

struct MicroMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Micro-averaged over every label except O (label id 0).
MicroMetrics micro_metrics(const ConfusionMatrix& m);

// trace / total.
double accuracy(const ConfusionMatrix& m);

struct MetricsReport {
    double mcc = 0.0;
    double micro_f1 = 0.0;
    double micro_precision = 0.0;
    double micro_recall = 0.0;
    double accuracy = 0.0;
};

MetricsReport metrics_report(const ConfusionMatrix& m);

struct PerLabelEntry {
    std::string type;
    double precision = 0.0;
    double recall = 0.0;
    uint64_t support = 0;          // gold token occurrences of the type
    double section_affinity = 0.0;  // fraction of gold occurrences in fulltext
};

// Token-level per entity type, B- and I- pooled. Types absent from both gold
// and predictions are omitted.
std::vector<PerLabelEntry> per_label_report(
    std::span<const LabeledSequence> gold,
    std::span<const std::vector<std::string>> predictions, const TagSet& tagset);

// Supplementary exact-match entity-span scores (micro over types).
struct SpanMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

SpanMetrics span_metrics(std::span<const LabeledSequence> gold,
                         std::span<const std::vector<std::string>> predictions,
                         const TagSet& tagset);

}  // namespace astrolm
