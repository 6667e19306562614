#include "astrolm/metrics.hpp"

#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "astrolm/error.hpp"

namespace astrolm {

void ConfusionMatrix::add(uint32_t gold, uint32_t pred, uint64_t count) {
    if (gold >= k_ || pred >= k_) {
        raise(ErrorCode::invalid_argument, "confusion matrix label out of range");
    }
    counts_[gold * k_ + pred] += count;
}

uint64_t ConfusionMatrix::total() const {
    uint64_t s = 0;
    for (uint64_t c : counts_) s += c;
    return s;
}

uint64_t ConfusionMatrix::trace() const {
    uint64_t s = 0;
    for (std::size_t i = 0; i < k_; ++i) s += at(i, i);
    return s;
}

uint64_t ConfusionMatrix::gold_count(std::size_t label) const {
    uint64_t s = 0;
    for (std::size_t j = 0; j < k_; ++j) s += at(label, j);
    return s;
}

uint64_t ConfusionMatrix::pred_count(std::size_t label) const {
    uint64_t s = 0;
    for (std::size_t i = 0; i < k_; ++i) s += at(i, label);
    return s;
}

ConfusionMatrix confusion_matrix(std::span<const uint32_t> gold, std::span<const uint32_t> pred,
                                 std::size_t num_labels) {
    if (gold.size() != pred.size()) {
        raise(ErrorCode::invalid_argument, "gold/pred length mismatch: " +
                                               std::to_string(gold.size()) + " vs " +
                                               std::to_string(pred.size()));
    }
    ConfusionMatrix m(num_labels);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        m.add(gold[i], pred[i]);
    }
    return m;
}

double mcc(const ConfusionMatrix& m) {
    const uint64_t s = m.total();
    if (s == 0) {
        raise(ErrorCode::invalid_argument, "mcc of an empty confusion matrix");
    }
    const uint64_t c = m.trace();
    // All count sums stay in exact integer arithmetic; only the final
    // division and square root run in floating point.
    int64_t sum_pt = 0;
    int64_t sum_pp = 0;
    int64_t sum_tt = 0;
    for (std::size_t k = 0; k < m.num_labels(); ++k) {
        const int64_t pk = static_cast<int64_t>(m.pred_count(k));
        const int64_t tk = static_cast<int64_t>(m.gold_count(k));
        sum_pt += pk * tk;
        sum_pp += pk * pk;
        sum_tt += tk * tk;
    }
    const int64_t s2 = static_cast<int64_t>(s) * static_cast<int64_t>(s);
    const int64_t numerator =
        static_cast<int64_t>(c) * static_cast<int64_t>(s) - sum_pt;
    const int64_t dp = s2 - sum_pp;
    const int64_t dt = s2 - sum_tt;
    if (dp == 0 || dt == 0) return 0.0;
    const double denominator =
        std::sqrt(static_cast<double>(dp) * static_cast<double>(dt));
    return static_cast<double>(numerator) / denominator;
}

MicroMetrics micro_metrics(const ConfusionMatrix& m) {
    if (m.total() == 0) {
        raise(ErrorCode::invalid_argument, "micro metrics of an empty confusion matrix");
    }
    uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 1; k < m.num_labels(); ++k) {
        const uint64_t diag = m.at(k, k);
        tp += diag;
        fp += m.pred_count(k) - diag;
        fn += m.gold_count(k) - diag;
    }
    MicroMetrics out;
    out.precision = (tp + fp) == 0 ? 0.0
                                   : static_cast<double>(tp) / static_cast<double>(tp + fp);
    out.recall = (tp + fn) == 0 ? 0.0
                                : static_cast<double>(tp) / static_cast<double>(tp + fn);
    out.f1 = (out.precision + out.recall) == 0.0
                 ? 0.0
                 : 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

double accuracy(const ConfusionMatrix& m) {
    const uint64_t s = m.total();
    if (s == 0) {
        raise(ErrorCode::invalid_argument, "accuracy of an empty confusion matrix");
    }
    return static_cast<double>(m.trace()) / static_cast<double>(s);
}

MetricsReport metrics_report(const ConfusionMatrix& m) {
    MetricsReport r;
    r.mcc = mcc(m);
    const MicroMetrics micro = micro_metrics(m);
    r.micro_f1 = micro.f1;
    r.micro_precision = micro.precision;
    r.micro_recall = micro.recall;
    r.accuracy = accuracy(m);
    return r;
}

namespace {

std::optional<std::size_t> type_index_of_label(const TagSet& tagset,
                                               const std::string& label) {
    const auto id = tagset.label_id(label);
    if (!id) {
        raise(ErrorCode::invalid_argument, "label \"" + label + "\" not in the tag set");
    }
    return tagset.type_of(*id);
}

void check_aligned(std::span<const LabeledSequence> gold,
                   std::span<const std::vector<std::string>> predictions) {
    if (gold.size() != predictions.size()) {
        raise(ErrorCode::invalid_argument, "gold/prediction sequence count mismatch");
    }
    for (std::size_t s = 0; s < gold.size(); ++s) {
        if (gold[s].labels.size() != predictions[s].size()) {
            raise(ErrorCode::invalid_argument,
                  "sequence " + std::to_string(s) + " has misaligned predictions");
        }
    }
}

}  // namespace

std::vector<PerLabelEntry> per_label_report(
    std::span<const LabeledSequence> gold,
    std::span<const std::vector<std::string>> predictions, const TagSet& tagset) {
    check_aligned(gold, predictions);
    struct Acc {
        uint64_t tp = 0, fp = 0, fn = 0, support = 0, fulltext = 0;
    };
    std::vector<Acc> acc(tagset.num_types());
    std::set<std::size_t> seen;
    for (std::size_t s = 0; s < gold.size(); ++s) {
        const bool is_fulltext = gold[s].section == SectionTag::fulltext;
        for (std::size_t i = 0; i < gold[s].labels.size(); ++i) {
            const auto gt = type_index_of_label(tagset, gold[s].labels[i]);
            const auto pt = type_index_of_label(tagset, predictions[s][i]);
            if (gt) {
                seen.insert(*gt);
                ++acc[*gt].support;
                if (is_fulltext) ++acc[*gt].fulltext;
            }
            if (pt) seen.insert(*pt);
            if (gt && pt && *gt == *pt) {
                ++acc[*gt].tp;
            } else {
                if (pt) ++acc[*pt].fp;
                if (gt) ++acc[*gt].fn;
            }
        }
    }
    std::vector<PerLabelEntry> report;
    for (std::size_t t : seen) {
        const Acc& a = acc[t];
        PerLabelEntry e;
        e.type = tagset.types()[t];
        e.precision = (a.tp + a.fp) == 0
                          ? 0.0
                          : static_cast<double>(a.tp) / static_cast<double>(a.tp + a.fp);
        e.recall = (a.tp + a.fn) == 0
                       ? 0.0
                       : static_cast<double>(a.tp) / static_cast<double>(a.tp + a.fn);
        e.support = a.support;
        e.section_affinity =
            a.support == 0 ? 0.0
                           : static_cast<double>(a.fulltext) / static_cast<double>(a.support);
        report.push_back(std::move(e));
    }
    return report;
}

namespace {

// (sequence, start, end, type) exact spans from an IOB2 labeling.
std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> extract_spans(
    std::span<const std::vector<std::string>> sequences, const TagSet& tagset) {
    std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> spans;
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const auto& labels = sequences[s];
        std::size_t i = 0;
        while (i < labels.size()) {
            const auto id = tagset.label_id(labels[i]);
            if (!id) {
                raise(ErrorCode::invalid_argument,
                      "label \"" + labels[i] + "\" not in the tag set");
            }
            if (!tagset.is_begin(*id)) {
                ++i;
                continue;
            }
            const std::size_t type = *tagset.type_of(*id);
            std::size_t end = i + 1;
            const uint32_t inside = tagset.inside_label(type);
            while (end < labels.size() && tagset.label_id(labels[end]) == inside) ++end;
            spans.emplace(s, i, end, type);
            i = end;
        }
    }
    return spans;
}

}  // namespace

SpanMetrics span_metrics(std::span<const LabeledSequence> gold,
                         std::span<const std::vector<std::string>> predictions,
                         const TagSet& tagset) {
    check_aligned(gold, predictions);
    std::vector<std::vector<std::string>> gold_labels;
    gold_labels.reserve(gold.size());
    for (const auto& seq : gold) gold_labels.push_back(seq.labels);
    const auto gold_spans = extract_spans(gold_labels, tagset);
    const auto pred_spans = extract_spans(predictions, tagset);
    uint64_t tp = 0;
    for (const auto& span : pred_spans) {
        if (gold_spans.count(span) > 0) ++tp;
    }
    SpanMetrics out;
    out.precision = pred_spans.empty()
                        ? 0.0
                        : static_cast<double>(tp) / static_cast<double>(pred_spans.size());
    out.recall = gold_spans.empty()
                     ? 0.0
                     : static_cast<double>(tp) / static_cast<double>(gold_spans.size());
    out.f1 = (out.precision + out.recall) == 0.0
                 ? 0.0
                 : 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

}  // namespace astrolm
