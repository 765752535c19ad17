#pragma once

#include <optional>
#include <vector>

namespace oncosurv::metrics {

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long tn = 0;
    long fn = 0;

    long population() const { return tp + fp + tn + fn; }
};

// Undefined ratios (zero denominator) are reported as nullopt, never 0, so
// downstream reports cannot silently inflate.
struct MetricSet {
    ConfusionCounts counts;
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

// Throws a data error ("EmptyPopulation") when all counts are zero.
MetricSet metrics_from_confusion(const ConfusionCounts& c);

// F1 computed twice, each class treated as the positive one. A class whose F1
// is undefined (no predictions and no instances on one side) is reported as
// 0.0 with its degenerate flag set.
struct F1PerClass {
    double f1_pos = 0.0;
    double f1_neg = 0.0;
    bool pos_degenerate = false;
    bool neg_degenerate = false;
};

// preds/labels: aligned binary sequences (0/1). Throws on length mismatch.
F1PerClass f1_per_class(const std::vector<int>& preds, const std::vector<int>& labels);

ConfusionCounts confusion_from_lists(const std::vector<int>& preds, const std::vector<int>& labels);

}  // namespace oncosurv::metrics
