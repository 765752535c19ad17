#include "oncosurv/metrics.hpp"

#include "oncosurv/errors.hpp"

namespace oncosurv::metrics {

MetricSet metrics_from_confusion(const ConfusionCounts& c) {
    if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0) throw_data("negative confusion count");
    if (c.population() == 0) throw_data("EmptyPopulation: confusion counts sum to zero");

    MetricSet m;
    m.counts = c;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.population());
    if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0) {
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    }
    return m;
}

ConfusionCounts confusion_from_lists(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size()) throw_data("AlignmentError: prediction/label length mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        bool p = preds[i] != 0;
        bool l = labels[i] != 0;
        if (p && l) ++c.tp;
        else if (p && !l) ++c.fp;
        else if (!p && l) ++c.fn;
        else ++c.tn;
    }
    return c;
}

F1PerClass f1_per_class(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size()) throw_data("AlignmentError: prediction/label length mismatch");
    if (preds.empty()) throw_data("EmptyPopulation: no prediction/label pairs");

    auto one_class = [&](int positive, double& f1, bool& degenerate) {
        ConfusionCounts c;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            bool p = preds[i] == positive;
            bool l = labels[i] == positive;
            if (p && l) ++c.tp;
            else if (p && !l) ++c.fp;
            else if (!p && l) ++c.fn;
            else ++c.tn;
        }
        MetricSet m = metrics_from_confusion(c);
        if (m.f1) {
            f1 = *m.f1;
            degenerate = false;
        } else {
            f1 = 0.0;
            degenerate = true;
        }
    };

    F1PerClass out;
    one_class(1, out.f1_pos, out.pos_degenerate);
    one_class(0, out.f1_neg, out.neg_degenerate);
    return out;
}

}  // namespace oncosurv::metrics
