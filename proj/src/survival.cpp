#include "oncosurv/survival.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

#include "oncosurv/errors.hpp"
#include "oncosurv/parallel.hpp"
#include "oncosurv/util.hpp"

namespace oncosurv::survival {

using nlohmann::json;

double SurvivalFunction::at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return probabilities[static_cast<std::size_t>(it - times.begin()) - 1];
}

double HazardFunction::at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return cumhaz[static_cast<std::size_t>(it - times.begin()) - 1];
}

namespace {

std::vector<std::pair<double, bool>> sorted_observations(const std::vector<data::SurvivalRecord>& records) {
    std::vector<std::pair<double, bool>> obs;
    obs.reserve(records.size());
    for (const auto& r : records) obs.emplace_back(static_cast<double>(r.time_days), r.event);
    std::sort(obs.begin(), obs.end());
    return obs;
}

}  // namespace

SurvivalFunction kaplan_meier(const std::vector<data::SurvivalRecord>& records) {
    if (records.empty()) throw_data("EmptyInput: no survival records");
    auto obs = sorted_observations(records);
    SurvivalFunction s;
    double surv = 1.0;
    std::size_t at_risk = obs.size();
    std::size_t i = 0;
    while (i < obs.size()) {
        double t = obs[i].first;
        std::size_t deaths = 0, leaving = 0;
        while (i < obs.size() && obs[i].first == t) {
            ++leaving;
            if (obs[i].second) ++deaths;
            ++i;
        }
        if (deaths > 0) {
            surv *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
            s.times.push_back(t);
            s.probabilities.push_back(surv);
        }
        at_risk -= leaving;
    }
    return s;
}

HazardFunction nelson_aalen(const std::vector<data::SurvivalRecord>& records) {
    if (records.empty()) throw_data("EmptyInput: no survival records");
    auto obs = sorted_observations(records);
    HazardFunction h;
    double cum = 0.0;
    std::size_t at_risk = obs.size();
    std::size_t i = 0;
    while (i < obs.size()) {
        double t = obs[i].first;
        std::size_t deaths = 0, leaving = 0;
        while (i < obs.size() && obs[i].first == t) {
            ++leaving;
            if (obs[i].second) ++deaths;
            ++i;
        }
        if (deaths > 0) {
            cum += static_cast<double>(deaths) / static_cast<double>(at_risk);
            h.times.push_back(t);
            h.cumhaz.push_back(cum);
        }
        at_risk -= leaving;
    }
    return h;
}

double logrank_statistic(const std::vector<data::SurvivalRecord>& left,
                         const std::vector<data::SurvivalRecord>& right) {
    struct Obs {
        double t;
        bool event;
        bool in_left;
    };
    if (left.empty() || right.empty()) throw_data("DegenerateSplit: empty group");
    std::vector<Obs> obs;
    obs.reserve(left.size() + right.size());
    for (const auto& r : left) obs.push_back({static_cast<double>(r.time_days), r.event, true});
    for (const auto& r : right) obs.push_back({static_cast<double>(r.time_days), r.event, false});
    std::sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) { return a.t < b.t; });

    double num = 0.0, var = 0.0;
    std::size_t at_risk = obs.size(), at_risk_left = left.size();
    bool any_event = false;
    std::size_t i = 0;
    while (i < obs.size()) {
        double t = obs[i].t;
        std::size_t d = 0, d1 = 0, leaving = 0, leaving_left = 0;
        while (i < obs.size() && obs[i].t == t) {
            ++leaving;
            if (obs[i].in_left) ++leaving_left;
            if (obs[i].event) {
                ++d;
                if (obs[i].in_left) ++d1;
            }
            ++i;
        }
        if (d > 0) {
            any_event = true;
            double y = static_cast<double>(at_risk);
            double y1 = static_cast<double>(at_risk_left);
            double dd = static_cast<double>(d);
            num += static_cast<double>(d1) - y1 * dd / y;
            if (at_risk > 1) var += (y1 / y) * (1.0 - y1 / y) * ((y - dd) / (y - 1.0)) * dd;
        }
        at_risk -= leaving;
        at_risk_left -= leaving_left;
    }
    if (!any_event) throw_data("DegenerateSplit: no events in either group");
    if (var == 0.0) return 0.0;
    return num * num / var;
}

void ForestConfig::validate() const {
    if (n_trees < 1) throw_config("n_trees must be >= 1, got " + std::to_string(n_trees));
    if (mtry < 0) throw_config("mtry must be >= 0 (0 selects ceil(sqrt(p))), got " + std::to_string(mtry));
    if (min_leaf_size < 1) throw_config("min_leaf_size must be >= 1, got " + std::to_string(min_leaf_size));
}

std::uint64_t tree_seed(std::uint64_t forest_seed, int tree_index) {
    return util::mix64(forest_seed ^ util::mix64(static_cast<std::uint64_t>(tree_index) + 1));
}

std::vector<std::size_t> bootstrap_indices(std::uint64_t forest_seed, int tree_index, std::size_t n) {
    util::Rng rng(tree_seed(forest_seed, tree_index));
    std::vector<std::size_t> idx(n);
    for (auto& v : idx) v = rng.uniform_int(n);
    return idx;
}

namespace {

// Grows one tree over a bootstrap sample. Splits maximize the log-rank
// statistic, scanned incrementally: per node we bucket samples by the node's
// event times once, then slide candidate cuts left-to-right updating the
// left-side at-risk counts.
class TreeBuilder {
  public:
    TreeBuilder(const data::Dataset& features, const std::vector<data::SurvivalRecord>& records, int mtry,
                std::size_t min_leaf, util::Rng& rng)
        : features_(features), records_(records), mtry_(mtry), min_leaf_(min_leaf), rng_(rng) {}

    SurvivalTree build(std::vector<std::size_t> rows) {
        SurvivalTree tree;
        grow(tree, rows, 0, rows.size());
        return tree;
    }

  private:
    const data::Dataset& features_;
    const std::vector<data::SurvivalRecord>& records_;
    int mtry_;
    std::size_t min_leaf_;
    util::Rng& rng_;

    // scratch, valid for the node currently being split
    std::vector<double> etimes_;       // distinct event times in the node
    std::vector<double> y_;            // at risk at each event time
    std::vector<double> d_;            // deaths at each event time
    std::vector<std::size_t> r_;       // per sample: # event times <= its time
    std::vector<int> death_at_;        // per sample: event-time index, -1 if censored
    std::vector<std::size_t> order_;   // sample order by candidate feature value
    std::vector<double> vals_;         // candidate feature values
    std::vector<double> y1_, d1_;      // left-side counts during the scan
    std::vector<std::size_t> bucket_;  // histogram of r_
    std::vector<int> pool_;            // feature indices for mtry sampling

    void node_stats(const std::vector<std::size_t>& rows, std::size_t lo, std::size_t hi) {
        std::size_t n = hi - lo;
        etimes_.clear();
        for (std::size_t i = lo; i < hi; ++i) {
            const auto& rec = records_[rows[i]];
            if (rec.event) etimes_.push_back(static_cast<double>(rec.time_days));
        }
        std::sort(etimes_.begin(), etimes_.end());
        etimes_.erase(std::unique(etimes_.begin(), etimes_.end()), etimes_.end());
        std::size_t m = etimes_.size();
        r_.assign(n, 0);
        death_at_.assign(n, -1);
        bucket_.assign(m + 1, 0);
        d_.assign(m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& rec = records_[rows[lo + i]];
            double t = static_cast<double>(rec.time_days);
            auto it = std::upper_bound(etimes_.begin(), etimes_.end(), t);
            std::size_t r = static_cast<std::size_t>(it - etimes_.begin());
            r_[i] = r;
            ++bucket_[r];
            if (rec.event) {
                death_at_[i] = static_cast<int>(r) - 1;
                d_[r - 1] += 1.0;
            }
        }
        y_.assign(m, 0.0);
        double suffix = 0.0;
        for (std::size_t i = m; i-- > 0;) {
            suffix += static_cast<double>(bucket_[i + 1]);
            y_[i] = suffix;
        }
    }

    std::vector<int> sample_features() {
        std::size_t p = features_.n_features();
        pool_.resize(p);
        std::iota(pool_.begin(), pool_.end(), 0);
        std::size_t k = std::min(static_cast<std::size_t>(mtry_), p);
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + rng_.uniform_int(p - i);
            std::swap(pool_[i], pool_[j]);
        }
        return std::vector<int>(pool_.begin(), pool_.begin() + k);
    }

    void scan_feature(const std::vector<std::size_t>& rows, std::size_t lo, std::size_t hi, int f, int& best_feature,
                      double& best_cut, double& best_stat) {
        std::size_t n = hi - lo, m = etimes_.size();
        vals_.resize(n);
        for (std::size_t i = 0; i < n; ++i) vals_[i] = features_.at(rows[lo + i], f);
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), 0);
        std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
            if (vals_[a] != vals_[b]) return vals_[a] < vals_[b];
            return a < b;
        });
        if (vals_[order_.front()] == vals_[order_.back()]) return;

        y1_.assign(m, 0.0);
        d1_.assign(m, 0.0);
        std::size_t moved = 0;
        while (moved < n) {
            double v = vals_[order_[moved]];
            while (moved < n && vals_[order_[moved]] == v) {
                std::size_t i = order_[moved];
                for (std::size_t k = 0; k < r_[i]; ++k) y1_[k] += 1.0;
                if (death_at_[i] >= 0) d1_[static_cast<std::size_t>(death_at_[i])] += 1.0;
                ++moved;
            }
            if (moved >= n) break;
            std::size_t n_left = moved, n_right = n - moved;
            if (n_right < min_leaf_) break;
            if (n_left < min_leaf_) continue;
            double num = 0.0, var = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                num += d1_[k] - y1_[k] * d_[k] / y_[k];
                if (y_[k] > 1.0) var += (y1_[k] / y_[k]) * (1.0 - y1_[k] / y_[k]) * ((y_[k] - d_[k]) / (y_[k] - 1.0)) * d_[k];
            }
            if (var <= 0.0) continue;
            double stat = num * num / var;
            if (stat > best_stat) {
                double next_v = vals_[order_[moved]];
                double cut = v + (next_v - v) / 2.0;
                if (cut >= next_v) cut = v;  // adjacent representables
                best_stat = stat;
                best_feature = f;
                best_cut = cut;
            }
        }
    }

    LeafSteps make_leaf(std::size_t n) const {
        LeafSteps leaf;
        leaf.n_samples = n;
        leaf.times = etimes_;
        leaf.cumhaz.resize(etimes_.size());
        double h = 0.0;
        for (std::size_t k = 0; k < etimes_.size(); ++k) {
            h += d_[k] / y_[k];
            leaf.cumhaz[k] = h;
        }
        return leaf;
    }

    int grow(SurvivalTree& tree, std::vector<std::size_t>& rows, std::size_t lo, std::size_t hi) {
        int me = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        std::size_t n = hi - lo;
        node_stats(rows, lo, hi);

        int best_feature = -1;
        double best_cut = 0.0, best_stat = 0.0;
        if (n >= 2 * min_leaf_ && !etimes_.empty()) {
            for (int f : sample_features()) scan_feature(rows, lo, hi, f, best_feature, best_cut, best_stat);
        }
        if (best_feature < 0) {
            tree.nodes[me].leaf = static_cast<int>(tree.leaves.size());
            tree.leaves.push_back(make_leaf(n));
            return me;
        }

        auto mid_it = std::stable_partition(rows.begin() + static_cast<std::ptrdiff_t>(lo),
                                            rows.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::size_t row) {
                                                return features_.at(row, static_cast<std::size_t>(best_feature)) <=
                                                       best_cut;
                                            });
        std::size_t mid = static_cast<std::size_t>(mid_it - rows.begin());
        int left = grow(tree, rows, lo, mid);
        int right = grow(tree, rows, mid, hi);
        TreeNode nd;
        nd.feature = best_feature;
        nd.cut = best_cut;
        nd.left = left;
        nd.right = right;
        tree.nodes[me] = nd;
        return me;
    }
};

const LeafSteps& descend(const SurvivalTree& tree, const std::vector<double>& row) {
    std::size_t i = 0;
    while (tree.nodes[i].feature >= 0) {
        const TreeNode& nd = tree.nodes[i];
        i = static_cast<std::size_t>(row[static_cast<std::size_t>(nd.feature)] <= nd.cut ? nd.left : nd.right);
    }
    return tree.leaves[static_cast<std::size_t>(tree.nodes[i].leaf)];
}

// cumulative hazard of a leaf evaluated on the forest grid, added into acc
void add_leaf_cumhaz(const LeafSteps& leaf, const std::vector<double>& grid, std::vector<double>& acc) {
    std::size_t j = 0;
    double h = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        while (j < leaf.times.size() && leaf.times[j] <= grid[g]) {
            h = leaf.cumhaz[j];
            ++j;
        }
        acc[g] += h;
    }
}

void check_row_width(const SurvivalForestModel& model, const std::vector<double>& row) {
    if (row.size() != model.feature_names.size())
        throw_data("SchemaMismatch: row has " + std::to_string(row.size()) + " values but the model expects " +
                   std::to_string(model.feature_names.size()));
}

void check_dataset_schema(const SurvivalForestModel& model, const data::Dataset& features) {
    features.validate();
    if (features.schema_hash() != model.schema_hash)
        throw_data("SchemaMismatch: dataset feature schema does not match the model");
}

}  // namespace

SurvivalForestModel fit_forest(const data::Dataset& features, const std::vector<data::SurvivalRecord>& records,
                               const ForestConfig& cfg) {
    cfg.validate();
    features.validate();
    if (features.n_rows() == 0) throw_data("EmptyInput: no rows to train on");
    if (features.n_features() == 0) throw_data("EmptyInput: dataset has no feature columns");
    if (records.size() != features.n_rows())
        throw_data("AlignmentError: " + std::to_string(records.size()) + " survival records for " +
                   std::to_string(features.n_rows()) + " feature rows");
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].patient_id != features.row_ids[i])
            throw_data("AlignmentError: row " + std::to_string(i) + " is patient '" + features.row_ids[i] +
                       "' but the survival record is for '" + records[i].patient_id + "'");
        if (records[i].time_days < 1)
            throw_data("record '" + records[i].patient_id + "' has non-positive follow-up time");
    }
    for (std::size_t f = 0; f < features.n_features(); ++f) {
        for (double v : features.columns[f]) {
            if (!std::isfinite(v))
                throw_data("non-finite value in feature '" + features.feature_names[f] + "'");
        }
    }

    std::vector<double> grid;
    for (const auto& r : records) {
        if (r.event) grid.push_back(static_cast<double>(r.time_days));
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.size() < 2)
        throw_data("InsufficientEvents: " + std::to_string(grid.size()) +
                   " distinct event times in the training data; need at least 2");

    std::size_t p = features.n_features();
    int mtry = cfg.mtry > 0 ? std::min(cfg.mtry, static_cast<int>(p))
                            : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));

    SurvivalForestModel model;
    model.config = cfg;
    model.config.mtry = mtry;
    model.feature_names = features.feature_names;
    model.schema_hash = features.schema_hash();
    model.grid = std::move(grid);
    model.trees.resize(static_cast<std::size_t>(cfg.n_trees));

    std::size_t n = features.n_rows();
    util::parallel_for(static_cast<std::size_t>(cfg.n_trees), cfg.workers, [&](std::size_t t) {
        util::Rng rng(tree_seed(cfg.seed, static_cast<int>(t)));
        std::vector<std::size_t> rows(n);
        for (auto& v : rows) v = rng.uniform_int(n);
        TreeBuilder builder(features, records, mtry, static_cast<std::size_t>(cfg.min_leaf_size), rng);
        model.trees[t] = builder.build(std::move(rows));
    });
    return model;
}

SurvivalFunction predict_survival(const SurvivalForestModel& model, const std::vector<double>& row) {
    check_row_width(model, row);
    SurvivalFunction s;
    s.times = model.grid;
    s.probabilities.assign(model.grid.size(), 0.0);
    std::vector<double> leaf_h(model.grid.size());
    for (const auto& tree : model.trees) {
        std::fill(leaf_h.begin(), leaf_h.end(), 0.0);
        add_leaf_cumhaz(descend(tree, row), model.grid, leaf_h);
        for (std::size_t g = 0; g < leaf_h.size(); ++g) s.probabilities[g] += std::exp(-leaf_h[g]);
    }
    double inv = 1.0 / static_cast<double>(model.trees.size());
    for (auto& v : s.probabilities) v *= inv;
    return s;
}

double predict_risk(const SurvivalForestModel& model, const std::vector<double>& row) {
    check_row_width(model, row);
    std::vector<double> acc(model.grid.size(), 0.0);
    for (const auto& tree : model.trees) add_leaf_cumhaz(descend(tree, row), model.grid, acc);
    double risk = 0.0;
    double inv = 1.0 / static_cast<double>(model.trees.size());
    for (double h : acc) risk += h * inv;
    return risk;
}

std::vector<double> predict_risks(const SurvivalForestModel& model, const data::Dataset& features) {
    check_dataset_schema(model, features);
    std::vector<double> risks(features.n_rows());
    for (std::size_t r = 0; r < features.n_rows(); ++r) risks[r] = predict_risk(model, features.row(r));
    return risks;
}

double concordance_index(const std::vector<double>& risks, const std::vector<data::SurvivalRecord>& records) {
    if (risks.size() != records.size())
        throw_data("AlignmentError: " + std::to_string(risks.size()) + " risk scores for " +
                   std::to_string(records.size()) + " survival records");
    double concordant = 0.0;
    std::size_t comparable = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].event) continue;
        for (std::size_t j = 0; j < records.size(); ++j) {
            if (records[i].time_days >= records[j].time_days) continue;
            ++comparable;
            if (risks[i] > risks[j]) concordant += 1.0;
            else if (risks[i] == risks[j]) concordant += 0.5;
        }
    }
    if (comparable == 0) throw_data("NoComparablePairs: no usable pairs for the concordance index");
    return concordant / static_cast<double>(comparable);
}

std::vector<int> classify_at(const SurvivalForestModel& model, const data::Dataset& features, double t_star,
                             double threshold) {
    check_dataset_schema(model, features);
    std::vector<int> out(features.n_rows(), 0);
    for (std::size_t r = 0; r < features.n_rows(); ++r) {
        double s = predict_survival(model, features.row(r)).at(t_star);
        out[r] = s < threshold ? 1 : 0;
    }
    return out;
}

HorizonLabel label_at(const data::SurvivalRecord& record, double t) {
    double time = static_cast<double>(record.time_days);
    if (record.event && time <= t) return {true, 1};
    if (!record.event && time < t) return {false, 0};
    return {true, 0};
}

SweepResult sweep_time_points(const SurvivalForestModel& model, const data::Dataset& features,
                              const std::vector<data::SurvivalRecord>& records, const std::vector<double>& grid,
                              double threshold) {
    check_dataset_schema(model, features);
    if (records.size() != features.n_rows())
        throw_data("AlignmentError: " + std::to_string(records.size()) + " survival records for " +
                   std::to_string(features.n_rows()) + " feature rows");
    if (grid.empty()) throw_data("EmptyInput: no candidate time points");

    std::vector<double> ts = grid;
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

    std::vector<SurvivalFunction> curves;
    curves.reserve(features.n_rows());
    for (std::size_t r = 0; r < features.n_rows(); ++r) curves.push_back(predict_survival(model, features.row(r)));

    SweepResult res;
    res.threshold = threshold;
    double best = -1.0;
    for (double t : ts) {
        SweepPoint pt;
        pt.t = t;
        std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::size_t r = 0; r < records.size(); ++r) {
            HorizonLabel truth = label_at(records[r], t);
            if (!truth.included) {
                ++pt.n_excluded;
                continue;
            }
            ++pt.n_included;
            int pred = curves[r].at(t) < threshold ? 1 : 0;
            if (pred == 1 && truth.label == 1) ++tp;
            else if (pred == 1 && truth.label == 0) ++fp;
            else if (pred == 0 && truth.label == 1) ++fn;
            else ++tn;
        }
        if (pt.n_included > 0)
            pt.accuracy = static_cast<double>(tp + tn) / static_cast<double>(pt.n_included);
        double pos_den = static_cast<double>(2 * tp + fp + fn);
        double neg_den = static_cast<double>(2 * tn + fn + fp);
        pt.f1_pos_degenerate = pos_den == 0.0;
        pt.f1_neg_degenerate = neg_den == 0.0;
        pt.f1_pos = pt.f1_pos_degenerate ? 0.0 : 2.0 * static_cast<double>(tp) / pos_den;
        pt.f1_neg = pt.f1_neg_degenerate ? 0.0 : 2.0 * static_cast<double>(tn) / neg_den;
        pt.composite = (pt.accuracy.value_or(0.0) + pt.f1_pos + pt.f1_neg) / 3.0;
        if (pt.composite > best) {
            best = pt.composite;
            res.t_star = t;
        }
        res.points.push_back(pt);
    }
    return res;
}

std::vector<CalibrationBin> calibration_curve(const std::vector<double>& predicted_probabilities,
                                              const std::vector<int>& observed) {
    if (predicted_probabilities.size() != observed.size())
        throw_data("AlignmentError: " + std::to_string(predicted_probabilities.size()) + " probabilities for " +
                   std::to_string(observed.size()) + " observations");
    constexpr std::size_t kBins = 10;
    std::vector<double> sum_p(kBins, 0.0), sum_y(kBins, 0.0);
    std::vector<std::size_t> count(kBins, 0);
    for (std::size_t i = 0; i < predicted_probabilities.size(); ++i) {
        double p = predicted_probabilities[i];
        if (!(p >= 0.0 && p <= 1.0))
            throw_data("predicted probability out of [0,1]: " + util::format_double(p));
        auto b = std::min<std::size_t>(kBins - 1, static_cast<std::size_t>(p * 10.0));
        sum_p[b] += p;
        sum_y[b] += observed[i] != 0 ? 1.0 : 0.0;
        ++count[b];
    }
    std::vector<CalibrationBin> bins(kBins);
    for (std::size_t b = 0; b < kBins; ++b) {
        bins[b].lo = static_cast<double>(b) / 10.0;
        bins[b].hi = static_cast<double>(b + 1) / 10.0;
        bins[b].count = count[b];
        if (count[b] > 0) {
            bins[b].mean_predicted = sum_p[b] / static_cast<double>(count[b]);
            bins[b].observed_fraction = sum_y[b] / static_cast<double>(count[b]);
        }
    }
    return bins;
}

std::vector<FeatureImportance> permutation_importance(const SurvivalForestModel& model, const data::Dataset& features,
                                                      const std::vector<data::SurvivalRecord>& records, int repeats,
                                                      std::uint64_t seed) {
    if (repeats < 1) throw_config("permutation repeats must be >= 1, got " + std::to_string(repeats));
    check_dataset_schema(model, features);
    double baseline = concordance_index(predict_risks(model, features), records);

    data::Dataset work = features;
    std::vector<FeatureImportance> out;
    out.reserve(features.n_features());
    for (std::size_t f = 0; f < features.n_features(); ++f) {
        const std::vector<double> original = work.columns[f];
        double drop_sum = 0.0;
        for (int rep = 0; rep < repeats; ++rep) {
            util::Rng rng(util::mix64(seed ^ util::mix64(static_cast<std::uint64_t>(f) * 1000003ULL +
                                                         static_cast<std::uint64_t>(rep) + 1)));
            std::vector<double> permuted = original;
            rng.shuffle(permuted);
            work.columns[f] = std::move(permuted);
            drop_sum += baseline - concordance_index(predict_risks(model, work), records);
        }
        work.columns[f] = original;
        out.push_back({features.feature_names[f], drop_sum / static_cast<double>(repeats)});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const FeatureImportance& a, const FeatureImportance& b) { return a.importance > b.importance; });
    return out;
}

namespace {

constexpr const char* kModelFormat = "oncosurv-rsf";
constexpr int kModelVersion = 1;

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const json& need(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw_data("model file: missing key '" + std::string(key) + "'");
    return *it;
}

double need_number(const json& j, const char* what) {
    if (!j.is_number()) throw_data("model file: " + std::string(what) + " must be a number");
    return j.get<double>();
}

int need_int(const json& j, const char* what) {
    if (!j.is_number_integer()) throw_data("model file: " + std::string(what) + " must be an integer");
    return j.get<int>();
}

}  // namespace

std::string serialize_model(const SurvivalForestModel& model) {
    json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["schema_hash"] = hash_hex(model.schema_hash);
    j["feature_names"] = model.feature_names;
    j["config"] = {{"n_trees", model.config.n_trees},
                   {"mtry", model.config.mtry},
                   {"min_leaf_size", model.config.min_leaf_size},
                   {"seed", std::to_string(model.config.seed)}};
    j["grid"] = model.grid;
    json trees = json::array();
    for (const auto& tree : model.trees) {
        json nodes = json::array();
        for (const auto& nd : tree.nodes) nodes.push_back({nd.feature, nd.cut, nd.left, nd.right, nd.leaf});
        json leaves = json::array();
        for (const auto& leaf : tree.leaves) {
            leaves.push_back({{"n", leaf.n_samples}, {"times", leaf.times}, {"cumhaz", leaf.cumhaz}});
        }
        trees.push_back({{"nodes", std::move(nodes)}, {"leaves", std::move(leaves)}});
    }
    j["trees"] = std::move(trees);
    return j.dump();
}

SurvivalForestModel deserialize_model(const std::string& bytes) {
    json j = json::parse(bytes, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw_data("model file is not a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "format" && key != "version" && key != "schema_hash" && key != "feature_names" &&
            key != "config" && key != "grid" && key != "trees")
            throw_data("model file: unknown key '" + key + "'");
    }
    const json& fmt = need(j, "format");
    const json& ver = need(j, "version");
    if (!fmt.is_string() || fmt.get<std::string>() != kModelFormat)
        throw_data("VersionMismatch: not an " + std::string(kModelFormat) + " model file");
    if (!ver.is_number_integer() || ver.get<int>() != kModelVersion)
        throw_data("VersionMismatch: expected version " + std::to_string(kModelVersion) + ", got " + ver.dump());

    SurvivalForestModel model;
    const json& names = need(j, "feature_names");
    if (!names.is_array()) throw_data("model file: feature_names must be an array");
    for (const auto& name : names) {
        if (!name.is_string()) throw_data("model file: feature_names must be strings");
        model.feature_names.push_back(name.get<std::string>());
    }
    model.schema_hash = data::feature_schema_hash(model.feature_names);
    const json& stored = need(j, "schema_hash");
    if (!stored.is_string()) throw_data("model file: schema_hash must be a string");
    if (stored.get<std::string>() != hash_hex(model.schema_hash))
        throw_data("SchemaHashMismatch: stored hash " + stored.get<std::string>() +
                   " does not match the feature names (" + hash_hex(model.schema_hash) + ")");

    const json& cfg = need(j, "config");
    if (!cfg.is_object()) throw_data("model file: config must be an object");
    model.config.n_trees = need_int(need(cfg, "n_trees"), "config.n_trees");
    model.config.mtry = need_int(need(cfg, "mtry"), "config.mtry");
    model.config.min_leaf_size = need_int(need(cfg, "min_leaf_size"), "config.min_leaf_size");
    const json& seed = need(cfg, "seed");
    if (!seed.is_string()) throw_data("model file: config.seed must be a string");
    try {
        model.config.seed = std::stoull(seed.get<std::string>());
    } catch (const std::exception&) {
        throw_data("model file: config.seed is not an unsigned integer");
    }
    model.config.validate();

    const json& grid = need(j, "grid");
    if (!grid.is_array()) throw_data("model file: grid must be an array");
    for (const auto& g : grid) model.grid.push_back(need_number(g, "grid entry"));

    const json& trees = need(j, "trees");
    if (!trees.is_array()) throw_data("model file: trees must be an array");
    for (const auto& jt : trees) {
        if (!jt.is_object()) throw_data("model file: each tree must be an object");
        SurvivalTree tree;
        const json& nodes = need(jt, "nodes");
        if (!nodes.is_array() || nodes.empty()) throw_data("model file: tree nodes must be a non-empty array");
        for (const auto& jn : nodes) {
            if (!jn.is_array() || jn.size() != 5) throw_data("model file: each node must be a 5-element array");
            TreeNode nd;
            nd.feature = need_int(jn[0], "node feature");
            nd.cut = need_number(jn[1], "node cut");
            nd.left = need_int(jn[2], "node left");
            nd.right = need_int(jn[3], "node right");
            nd.leaf = need_int(jn[4], "node leaf");
            tree.nodes.push_back(nd);
        }
        const json& leaves = need(jt, "leaves");
        if (!leaves.is_array()) throw_data("model file: tree leaves must be an array");
        for (const auto& jl : leaves) {
            if (!jl.is_object()) throw_data("model file: each leaf must be an object");
            LeafSteps leaf;
            const json& ln = need(jl, "n");
            if (!ln.is_number_unsigned()) throw_data("model file: leaf n must be a non-negative integer");
            leaf.n_samples = ln.get<std::size_t>();
            const json& lt = need(jl, "times");
            const json& lh = need(jl, "cumhaz");
            if (!lt.is_array() || !lh.is_array() || lt.size() != lh.size())
                throw_data("model file: leaf times and cumhaz must be arrays of equal length");
            for (const auto& v : lt) leaf.times.push_back(need_number(v, "leaf time"));
            for (const auto& v : lh) leaf.cumhaz.push_back(need_number(v, "leaf cumhaz"));
            tree.leaves.push_back(leaf);
        }
        int p = static_cast<int>(model.feature_names.size());
        int n_nodes = static_cast<int>(tree.nodes.size());
        int n_leaves = static_cast<int>(tree.leaves.size());
        for (const auto& nd : tree.nodes) {
            if (nd.feature >= 0) {
                if (nd.feature >= p || nd.left < 0 || nd.left >= n_nodes || nd.right < 0 || nd.right >= n_nodes)
                    throw_data("model file: node references out of range");
            } else if (nd.leaf < 0 || nd.leaf >= n_leaves) {
                throw_data("model file: leaf reference out of range");
            }
        }
        model.trees.push_back(std::move(tree));
    }
    if (model.trees.empty()) throw_data("model file: no trees");
    return model;
}

}  // namespace oncosurv::survival
