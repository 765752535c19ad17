#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oncosurv/dataset.hpp"

namespace oncosurv::survival {

// Right-continuous step function; S(t) = 1 before the first step.
struct SurvivalFunction {
    std::vector<double> times;          // strictly increasing
    std::vector<double> probabilities;  // non-increasing, in [0,1]

    double at(double t) const;
};

// Right-continuous step function; H(t) = 0 before the first step.
struct HazardFunction {
    std::vector<double> times;
    std::vector<double> cumhaz;  // non-decreasing

    double at(double t) const;
};

// Product-limit estimate over distinct event times. Throws "EmptyInput".
SurvivalFunction kaplan_meier(const std::vector<data::SurvivalRecord>& records);

// H(t) = sum of d_i/n_i over event times <= t. Throws "EmptyInput".
HazardFunction nelson_aalen(const std::vector<data::SurvivalRecord>& records);

// Two-sample log-rank chi-square over pooled distinct event times.
// Throws "DegenerateSplit" when the pooled sample has no events.
double logrank_statistic(const std::vector<data::SurvivalRecord>& left,
                         const std::vector<data::SurvivalRecord>& right);

struct ForestConfig {
    int n_trees = 300;
    int mtry = 0;  // 0 = ceil(sqrt(p))
    int min_leaf_size = 15;
    std::uint64_t seed = 0;
    unsigned workers = 1;  // 0 = hardware concurrency

    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double cut = 0.0;  // x[feature] <= cut goes left
    int left = -1;
    int right = -1;
    int leaf = -1;  // index into SurvivalTree::leaves when a leaf
};

// Leaves store sparse Nelson-Aalen steps at the leaf's own event times; the
// ensemble aligns them on the forest grid at prediction time.
struct LeafSteps {
    std::vector<double> times;
    std::vector<double> cumhaz;
    std::size_t n_samples = 0;
};

struct SurvivalTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::vector<LeafSteps> leaves;
};

struct SurvivalForestModel {
    ForestConfig config;
    std::vector<std::string> feature_names;
    std::uint64_t schema_hash = 0;
    std::vector<double> grid;  // distinct training event times, ascending
    std::vector<SurvivalTree> trees;
};

// The per-tree RNG stream: bootstrap indices are its first n draws, feature
// subsampling continues on the same stream.
std::uint64_t tree_seed(std::uint64_t forest_seed, int tree_index);
std::vector<std::size_t> bootstrap_indices(std::uint64_t forest_seed, int tree_index, std::size_t n);

// Log-rank splitting over mtry random features, midpoint candidate cuts,
// both children >= min_leaf_size. Throws "InsufficientEvents" with fewer
// than two distinct event times and "AlignmentError" when records do not
// match dataset rows.
SurvivalForestModel fit_forest(const data::Dataset& features, const std::vector<data::SurvivalRecord>& records,
                               const ForestConfig& cfg);

// Mean over trees of exp(-H_leaf) on the forest grid.
SurvivalFunction predict_survival(const SurvivalForestModel& model, const std::vector<double>& row);

// Ensemble mortality: sum over the grid of the mean cumulative hazard.
double predict_risk(const SurvivalForestModel& model, const std::vector<double>& row);

// Batch scoring; throws "SchemaMismatch" when the dataset hash differs.
std::vector<double> predict_risks(const SurvivalForestModel& model, const data::Dataset& features);

// Harrell's C over pairs with t_i < t_j and event_i; risk ties count 0.5.
// Throws "NoComparablePairs".
double concordance_index(const std::vector<double>& risks, const std::vector<data::SurvivalRecord>& records);

// 1 = predicted failure by t_star: S(t_star) < threshold (strict).
std::vector<int> classify_at(const SurvivalForestModel& model, const data::Dataset& features, double t_star,
                             double threshold = 0.5);

// Ground truth at horizon t: positive when event and time <= t, excluded
// when censored before t, negative otherwise.
struct HorizonLabel {
    bool included = false;
    int label = 0;
};
HorizonLabel label_at(const data::SurvivalRecord& record, double t);

struct SweepPoint {
    double t = 0.0;
    std::size_t n_included = 0;
    std::size_t n_excluded = 0;
    std::optional<double> accuracy;
    double f1_pos = 0.0;
    double f1_neg = 0.0;
    bool f1_pos_degenerate = false;
    bool f1_neg_degenerate = false;
    double composite = 0.0;  // mean(accuracy, f1_pos, f1_neg), nulls as 0
};

struct SweepResult {
    double t_star = 0.0;
    double threshold = 0.5;
    std::vector<SweepPoint> points;
};

// Maximizes the composite over the grid; ties go to the smaller t.
SweepResult sweep_time_points(const SurvivalForestModel& model, const data::Dataset& features,
                              const std::vector<data::SurvivalRecord>& records, const std::vector<double>& grid,
                              double threshold = 0.5);

struct CalibrationBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    std::optional<double> mean_predicted;
    std::optional<double> observed_fraction;
};

// Ten equal-width bins over [0,1]; the last bin is closed at 1.0. Empty bins
// keep count 0 and null fractions.
std::vector<CalibrationBin> calibration_curve(const std::vector<double>& predicted_probabilities,
                                              const std::vector<int>& observed);

struct FeatureImportance {
    std::string feature;
    double importance = 0.0;  // mean C-index drop under permutation
};

// Ranked descending; deterministic given seed.
std::vector<FeatureImportance> permutation_importance(const SurvivalForestModel& model,
                                                      const data::Dataset& features,
                                                      const std::vector<data::SurvivalRecord>& records,
                                                      int repeats, std::uint64_t seed);

// Versioned JSON container carrying the feature schema hash. Deserialize
// re-derives the hash from the stored names: "VersionMismatch" /
// "SchemaHashMismatch" on disagreement.
std::string serialize_model(const SurvivalForestModel& model);
SurvivalForestModel deserialize_model(const std::string& bytes);

}  // namespace oncosurv::survival
