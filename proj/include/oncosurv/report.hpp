#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oncosurv/metrics.hpp"
#include "oncosurv/survival.hpp"

namespace oncosurv::report {

// How the evaluation set was produced; carried in the report so results are
// interpretable without the config file.
struct Protocol {
    std::string split = "seeded 80/20 holdout";
    std::uint64_t seed = 0;
    double holdout_fraction = 0.2;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};

struct EvalReport {
    double c_index = 0.0;
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    double f1_pos = 0.0;
    double f1_neg = 0.0;
    bool f1_pos_degenerate = false;
    bool f1_neg_degenerate = false;
    long time_point_days = 0;
    double threshold = 0.5;
    metrics::ConfusionCounts confusion;        // at time_point_days
    std::size_t n_excluded = 0;                // censored before time_point_days
    std::vector<survival::CalibrationBin> calibration_bins;
    std::vector<survival::FeatureImportance> feature_importances;
    Protocol protocol;
};

// Throws on violated invariants: c_index in [0,1], exactly 10 bins spanning
// [0,1], bin counts summing to the evaluated population.
void validate(const EvalReport& r);

// Deterministic (sorted keys, no timestamps); undefined ratios emit null.
std::string report_to_json(const EvalReport& r);

struct LabeledCurve {
    std::string label;
    survival::SurvivalFunction curve;
};

// Long-format sidecar: label,time_days,survival with an explicit (0, 1) row
// per curve.
std::string curves_csv(const std::vector<LabeledCurve>& curves);
std::string curves_svg(const std::vector<LabeledCurve>& curves, const std::string& title);

// bin_lo,bin_hi,count,mean_predicted,observed_fraction; empty cells for
// empty bins.
std::string calibration_csv(const std::vector<survival::CalibrationBin>& bins);
std::string calibration_svg(const std::vector<survival::CalibrationBin>& bins, const std::string& title);

}  // namespace oncosurv::report
