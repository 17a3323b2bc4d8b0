#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cctrain/dataset.hpp"
#include "cctrain/model.hpp"
#include "cctrain/scheduler.hpp"

namespace cctrain {

// Mann-Whitney AUC: P(score+ > score-) + 0.5 P(tie), exact under ties.
// Throws MetricError unless both classes are present.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

// One-vs-rest macro average over classes; equals auc_roc for two classes.
double macro_auc(const std::vector<PredictiveDistribution>& probs, std::span<const int> labels,
                 int class_count);

// R[i][j]: accuracy (AUC) on bucket j at the checkpoint taken after stage i.
// baseline[j]: mean accuracy of fresh untrained models on bucket j.
struct AccuracyMatrix {
    std::vector<std::vector<double>> r;
    std::vector<double> baseline;
};

AccuracyMatrix accuracy_matrix(const std::vector<ModelParams>& stage_params,
                               const std::vector<CurriculumBucket>& buckets, const Dataset& data,
                               std::span<const PrefixSample> samples, int baseline_models,
                               uint64_t baseline_seed);

struct TransferMetrics {
    double bwt = 0.0;
    double fwt = 0.0;
};

// BWT = mean_i (R[M][i] - R[i][i]) over i < M;
// FWT = mean_i (R[i-1][i] - baseline[i]) over i >= 2.
TransferMetrics transfer_metrics(const AccuracyMatrix& matrix);

// AUC at prefix fractions 10%..100% of each series' length (min prefix 1).
using PrefixProfile = std::array<double, 10>;

PrefixProfile prefix_profile(const ModelParams& p, const Dataset& data, Split split);

// Linear-interpolation quantile over sorted values (R type 7).
double quantile_linear(std::span<const double> sorted_values, double q);

struct PredictionInterval {
    double lo = 0.0;
    double hi = 0.0;
};

struct IntervalReport {
    std::vector<PredictionInterval> intervals;
    double non_coverage = 0.0;  // fraction of held-out scores outside their interval
};

// Per-point interval = empirical [alpha/2, 1-alpha/2] quantiles of that
// point's predictive samples; non-coverage judged on `heldout`, one score
// per point.
IntervalReport prediction_interval(const std::vector<std::vector<double>>& samples_per_point,
                                   double alpha, std::span<const double> heldout);

}  // namespace cctrain
