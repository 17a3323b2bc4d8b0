#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "cctrain/dataset.hpp"
#include "cctrain/importance.hpp"
#include "cctrain/model.hpp"

namespace cctrain {

// `literal` scores a prediction with sum_c p_c * ln(1 - p_c); `entropy` uses
// the standard -p ln p. The literal form is non-positive, the entropy form
// non-negative; both rank uniform predictions as the most uncertain.
enum class UncertaintyVariant { literal, entropy };

struct UncertaintyConfig {
    int mc_passes = 20;
    UncertaintyVariant variant = UncertaintyVariant::literal;
    int patience = 5;
    double min_delta = 1e-3;
    int epoch_cap = 200;
};

struct UncertaintyReport {
    double u_model = 0.0;
    double u_data_mean = 0.0;  // raw (unnormalized) mean of the per-sample scores
    double u_total = 0.0;
    double confidence = 0.0;
    std::map<int, double> u_data_per_sample;  // raw per-sample scores
    UncertaintyVariant variant = UncertaintyVariant::literal;
    int mc_passes = 0;
    double keep_rate = 1.0;
};

// Unbiased (n-1) variance; exactly 0 when all values are equal.
double unbiased_variance(std::span<const double> values);

// Mean over samples of the variance across k_passes dropout passes of the
// true-class probability. Needs k_passes >= 2 and a non-empty bucket.
double model_uncertainty(const ModelParams& p, const Dataset& data,
                         std::span<const PrefixSample> samples, int k_passes, double keep_rate,
                         uint64_t seed);

// (beta / class_count) * sum_c p_c * ln(1 - p_c)   (literal), or
// (beta / class_count) * sum_c -p_c * ln(p_c)      (entropy).
// ln(1 - p) is clamped at ln(1e-12) as p approaches 1.
double data_uncertainty(const PredictiveDistribution& probs, double beta, int class_count,
                        UncertaintyVariant variant);

// Min-max normalization of per-sample scores onto [0, 1]; a degenerate
// bucket (min == max) maps every sample to 0.5.
std::vector<double> minmax_normalize(std::span<const double> values);

// u_total = u_model + mean(min-max normalized per-sample data uncertainty);
// confidence = 1 / (u_total + 1e-6). The raw data-uncertainty scores are
// sign-varying, so they are rescaled per bucket before entering the sum;
// within one bucket the rescaling is strictly monotone and leaves every
// plateau decision unchanged.
UncertaintyReport total_uncertainty(const ModelParams& p, const Dataset& data,
                                    std::span<const PrefixSample> samples,
                                    const ImportanceTable& table, const UncertaintyConfig& cfg,
                                    double keep_rate, uint64_t seed);

// Per-epoch confidence trace for one baby step.
struct ConfidenceHistory {
    std::vector<double> values;
    int patience = 5;
    double min_delta = 1e-3;
    int epoch_cap = 200;

    void append(double confidence) { values.push_back(confidence); }
    void clear() { values.clear(); }
};

// True once the best confidence has not improved by more than min_delta for
// `patience` consecutive epochs, or the epoch cap is reached.
bool should_stop(const ConfidenceHistory& history);

}  // namespace cctrain
