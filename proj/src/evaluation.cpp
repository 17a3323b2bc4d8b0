#include "cctrain/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cctrain/errors.hpp"
#include "cctrain/rng.hpp"

namespace cctrain {

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ContractError("scores and labels sizes differ");
    size_t n = scores.size();
    size_t positives = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw ContractError("auc_roc labels must be 0 or 1");
        positives += static_cast<size_t>(y);
    }
    size_t negatives = n - positives;
    if (positives == 0 || negatives == 0)
        throw MetricError("AUC undefined: only one class present");

    // Rank-sum formulation with midranks; equals the pairwise count exactly.
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double midrank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += midrank;
        i = j + 1;
    }
    double p = static_cast<double>(positives);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) /
           (p * static_cast<double>(negatives));
}

double macro_auc(const std::vector<PredictiveDistribution>& probs, std::span<const int> labels,
                 int class_count) {
    if (probs.size() != labels.size()) throw ContractError("probs and labels sizes differ");
    double total = 0.0;
    std::vector<double> scores(probs.size());
    std::vector<int> binary(probs.size());
    for (int c = 0; c < class_count; ++c) {
        for (size_t i = 0; i < probs.size(); ++i) {
            scores[i] = probs[i][c];
            binary[i] = labels[i] == c ? 1 : 0;
        }
        total += auc_roc(scores, binary);
    }
    return total / static_cast<double>(class_count);
}

AccuracyMatrix accuracy_matrix(const std::vector<ModelParams>& stage_params,
                               const std::vector<CurriculumBucket>& buckets, const Dataset& data,
                               std::span<const PrefixSample> samples, int baseline_models,
                               uint64_t baseline_seed) {
    if (stage_params.size() != buckets.size())
        throw ContractError("need one checkpoint per bucket");
    size_t m = buckets.size();
    AccuracyMatrix out;
    out.r.assign(m, std::vector<double>(m, 0.0));
    out.baseline.assign(m, 0.0);

    auto bucket_auc = [&](const ModelParams& p, const CurriculumBucket& bucket) {
        std::vector<PredictiveDistribution> probs;
        std::vector<int> labels;
        probs.reserve(bucket.sample_ids.size());
        for (int id : bucket.sample_ids) {
            probs.push_back(forward(p, data, samples[id]));
            labels.push_back(samples[id].label);
        }
        return macro_auc(probs, labels, data.class_count);
    };

    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < m; ++j) out.r[i][j] = bucket_auc(stage_params[i], buckets[j]);

    if (baseline_models < 1) throw ContractError("need at least one baseline model");
    Rng rng = Rng(baseline_seed).child("baseline");
    const ModelParams& ref = stage_params.front();
    for (int k = 0; k < baseline_models; ++k) {
        ModelParams fresh = init_params(ref.input_dim, ref.hidden, ref.classes,
                                        rng.child(static_cast<uint64_t>(k)).state());
        for (size_t j = 0; j < m; ++j) out.baseline[j] += bucket_auc(fresh, buckets[j]);
    }
    for (size_t j = 0; j < m; ++j) out.baseline[j] /= static_cast<double>(baseline_models);
    return out;
}

TransferMetrics transfer_metrics(const AccuracyMatrix& matrix) {
    size_t m = matrix.r.size();
    if (m < 2) throw ContractError("transfer metrics need at least 2 stages");
    for (const auto& row : matrix.r)
        if (row.size() != m) throw ContractError("accuracy matrix must be square");
    if (matrix.baseline.size() != m)
        throw ContractError("baseline vector must have one entry per stage");

    TransferMetrics out;
    for (size_t i = 0; i + 1 < m; ++i) out.bwt += matrix.r[m - 1][i] - matrix.r[i][i];
    for (size_t i = 1; i < m; ++i) out.fwt += matrix.r[i - 1][i] - matrix.baseline[i];
    out.bwt /= static_cast<double>(m - 1);
    out.fwt /= static_cast<double>(m - 1);
    return out;
}

PrefixProfile prefix_profile(const ModelParams& p, const Dataset& data, Split split) {
    std::vector<int> indices = data.split_indices(split);
    if (indices.empty()) throw ContractError("prefix profile over an empty split");

    PrefixProfile profile{};
    for (int step = 1; step <= 10; ++step) {
        int k = step * 10;
        std::vector<PredictiveDistribution> probs;
        std::vector<int> labels;
        probs.reserve(indices.size());
        for (int si : indices) {
            const TimeSeries& s = data.series[si];
            int t = std::max(1, s.length() * k / 100);
            PrefixSample sample{si, t, s.label, 0};
            probs.push_back(forward(p, data, sample));
            labels.push_back(s.label);
        }
        profile[step - 1] = macro_auc(probs, labels, data.class_count);
    }
    return profile;
}

double quantile_linear(std::span<const double> sorted_values, double q) {
    if (sorted_values.empty()) throw ContractError("quantile of an empty sample");
    if (q < 0.0 || q > 1.0) throw ContractError("quantile level outside [0, 1]");
    size_t n = sorted_values.size();
    if (n == 1) return sorted_values[0];
    double h = q * static_cast<double>(n - 1);
    size_t lo = static_cast<size_t>(std::floor(h));
    if (lo >= n - 1) return sorted_values[n - 1];
    double frac = h - static_cast<double>(lo);
    return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

IntervalReport prediction_interval(const std::vector<std::vector<double>>& samples_per_point,
                                   double alpha, std::span<const double> heldout) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("alpha outside (0, 1)");
    if (heldout.size() != samples_per_point.size())
        throw ContractError("need one held-out score per point");
    IntervalReport out;
    out.intervals.reserve(samples_per_point.size());
    size_t misses = 0;
    for (size_t i = 0; i < samples_per_point.size(); ++i) {
        if (samples_per_point[i].size() < 10)
            throw ContractError("prediction interval needs at least 10 samples per point");
        std::vector<double> sorted = samples_per_point[i];
        std::sort(sorted.begin(), sorted.end());
        PredictionInterval pi;
        pi.lo = quantile_linear(sorted, alpha / 2.0);
        pi.hi = quantile_linear(sorted, 1.0 - alpha / 2.0);
        if (heldout[i] < pi.lo || heldout[i] > pi.hi) ++misses;
        out.intervals.push_back(pi);
    }
    out.non_coverage =
        static_cast<double>(misses) / static_cast<double>(samples_per_point.size());
    return out;
}

}  // namespace cctrain
