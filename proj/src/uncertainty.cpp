#include "cctrain/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cctrain/errors.hpp"
#include "cctrain/rng.hpp"

namespace cctrain {

namespace {
constexpr double kLogFloor = 1e-12;
constexpr double kConfidenceFloor = 1e-6;
}  // namespace

double unbiased_variance(std::span<const double> values) {
    size_t n = values.size();
    if (n < 2) throw ContractError("variance needs at least 2 values");
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(n - 1);
}

double model_uncertainty(const ModelParams& p, const Dataset& data,
                         std::span<const PrefixSample> samples, int k_passes, double keep_rate,
                         uint64_t seed) {
    if (k_passes < 2) throw ContractError("model uncertainty needs at least 2 passes");
    if (samples.empty()) throw ContractError("model uncertainty over an empty bucket");
    Rng root = Rng(seed).child("mc");
    double total = 0.0;
    std::vector<double> p_true(k_passes);
    for (const PrefixSample& s : samples) {
        auto passes = mc_predict(p, data, s, k_passes, keep_rate,
                                 root.child(static_cast<uint64_t>(s.id)).state());
        for (int k = 0; k < k_passes; ++k) p_true[k] = passes[k][s.label];
        total += unbiased_variance(p_true);
    }
    return total / static_cast<double>(samples.size());
}

double data_uncertainty(const PredictiveDistribution& probs, double beta, int class_count,
                        UncertaintyVariant variant) {
    if (beta < 0.0) throw ContractError("beta must be non-negative");
    if (static_cast<int>(probs.size()) != class_count)
        throw ContractError("distribution size does not match class count");
    if (beta == 0.0) return 0.0;
    double acc = 0.0;
    if (variant == UncertaintyVariant::literal) {
        for (double p : probs) acc += p * std::log(std::max(1.0 - p, kLogFloor));
    } else {
        for (double p : probs)
            if (p > 0.0) acc -= p * std::log(p);
    }
    return beta / static_cast<double>(class_count) * acc;
}

std::vector<double> minmax_normalize(std::span<const double> values) {
    std::vector<double> out(values.size());
    if (values.empty()) return out;
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    double range = *hi - *lo;
    for (size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
    return out;
}

UncertaintyReport total_uncertainty(const ModelParams& p, const Dataset& data,
                                    std::span<const PrefixSample> samples,
                                    const ImportanceTable& table, const UncertaintyConfig& cfg,
                                    double keep_rate, uint64_t seed) {
    if (samples.empty()) throw ContractError("total uncertainty over an empty bucket");
    UncertaintyReport report;
    report.variant = cfg.variant;
    report.mc_passes = cfg.mc_passes;
    report.keep_rate = keep_rate;
    report.u_model = model_uncertainty(p, data, samples, cfg.mc_passes, keep_rate, seed);

    std::vector<double> raw(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        auto probs = forward(p, data, samples[i]);
        raw[i] = data_uncertainty(probs, table.beta(samples[i].id), data.class_count, cfg.variant);
        report.u_data_per_sample[samples[i].id] = raw[i];
        report.u_data_mean += raw[i];
    }
    report.u_data_mean /= static_cast<double>(samples.size());

    std::vector<double> norm = minmax_normalize(raw);
    double norm_mean = 0.0;
    for (double v : norm) norm_mean += v;
    norm_mean /= static_cast<double>(norm.size());

    report.u_total = report.u_model + norm_mean;
    report.confidence = 1.0 / (report.u_total + kConfidenceFloor);
    return report;
}

bool should_stop(const ConfidenceHistory& history) {
    if (history.patience < 1) throw ContractError("patience must be >= 1");
    if (static_cast<int>(history.values.size()) >= history.epoch_cap) return true;
    double best = -std::numeric_limits<double>::infinity();
    int wait = 0;
    for (double v : history.values) {
        if (v > best + history.min_delta) {
            best = v;
            wait = 0;
        } else {
            ++wait;
        }
        if (wait >= history.patience) return true;
    }
    return false;
}

}  // namespace cctrain
