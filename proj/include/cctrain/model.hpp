#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cctrain/dataset.hpp"

namespace cctrain {

struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

using Vec = std::vector<double>;

// Probability vector over classes; non-negative, sums to 1.
using PredictiveDistribution = std::vector<double>;

// Single-layer gated recurrent cell (update + reset gates) with a linear
// softmax head. Gradients are derived by hand, so the layout stays explicit.
struct ModelParams {
    int input_dim = 0;
    int hidden = 0;
    int classes = 0;
    Mat w_update, w_reset, w_cand;  // hidden x input_dim
    Mat u_update, u_reset, u_cand;  // hidden x hidden
    Vec b_update, b_reset, b_cand;  // hidden
    Mat w_head;                     // classes x hidden
    Vec b_head;                     // classes
};

ModelParams zero_params(int input_dim, int hidden, int classes);

// Uniform(-1/sqrt(H), 1/sqrt(H)) initialization from the given seed.
ModelParams init_params(int input_dim, int hidden, int classes, uint64_t seed);

// Named views over every tensor, in a fixed order shared by the optimizer,
// the checkpoint format and the finite-difference tests.
std::vector<std::pair<std::string, std::span<double>>> tensor_views(ModelParams& p);
std::vector<std::pair<std::string, std::span<const double>>> tensor_views(const ModelParams& p);

// Per-hidden-unit multiplier: 0 for dropped units, 1/keep_rate for kept ones
// (inverted dropout, so keep_rate = 1 is exactly the identity).
struct DropoutMask {
    Vec scale;
    double keep_rate = 1.0;
    uint64_t seed = 0;
};

DropoutMask make_dropout_mask(int hidden, double keep_rate, uint64_t seed);

// Softmax prediction for one prefix. The mask, when given, is applied to the
// final hidden state only. Throws NumericError if a hidden state goes
// non-finite, carrying the 1-based time step.
PredictiveDistribution forward(const ModelParams& p, const Dataset& data, const PrefixSample& s,
                               const DropoutMask* mask = nullptr);

struct BatchLoss {
    double value = 0.0;
    // Unweighted cross-entropy per sample, in batch order.
    std::vector<double> sample_ce;
    // Number of true-class probabilities clamped at 1e-12.
    int clamp_count = 0;
};

// Mean over the batch of weight * CE(forward(x), label).
BatchLoss weighted_batch_loss(const ModelParams& p, const Dataset& data,
                              std::span<const PrefixSample> batch, std::span<const double> weights);

struct BatchGradient {
    ModelParams grad;  // same shapes as the parameters
    BatchLoss loss;
};

// Analytic gradient of weighted_batch_loss via backpropagation through time.
BatchGradient backward(const ModelParams& p, const Dataset& data,
                       std::span<const PrefixSample> batch, std::span<const double> weights);

ModelParams sgd_step(const ModelParams& p, const ModelParams& grad, double learning_rate);

// K stochastic forward passes; pass k uses an independent mask drawn from
// child stream k of rng_seed.
std::vector<PredictiveDistribution> mc_predict(const ModelParams& p, const Dataset& data,
                                               const PrefixSample& s, int k_passes,
                                               double keep_rate, uint64_t rng_seed);

// Versioned JSON checkpoint; round-trips bit-exactly.
void save_checkpoint(const ModelParams& p, const std::string& path);
ModelParams load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const ModelParams& p);
ModelParams checkpoint_from_string(const std::string& text);

}  // namespace cctrain
