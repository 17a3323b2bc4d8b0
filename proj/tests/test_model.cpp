#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "cctrain/dataset.hpp"
#include "cctrain/errors.hpp"
#include "cctrain/model.hpp"
#include "cctrain/rng.hpp"

using namespace cctrain;

namespace {

// Random dataset with a single split-free series set; all series in train.
Dataset random_dataset(Rng& rng, int n, int t_max, int d, int classes) {
    Dataset data;
    data.class_count = classes;
    data.feature_dim = d;
    for (int i = 0; i < n; ++i) {
        TimeSeries s;
        s.id = "s" + std::to_string(i);
        s.label = static_cast<int>(rng.bounded(classes));
        int t = 1 + static_cast<int>(rng.bounded(t_max));
        for (int k = 0; k < t; ++k) {
            std::vector<double> row(d);
            for (double& v : row) v = rng.normal();
            s.values.push_back(std::move(row));
        }
        data.series.push_back(std::move(s));
    }
    data.splits.assign(n, Split::train);
    return data;
}

std::vector<PrefixSample> full_prefixes(const Dataset& data) {
    return expand_prefixes(data, Split::train);
}

// Independent scalar re-implementation of the weighted batch loss used as an
// oracle: plain loops over forward() outputs, separate accumulation order.
double oracle_batch_loss(const ModelParams& p, const Dataset& data,
                         const std::vector<PrefixSample>& batch,
                         const std::vector<double>& weights) {
    std::vector<double> terms;
    for (size_t i = 0; i < batch.size(); ++i) {
        auto probs = forward(p, data, batch[i]);
        double p_true = std::max(probs[batch[i].label], 1e-12);
        terms.push_back(weights[i] * -std::log(p_true));
    }
    double acc = 0.0;
    for (auto it = terms.rbegin(); it != terms.rend(); ++it) acc += *it;
    return acc / static_cast<double>(terms.size());
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("zero parameters give the uniform distribution") {
    Rng rng(1);
    Dataset data = random_dataset(rng, 2, 5, 3, 4);
    ModelParams p = zero_params(3, 8, 4);
    auto samples = full_prefixes(data);
    auto probs = forward(p, data, samples[0]);
    for (double v : probs) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("keep rate 1 mask is exactly the identity") {
    Rng rng(2);
    Dataset data = random_dataset(rng, 1, 6, 2, 2);
    ModelParams p = init_params(2, 5, 2, 42);
    auto samples = full_prefixes(data);
    DropoutMask mask = make_dropout_mask(5, 1.0, 7);
    auto with_mask = forward(p, data, samples.back(), &mask);
    auto without = forward(p, data, samples.back());
    CHECK(with_mask == without);
}

TEST_CASE("same mask seed replays bit-identical probabilities") {
    Rng rng(3);
    Dataset data = random_dataset(rng, 1, 6, 2, 3);
    ModelParams p = init_params(2, 6, 3, 11);
    auto samples = full_prefixes(data);
    DropoutMask a = make_dropout_mask(6, 0.7, 123);
    DropoutMask b = make_dropout_mask(6, 0.7, 123);
    CHECK(a.scale == b.scale);
    CHECK(forward(p, data, samples.back(), &a) == forward(p, data, samples.back(), &b));
}

TEST_CASE("probability simplex holds on random instances") {
    Rng rng(4);
    for (int trial = 0; trial < 25; ++trial) {
        int d = 1 + static_cast<int>(rng.bounded(3));
        int classes = 2 + static_cast<int>(rng.bounded(3));
        Dataset data = random_dataset(rng, 2, 6, d, classes);
        ModelParams p = init_params(d, 4, classes, rng.next_u64());
        for (const auto& s : full_prefixes(data)) {
            auto probs = forward(p, data, s);
            double sum = 0.0;
            for (double v : probs) {
                CHECK(v >= 0.0);
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("uniform two-class cross-entropy is ln 2") {
    Rng rng(5);
    Dataset data = random_dataset(rng, 1, 3, 2, 2);
    ModelParams p = zero_params(2, 4, 2);
    auto samples = full_prefixes(data);
    std::vector<PrefixSample> batch{samples[0]};
    std::vector<double> weights{1.0};
    BatchLoss loss = weighted_batch_loss(p, data, batch, weights);
    CHECK(loss.value == doctest::Approx(0.6931471805599453).epsilon(1e-12));
    CHECK(loss.clamp_count == 0);
}

TEST_CASE("zero weights annihilate the loss") {
    Rng rng(6);
    Dataset data = random_dataset(rng, 3, 4, 2, 2);
    ModelParams p = init_params(2, 4, 2, 9);
    auto samples = full_prefixes(data);
    std::vector<double> weights(samples.size(), 0.0);
    BatchLoss loss = weighted_batch_loss(p, data, samples, weights);
    CHECK(loss.value == 0.0);
}

TEST_CASE("batch loss matches an independent scalar recomputation") {
    Rng rng(7);
    Dataset data = random_dataset(rng, 5, 4, 2, 3);
    ModelParams p = init_params(2, 5, 3, 13);
    auto samples = full_prefixes(data);
    std::vector<PrefixSample> batch(samples.begin(), samples.begin() + 5);
    std::vector<double> weights;
    for (int i = 0; i < 5; ++i) weights.push_back(rng.uniform(0.0, 2.0));
    BatchLoss loss = weighted_batch_loss(p, data, batch, weights);
    CHECK(loss.value ==
          doctest::Approx(oracle_batch_loss(p, data, batch, weights)).epsilon(1e-10));
}

TEST_CASE("batch loss equals the weighted mean of single-sample losses") {
    Rng rng(8);
    Dataset data = random_dataset(rng, 6, 5, 3, 2);
    ModelParams p = init_params(3, 6, 2, 21);
    auto samples = full_prefixes(data);
    std::vector<PrefixSample> batch(samples.begin(), samples.begin() + 6);
    std::vector<double> weights;
    for (int i = 0; i < 6; ++i) weights.push_back(rng.uniform(0.0, 3.0));
    double mean_of_singles = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
        std::vector<PrefixSample> one{batch[i]};
        std::vector<double> w{weights[i]};
        mean_of_singles += weighted_batch_loss(p, data, one, w).value;
    }
    mean_of_singles /= static_cast<double>(batch.size());
    BatchLoss loss = weighted_batch_loss(p, data, batch, weights);
    CHECK(std::abs(loss.value - mean_of_singles) <= 1e-10);
}

TEST_CASE("zero weights give a zero gradient") {
    Rng rng(9);
    Dataset data = random_dataset(rng, 2, 4, 2, 2);
    ModelParams p = init_params(2, 4, 2, 31);
    auto samples = full_prefixes(data);
    std::vector<double> weights(samples.size(), 0.0);
    BatchGradient res = backward(p, data, samples, weights);
    for (auto& [name, span] : tensor_views(res.grad))
        for (double v : span) CHECK(v == 0.0);
}

TEST_CASE("gradient matches central finite differences on tiny instances") {
    Rng rng(0xFD1);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        int d = 1 + static_cast<int>(rng.bounded(3));
        int hidden = 2 + static_cast<int>(rng.bounded(4));
        int classes = 2 + static_cast<int>(rng.bounded(2));
        Dataset data = random_dataset(rng, 2, 4, d, classes);
        ModelParams p = init_params(d, hidden, classes, rng.next_u64());
        auto samples = full_prefixes(data);
        std::vector<double> weights;
        for (size_t i = 0; i < samples.size(); ++i) weights.push_back(rng.uniform(0.1, 2.0));

        BatchGradient res = backward(p, data, samples, weights);
        auto grad_views = tensor_views(res.grad);
        auto param_views = tensor_views(p);
        const double step = 1e-5;
        for (size_t k = 0; k < param_views.size(); ++k) {
            for (size_t i = 0; i < param_views[k].second.size(); ++i) {
                double saved = param_views[k].second[i];
                param_views[k].second[i] = saved + step;
                double up = weighted_batch_loss(p, data, samples, weights).value;
                param_views[k].second[i] = saved - step;
                double down = weighted_batch_loss(p, data, samples, weights).value;
                param_views[k].second[i] = saved;
                double numeric = (up - down) / (2.0 * step);
                double analytic = grad_views[k].second[i];
                double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
                worst = std::max(worst, std::abs(numeric - analytic) / denom);
            }
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("duplicating a sample matches the oracle over the larger batch") {
    Rng rng(10);
    Dataset data = random_dataset(rng, 3, 4, 2, 2);
    ModelParams p = init_params(2, 4, 2, 51);
    auto samples = full_prefixes(data);
    std::vector<PrefixSample> batch{samples[0], samples[1], samples[0]};
    std::vector<double> weights{1.0, 0.5, 1.5};
    BatchGradient res = backward(p, data, batch, weights);
    CHECK(res.loss.value ==
          doctest::Approx(oracle_batch_loss(p, data, batch, weights)).epsilon(1e-10));

    // Same check through finite differences on one tensor.
    auto grad_views = tensor_views(res.grad);
    auto param_views = tensor_views(p);
    const double step = 1e-5;
    size_t k = 9;  // head weights
    for (size_t i = 0; i < param_views[k].second.size(); ++i) {
        double saved = param_views[k].second[i];
        param_views[k].second[i] = saved + step;
        double up = oracle_batch_loss(p, data, batch, weights);
        param_views[k].second[i] = saved - step;
        double down = oracle_batch_loss(p, data, batch, weights);
        param_views[k].second[i] = saved;
        double numeric = (up - down) / (2.0 * step);
        CHECK(grad_views[k].second[i] == doctest::Approx(numeric).epsilon(1e-4));
    }
}

TEST_CASE("sgd_step basics") {
    ModelParams p = init_params(2, 3, 2, 61);
    ModelParams zero_grad = zero_params(2, 3, 2);
    ModelParams same = sgd_step(p, zero_grad, 0.1);
    for (size_t k = 0; k < tensor_views(p).size(); ++k)
        CHECK(tensor_views(same)[k].second[0] == tensor_views(p)[k].second[0]);

    ModelParams zeroed = sgd_step(p, p, 1.0);
    for (auto& [name, span] : tensor_views(zeroed))
        for (double v : span) CHECK(v == 0.0);
}

TEST_CASE("sgd_step drives a scalar quadratic to its minimum") {
    // Treat one head bias entry as the scalar w and minimize (w - 3)^2.
    ModelParams p = zero_params(1, 2, 2);
    for (int step = 0; step < 200; ++step) {
        ModelParams grad = zero_params(1, 2, 2);
        grad.b_head[0] = 2.0 * (p.b_head[0] - 3.0);
        p = sgd_step(p, grad, 0.1);
    }
    CHECK(std::abs(p.b_head[0] - 3.0) <= 1e-6);
}

TEST_CASE("mc_predict with keep rate 1 repeats one distribution") {
    Rng rng(11);
    Dataset data = random_dataset(rng, 1, 5, 2, 3);
    ModelParams p = init_params(2, 5, 3, 71);
    auto samples = full_prefixes(data);
    auto passes = mc_predict(p, data, samples.back(), 8, 1.0, 5);
    for (const auto& probs : passes) CHECK(probs == passes[0]);
    CHECK(passes[0] == forward(p, data, samples.back()));
}

TEST_CASE("mc_predict K=1 equals a single masked forward") {
    Rng rng(12);
    Dataset data = random_dataset(rng, 1, 5, 2, 2);
    ModelParams p = init_params(2, 6, 2, 81);
    auto samples = full_prefixes(data);
    uint64_t seed = 909;
    auto passes = mc_predict(p, data, samples.back(), 1, 0.6, seed);
    DropoutMask mask = make_dropout_mask(6, 0.6, Rng(seed).child(0).state());
    CHECK(passes[0] == forward(p, data, samples.back(), &mask));
}

TEST_CASE("mc_predict replays the same seed stream exactly") {
    Rng rng(13);
    Dataset data = random_dataset(rng, 1, 6, 3, 2);
    ModelParams p = init_params(3, 8, 2, 91);
    auto samples = full_prefixes(data);
    auto a = mc_predict(p, data, samples.back(), 30, 0.9, 4242);
    auto b = mc_predict(p, data, samples.back(), 30, 0.9, 4242);
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);

    // Per-class variance agrees with an independent two-pass recomputation.
    for (int c = 0; c < 2; ++c) {
        double mean = 0.0;
        for (const auto& probs : a) mean += probs[c];
        mean /= static_cast<double>(a.size());
        double var = 0.0;
        for (const auto& probs : a) var += (probs[c] - mean) * (probs[c] - mean);
        var /= static_cast<double>(a.size() - 1);

        double mean_b = 0.0;
        for (const auto& probs : b) mean_b += probs[c];
        mean_b /= static_cast<double>(b.size());
        double var_b = 0.0;
        for (const auto& probs : b) var_b += (probs[c] - mean_b) * (probs[c] - mean_b);
        var_b /= static_cast<double>(b.size() - 1);
        CHECK(std::abs(var - var_b) <= 1e-12);
    }
}

TEST_CASE("non-finite intermediates raise a numeric error with the step") {
    Rng rng(14);
    Dataset data = random_dataset(rng, 1, 4, 2, 2);
    ModelParams p = init_params(2, 4, 2, 101);
    p.u_cand(0, 0) = std::numeric_limits<double>::quiet_NaN();
    auto samples = full_prefixes(data);
    try {
        forward(p, data, samples.back());
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.step() == 1);
    }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    ModelParams p = init_params(3, 7, 2, 111);
    std::string path =
        (std::filesystem::temp_directory_path() / "cctrain_tests" / "model.ckpt").string();
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    save_checkpoint(p, path);
    ModelParams q = load_checkpoint(path);
    auto pv = tensor_views(p);
    auto qv = tensor_views(q);
    for (size_t k = 0; k < pv.size(); ++k) {
        REQUIRE(pv[k].second.size() == qv[k].second.size());
        for (size_t i = 0; i < pv[k].second.size(); ++i)
            CHECK(pv[k].second[i] == qv[k].second[i]);
    }
    CHECK(checkpoint_to_string(p) == checkpoint_to_string(q));
}

}  // TEST_SUITE
