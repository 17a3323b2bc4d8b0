#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cctrain/dataset.hpp"
#include "cctrain/errors.hpp"
#include "cctrain/importance.hpp"
#include "cctrain/rng.hpp"

using namespace cctrain;

namespace {

ImportanceTable table_of(std::initializer_list<std::pair<int, double>> betas) {
    ImportanceTable t;
    for (auto [id, b] : betas) t.insert(id, b);
    return t;
}

}  // namespace

TEST_SUITE("importance") {

TEST_CASE("objective reduces to the mean loss at beta = 1") {
    std::vector<int> ids{0, 1, 2};
    ImportanceTable t{ids};
    SampleLosses losses{{0, 0.5}, {1, 1.5}, {2, 2.5}};
    CHECK(importance_objective(losses, t, 0.37) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("objective hand cases") {
    // Single sample, beta = 0: only the regularizer remains.
    ImportanceTable t0 = table_of({{0, 0.0}});
    CHECK(importance_objective({{0, 5.0}}, t0, 0.1) == doctest::Approx(0.1).epsilon(1e-12));

    // (beta, loss) = (1, 1), (2, 2) with lambda 0: (1*1 + 4*2) / 2.
    ImportanceTable t1 = table_of({{0, 1.0}, {1, 2.0}});
    CHECK(importance_objective({{0, 1.0}, {1, 2.0}}, t1, 0.0) ==
          doctest::Approx(4.5).epsilon(1e-12));
}

TEST_CASE("objective requires table coverage") {
    ImportanceTable t = table_of({{0, 1.0}});
    CHECK_THROWS_AS(importance_objective({{7, 1.0}}, t, 0.1), ContractError);
}

TEST_CASE("zero loss at beta 1 is a fixed point") {
    ImportanceTable t = table_of({{0, 1.0}});
    ImportanceConfig cfg;
    update_importance(t, {{0, 0.0}}, cfg);
    CHECK(t.beta(0) == 1.0);
}

TEST_CASE("beta converges to lambda / (loss + lambda)") {
    ImportanceTable t = table_of({{0, 1.0}});
    ImportanceConfig cfg;  // lambda 0.1, lr 0.05, as_written
    int steps = 0;
    for (; steps < 500; ++steps) update_importance(t, {{0, 1.0}}, cfg);
    CHECK(std::abs(t.beta(0) - 0.1 / 1.1) <= 1e-3);
}

TEST_CASE("single as_written step with lambda 0") {
    ImportanceTable t = table_of({{0, 1.0}});
    ImportanceConfig cfg;
    cfg.lambda = 0.0;
    cfg.lr_beta = 0.1;
    update_importance(t, {{0, 1.0}}, cfg);
    CHECK(t.beta(0) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("narrative polarity raises beta on hard samples") {
    ImportanceTable t = table_of({{0, 1.0}});
    ImportanceConfig cfg;
    cfg.lambda = 0.0;
    cfg.lr_beta = 0.1;
    cfg.polarity = Polarity::narrative;
    update_importance(t, {{0, 1.0}}, cfg);
    CHECK(t.beta(0) == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("beta stays in [0, beta_max]") {
    ImportanceTable t = table_of({{0, 1.0}});
    ImportanceConfig cfg;
    cfg.lambda = 0.0;
    cfg.lr_beta = 10.0;
    update_importance(t, {{0, 100.0}}, cfg);
    CHECK(t.beta(0) == 0.0);

    cfg.polarity = Polarity::narrative;
    t = table_of({{0, 1.0}});
    for (int i = 0; i < 50; ++i) update_importance(t, {{0, 100.0}}, cfg);
    CHECK(t.beta(0) == cfg.beta_max);
}

TEST_CASE("analytic beta gradient matches central differences") {
    Rng rng(0xBE7A);
    for (int trial = 0; trial < 40; ++trial) {
        size_t n = 1 + rng.bounded(6);
        ImportanceTable t;
        SampleLosses losses;
        for (size_t i = 0; i < n; ++i) {
            t.insert(static_cast<int>(i), rng.uniform(0.0, 3.0));
            losses.emplace_back(static_cast<int>(i), rng.uniform(0.0, 4.0));
        }
        double lambda = rng.uniform(0.0, 0.5);
        Polarity polarity = rng.bounded(2) == 0 ? Polarity::as_written : Polarity::narrative;
        // The narrative gradient equals the literal objective's gradient with
        // the loss sign flipped, so one FD check covers both polarities.
        SampleLosses effective = losses;
        if (polarity == Polarity::narrative)
            for (auto& [lid, lv] : effective) lv = -lv;
        for (size_t i = 0; i < n; ++i) {
            int id = static_cast<int>(i);
            double beta = t.beta(id);
            double analytic = importance_gradient(beta, losses[i].second, lambda, n, polarity);
            const double step = 1e-6;
            t.set_beta(id, beta + step);
            double up = importance_objective(effective, t, lambda);
            t.set_beta(id, beta - step);
            double down = importance_objective(effective, t, lambda);
            t.set_beta(id, beta);
            double numeric = (up - down) / (2.0 * step);
            CHECK(std::abs(numeric - analytic) <= 1e-6);
        }
    }
}

TEST_CASE("threshold is the arithmetic mean") {
    CHECK(importance_threshold(table_of({{0, 1.0}, {1, 1.0}})) == 1.0);
    CHECK(importance_threshold(table_of({{0, 0.5}, {1, 1.5}})) == doctest::Approx(1.0));
    CHECK(importance_threshold(table_of({{0, 0.2}, {1, 0.4}, {2, 1.0}, {3, 2.4}})) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(importance_threshold(ImportanceTable{}), ContractError);
}

TEST_CASE("threshold selection is strict") {
    ImportanceTable all_one = table_of({{0, 1.0}, {1, 1.0}, {2, 1.0}});
    ReplaySelection sel = select_replay(all_one, ReplayMode::threshold, 0);
    CHECK(sel.sample_ids.empty());

    ImportanceTable two = table_of({{0, 0.5}, {1, 1.5}});
    sel = select_replay(two, ReplayMode::threshold, 0);
    REQUIRE(sel.sample_ids.size() == 1);
    CHECK(sel.sample_ids[0] == 1);
    CHECK(sel.epsilon == doctest::Approx(1.0));
}

TEST_CASE("fraction mode takes the top ceil(n/m) by beta") {
    ImportanceTable t;
    std::vector<double> betas{0.3, 2.0, 0.7, 1.9, 0.1, 1.1, 0.9, 0.5, 1.5, 0.2};
    for (int i = 0; i < 10; ++i) t.insert(i, betas[i]);
    ReplaySelection sel = select_replay(t, ReplayMode::fraction, 5);
    // Sort-and-take oracle: top-2 of the betas are ids 1 (2.0) and 3 (1.9).
    CHECK(sel.sample_ids == std::vector<int>{1, 3});

    // Ties broken by ascending id.
    ImportanceTable ties = table_of({{4, 1.0}, {2, 1.0}, {9, 1.0}, {7, 1.0}});
    sel = select_replay(ties, ReplayMode::fraction, 2);
    CHECK(sel.sample_ids == std::vector<int>{2, 4});
}

TEST_CASE("fraction selection is monotone in beta") {
    Rng rng(0x5E1);
    for (int trial = 0; trial < 30; ++trial) {
        ImportanceTable t;
        size_t n = 4 + rng.bounded(12);
        for (size_t i = 0; i < n; ++i) t.insert(static_cast<int>(i), rng.uniform(0.0, 2.0));
        int m = 2 + static_cast<int>(rng.bounded(3));
        ReplaySelection before = select_replay(t, ReplayMode::fraction, m);
        REQUIRE(!before.sample_ids.empty());
        int chosen = before.sample_ids[rng.bounded(before.sample_ids.size())];
        t.set_beta(chosen, t.beta(chosen) + rng.uniform(0.1, 1.0));
        ReplaySelection after = select_replay(t, ReplayMode::fraction, m);
        CHECK(std::find(after.sample_ids.begin(), after.sample_ids.end(), chosen) !=
              after.sample_ids.end());
    }
}

TEST_CASE("selection is always a subset of the table") {
    Rng rng(0x5E2);
    for (int trial = 0; trial < 30; ++trial) {
        ImportanceTable t;
        size_t n = 1 + rng.bounded(20);
        for (size_t i = 0; i < n; ++i)
            t.insert(static_cast<int>(rng.bounded(1000)), rng.uniform(0.0, 2.0));
        ReplayMode mode = rng.bounded(2) == 0 ? ReplayMode::threshold : ReplayMode::fraction;
        ReplaySelection sel = select_replay(t, mode, 3);
        for (int id : sel.sample_ids) CHECK(t.contains(id));
        CHECK(sel.sample_ids.size() <= t.size());
    }
    ImportanceTable t = table_of({{0, 0.4}, {1, 1.9}});
    CHECK(select_replay(t, ReplayMode::none, 1).sample_ids.empty());
}

TEST_CASE("beta table exports the expansion columns") {
    Dataset data;
    data.class_count = 2;
    data.feature_dim = 1;
    data.series.push_back(TimeSeries{"ser", {{0.0}, {1.0}}, 1});
    data.splits = {Split::train};
    auto samples = expand_prefixes(data, Split::train);
    ImportanceTable t{std::vector<int>{0, 1}};
    t.set_beta(1, 0.25);

    auto dir = std::filesystem::temp_directory_path() / "cctrain_tests";
    std::filesystem::create_directories(dir);
    std::string path = (dir / "betas.csv").string();
    export_beta_csv(t, data, samples, path);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "sample_id,series_id,t,beta");
    std::getline(in, line);
    CHECK(line == "0,ser,1,1");
    std::getline(in, line);
    CHECK(line == "1,ser,2,0.25");
}

}  // TEST_SUITE
