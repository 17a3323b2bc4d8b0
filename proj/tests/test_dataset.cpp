#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "cctrain/dataset.hpp"
#include "cctrain/errors.hpp"
#include "cctrain/rng.hpp"

using namespace cctrain;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "cctrain_tests";
    fs::create_directories(dir);
    return (dir / name).string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
}

SynthSpec two_class_spec(int n, int t, int d, int regimes) {
    SynthSpec spec;
    spec.n_series = n;
    spec.length = t;
    spec.feature_dim = d;
    spec.class_count = 2;
    for (int r = 0; r < regimes; ++r) {
        double sep = 0.3 * (r + 1);
        spec.regimes.push_back(RegimeSpec{{-sep, sep}, {1.0, 1.0}});
    }
    return spec;
}

bool same_values(const Dataset& a, const Dataset& b) {
    if (a.series.size() != b.series.size()) return false;
    for (size_t i = 0; i < a.series.size(); ++i) {
        if (a.series[i].id != b.series[i].id) return false;
        if (a.series[i].label != b.series[i].label) return false;
        if (a.series[i].values != b.series[i].values) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("load_csv on a minimal two-row file") {
    std::string path = temp_path("minimal.csv");
    write_file(path, "series_id,t,label,f1\na,1,0,0.5\na,2,0,-1.25\n");
    Dataset data = load_csv(path, 2);
    CHECK(data.series.size() == 1);
    CHECK(data.feature_dim == 1);
    CHECK(data.series[0].length() == 2);
    CHECK(data.series[0].label == 0);
    CHECK(data.series[0].values[1][0] == -1.25);
}

TEST_CASE("load_csv rejects a gap in t") {
    std::string path = temp_path("gap.csv");
    write_file(path, "series_id,t,label,f1\na,1,0,0.5\na,3,0,0.5\n");
    CHECK_THROWS_AS(load_csv(path, 2), IntegrityError);
}

TEST_CASE("load_csv names the missing column") {
    std::string path = temp_path("noheader.csv");
    write_file(path, "series_id,time,label,f1\na,1,0,0.5\n");
    CHECK_THROWS_WITH_AS(load_csv(path, 2), doctest::Contains("'t'"), SchemaError);

    write_file(path, "series_id,t,f1\na,1,0.5\n");
    CHECK_THROWS_WITH_AS(load_csv(path, 2), doctest::Contains("'label'"), SchemaError);
}

TEST_CASE("load_csv rejects out-of-range labels") {
    std::string path = temp_path("badlabel.csv");
    write_file(path, "series_id,t,label,f1\na,1,2,0.5\n");
    CHECK_THROWS_AS(load_csv(path, 2), DomainError);
}

TEST_CASE("load_csv rejects ragged rows") {
    std::string path = temp_path("ragged.csv");
    write_file(path, "series_id,t,label,f1,f2\na,1,0,0.5,0.5\na,2,0,0.5\n");
    CHECK_THROWS_AS(load_csv(path, 2), IntegrityError);
}

TEST_CASE("load_csv rejects a label change inside one series") {
    std::string path = temp_path("labelflip.csv");
    write_file(path, "series_id,t,label,f1\na,1,0,0.5\na,2,1,0.5\n");
    CHECK_THROWS_AS(load_csv(path, 2), IntegrityError);
}

TEST_CASE("save/load round-trips bit-identically over random datasets") {
    Rng rng(20240811);
    std::string path = temp_path("roundtrip.csv");
    for (int trial = 0; trial < 100; ++trial) {
        SynthSpec spec = two_class_spec(1 + static_cast<int>(rng.bounded(8)),
                                        2 + static_cast<int>(rng.bounded(11)),
                                        1 + static_cast<int>(rng.bounded(4)), 2);
        Dataset data = generate_synthetic(spec, rng.next_u64());
        save_csv(data, path);
        Dataset back = load_csv(path, spec.class_count);
        REQUIRE(same_values(data, back));
    }
}

TEST_CASE("generate_synthetic balances classes and respects seeds") {
    SynthSpec spec = two_class_spec(600, 48, 3, 3);
    Dataset a = generate_synthetic(spec, 7);
    CHECK(a.series.size() == 600);
    int per_class[2] = {0, 0};
    for (const auto& s : a.series) ++per_class[s.label];
    CHECK(per_class[0] == 300);
    CHECK(per_class[1] == 300);

    Dataset b = generate_synthetic(spec, 7);
    CHECK(same_values(a, b));

    Dataset c = generate_synthetic(spec, 8);
    CHECK_FALSE(same_values(a, c));
}

TEST_CASE("generate_synthetic validates the spec") {
    SynthSpec spec = two_class_spec(4, 2, 1, 3);  // 3 regimes > 2 steps
    CHECK_THROWS_AS(generate_synthetic(spec, 1), SpecError);

    spec = two_class_spec(4, 8, 1, 2);
    spec.regimes[0].class_stds[1] = 0.0;
    CHECK_THROWS_AS(generate_synthetic(spec, 1), SpecError);
}

TEST_CASE("expand_prefixes enumerates every prefix once in order") {
    Dataset data = generate_synthetic(two_class_spec(2, 4, 1, 2), 3);
    data.splits = {Split::train, Split::train};
    auto samples = expand_prefixes(data, Split::train);
    CHECK(samples.size() == 8);
    for (size_t i = 0; i < samples.size(); ++i) CHECK(samples[i].id == static_cast<int>(i));
    CHECK(samples[0].t == 1);
    CHECK(samples[3].t == 4);
    CHECK(samples[0].series_index == samples[3].series_index);

    Dataset one = generate_synthetic(two_class_spec(1, 3, 1, 2), 3);
    one.splits = {Split::train};
    auto prefixes = expand_prefixes(one, Split::train);
    REQUIRE(prefixes.size() == 3);
    for (int t = 1; t <= 3; ++t) CHECK(prefixes[t - 1].t == t);

    CHECK(expand_prefixes(one, Split::test).empty());
}

TEST_CASE("prefix count identity and label inheritance on the benchmark set") {
    SynthSpec spec = two_class_spec(600, 48, 3, 3);
    Dataset data = generate_synthetic(spec, 7);
    assign_splits(data, 1);
    size_t total = 0;
    for (Split split : {Split::train, Split::valid, Split::test}) {
        auto samples = expand_prefixes(data, split);
        total += samples.size();
        for (const auto& s : samples) CHECK(s.label == data.series[s.series_index].label);
    }
    CHECK(total == 600u * 48u);
}

TEST_CASE("splits are deterministic, disjoint and exhaustive") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 1 + static_cast<int>(rng.bounded(40));
        Dataset data = generate_synthetic(two_class_spec(n, 5, 1, 2), rng.next_u64());
        uint64_t seed = rng.next_u64();
        assign_splits(data, seed);
        auto first = data.splits;
        assign_splits(data, seed);
        CHECK(first == data.splits);

        size_t n_train = data.split_indices(Split::train).size();
        size_t n_valid = data.split_indices(Split::valid).size();
        size_t n_test = data.split_indices(Split::test).size();
        CHECK(n_train + n_valid + n_test == static_cast<size_t>(n));
        CHECK(n_train >= 1);
    }
}

TEST_CASE("normalization uses train statistics only") {
    SynthSpec spec = two_class_spec(40, 12, 2, 2);
    // Shift everything far from zero so normalization has work to do.
    for (auto& r : spec.regimes)
        for (auto& m : r.class_means) m += 100.0;
    Dataset data = generate_synthetic(spec, 5);
    assign_splits(data, 2);
    normalize_features(data);

    for (int f = 0; f < data.feature_dim; ++f) {
        double mean = 0.0, sq = 0.0;
        size_t count = 0;
        for (size_t i = 0; i < data.series.size(); ++i) {
            if (data.splits[i] != Split::train) continue;
            for (const auto& row : data.series[i].values) {
                mean += row[f];
                sq += row[f] * row[f];
                ++count;
            }
        }
        mean /= static_cast<double>(count);
        double var = sq / static_cast<double>(count) - mean * mean;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-9);
    }
}

}  // TEST_SUITE
