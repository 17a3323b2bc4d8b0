#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cctrain {

// One labeled multivariate series. `values` is T rows of d features.
struct TimeSeries {
    std::string id;
    std::vector<std::vector<double>> values;
    int label = 0;

    int length() const { return static_cast<int>(values.size()); }
};

enum class Split { train, valid, test };

const char* split_name(Split s);

struct SplitRatios {
    double train = 0.70;
    double valid = 0.15;
    double test = 0.15;
};

struct Dataset {
    std::vector<TimeSeries> series;
    int class_count = 0;
    int feature_dim = 0;
    // Parallel to `series`; filled by assign_splits.
    std::vector<Split> splits;

    std::map<std::string, Split> split_assignment() const;
    int max_length() const;
    // Indices of series in the given split, ordered by ascending series id.
    std::vector<int> split_indices(Split s) const;
};

// A prefix X_{1:t} of one series. A view: no values are copied.
struct PrefixSample {
    int series_index = 0;
    int t = 0;  // prefix length, 1-based
    int label = 0;
    int id = 0;  // position in the expansion that produced the sample
};

struct RegimeSpec {
    std::vector<double> class_means;  // one per class, broadcast over features
    std::vector<double> class_stds;
};

struct SynthSpec {
    int n_series = 0;
    int length = 0;
    int feature_dim = 1;
    int class_count = 2;
    std::vector<RegimeSpec> regimes;
    double ar_coeff = 0.6;
};

// Reads a dataset from the CSV contract: header `series_id,t,label,f1,...,fd`,
// rows grouped by series with contiguous 1-based t and a constant label.
// Splits are NOT assigned and features are NOT normalized; callers do both
// explicitly so that save/load round-trips are bit-identical.
Dataset load_csv(const std::string& path, int class_count);

void save_csv(const Dataset& data, const std::string& path);

// Deterministic multi-regime Gaussian AR(1) generator. Labels are assigned
// round-robin so classes are balanced within one sample. Regime r spans a
// contiguous block of time steps; its per-class mean/std drive the emitter
//   x_t = mu + ar_coeff * (x_{t-1} - mu) + std * eps_t
// so prefixes of different lengths see genuinely different distributions.
Dataset generate_synthetic(const SynthSpec& spec, uint64_t seed);

// Deterministic series-level split: ids are sorted, shuffled with the seed,
// then cut by the ratios. Never splits prefixes of one series across sets.
void assign_splits(Dataset& data, uint64_t seed, const SplitRatios& ratios = {});

// Per-feature z-normalization with statistics from the train split only.
void normalize_features(Dataset& data);

// All prefixes of the split's series, ordered by (series_id, t) ascending.
// Sample ids number the result 0..n-1.
std::vector<PrefixSample> expand_prefixes(const Dataset& data, Split split);

}  // namespace cctrain
