#include "cctrain/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cctrain/errors.hpp"
#include "cctrain/rng.hpp"

namespace cctrain {

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
    }
    return "?";
}

std::map<std::string, Split> Dataset::split_assignment() const {
    std::map<std::string, Split> out;
    for (size_t i = 0; i < series.size(); ++i) out[series[i].id] = splits[i];
    return out;
}

int Dataset::max_length() const {
    int t = 0;
    for (const auto& s : series) t = std::max(t, s.length());
    return t;
}

std::vector<int> Dataset::split_indices(Split s) const {
    std::vector<int> idx;
    for (size_t i = 0; i < series.size(); ++i)
        if (splits[i] == s) idx.push_back(static_cast<int>(i));
    std::sort(idx.begin(), idx.end(),
              [this](int a, int b) { return series[a].id < series[b].id; });
    return idx;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, size_t row) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw SchemaError("row " + std::to_string(row) + ": not a number: '" + s + "'");
    return v;
}

long parse_long(const std::string& s, size_t row) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw SchemaError("row " + std::to_string(row) + ": not an integer: '" + s + "'");
    return v;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

Dataset load_csv(const std::string& path, int class_count) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open file: " + path);
    if (class_count < 2) throw DomainError("class_count must be >= 2");

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto header = split_fields(line);
    const char* required[] = {"series_id", "t", "label"};
    for (size_t i = 0; i < 3; ++i) {
        if (header.size() <= i || header[i] != required[i])
            throw SchemaError("missing column '" + std::string(required[i]) + "'");
    }
    if (header.size() < 4) throw SchemaError("missing column 'f1'");
    int feature_dim = static_cast<int>(header.size()) - 3;
    for (int f = 0; f < feature_dim; ++f) {
        std::string want = "f" + std::to_string(f + 1);
        if (header[3 + f] != want) throw SchemaError("missing column '" + want + "'");
    }

    Dataset data;
    data.class_count = class_count;
    data.feature_dim = feature_dim;

    std::map<std::string, size_t> seen;  // id -> index in data.series
    size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw IntegrityError("row " + std::to_string(row) + ": expected " +
                                 std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
        const std::string& id = fields[0];
        long t = parse_long(fields[1], row);
        long label = parse_long(fields[2], row);
        if (label < 0 || label >= class_count)
            throw DomainError("row " + std::to_string(row) + ": label " + std::to_string(label) +
                              " outside {0.." + std::to_string(class_count - 1) + "}");

        auto it = seen.find(id);
        if (it == seen.end()) {
            if (t != 1)
                throw IntegrityError("series '" + id + "': first t is " + std::to_string(t) +
                                     ", expected 1");
            seen[id] = data.series.size();
            data.series.push_back(TimeSeries{id, {}, static_cast<int>(label)});
            it = seen.find(id);
        } else {
            TimeSeries& s = data.series[it->second];
            if (t != s.length() + 1)
                throw IntegrityError("series '" + id + "': t jumps from " +
                                     std::to_string(s.length()) + " to " + std::to_string(t));
            if (static_cast<int>(label) != s.label)
                throw IntegrityError("series '" + id + "': label changes at t=" +
                                     std::to_string(t));
        }
        std::vector<double> feats(feature_dim);
        for (int f = 0; f < feature_dim; ++f) feats[f] = parse_double(fields[3 + f], row);
        data.series[it->second].values.push_back(std::move(feats));
    }
    if (data.series.empty()) throw SchemaError("no data rows in " + path);
    data.splits.assign(data.series.size(), Split::train);
    return data;
}

void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw SchemaError("cannot write file: " + path);
    out << "series_id,t,label";
    for (int f = 0; f < data.feature_dim; ++f) out << ",f" << (f + 1);
    out << "\n";
    for (const auto& s : data.series) {
        for (int t = 0; t < s.length(); ++t) {
            out << s.id << ',' << (t + 1) << ',' << s.label;
            for (double v : s.values[t]) out << ',' << format_double(v);
            out << "\n";
        }
    }
}

Dataset generate_synthetic(const SynthSpec& spec, uint64_t seed) {
    if (spec.n_series <= 0) throw SpecError("n_series must be positive");
    if (spec.length <= 0) throw SpecError("length must be positive");
    if (spec.feature_dim <= 0) throw SpecError("feature_dim must be positive");
    if (spec.class_count < 2) throw SpecError("class_count must be >= 2");
    int regime_count = static_cast<int>(spec.regimes.size());
    if (regime_count < 2) throw SpecError("need at least 2 regimes");
    if (regime_count > spec.length)
        throw SpecError("more regimes (" + std::to_string(regime_count) + ") than time steps (" +
                        std::to_string(spec.length) + ")");
    for (const auto& r : spec.regimes) {
        if (static_cast<int>(r.class_means.size()) != spec.class_count ||
            static_cast<int>(r.class_stds.size()) != spec.class_count)
            throw SpecError("each regime needs one mean and std per class");
        for (double s : r.class_stds)
            if (!(s > 0.0)) throw SpecError("regime std must be positive");
    }

    // Regime index per time step; first (length % R) regimes get one extra step.
    std::vector<int> regime_of(spec.length);
    int base = spec.length / regime_count, extra = spec.length % regime_count;
    for (int r = 0, t = 0; r < regime_count; ++r) {
        int seg = base + (r < extra ? 1 : 0);
        for (int k = 0; k < seg; ++k) regime_of[t++] = r;
    }

    int width = static_cast<int>(std::to_string(spec.n_series - 1).size());
    Rng root = Rng(seed).child("synthetic");

    Dataset data;
    data.class_count = spec.class_count;
    data.feature_dim = spec.feature_dim;
    data.series.reserve(spec.n_series);
    for (int i = 0; i < spec.n_series; ++i) {
        int label = i % spec.class_count;
        std::string id = std::to_string(i);
        id = "s" + std::string(width - id.size(), '0') + id;

        Rng rng = root.child(static_cast<uint64_t>(i));
        TimeSeries s{std::move(id), {}, label};
        s.values.reserve(spec.length);
        std::vector<double> prev(spec.feature_dim, 0.0);
        for (int t = 0; t < spec.length; ++t) {
            const RegimeSpec& reg = spec.regimes[regime_of[t]];
            double mu = reg.class_means[label];
            double sd = reg.class_stds[label];
            std::vector<double> x(spec.feature_dim);
            for (int f = 0; f < spec.feature_dim; ++f) {
                double center = (t == 0) ? mu : mu + spec.ar_coeff * (prev[f] - mu);
                x[f] = center + sd * rng.normal();
            }
            prev = x;
            s.values.push_back(std::move(x));
        }
        data.series.push_back(std::move(s));
    }
    data.splits.assign(data.series.size(), Split::train);
    return data;
}

void assign_splits(Dataset& data, uint64_t seed, const SplitRatios& ratios) {
    size_t n = data.series.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return data.series[a].id < data.series[b].id; });
    Rng rng = Rng(seed).child("split");
    rng.shuffle(order);

    size_t n_valid = static_cast<size_t>(std::floor(ratios.valid * static_cast<double>(n)));
    size_t n_test = static_cast<size_t>(std::floor(ratios.test * static_cast<double>(n)));
    size_t n_train = n - n_valid - n_test;

    data.splits.assign(n, Split::train);
    for (size_t k = 0; k < n; ++k) {
        Split s = k < n_train ? Split::train : (k < n_train + n_valid ? Split::valid : Split::test);
        data.splits[order[k]] = s;
    }
}

void normalize_features(Dataset& data) {
    int d = data.feature_dim;
    std::vector<double> mean(d, 0.0), sq(d, 0.0);
    size_t count = 0;
    for (size_t i = 0; i < data.series.size(); ++i) {
        if (data.splits[i] != Split::train) continue;
        for (const auto& row : data.series[i].values) {
            for (int f = 0; f < d; ++f) {
                mean[f] += row[f];
                sq[f] += row[f] * row[f];
            }
            ++count;
        }
    }
    if (count == 0) return;
    std::vector<double> std_dev(d, 1.0);
    for (int f = 0; f < d; ++f) {
        mean[f] /= static_cast<double>(count);
        double var = sq[f] / static_cast<double>(count) - mean[f] * mean[f];
        std_dev[f] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    for (auto& s : data.series)
        for (auto& row : s.values)
            for (int f = 0; f < d; ++f) row[f] = (row[f] - mean[f]) / std_dev[f];
}

std::vector<PrefixSample> expand_prefixes(const Dataset& data, Split split) {
    std::vector<PrefixSample> out;
    int id = 0;
    for (int si : data.split_indices(split)) {
        const TimeSeries& s = data.series[si];
        for (int t = 1; t <= s.length(); ++t) out.push_back(PrefixSample{si, t, s.label, id++});
    }
    return out;
}

}  // namespace cctrain
