#include "cctrain/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cctrain/errors.hpp"
#include "cctrain/rng.hpp"

namespace cctrain {

OrderKind parse_order_kind(const std::string& name) {
    if (name == "confidence_asc") return OrderKind::confidence_asc;
    if (name == "confidence_desc") return OrderKind::confidence_desc;
    if (name == "time_asc") return OrderKind::time_asc;
    if (name == "time_desc") return OrderKind::time_desc;
    if (name == "difficulty_asc") return OrderKind::difficulty_asc;
    if (name == "difficulty_desc") return OrderKind::difficulty_desc;
    if (name == "uncertainty_asc") return OrderKind::uncertainty_asc;
    if (name == "uncertainty_desc") return OrderKind::uncertainty_desc;
    if (name == "random") return OrderKind::random;
    throw ConfigError("unknown order strategy '" + name + "'");
}

const char* order_kind_name(OrderKind kind) {
    switch (kind) {
        case OrderKind::confidence_asc: return "confidence_asc";
        case OrderKind::confidence_desc: return "confidence_desc";
        case OrderKind::time_asc: return "time_asc";
        case OrderKind::time_desc: return "time_desc";
        case OrderKind::difficulty_asc: return "difficulty_asc";
        case OrderKind::difficulty_desc: return "difficulty_desc";
        case OrderKind::uncertainty_asc: return "uncertainty_asc";
        case OrderKind::uncertainty_desc: return "uncertainty_desc";
        case OrderKind::random: return "random";
    }
    return "?";
}

namespace {

// One pass over `ids` in a shuffled order: a theta step on the beta^2
// weighted loss per minibatch, then a beta step on the same (detached)
// per-sample losses. Returns the mean weighted loss over the pass.
double train_epoch(ModelParams& params, const Dataset& data,
                   std::span<const PrefixSample> samples, const std::vector<int>& ids,
                   ImportanceTable& table, const TrainSettings& train,
                   const ImportanceConfig& importance, Rng shuffle_rng) {
    std::vector<int> order = ids;
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    size_t seen = 0;
    std::vector<PrefixSample> batch;
    std::vector<double> weights;
    SampleLosses losses;
    for (size_t start = 0; start < order.size(); start += train.batch_size) {
        size_t end = std::min(order.size(), start + train.batch_size);
        batch.clear();
        weights.clear();
        losses.clear();
        for (size_t k = start; k < end; ++k) {
            const PrefixSample& s = samples[order[k]];
            double b = table.beta(s.id);
            batch.push_back(s);
            weights.push_back(b * b);
        }
        BatchGradient res = backward(params, data, batch, weights);
        params = sgd_step(params, res.grad, train.learning_rate);
        for (size_t k = 0; k < batch.size(); ++k)
            losses.emplace_back(batch[k].id, res.loss.sample_ce[k]);
        update_importance(table, losses, importance);
        loss_sum += res.loss.value * static_cast<double>(batch.size());
        seen += batch.size();
    }
    return seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
}

}  // namespace

PretrainResult pretrain(const Dataset& data, std::span<const PrefixSample> samples, int hidden,
                        const TrainSettings& train, const ImportanceConfig& importance,
                        UncertaintyVariant variant, uint64_t model_seed) {
    if (samples.empty()) throw ContractError("pretrain needs a non-empty train split");

    // Group sample ids by prefix length.
    std::map<int, std::vector<int>> by_length;
    for (const PrefixSample& s : samples) by_length[s.t].push_back(s.id);

    std::vector<int> all_ids(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) all_ids[i] = samples[i].id;
    ImportanceTable table{all_ids};

    Rng root = Rng(model_seed).child("pretrain");
    PretrainResult result;
    result.teacher =
        init_params(data.feature_dim, hidden, data.class_count, root.child("init").state());

    for (const auto& [t, ids] : by_length) {
        train_epoch(result.teacher, data, samples, ids, table, train, importance,
                    root.child("epoch").child(static_cast<uint64_t>(t)));
        ++result.stages;
    }

    for (const PrefixSample& s : samples) {
        double b = table.beta(s.id);
        result.beta[s.id] = b;
        auto probs = forward(result.teacher, data, s);
        result.u_data[s.id] = data_uncertainty(probs, b, data.class_count, variant);
    }
    return result;
}

std::vector<double> sigma_band_cuts(double mean, double std_dev, int m) {
    if (m < 2) throw ContractError("sigma bands need m >= 2");
    std::vector<double> cuts(m - 1);
    if (m == 2) {
        cuts[0] = mean;
        return cuts;
    }
    for (int j = 0; j < m - 1; ++j) {
        double z = -1.5 + 3.0 * static_cast<double>(j) / static_cast<double>(m - 2);
        cuts[j] = mean + z * std_dev;
    }
    return cuts;
}

namespace {

CurriculumBucket make_bucket(int index, std::vector<int> ids,
                             const std::map<int, double>& scores,
                             std::span<const PrefixSample> samples) {
    CurriculumBucket b;
    b.index = index;
    b.sample_ids = std::move(ids);
    b.min_score = std::numeric_limits<double>::infinity();
    b.max_score = -std::numeric_limits<double>::infinity();
    for (int id : b.sample_ids) {
        double s = scores.at(id);
        b.mean_score += s;
        b.min_score = std::min(b.min_score, s);
        b.max_score = std::max(b.max_score, s);
        b.mean_prefix_len += samples[id].t;
    }
    double n = static_cast<double>(b.sample_ids.size());
    b.mean_score /= n;
    b.mean_prefix_len /= n;
    return b;
}

}  // namespace

std::vector<CurriculumBucket> build_buckets(const std::map<int, double>& scores, int m,
                                            BucketMode mode,
                                            std::span<const PrefixSample> samples) {
    if (m < 2) throw ConfigError("curriculum needs at least 2 buckets");
    if (scores.empty()) throw ContractError("no scores to bucket");
    if (static_cast<size_t>(m) > scores.size())
        throw ConfigError("more buckets (" + std::to_string(m) + ") than samples (" +
                          std::to_string(scores.size()) + ")");

    std::vector<std::pair<int, double>> rows(scores.begin(), scores.end());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });

    std::vector<std::vector<int>> groups;
    if (mode == BucketMode::quantile) {
        size_t n = rows.size();
        size_t base = n / m, extra = n % m;
        size_t pos = 0;
        for (int k = 0; k < m; ++k) {
            size_t take = base + (static_cast<size_t>(k) < extra ? 1 : 0);
            std::vector<int> ids;
            for (size_t i = 0; i < take; ++i) ids.push_back(rows[pos++].first);
            groups.push_back(std::move(ids));
        }
    } else {
        double mean = 0.0;
        for (const auto& [id, s] : rows) mean += s;
        mean /= static_cast<double>(rows.size());
        double var = 0.0;
        for (const auto& [id, s] : rows) var += (s - mean) * (s - mean);
        double std_dev =
            rows.size() > 1 ? std::sqrt(var / static_cast<double>(rows.size() - 1)) : 0.0;
        std::vector<double> cuts = sigma_band_cuts(mean, std_dev, m);
        groups.assign(m, {});
        for (const auto& [id, s] : rows) {
            size_t band = std::upper_bound(cuts.begin(), cuts.end(), s) - cuts.begin();
            groups[band].push_back(id);
        }
        // Dropping empty bands folds their (empty) range into the neighbors.
        groups.erase(std::remove_if(groups.begin(), groups.end(),
                                    [](const auto& g) { return g.empty(); }),
                     groups.end());
    }

    std::vector<CurriculumBucket> buckets;
    for (size_t k = 0; k < groups.size(); ++k)
        buckets.push_back(
            make_bucket(static_cast<int>(k) + 1, std::move(groups[k]), scores, samples));
    return buckets;
}

std::vector<CurriculumBucket> order_buckets(std::vector<CurriculumBucket> buckets, OrderKind kind,
                                            const ModelParams* teacher, const Dataset& data,
                                            std::span<const PrefixSample> samples,
                                            UncertaintyVariant variant, uint64_t seed) {
    if (buckets.empty()) return buckets;

    if (kind == OrderKind::random) {
        Rng rng = Rng(seed).child("order");
        rng.shuffle(buckets);
        return buckets;
    }

    bool ascending = kind == OrderKind::confidence_asc || kind == OrderKind::time_asc ||
                     kind == OrderKind::difficulty_asc || kind == OrderKind::uncertainty_asc;

    std::vector<double> score(buckets.size(), 0.0);
    switch (kind) {
        case OrderKind::confidence_asc:
        case OrderKind::confidence_desc:
            for (size_t k = 0; k < buckets.size(); ++k) score[k] = buckets[k].mean_score;
            break;
        case OrderKind::time_asc:
        case OrderKind::time_desc:
            for (size_t k = 0; k < buckets.size(); ++k) score[k] = buckets[k].mean_prefix_len;
            break;
        case OrderKind::difficulty_asc:
        case OrderKind::difficulty_desc: {
            if (!teacher) throw ConfigError("difficulty order needs a pretrained teacher");
            for (size_t k = 0; k < buckets.size(); ++k) {
                double acc = 0.0;
                for (int id : buckets[k].sample_ids) {
                    const PrefixSample& s = samples[id];
                    auto probs = forward(*teacher, data, s);
                    acc += -std::log(std::max(probs[s.label], 1e-12));
                }
                score[k] = acc / static_cast<double>(buckets[k].sample_ids.size());
            }
            break;
        }
        case OrderKind::uncertainty_asc:
        case OrderKind::uncertainty_desc: {
            if (!teacher) throw ConfigError("uncertainty order needs a pretrained teacher");
            for (size_t k = 0; k < buckets.size(); ++k) {
                double acc = 0.0;
                for (int id : buckets[k].sample_ids) {
                    auto probs = forward(*teacher, data, samples[id]);
                    acc += data_uncertainty(probs, 1.0, data.class_count, variant);
                }
                score[k] = acc / static_cast<double>(buckets[k].sample_ids.size());
            }
            break;
        }
        case OrderKind::random:
            break;
    }

    std::vector<size_t> perm(buckets.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](size_t a, size_t b) {
        return ascending ? score[a] < score[b] : score[a] > score[b];
    });
    std::vector<CurriculumBucket> out;
    out.reserve(buckets.size());
    for (size_t k : perm) out.push_back(std::move(buckets[k]));
    return out;
}

TrainResult run_training(ModelParams params, const Dataset& data,
                         std::span<const PrefixSample> samples,
                         const std::vector<CurriculumBucket>& buckets,
                         const TrainSettings& train, const ImportanceConfig& importance,
                         const ReplayConfig& replay, const UncertaintyConfig& uncertainty,
                         uint64_t model_seed, uint64_t dropout_seed) {
    if (buckets.empty()) throw SchedulingError("no buckets to train on", 1);

    TrainResult result;
    result.params = std::move(params);
    Rng model_rng = Rng(model_seed).child("train");
    Rng dropout_rng = Rng(dropout_seed).child("train");

    std::vector<int> buffer = buckets[0].sample_ids;
    std::vector<int> replayed;  // selection carried into the current stage
    int overlap_in = 0;         // ids of that selection already in the new bucket
    ImportanceTable table{buffer};

    for (size_t m = 0; m < buckets.size(); ++m) {
        int stage = static_cast<int>(m) + 1;
        if (buffer.empty()) throw SchedulingError("empty training buffer", stage);

        StageRecord stage_rec;
        stage_rec.stage = stage;
        stage_rec.bucket_index = buckets[m].index;
        stage_rec.buffer_size = static_cast<int>(buffer.size());
        stage_rec.new_count = static_cast<int>(buckets[m].sample_ids.size());
        stage_rec.replay_count = static_cast<int>(replayed.size());
        stage_rec.overlap_count = overlap_in;
        result.log.replayed_ids.push_back(replayed);

        std::vector<PrefixSample> buffer_samples;
        buffer_samples.reserve(buffer.size());
        for (int id : buffer) buffer_samples.push_back(samples[id]);

        ConfidenceHistory history;
        history.patience = uncertainty.patience;
        history.min_delta = uncertainty.min_delta;
        history.epoch_cap = uncertainty.epoch_cap;

        int epoch = 0;
        while (true) {
            ++epoch;
            double loss = train_epoch(result.params, data, samples, buffer, table, train,
                                      importance,
                                      model_rng.child(static_cast<uint64_t>(stage),
                                                      static_cast<uint64_t>(epoch)));
            UncertaintyReport report = total_uncertainty(
                result.params, data, buffer_samples, table, uncertainty, train.keep_rate,
                dropout_rng.child(static_cast<uint64_t>(stage), static_cast<uint64_t>(epoch))
                    .state());
            history.append(report.confidence);

            EpochRecord rec;
            rec.stage = stage;
            rec.epoch = epoch;
            rec.loss = loss;
            rec.confidence = report.confidence;
            rec.u_model = report.u_model;
            rec.u_data_mean = report.u_data_mean;
            rec.u_total = report.u_total;
            result.log.epochs.push_back(rec);
            ++result.log.total_epochs;

            if (should_stop(history)) break;
        }
        stage_rec.epochs = epoch;

        result.stage_params.push_back(result.params);
        result.stage_tables.push_back(table);

        if (m + 1 < buckets.size()) {
            ReplaySelection sel = select_replay(table, replay.mode, replay.fraction_m);
            stage_rec.epsilon = sel.epsilon;
            stage_rec.selected_count = static_cast<int>(sel.sample_ids.size());

            const std::vector<int>& next_ids = buckets[m + 1].sample_ids;
            std::vector<int> next_buffer = next_ids;
            ImportanceTable next_table{next_ids};
            overlap_in = 0;
            for (int id : sel.sample_ids) {
                if (next_table.contains(id)) {
                    // A replayed id arriving with the new bucket keeps its beta.
                    next_table.set_beta(id, table.beta(id));
                    ++overlap_in;
                } else {
                    next_buffer.push_back(id);
                    next_table.insert(id, table.beta(id));
                }
            }
            replayed = sel.sample_ids;
            buffer = std::move(next_buffer);
            table = std::move(next_table);
        }
        result.log.stages.push_back(stage_rec);
    }

    result.table = std::move(table);
    return result;
}

}  // namespace cctrain
