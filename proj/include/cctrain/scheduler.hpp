#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cctrain/dataset.hpp"
#include "cctrain/importance.hpp"
#include "cctrain/model.hpp"
#include "cctrain/uncertainty.hpp"

namespace cctrain {

// One baby step: a set of sample ids plus its data-uncertainty statistics.
struct CurriculumBucket {
    int index = 0;  // 1-based position in the ascending-uncertainty order
    std::vector<int> sample_ids;
    double mean_score = 0.0;
    double min_score = 0.0;
    double max_score = 0.0;
    double mean_prefix_len = 0.0;
};

enum class BucketMode { quantile, sigma_band };

struct TrainSettings {
    double learning_rate = 0.05;
    int batch_size = 32;
    double keep_rate = 0.9;
};

struct ReplayConfig {
    ReplayMode mode = ReplayMode::threshold;
    int fraction_m = 4;
};

enum class OrderKind {
    confidence_asc,
    confidence_desc,
    time_asc,
    time_desc,
    difficulty_asc,
    difficulty_desc,
    uncertainty_asc,
    uncertainty_desc,
    random,
};

OrderKind parse_order_kind(const std::string& name);
const char* order_kind_name(OrderKind kind);

struct PretrainResult {
    std::map<int, double> beta;    // sample_id -> final beta
    std::map<int, double> u_data;  // sample_id -> Eq.-5 score under the teacher
    ModelParams teacher;
    int stages = 0;  // number of prefix-length stages trained
};

// Data-arrangement pass: a throwaway model is trained one epoch per
// prefix-length stage t = 1..T with the importance objective (theta and beta
// updated alternately), then every sample is scored with its final beta.
PretrainResult pretrain(const Dataset& data, std::span<const PrefixSample> samples,
                        int hidden, const TrainSettings& train, const ImportanceConfig& importance,
                        UncertaintyVariant variant, uint64_t model_seed);

// Cut points mu + z * sigma for m - 1 equally spaced z in [-1.5, 1.5].
std::vector<double> sigma_band_cuts(double mean, double std_dev, int m);

// Partition samples into at most m buckets sorted by ascending score.
// quantile: equal-frequency buckets, ties broken by sample id. sigma_band:
// a normal fit is cut at sigma_band_cuts; empty bands are dropped, which
// merges their range into the nearest populated neighbor.
std::vector<CurriculumBucket> build_buckets(const std::map<int, double>& scores, int m,
                                            BucketMode mode,
                                            std::span<const PrefixSample> samples);

// Sort buckets by the strategy's per-bucket mean score. `confidence` reuses
// the pretrain scores already attached to the buckets; `uncertainty` rescores
// with beta = 1 under the teacher; `difficulty` uses the teacher's per-sample
// loss; `time` uses mean prefix length; `random` shuffles with the seed.
std::vector<CurriculumBucket> order_buckets(std::vector<CurriculumBucket> buckets, OrderKind kind,
                                            const ModelParams* teacher, const Dataset& data,
                                            std::span<const PrefixSample> samples,
                                            UncertaintyVariant variant, uint64_t seed);

struct EpochRecord {
    int stage = 0;  // 1-based
    int epoch = 0;  // 1-based within the stage
    double loss = 0.0;
    double confidence = 0.0;
    double u_model = 0.0;
    double u_data_mean = 0.0;
    double u_total = 0.0;
};

struct StageRecord {
    int stage = 0;
    int bucket_index = 0;  // original ascending-uncertainty index
    int epochs = 0;
    int buffer_size = 0;
    int new_count = 0;
    int replay_count = 0;
    int overlap_count = 0;     // ids arriving both as new and replayed
    double epsilon = 0.0;      // threshold used when leaving this stage
    int selected_count = 0;    // replay selection carried to the next stage
};

struct RunLog {
    std::vector<EpochRecord> epochs;
    std::vector<StageRecord> stages;
    // Sample ids replayed INTO each stage (empty for stage 1).
    std::vector<std::vector<int>> replayed_ids;
    int total_epochs = 0;
};

struct TrainResult {
    ModelParams params;
    RunLog log;
    // Checkpoint after each stage, in training order.
    std::vector<ModelParams> stage_params;
    // Final importance table (covers the last buffer).
    ImportanceTable table;
    // Beta table snapshot per stage.
    std::vector<ImportanceTable> stage_tables;
};

// Staged training loop: for each bucket in order, train on the buffer with
// the importance objective until the confidence plateau, then carry the
// replay selection into the next bucket's buffer. Replayed samples keep
// their beta; new samples start at 1.
TrainResult run_training(ModelParams params, const Dataset& data,
                         std::span<const PrefixSample> samples,
                         const std::vector<CurriculumBucket>& buckets,
                         const TrainSettings& train, const ImportanceConfig& importance,
                         const ReplayConfig& replay, const UncertaintyConfig& uncertainty,
                         uint64_t model_seed, uint64_t dropout_seed);

}  // namespace cctrain
