#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cctrain/config.hpp"
#include "cctrain/dataset.hpp"
#include "cctrain/evaluation.hpp"
#include "cctrain/scheduler.hpp"

namespace cctrain {

// Stable id of a resolved config; used to tag every metrics record.
std::string run_id_for(const RunConfig& cfg);

// Dataset per the config: generated or loaded, split, optionally normalized.
Dataset build_dataset(const RunConfig& cfg);

struct PipelineResult {
    Dataset data;
    std::vector<PrefixSample> train_samples;
    std::vector<CurriculumBucket> buckets;          // ascending uncertainty
    std::vector<CurriculumBucket> ordered_buckets;  // training order
    PretrainResult pre;
    TrainResult train;
    double wall_seconds = 0.0;
    std::string run_dir;  // empty when not persisted
};

// Full training pipeline: dataset, pretrain, buckets, ordering, staged
// training. When run_dir is non-empty, persists config.json, metrics.jsonl,
// buckets.csv, betas/stage-*.csv, checkpoints/stage-*.ckpt and summary.json.
PipelineResult run_pipeline(const RunConfig& cfg, const std::string& run_dir);

struct EvaluationReport {
    PrefixProfile profile{};
    double accuracy_full = 0.0;  // profile at 100%
    TransferMetrics transfer;
    AccuracyMatrix matrix;
    double non_coverage = 0.0;
    int total_epochs = 0;
};

// Metrics over an in-memory pipeline result.
EvaluationReport evaluate_pipeline(const PipelineResult& result, const RunConfig& cfg);

// Metrics over a persisted run directory (checkpoints + buckets reloaded,
// dataset rebuilt from the stored config).
EvaluationReport evaluate_run_dir(const std::string& run_dir);

void write_report_csv(const EvaluationReport& report, uint64_t seed_tag,
                      const std::string& path);

// CLI entry points. Each returns the path of its primary artifact.
std::string cmd_gen_data(const RunConfig& cfg);
std::string cmd_pretrain(const RunConfig& cfg);
std::string cmd_train(const RunConfig& cfg);
std::string cmd_evaluate(const RunConfig& cfg);
std::string cmd_compare_orders(const RunConfig& cfg);

// Parallelism cap for compare-orders: CCTRAIN_THREADS, else hardware.
int worker_count(size_t tasks);

}  // namespace cctrain
