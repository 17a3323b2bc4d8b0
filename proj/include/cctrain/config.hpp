#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cctrain/dataset.hpp"
#include "cctrain/importance.hpp"
#include "cctrain/scheduler.hpp"
#include "cctrain/uncertainty.hpp"

namespace cctrain {

struct DatasetConfig {
    std::string source = "synthetic";  // "synthetic" | "csv"
    std::string path;                  // csv input, or gen-data output
    int class_count = 2;
    bool normalize = true;
    SplitRatios split;
    SynthSpec synth;  // synth.class_count mirrors class_count
};

struct ModelConfig {
    int hidden = 32;
    double keep_rate = 0.9;
    double learning_rate = 0.05;
    int batch_size = 32;
};

struct SeedConfig {
    uint64_t data = 1;
    uint64_t model = 2;
    uint64_t dropout = 3;
    uint64_t order = 4;
};

struct CurriculumConfig {
    int buckets = 4;
    BucketMode bucket_mode = BucketMode::quantile;
    OrderKind order = OrderKind::confidence_asc;
};

struct EvalConfig {
    int baseline_models = 3;
    double pi_alpha = 0.1;
    int pi_passes = 40;
};

struct CompareConfig {
    std::vector<std::string> strategies;
    std::vector<uint64_t> seeds;
};

struct RunConfig {
    DatasetConfig dataset;
    ModelConfig model;
    ImportanceConfig importance;
    ReplayConfig replay;
    UncertaintyConfig uncertainty;
    CurriculumConfig curriculum;
    SeedConfig seeds;
    EvalConfig evaluation;
    CompareConfig compare;
    std::string output_dir = "runs/out";
};

// Parses a config document, applying defaults for absent fields. Throws
// ConfigError with the offending field path on invalid values.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);

// Fully resolved document (all defaults applied); a run is reproducible from
// this alone.
nlohmann::json config_json(const RunConfig& cfg);

// Shifts every seed stream (including compare seeds) by the offset.
void apply_seed_offset(RunConfig& cfg, uint64_t offset);

TrainSettings train_settings(const RunConfig& cfg);

}  // namespace cctrain
