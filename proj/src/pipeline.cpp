#include "cctrain/pipeline.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cctrain/errors.hpp"
#include "cctrain/rng.hpp"

namespace fs = std::filesystem;

namespace cctrain {

namespace {

constexpr int kSchemaVersion = 1;

std::string hex64(uint64_t v) {
    char buf[17];
    static const char* digits = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = digits[v & 0xf];
        v >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf);
}

std::string csv_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

const char* variant_name(UncertaintyVariant v) {
    return v == UncertaintyVariant::literal ? "literal" : "entropy";
}

}  // namespace

std::string run_id_for(const RunConfig& cfg) {
    // Identify the run by its scientific content: where artifacts land and
    // what other sweeps the config describes do not change the run itself.
    nlohmann::json j = config_json(cfg);
    j.erase("output_dir");
    if (j.contains("compare")) j.erase("compare");
    std::string text = j.dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
    return hex64(h);
}

Dataset build_dataset(const RunConfig& cfg) {
    Dataset data;
    if (cfg.dataset.source == "synthetic") {
        if (cfg.dataset.synth.regimes.empty())
            throw ConfigError("dataset.synthetic: required for synthetic source");
        data = generate_synthetic(cfg.dataset.synth, cfg.seeds.data);
    } else {
        data = load_csv(cfg.dataset.path, cfg.dataset.class_count);
    }
    assign_splits(data, cfg.seeds.data, cfg.dataset.split);
    if (cfg.dataset.normalize) normalize_features(data);
    return data;
}

namespace {

void write_buckets_csv(const std::vector<CurriculumBucket>& buckets, const PretrainResult& pre,
                       const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << "sample_id,bucket,U_data,beta_final\n";
    for (const CurriculumBucket& b : buckets)
        for (int id : b.sample_ids)
            out << id << ',' << b.index << ',' << csv_double(pre.u_data.at(id)) << ','
                << csv_double(pre.beta.at(id)) << "\n";
}

nlohmann::json epoch_json(const std::string& run_id, const EpochRecord& e,
                          const RunConfig& cfg) {
    nlohmann::json j;
    j["kind"] = "epoch";
    j["run_id"] = run_id;
    j["schema_version"] = kSchemaVersion;
    j["stage"] = e.stage;
    j["epoch"] = e.epoch;
    j["loss"] = e.loss;
    j["confidence"] = e.confidence;
    j["u_model"] = e.u_model;
    j["u_data_mean"] = e.u_data_mean;
    j["u_total"] = e.u_total;
    j["variant"] = variant_name(cfg.uncertainty.variant);
    j["K"] = cfg.uncertainty.mc_passes;
    return j;
}

nlohmann::json stage_json(const std::string& run_id, const StageRecord& s) {
    nlohmann::json j;
    j["kind"] = "stage";
    j["run_id"] = run_id;
    j["schema_version"] = kSchemaVersion;
    j["stage"] = s.stage;
    j["bucket_index"] = s.bucket_index;
    j["epochs"] = s.epochs;
    j["buffer_size"] = s.buffer_size;
    j["new_count"] = s.new_count;
    j["replay_count"] = s.replay_count;
    j["overlap_count"] = s.overlap_count;
    j["epsilon"] = s.epsilon;
    j["selected_count"] = s.selected_count;
    return j;
}

void persist_run(const PipelineResult& result, const RunConfig& cfg, const std::string& run_dir) {
    fs::create_directories(run_dir);
    fs::create_directories(run_dir + "/checkpoints");
    fs::create_directories(run_dir + "/betas");

    {
        std::ofstream out(run_dir + "/config.json", std::ios::trunc);
        out << config_json(cfg).dump(2) << "\n";
    }

    std::string run_id = run_id_for(cfg);
    {
        // One record per line, flushed per line, so an interrupted run still
        // leaves a parseable prefix.
        std::ofstream out(run_dir + "/metrics.jsonl", std::ios::trunc);
        size_t stage_at = 0;
        for (const EpochRecord& e : result.train.log.epochs) {
            while (stage_at < result.train.log.stages.size() &&
                   result.train.log.stages[stage_at].stage < e.stage) {
                out << stage_json(run_id, result.train.log.stages[stage_at]).dump() << "\n"
                    << std::flush;
                ++stage_at;
            }
            out << epoch_json(run_id, e, cfg).dump() << "\n" << std::flush;
        }
        for (; stage_at < result.train.log.stages.size(); ++stage_at)
            out << stage_json(run_id, result.train.log.stages[stage_at]).dump() << "\n"
                << std::flush;
    }

    write_buckets_csv(result.buckets, result.pre, run_dir + "/buckets.csv");
    save_checkpoint(result.pre.teacher, run_dir + "/checkpoints/teacher.ckpt");
    for (size_t m = 0; m < result.train.stage_params.size(); ++m)
        save_checkpoint(result.train.stage_params[m],
                        run_dir + "/checkpoints/stage-" + std::to_string(m + 1) + ".ckpt");
    save_checkpoint(result.train.params, run_dir + "/checkpoints/final.ckpt");
    for (size_t m = 0; m < result.train.stage_tables.size(); ++m)
        export_beta_csv(result.train.stage_tables[m], result.data, result.train_samples,
                        run_dir + "/betas/stage-" + std::to_string(m + 1) + ".csv");

    nlohmann::json summary;
    summary["run_id"] = run_id;
    summary["schema_version"] = kSchemaVersion;
    summary["wall_seconds"] = result.wall_seconds;
    summary["total_epochs"] = result.train.log.total_epochs;
    std::vector<int> stage_buckets;
    for (const CurriculumBucket& b : result.ordered_buckets) stage_buckets.push_back(b.index);
    summary["stage_buckets"] = stage_buckets;
    std::ofstream out(run_dir + "/summary.json", std::ios::trunc);
    out << summary.dump(2) << "\n";
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg, const std::string& run_dir) {
    auto started = std::chrono::steady_clock::now();
    PipelineResult result;
    result.data = build_dataset(cfg);
    result.train_samples = expand_prefixes(result.data, Split::train);
    if (result.train_samples.empty()) throw ContractError("train split is empty");

    TrainSettings train = train_settings(cfg);
    result.pre = pretrain(result.data, result.train_samples, cfg.model.hidden, train,
                          cfg.importance, cfg.uncertainty.variant, cfg.seeds.model);

    result.buckets = build_buckets(result.pre.u_data, cfg.curriculum.buckets,
                                   cfg.curriculum.bucket_mode, result.train_samples);
    result.ordered_buckets =
        order_buckets(result.buckets, cfg.curriculum.order, &result.pre.teacher, result.data,
                      result.train_samples, cfg.uncertainty.variant, cfg.seeds.order);

    ModelParams target =
        init_params(result.data.feature_dim, cfg.model.hidden, result.data.class_count,
                    Rng(cfg.seeds.model).child("target").state());
    result.train = run_training(std::move(target), result.data, result.train_samples,
                                result.ordered_buckets, train, cfg.importance, cfg.replay,
                                cfg.uncertainty, cfg.seeds.model, cfg.seeds.dropout);

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (!run_dir.empty()) {
        result.run_dir = run_dir;
        persist_run(result, cfg, run_dir);
    }
    return result;
}

namespace {

// Interval calibration over the test split: per series, pi_passes dropout
// scores of class 1 at full length form the interval; one further held-out
// pass is judged against it.
double test_non_coverage(const ModelParams& params, const Dataset& data, const RunConfig& cfg) {
    std::vector<int> indices = data.split_indices(Split::test);
    if (indices.empty()) return 0.0;
    std::vector<std::vector<double>> per_point;
    std::vector<double> heldout;
    Rng root = Rng(cfg.seeds.dropout).child("pi");
    int k = cfg.evaluation.pi_passes;
    for (int si : indices) {
        const TimeSeries& s = data.series[si];
        PrefixSample sample{si, s.length(), s.label, 0};
        auto passes = mc_predict(params, data, sample, k + 1, cfg.model.keep_rate,
                                 root.child(static_cast<uint64_t>(si)).state());
        std::vector<double> scores(k);
        for (int i = 0; i < k; ++i) scores[i] = passes[i][1];
        per_point.push_back(std::move(scores));
        heldout.push_back(passes[k][1]);
    }
    return prediction_interval(per_point, cfg.evaluation.pi_alpha, heldout).non_coverage;
}

EvaluationReport evaluate_parts(const Dataset& data, std::span<const PrefixSample> samples,
                                const std::vector<CurriculumBucket>& ordered_buckets,
                                const std::vector<ModelParams>& stage_params,
                                const ModelParams& final_params, int total_epochs,
                                const RunConfig& cfg) {
    EvaluationReport report;
    report.total_epochs = total_epochs;
    report.profile = prefix_profile(final_params, data, Split::test);
    report.accuracy_full = report.profile[9];
    report.matrix = accuracy_matrix(stage_params, ordered_buckets, data, samples,
                                    cfg.evaluation.baseline_models,
                                    Rng(cfg.seeds.model).child("eval").state());
    if (ordered_buckets.size() >= 2) report.transfer = transfer_metrics(report.matrix);
    report.non_coverage = test_non_coverage(final_params, data, cfg);
    return report;
}

}  // namespace

EvaluationReport evaluate_pipeline(const PipelineResult& result, const RunConfig& cfg) {
    return evaluate_parts(result.data, result.train_samples, result.ordered_buckets,
                          result.train.stage_params, result.train.params,
                          result.train.log.total_epochs, cfg);
}

EvaluationReport evaluate_run_dir(const std::string& run_dir) {
    std::ifstream cfg_in(run_dir + "/config.json");
    if (!cfg_in) throw ConfigError("no config.json in " + run_dir);
    nlohmann::json cfg_json_doc;
    cfg_in >> cfg_json_doc;
    RunConfig cfg = parse_config(cfg_json_doc);

    Dataset data = build_dataset(cfg);
    std::vector<PrefixSample> samples = expand_prefixes(data, Split::train);

    // Bucket membership and scores from buckets.csv.
    std::ifstream bucket_in(run_dir + "/buckets.csv");
    if (!bucket_in) throw Error("no buckets.csv in " + run_dir);
    std::string line;
    std::getline(bucket_in, line);  // header
    std::map<int, CurriculumBucket> by_index;
    while (std::getline(bucket_in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string sample_id, bucket, u_data, beta;
        std::getline(ss, sample_id, ',');
        std::getline(ss, bucket, ',');
        std::getline(ss, u_data, ',');
        std::getline(ss, beta, ',');
        int idx = std::stoi(bucket);
        by_index[idx].index = idx;
        by_index[idx].sample_ids.push_back(std::stoi(sample_id));
    }

    std::ifstream summary_in(run_dir + "/summary.json");
    if (!summary_in) throw Error("no summary.json in " + run_dir);
    nlohmann::json summary;
    summary_in >> summary;
    std::vector<int> stage_buckets = summary.at("stage_buckets").get<std::vector<int>>();
    int total_epochs = summary.at("total_epochs").get<int>();

    std::vector<CurriculumBucket> ordered;
    std::vector<ModelParams> stage_params;
    for (size_t m = 0; m < stage_buckets.size(); ++m) {
        auto it = by_index.find(stage_buckets[m]);
        if (it == by_index.end())
            throw Error("bucket " + std::to_string(stage_buckets[m]) + " missing from buckets.csv");
        ordered.push_back(it->second);
        stage_params.push_back(
            load_checkpoint(run_dir + "/checkpoints/stage-" + std::to_string(m + 1) + ".ckpt"));
    }
    ModelParams final_params = load_checkpoint(run_dir + "/checkpoints/final.ckpt");

    return evaluate_parts(data, samples, ordered, stage_params, final_params, total_epochs, cfg);
}

void write_report_csv(const EvaluationReport& report, uint64_t seed_tag,
                      const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << "metric,stage_or_decile,value,seed\n";
    for (int step = 1; step <= 10; ++step)
        out << "prefix_auc," << step * 10 << ',' << csv_double(report.profile[step - 1]) << ','
            << seed_tag << "\n";
    out << "accuracy,100," << csv_double(report.accuracy_full) << ',' << seed_tag << "\n";
    out << "bwt,final," << csv_double(report.transfer.bwt) << ',' << seed_tag << "\n";
    out << "fwt,final," << csv_double(report.transfer.fwt) << ',' << seed_tag << "\n";
    out << "alpha,final," << csv_double(report.non_coverage) << ',' << seed_tag << "\n";
    out << "epochs,final," << report.total_epochs << ',' << seed_tag << "\n";
}

std::string cmd_gen_data(const RunConfig& cfg) {
    if (cfg.dataset.synth.regimes.empty())
        throw ConfigError("dataset.synthetic: required for gen-data");
    Dataset data = generate_synthetic(cfg.dataset.synth, cfg.seeds.data);
    std::string path = cfg.dataset.path;
    if (path.empty()) {
        fs::create_directories(cfg.output_dir);
        path = cfg.output_dir + "/dataset.csv";
    } else if (fs::path(path).has_parent_path()) {
        fs::create_directories(fs::path(path).parent_path());
    }
    save_csv(data, path);
    return path;
}

std::string cmd_pretrain(const RunConfig& cfg) {
    Dataset data = build_dataset(cfg);
    std::vector<PrefixSample> samples = expand_prefixes(data, Split::train);
    if (samples.empty()) throw ContractError("train split is empty");
    PretrainResult pre = pretrain(data, samples, cfg.model.hidden, train_settings(cfg),
                                  cfg.importance, cfg.uncertainty.variant, cfg.seeds.model);
    auto buckets = build_buckets(pre.u_data, cfg.curriculum.buckets, cfg.curriculum.bucket_mode,
                                 samples);
    fs::create_directories(cfg.output_dir);
    write_buckets_csv(buckets, pre, cfg.output_dir + "/buckets.csv");
    save_checkpoint(pre.teacher, cfg.output_dir + "/teacher.ckpt");
    {
        std::ofstream out(cfg.output_dir + "/config.json", std::ios::trunc);
        out << config_json(cfg).dump(2) << "\n";
    }
    return cfg.output_dir + "/buckets.csv";
}

std::string cmd_train(const RunConfig& cfg) {
    run_pipeline(cfg, cfg.output_dir);
    return cfg.output_dir;
}

std::string cmd_evaluate(const RunConfig& cfg) {
    EvaluationReport report = evaluate_run_dir(cfg.output_dir);
    std::string path = cfg.output_dir + "/report.csv";
    write_report_csv(report, cfg.seeds.model, path);
    return path;
}

int worker_count(size_t tasks) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("CCTRAIN_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
    }
    return std::min<int>(hw, static_cast<int>(tasks));
}

std::string cmd_compare_orders(const RunConfig& cfg) {
    if (cfg.compare.strategies.empty() || cfg.compare.seeds.empty())
        throw ConfigError("compare.strategies and compare.seeds: required for compare-orders");

    struct Task {
        std::string strategy;
        uint64_t seed;
        RunConfig cfg;
        std::string dir;
        EvaluationReport report;
    };
    std::vector<Task> tasks;
    for (const std::string& strategy : cfg.compare.strategies) {
        for (uint64_t seed : cfg.compare.seeds) {
            Task t;
            t.strategy = strategy;
            t.seed = seed;
            t.cfg = cfg;
            t.cfg.compare = {};
            t.cfg.curriculum.order = parse_order_kind(strategy);
            apply_seed_offset(t.cfg, seed);
            t.dir = cfg.output_dir + "/" + strategy + "/seed-" + std::to_string(seed);
            t.cfg.output_dir = t.dir;
            tasks.push_back(std::move(t));
        }
    }

    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= tasks.size() || failed.load()) break;
            try {
                PipelineResult result = run_pipeline(tasks[i].cfg, tasks[i].dir);
                tasks[i].report = evaluate_pipeline(result, tasks[i].cfg);
                write_report_csv(tasks[i].report, tasks[i].seed, tasks[i].dir + "/report.csv");
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (first_error.empty()) first_error = e.what();
                failed.store(true);
            }
        }
    };
    int workers = worker_count(tasks.size());
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed.load()) throw Error("compare-orders run failed: " + first_error);

    // Mean and std per (strategy, metric), strategies in config order.
    std::string path = cfg.output_dir + "/comparison.csv";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << "strategy,metric,value,std\n";
    const char* metrics[] = {"accuracy", "epochs", "alpha", "bwt", "fwt"};
    for (const std::string& strategy : cfg.compare.strategies) {
        for (const char* metric : metrics) {
            std::vector<double> values;
            for (const Task& t : tasks) {
                if (t.strategy != strategy) continue;
                double v = 0.0;
                std::string m = metric;
                if (m == "accuracy") v = t.report.accuracy_full;
                else if (m == "epochs") v = t.report.total_epochs;
                else if (m == "alpha") v = t.report.non_coverage;
                else if (m == "bwt") v = t.report.transfer.bwt;
                else v = t.report.transfer.fwt;
                values.push_back(v);
            }
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            double var = 0.0;
            for (double v : values) var += (v - mean) * (v - mean);
            double sd = values.size() > 1
                            ? std::sqrt(var / static_cast<double>(values.size() - 1))
                            : 0.0;
            out << strategy << ',' << metric << ',' << csv_double(mean) << ',' << csv_double(sd)
                << "\n";
        }
    }
    return path;
}

}  // namespace cctrain
