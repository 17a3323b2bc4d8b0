#include "cctrain/config.hpp"

#include <fstream>

#include "cctrain/errors.hpp"

namespace cctrain {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw ConfigError(path + ": " + why);
}

const json* maybe(const json& j, const std::string& key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

template <class T>
T get_or(const json& j, const std::string& path, const std::string& key, T fallback) {
    const json* v = maybe(j, key);
    if (!v) return fallback;
    try {
        return v->get<T>();
    } catch (const json::exception&) {
        fail(path + "." + key, "wrong type");
    }
}

double positive(double v, const std::string& path) {
    if (!(v > 0.0)) fail(path, "must be positive");
    return v;
}

int positive(int v, const std::string& path) {
    if (v <= 0) fail(path, "must be positive");
    return v;
}

}  // namespace

RunConfig parse_config(const nlohmann::json& j) {
    RunConfig cfg;
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");

    if (const json* d = maybe(j, "dataset")) {
        cfg.dataset.source = get_or<std::string>(*d, "dataset", "source", cfg.dataset.source);
        if (cfg.dataset.source != "synthetic" && cfg.dataset.source != "csv")
            fail("dataset.source", "must be 'synthetic' or 'csv'");
        cfg.dataset.path = get_or<std::string>(*d, "dataset", "path", cfg.dataset.path);
        cfg.dataset.class_count = get_or<int>(*d, "dataset", "class_count", cfg.dataset.class_count);
        if (cfg.dataset.class_count < 2) fail("dataset.class_count", "must be >= 2");
        cfg.dataset.normalize = get_or<bool>(*d, "dataset", "normalize", cfg.dataset.normalize);
        if (const json* sp = maybe(*d, "split")) {
            cfg.dataset.split.train = get_or<double>(*sp, "dataset.split", "train", 0.70);
            cfg.dataset.split.valid = get_or<double>(*sp, "dataset.split", "valid", 0.15);
            cfg.dataset.split.test = get_or<double>(*sp, "dataset.split", "test", 0.15);
            double total =
                cfg.dataset.split.train + cfg.dataset.split.valid + cfg.dataset.split.test;
            if (std::abs(total - 1.0) > 1e-9) fail("dataset.split", "ratios must sum to 1");
        }
        if (const json* sy = maybe(*d, "synthetic")) {
            SynthSpec& s = cfg.dataset.synth;
            s.n_series = positive(get_or<int>(*sy, "dataset.synthetic", "n_series", 0),
                                  "dataset.synthetic.n_series");
            s.length = positive(get_or<int>(*sy, "dataset.synthetic", "length", 0),
                                "dataset.synthetic.length");
            s.feature_dim = positive(get_or<int>(*sy, "dataset.synthetic", "feature_dim", 1),
                                     "dataset.synthetic.feature_dim");
            s.ar_coeff = get_or<double>(*sy, "dataset.synthetic", "ar_coeff", s.ar_coeff);
            const json* regimes = maybe(*sy, "regimes");
            if (!regimes || !regimes->is_array() || regimes->size() < 2)
                fail("dataset.synthetic.regimes", "need an array of at least 2 regimes");
            for (size_t r = 0; r < regimes->size(); ++r) {
                const json& rj = (*regimes)[r];
                RegimeSpec reg;
                std::string path = "dataset.synthetic.regimes[" + std::to_string(r) + "]";
                reg.class_means = get_or<std::vector<double>>(rj, path, "class_means", {});
                reg.class_stds = get_or<std::vector<double>>(rj, path, "class_stds", {});
                if (static_cast<int>(reg.class_means.size()) != cfg.dataset.class_count)
                    fail(path + ".class_means", "need one mean per class");
                if (static_cast<int>(reg.class_stds.size()) != cfg.dataset.class_count)
                    fail(path + ".class_stds", "need one std per class");
                for (double v : reg.class_stds)
                    if (!(v > 0.0)) fail(path + ".class_stds", "must be positive");
                s.regimes.push_back(std::move(reg));
            }
        }
        cfg.dataset.synth.class_count = cfg.dataset.class_count;
    }
    if (cfg.dataset.source == "csv" && cfg.dataset.path.empty())
        fail("dataset.path", "required for csv source");

    if (const json* m = maybe(j, "model")) {
        cfg.model.hidden = positive(get_or<int>(*m, "model", "hidden", cfg.model.hidden),
                                    "model.hidden");
        cfg.model.keep_rate = get_or<double>(*m, "model", "keep_rate", cfg.model.keep_rate);
        if (!(cfg.model.keep_rate > 0.0 && cfg.model.keep_rate <= 1.0))
            fail("model.keep_rate", "must be in (0, 1]");
        cfg.model.learning_rate =
            positive(get_or<double>(*m, "model", "learning_rate", cfg.model.learning_rate),
                     "model.learning_rate");
        cfg.model.batch_size = positive(
            get_or<int>(*m, "model", "batch_size", cfg.model.batch_size), "model.batch_size");
    }

    if (const json* im = maybe(j, "importance")) {
        cfg.importance.lambda = get_or<double>(*im, "importance", "lambda", cfg.importance.lambda);
        if (cfg.importance.lambda < 0.0) fail("importance.lambda", "must be non-negative");
        cfg.importance.lr_beta =
            positive(get_or<double>(*im, "importance", "beta_learning_rate",
                                    cfg.importance.lr_beta),
                     "importance.beta_learning_rate");
        std::string polarity =
            get_or<std::string>(*im, "importance", "polarity", "as_written");
        if (polarity == "as_written")
            cfg.importance.polarity = Polarity::as_written;
        else if (polarity == "narrative")
            cfg.importance.polarity = Polarity::narrative;
        else
            fail("importance.polarity", "must be 'as_written' or 'narrative'");
        cfg.importance.beta_max = positive(
            get_or<double>(*im, "importance", "beta_max", cfg.importance.beta_max),
            "importance.beta_max");
        std::string mode = get_or<std::string>(*im, "importance", "replay_mode", "threshold");
        if (mode == "threshold")
            cfg.replay.mode = ReplayMode::threshold;
        else if (mode == "fraction")
            cfg.replay.mode = ReplayMode::fraction;
        else if (mode == "none")
            cfg.replay.mode = ReplayMode::none;
        else
            fail("importance.replay_mode", "must be 'threshold', 'fraction' or 'none'");
        cfg.replay.fraction_m =
            positive(get_or<int>(*im, "importance", "replay_fraction_m", cfg.replay.fraction_m),
                     "importance.replay_fraction_m");
    }

    if (const json* u = maybe(j, "uncertainty")) {
        cfg.uncertainty.mc_passes =
            get_or<int>(*u, "uncertainty", "mc_passes", cfg.uncertainty.mc_passes);
        if (cfg.uncertainty.mc_passes < 2) fail("uncertainty.mc_passes", "must be >= 2");
        std::string variant = get_or<std::string>(*u, "uncertainty", "variant", "literal");
        if (variant == "literal")
            cfg.uncertainty.variant = UncertaintyVariant::literal;
        else if (variant == "entropy")
            cfg.uncertainty.variant = UncertaintyVariant::entropy;
        else
            fail("uncertainty.variant", "must be 'literal' or 'entropy'");
        cfg.uncertainty.patience = positive(
            get_or<int>(*u, "uncertainty", "patience", cfg.uncertainty.patience),
            "uncertainty.patience");
        cfg.uncertainty.min_delta =
            get_or<double>(*u, "uncertainty", "min_delta", cfg.uncertainty.min_delta);
        if (cfg.uncertainty.min_delta < 0.0) fail("uncertainty.min_delta", "must be non-negative");
        cfg.uncertainty.epoch_cap = positive(
            get_or<int>(*u, "uncertainty", "epoch_cap", cfg.uncertainty.epoch_cap),
            "uncertainty.epoch_cap");
    }

    if (const json* c = maybe(j, "curriculum")) {
        cfg.curriculum.buckets = get_or<int>(*c, "curriculum", "buckets", cfg.curriculum.buckets);
        if (cfg.curriculum.buckets < 1) fail("curriculum.buckets", "must be >= 1");
        std::string mode = get_or<std::string>(*c, "curriculum", "bucket_mode", "quantile");
        if (mode == "quantile")
            cfg.curriculum.bucket_mode = BucketMode::quantile;
        else if (mode == "sigma_band")
            cfg.curriculum.bucket_mode = BucketMode::sigma_band;
        else
            fail("curriculum.bucket_mode", "must be 'quantile' or 'sigma_band'");
        cfg.curriculum.order =
            parse_order_kind(get_or<std::string>(*c, "curriculum", "order", "confidence_asc"));
    }

    if (const json* s = maybe(j, "seeds")) {
        cfg.seeds.data = get_or<uint64_t>(*s, "seeds", "data", cfg.seeds.data);
        cfg.seeds.model = get_or<uint64_t>(*s, "seeds", "model", cfg.seeds.model);
        cfg.seeds.dropout = get_or<uint64_t>(*s, "seeds", "dropout", cfg.seeds.dropout);
        cfg.seeds.order = get_or<uint64_t>(*s, "seeds", "order", cfg.seeds.order);
    }

    if (const json* e = maybe(j, "evaluation")) {
        cfg.evaluation.baseline_models =
            positive(get_or<int>(*e, "evaluation", "baseline_models",
                                 cfg.evaluation.baseline_models),
                     "evaluation.baseline_models");
        cfg.evaluation.pi_alpha =
            get_or<double>(*e, "evaluation", "pi_alpha", cfg.evaluation.pi_alpha);
        if (!(cfg.evaluation.pi_alpha > 0.0 && cfg.evaluation.pi_alpha < 1.0))
            fail("evaluation.pi_alpha", "must be in (0, 1)");
        cfg.evaluation.pi_passes = get_or<int>(*e, "evaluation", "pi_passes",
                                               cfg.evaluation.pi_passes);
        if (cfg.evaluation.pi_passes < 10) fail("evaluation.pi_passes", "must be >= 10");
    }

    if (const json* c = maybe(j, "compare")) {
        cfg.compare.strategies =
            get_or<std::vector<std::string>>(*c, "compare", "strategies", {});
        for (const std::string& s : cfg.compare.strategies) parse_order_kind(s);
        cfg.compare.seeds = get_or<std::vector<uint64_t>>(*c, "compare", "seeds", {});
    }

    cfg.output_dir = get_or<std::string>(j, "", "output_dir", cfg.output_dir);
    if (cfg.output_dir.empty()) fail("output_dir", "must not be empty");
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(j);
}

nlohmann::json config_json(const RunConfig& cfg) {
    nlohmann::json j;
    nlohmann::json d;
    d["source"] = cfg.dataset.source;
    d["path"] = cfg.dataset.path;
    d["class_count"] = cfg.dataset.class_count;
    d["normalize"] = cfg.dataset.normalize;
    d["split"] = {{"train", cfg.dataset.split.train},
                  {"valid", cfg.dataset.split.valid},
                  {"test", cfg.dataset.split.test}};
    if (!cfg.dataset.synth.regimes.empty()) {
        nlohmann::json sy;
        sy["n_series"] = cfg.dataset.synth.n_series;
        sy["length"] = cfg.dataset.synth.length;
        sy["feature_dim"] = cfg.dataset.synth.feature_dim;
        sy["ar_coeff"] = cfg.dataset.synth.ar_coeff;
        nlohmann::json regimes = nlohmann::json::array();
        for (const RegimeSpec& r : cfg.dataset.synth.regimes)
            regimes.push_back({{"class_means", r.class_means}, {"class_stds", r.class_stds}});
        sy["regimes"] = std::move(regimes);
        d["synthetic"] = std::move(sy);
    }
    j["dataset"] = std::move(d);

    j["model"] = {{"hidden", cfg.model.hidden},
                  {"keep_rate", cfg.model.keep_rate},
                  {"learning_rate", cfg.model.learning_rate},
                  {"batch_size", cfg.model.batch_size}};

    j["importance"] = {
        {"lambda", cfg.importance.lambda},
        {"beta_learning_rate", cfg.importance.lr_beta},
        {"polarity", cfg.importance.polarity == Polarity::as_written ? "as_written" : "narrative"},
        {"beta_max", cfg.importance.beta_max},
        {"replay_mode", cfg.replay.mode == ReplayMode::threshold ? "threshold"
                        : cfg.replay.mode == ReplayMode::fraction ? "fraction"
                                                                  : "none"},
        {"replay_fraction_m", cfg.replay.fraction_m}};

    j["uncertainty"] = {
        {"mc_passes", cfg.uncertainty.mc_passes},
        {"variant", cfg.uncertainty.variant == UncertaintyVariant::literal ? "literal" : "entropy"},
        {"patience", cfg.uncertainty.patience},
        {"min_delta", cfg.uncertainty.min_delta},
        {"epoch_cap", cfg.uncertainty.epoch_cap}};

    j["curriculum"] = {
        {"buckets", cfg.curriculum.buckets},
        {"bucket_mode",
         cfg.curriculum.bucket_mode == BucketMode::quantile ? "quantile" : "sigma_band"},
        {"order", order_kind_name(cfg.curriculum.order)}};

    j["seeds"] = {{"data", cfg.seeds.data},
                  {"model", cfg.seeds.model},
                  {"dropout", cfg.seeds.dropout},
                  {"order", cfg.seeds.order}};

    j["evaluation"] = {{"baseline_models", cfg.evaluation.baseline_models},
                       {"pi_alpha", cfg.evaluation.pi_alpha},
                       {"pi_passes", cfg.evaluation.pi_passes}};

    if (!cfg.compare.strategies.empty())
        j["compare"] = {{"strategies", cfg.compare.strategies}, {"seeds", cfg.compare.seeds}};

    j["output_dir"] = cfg.output_dir;
    return j;
}

void apply_seed_offset(RunConfig& cfg, uint64_t offset) {
    cfg.seeds.data += offset;
    cfg.seeds.model += offset;
    cfg.seeds.dropout += offset;
    cfg.seeds.order += offset;
    for (uint64_t& s : cfg.compare.seeds) s += offset;
}

TrainSettings train_settings(const RunConfig& cfg) {
    TrainSettings t;
    t.learning_rate = cfg.model.learning_rate;
    t.batch_size = cfg.model.batch_size;
    t.keep_rate = cfg.model.keep_rate;
    return t;
}

}  // namespace cctrain
