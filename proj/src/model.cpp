#include "cctrain/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cctrain/errors.hpp"
#include "cctrain/rng.hpp"

namespace cctrain {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// out = M * v
void matvec(const Mat& m, const Vec& v, Vec& out) {
    for (int r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        const double* row = &m.a[static_cast<size_t>(r) * m.cols];
        for (int c = 0; c < m.cols; ++c) acc += row[c] * v[c];
        out[r] = acc;
    }
}

// out += M^T * v
void matvec_transpose_add(const Mat& m, const Vec& v, Vec& out) {
    for (int r = 0; r < m.rows; ++r) {
        const double* row = &m.a[static_cast<size_t>(r) * m.cols];
        for (int c = 0; c < m.cols; ++c) out[c] += row[c] * v[r];
    }
}

// M += u * v^T
void outer_add(Mat& m, const Vec& u, const Vec& v) {
    for (int r = 0; r < m.rows; ++r) {
        double* row = &m.a[static_cast<size_t>(r) * m.cols];
        for (int c = 0; c < m.cols; ++c) row[c] += u[r] * v[c];
    }
}

void add(Vec& out, const Vec& v) {
    for (size_t i = 0; i < out.size(); ++i) out[i] += v[i];
}

// One cell update and its intermediates, kept for backpropagation.
struct StepTrace {
    Vec update, reset, cand, h;
};

struct ForwardTrace {
    std::vector<StepTrace> steps;  // steps[t-1] belongs to time step t
    Vec h_final;                   // after the optional dropout mask
    PredictiveDistribution probs;
};

const std::vector<double>& input_at(const Dataset& data, const PrefixSample& s, int t) {
    return data.series[s.series_index].values[t - 1];
}

void check_sample(const Dataset& data, const PrefixSample& s) {
    if (s.series_index < 0 || s.series_index >= static_cast<int>(data.series.size()))
        throw ContractError("prefix sample references series index " +
                            std::to_string(s.series_index));
    int len = data.series[s.series_index].length();
    if (s.t < 1 || s.t > len)
        throw ContractError("prefix length " + std::to_string(s.t) + " outside [1, " +
                            std::to_string(len) + "]");
}

ForwardTrace run_forward(const ModelParams& p, const Dataset& data, const PrefixSample& s,
                         const DropoutMask* mask, bool keep_trace) {
    check_sample(data, s);
    int hidden = p.hidden;
    ForwardTrace trace;
    if (keep_trace) trace.steps.reserve(s.t);

    Vec h(hidden, 0.0), az(hidden), ar(hidden), ah(hidden), tmp(hidden), uh(hidden);
    Vec update(hidden), reset(hidden), cand(hidden);
    for (int t = 1; t <= s.t; ++t) {
        const Vec& x = input_at(data, s, t);
        matvec(p.w_update, x, az);
        matvec(p.u_update, h, tmp);
        add(az, tmp);
        matvec(p.w_reset, x, ar);
        matvec(p.u_reset, h, tmp);
        add(ar, tmp);
        for (int i = 0; i < hidden; ++i) {
            update[i] = sigmoid(az[i] + p.b_update[i]);
            reset[i] = sigmoid(ar[i] + p.b_reset[i]);
            tmp[i] = reset[i] * h[i];
        }
        matvec(p.w_cand, x, ah);
        matvec(p.u_cand, tmp, uh);
        for (int i = 0; i < hidden; ++i) {
            cand[i] = std::tanh(ah[i] + uh[i] + p.b_cand[i]);
            h[i] = (1.0 - update[i]) * h[i] + update[i] * cand[i];
        }
        for (int i = 0; i < hidden; ++i)
            if (!std::isfinite(h[i])) throw NumericError("hidden state is not finite", t);
        if (keep_trace) trace.steps.push_back(StepTrace{update, reset, cand, h});
    }

    if (mask) {
        if (mask->keep_rate < 0.0 || mask->keep_rate > 1.0)
            throw ContractError("dropout keep rate outside [0, 1]");
        for (int i = 0; i < hidden; ++i) h[i] *= mask->scale[i];
    }
    trace.h_final = h;

    Vec logits(p.classes);
    matvec(p.w_head, h, logits);
    for (int c = 0; c < p.classes; ++c) logits[c] += p.b_head[c];

    double max_logit = logits[0];
    for (double v : logits) max_logit = std::max(max_logit, v);
    double denom = 0.0;
    PredictiveDistribution probs(p.classes);
    for (int c = 0; c < p.classes; ++c) {
        probs[c] = std::exp(logits[c] - max_logit);
        denom += probs[c];
    }
    for (int c = 0; c < p.classes; ++c) {
        probs[c] /= denom;
        if (!std::isfinite(probs[c])) throw NumericError("class probability is not finite", s.t);
    }
    trace.probs = std::move(probs);
    return trace;
}

constexpr double kProbFloor = 1e-12;

}  // namespace

ModelParams zero_params(int input_dim, int hidden, int classes) {
    ModelParams p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    p.classes = classes;
    p.w_update = Mat(hidden, input_dim);
    p.w_reset = Mat(hidden, input_dim);
    p.w_cand = Mat(hidden, input_dim);
    p.u_update = Mat(hidden, hidden);
    p.u_reset = Mat(hidden, hidden);
    p.u_cand = Mat(hidden, hidden);
    p.b_update.assign(hidden, 0.0);
    p.b_reset.assign(hidden, 0.0);
    p.b_cand.assign(hidden, 0.0);
    p.w_head = Mat(classes, hidden);
    p.b_head.assign(classes, 0.0);
    return p;
}

ModelParams init_params(int input_dim, int hidden, int classes, uint64_t seed) {
    ModelParams p = zero_params(input_dim, hidden, classes);
    double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    Rng rng = Rng(seed).child("init");
    for (auto& [name, span] : tensor_views(p))
        for (double& v : span) v = rng.uniform(-bound, bound);
    return p;
}

std::vector<std::pair<std::string, std::span<double>>> tensor_views(ModelParams& p) {
    return {
        {"w_update", p.w_update.a}, {"u_update", p.u_update.a}, {"b_update", p.b_update},
        {"w_reset", p.w_reset.a},   {"u_reset", p.u_reset.a},   {"b_reset", p.b_reset},
        {"w_cand", p.w_cand.a},     {"u_cand", p.u_cand.a},     {"b_cand", p.b_cand},
        {"w_head", p.w_head.a},     {"b_head", p.b_head},
    };
}

std::vector<std::pair<std::string, std::span<const double>>> tensor_views(const ModelParams& p) {
    std::vector<std::pair<std::string, std::span<const double>>> out;
    for (auto& [name, span] : tensor_views(const_cast<ModelParams&>(p)))
        out.emplace_back(name, std::span<const double>(span));
    return out;
}

DropoutMask make_dropout_mask(int hidden, double keep_rate, uint64_t seed) {
    if (keep_rate < 0.0 || keep_rate > 1.0) throw ContractError("keep rate outside [0, 1]");
    DropoutMask mask;
    mask.keep_rate = keep_rate;
    mask.seed = seed;
    mask.scale.assign(hidden, 0.0);
    Rng rng(seed);
    double inv = keep_rate > 0.0 ? 1.0 / keep_rate : 0.0;
    for (int i = 0; i < hidden; ++i)
        mask.scale[i] = rng.next_double() < keep_rate ? inv : 0.0;
    return mask;
}

PredictiveDistribution forward(const ModelParams& p, const Dataset& data, const PrefixSample& s,
                               const DropoutMask* mask) {
    return run_forward(p, data, s, mask, false).probs;
}

BatchLoss weighted_batch_loss(const ModelParams& p, const Dataset& data,
                              std::span<const PrefixSample> batch,
                              std::span<const double> weights) {
    if (batch.size() != weights.size()) throw ContractError("batch and weight sizes differ");
    BatchLoss out;
    out.sample_ce.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        if (weights[i] < 0.0) throw ContractError("negative sample weight");
        auto probs = forward(p, data, batch[i]);
        double p_true = probs[batch[i].label];
        if (p_true < kProbFloor) {
            p_true = kProbFloor;
            ++out.clamp_count;
        }
        double ce = -std::log(p_true);
        out.sample_ce.push_back(ce);
        out.value += weights[i] * ce;
    }
    if (!batch.empty()) out.value /= static_cast<double>(batch.size());
    return out;
}

BatchGradient backward(const ModelParams& p, const Dataset& data,
                       std::span<const PrefixSample> batch, std::span<const double> weights) {
    if (batch.size() != weights.size()) throw ContractError("batch and weight sizes differ");
    BatchGradient out;
    out.grad = zero_params(p.input_dim, p.hidden, p.classes);
    ModelParams& g = out.grad;
    int hidden = p.hidden;
    double inv_batch = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());

    for (size_t i = 0; i < batch.size(); ++i) {
        if (weights[i] < 0.0) throw ContractError("negative sample weight");
        const PrefixSample& s = batch[i];
        ForwardTrace trace = run_forward(p, data, s, nullptr, true);

        double p_true = trace.probs[s.label];
        if (p_true < kProbFloor) {
            p_true = kProbFloor;
            ++out.loss.clamp_count;
        }
        double ce = -std::log(p_true);
        out.loss.sample_ce.push_back(ce);
        out.loss.value += weights[i] * ce;

        // d(mean weighted CE)/dlogits = (w/B) * (probs - onehot)
        double scale = weights[i] * inv_batch;
        Vec dlogits(p.classes);
        for (int c = 0; c < p.classes; ++c)
            dlogits[c] = scale * (trace.probs[c] - (c == s.label ? 1.0 : 0.0));

        outer_add(g.w_head, dlogits, trace.h_final);
        add(g.b_head, dlogits);
        Vec dh(hidden, 0.0);
        matvec_transpose_add(p.w_head, dlogits, dh);

        Vec d_update(hidden), d_cand(hidden), dh_prev(hidden), da(hidden), d_reset(hidden);
        Vec reset_h(hidden), d_reset_h(hidden);
        const Vec zero_state(hidden, 0.0);
        for (int t = s.t; t >= 1; --t) {
            const StepTrace& st = trace.steps[t - 1];
            const Vec& h_prev = (t >= 2) ? trace.steps[t - 2].h : zero_state;
            const Vec& x = input_at(data, s, t);

            for (int j = 0; j < hidden; ++j) {
                d_update[j] = dh[j] * (st.cand[j] - h_prev[j]);
                d_cand[j] = dh[j] * st.update[j];
                dh_prev[j] = dh[j] * (1.0 - st.update[j]);
            }

            // candidate: tanh(W_c x + U_c (reset . h_prev) + b_c)
            for (int j = 0; j < hidden; ++j) {
                da[j] = d_cand[j] * (1.0 - st.cand[j] * st.cand[j]);
                reset_h[j] = st.reset[j] * h_prev[j];
            }
            outer_add(g.w_cand, da, x);
            outer_add(g.u_cand, da, reset_h);
            add(g.b_cand, da);
            std::fill(d_reset_h.begin(), d_reset_h.end(), 0.0);
            matvec_transpose_add(p.u_cand, da, d_reset_h);
            for (int j = 0; j < hidden; ++j) {
                d_reset[j] = d_reset_h[j] * h_prev[j];
                dh_prev[j] += d_reset_h[j] * st.reset[j];
            }

            // update gate
            for (int j = 0; j < hidden; ++j)
                da[j] = d_update[j] * st.update[j] * (1.0 - st.update[j]);
            outer_add(g.w_update, da, x);
            outer_add(g.u_update, da, h_prev);
            add(g.b_update, da);
            matvec_transpose_add(p.u_update, da, dh_prev);

            // reset gate
            for (int j = 0; j < hidden; ++j)
                da[j] = d_reset[j] * st.reset[j] * (1.0 - st.reset[j]);
            outer_add(g.w_reset, da, x);
            outer_add(g.u_reset, da, h_prev);
            add(g.b_reset, da);
            matvec_transpose_add(p.u_reset, da, dh_prev);

            dh = dh_prev;
        }
    }
    if (!batch.empty()) out.loss.value *= inv_batch;
    return out;
}

ModelParams sgd_step(const ModelParams& p, const ModelParams& grad, double learning_rate) {
    if (learning_rate <= 0.0) throw ContractError("learning rate must be positive");
    ModelParams next = p;
    auto dst = tensor_views(next);
    auto src = tensor_views(grad);
    for (size_t k = 0; k < dst.size(); ++k) {
        if (dst[k].second.size() != src[k].second.size())
            throw ContractError("gradient shape mismatch for " + dst[k].first);
        for (size_t i = 0; i < dst[k].second.size(); ++i)
            dst[k].second[i] -= learning_rate * src[k].second[i];
    }
    return next;
}

std::vector<PredictiveDistribution> mc_predict(const ModelParams& p, const Dataset& data,
                                               const PrefixSample& s, int k_passes,
                                               double keep_rate, uint64_t rng_seed) {
    if (k_passes < 1) throw ContractError("mc_predict needs at least 1 pass");
    if (!(keep_rate > 0.0 && keep_rate <= 1.0))
        throw ContractError("mc_predict keep rate outside (0, 1]");
    Rng base(rng_seed);
    std::vector<PredictiveDistribution> out;
    out.reserve(k_passes);
    for (int k = 0; k < k_passes; ++k) {
        DropoutMask mask =
            make_dropout_mask(p.hidden, keep_rate, base.child(static_cast<uint64_t>(k)).state());
        out.push_back(forward(p, data, s, &mask));
    }
    return out;
}

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json tensor_json(std::span<const double> data, int rows, int cols) {
    nlohmann::json j;
    j["shape"] = cols >= 0 ? nlohmann::json::array({rows, cols}) : nlohmann::json::array({rows});
    j["data"] = std::vector<double>(data.begin(), data.end());
    return j;
}

}  // namespace

std::string checkpoint_to_string(const ModelParams& p) {
    nlohmann::json j;
    j["format"] = "cctrain-checkpoint";
    j["version"] = kCheckpointVersion;
    j["input_dim"] = p.input_dim;
    j["hidden"] = p.hidden;
    j["classes"] = p.classes;
    nlohmann::json tensors;
    tensors["w_update"] = tensor_json(p.w_update.a, p.hidden, p.input_dim);
    tensors["u_update"] = tensor_json(p.u_update.a, p.hidden, p.hidden);
    tensors["b_update"] = tensor_json(p.b_update, p.hidden, -1);
    tensors["w_reset"] = tensor_json(p.w_reset.a, p.hidden, p.input_dim);
    tensors["u_reset"] = tensor_json(p.u_reset.a, p.hidden, p.hidden);
    tensors["b_reset"] = tensor_json(p.b_reset, p.hidden, -1);
    tensors["w_cand"] = tensor_json(p.w_cand.a, p.hidden, p.input_dim);
    tensors["u_cand"] = tensor_json(p.u_cand.a, p.hidden, p.hidden);
    tensors["b_cand"] = tensor_json(p.b_cand, p.hidden, -1);
    tensors["w_head"] = tensor_json(p.w_head.a, p.classes, p.hidden);
    tensors["b_head"] = tensor_json(p.b_head, p.classes, -1);
    j["tensors"] = std::move(tensors);
    return j.dump();
}

ModelParams checkpoint_from_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != "cctrain-checkpoint")
        throw Error("not a cctrain checkpoint");
    if (j.value("version", -1) != kCheckpointVersion)
        throw Error("unsupported checkpoint version");
    ModelParams p = zero_params(j.at("input_dim").get<int>(), j.at("hidden").get<int>(),
                                j.at("classes").get<int>());
    const auto& tensors = j.at("tensors");
    for (auto& [name, span] : tensor_views(p)) {
        const auto& tj = tensors.at(name);
        auto data = tj.at("data").get<std::vector<double>>();
        if (data.size() != span.size())
            throw Error("checkpoint tensor '" + name + "' has wrong size");
        std::copy(data.begin(), data.end(), span.begin());
    }
    return p;
}

void save_checkpoint(const ModelParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint: " + path);
    out << checkpoint_to_string(p) << "\n";
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read checkpoint: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return checkpoint_from_string(text);
}

}  // namespace cctrain
