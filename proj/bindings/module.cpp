#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "cctrain/config.hpp"
#include "cctrain/errors.hpp"
#include "cctrain/evaluation.hpp"
#include "cctrain/pipeline.hpp"
#include "cctrain/uncertainty.hpp"

namespace py = pybind11;

namespace {

cctrain::RunConfig config_from_json_text(const std::string& text) {
    return cctrain::parse_config(nlohmann::json::parse(text));
}

py::dict report_dict(const cctrain::EvaluationReport& report) {
    py::dict out;
    py::list profile;
    for (double v : report.profile) profile.append(v);
    out["prefix_auc"] = profile;
    out["accuracy"] = report.accuracy_full;
    out["bwt"] = report.transfer.bwt;
    out["fwt"] = report.transfer.fwt;
    out["alpha"] = report.non_coverage;
    out["epochs"] = report.total_epochs;
    return out;
}

cctrain::UncertaintyVariant parse_variant(const std::string& name) {
    if (name == "literal") return cctrain::UncertaintyVariant::literal;
    if (name == "entropy") return cctrain::UncertaintyVariant::entropy;
    throw cctrain::ConfigError("unknown uncertainty variant '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Confidence-guided training for continuous time-series classification";

    // Translators run newest-first, so the base class is registered first.
    py::register_exception<cctrain::Error>(m, "CctrainError", PyExc_RuntimeError);
    py::register_exception<cctrain::ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def(
        "gen_data",
        [](const std::string& config_text) {
            return cctrain::cmd_gen_data(config_from_json_text(config_text));
        },
        py::arg("config_json"), "Write the config's synthetic dataset CSV; returns its path.");

    m.def(
        "run_pipeline",
        [](const std::string& config_text, const std::string& run_dir) {
            cctrain::RunConfig cfg = config_from_json_text(config_text);
            if (!run_dir.empty()) cfg.output_dir = run_dir;
            cctrain::PipelineResult result = cctrain::run_pipeline(cfg, cfg.output_dir);
            cctrain::EvaluationReport report = cctrain::evaluate_pipeline(result, cfg);
            py::dict out = report_dict(report);
            out["run_dir"] = result.run_dir;
            out["wall_seconds"] = result.wall_seconds;
            return out;
        },
        py::arg("config_json"), py::arg("run_dir") = "",
        "Train per the config and return the evaluation metrics.");

    m.def(
        "evaluate_run",
        [](const std::string& run_dir) { return report_dict(cctrain::evaluate_run_dir(run_dir)); },
        py::arg("run_dir"), "Recompute metrics from a persisted run directory.");

    m.def(
        "auc_roc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
            return cctrain::auc_roc(scores, labels);
        },
        py::arg("scores"), py::arg("labels"));

    m.def(
        "transfer_metrics",
        [](const std::vector<std::vector<double>>& r, const std::vector<double>& baseline) {
            cctrain::AccuracyMatrix matrix{r, baseline};
            cctrain::TransferMetrics t = cctrain::transfer_metrics(matrix);
            return py::make_tuple(t.bwt, t.fwt);
        },
        py::arg("r"), py::arg("baseline"));

    m.def(
        "data_uncertainty",
        [](const std::vector<double>& probs, double beta, int class_count,
           const std::string& variant) {
            return cctrain::data_uncertainty(probs, beta, class_count, parse_variant(variant));
        },
        py::arg("probs"), py::arg("beta"), py::arg("class_count"),
        py::arg("variant") = "literal");

    m.def(
        "prediction_interval",
        [](std::vector<double> samples, double alpha) {
            std::vector<std::vector<double>> per_point{std::move(samples)};
            std::vector<double> heldout{0.0};
            auto report = cctrain::prediction_interval(per_point, alpha, heldout);
            return py::make_tuple(report.intervals[0].lo, report.intervals[0].hi);
        },
        py::arg("samples"), py::arg("alpha"));

    m.def(
        "should_stop",
        [](const std::vector<double>& confidences, int patience, double min_delta,
           int epoch_cap) {
            cctrain::ConfidenceHistory h;
            h.values = confidences;
            h.patience = patience;
            h.min_delta = min_delta;
            h.epoch_cap = epoch_cap;
            return cctrain::should_stop(h);
        },
        py::arg("confidences"), py::arg("patience") = 5, py::arg("min_delta") = 1e-3,
        py::arg("epoch_cap") = 200);
}
