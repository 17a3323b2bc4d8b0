#include "cctrain/importance.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "cctrain/errors.hpp"

namespace cctrain {

ImportanceTable::ImportanceTable(std::span<const int> sample_ids) {
    for (int id : sample_ids) beta_[id] = 1.0;
}

double ImportanceTable::beta(int sample_id) const {
    auto it = beta_.find(sample_id);
    if (it == beta_.end())
        throw ContractError("sample " + std::to_string(sample_id) + " not in importance table");
    return it->second;
}

void ImportanceTable::set_beta(int sample_id, double value) {
    auto it = beta_.find(sample_id);
    if (it == beta_.end())
        throw ContractError("sample " + std::to_string(sample_id) + " not in importance table");
    it->second = value;
}

void ImportanceTable::insert(int sample_id, double beta) { beta_[sample_id] = beta; }

double importance_objective(const SampleLosses& losses, const ImportanceTable& table,
                            double lambda) {
    if (losses.empty()) throw ContractError("importance objective over an empty batch");
    double total = 0.0;
    for (const auto& [id, loss] : losses) {
        if (!std::isfinite(loss)) throw ContractError("non-finite loss for sample " + std::to_string(id));
        double b = table.beta(id);
        total += b * b * loss + lambda * (b - 1.0) * (b - 1.0);
    }
    return total / static_cast<double>(losses.size());
}

double importance_gradient(double beta, double loss, double lambda, size_t batch_size,
                           Polarity polarity) {
    double loss_term = 2.0 * beta * loss;
    if (polarity == Polarity::narrative) loss_term = -loss_term;
    return (loss_term + 2.0 * lambda * (beta - 1.0)) / static_cast<double>(batch_size);
}

void update_importance(ImportanceTable& table, const SampleLosses& losses,
                       const ImportanceConfig& cfg) {
    if (losses.empty()) return;
    size_t n = losses.size();
    for (const auto& [id, loss] : losses) {
        double b = table.beta(id);
        double g = importance_gradient(b, loss, cfg.lambda, n, cfg.polarity);
        table.set_beta(id, std::clamp(b - cfg.lr_beta * g, 0.0, cfg.beta_max));
    }
}

double importance_threshold(const ImportanceTable& table) {
    if (table.empty()) throw ContractError("importance threshold over an empty table");
    double sum = 0.0;
    for (const auto& [id, b] : table.entries()) sum += b;
    return sum / static_cast<double>(table.size());
}

ReplaySelection select_replay(const ImportanceTable& table, ReplayMode mode, int fraction_m) {
    ReplaySelection sel;
    if (mode == ReplayMode::none || table.empty()) return sel;
    if (mode == ReplayMode::threshold) {
        sel.epsilon = importance_threshold(table);
        for (const auto& [id, b] : table.entries())
            if (b > sel.epsilon) sel.sample_ids.push_back(id);
    } else {
        if (fraction_m < 1) throw ContractError("replay fraction m must be >= 1");
        std::vector<std::pair<int, double>> rows(table.entries().begin(), table.entries().end());
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        size_t take = (table.size() + static_cast<size_t>(fraction_m) - 1) /
                      static_cast<size_t>(fraction_m);
        for (size_t i = 0; i < take; ++i) sel.sample_ids.push_back(rows[i].first);
        std::sort(sel.sample_ids.begin(), sel.sample_ids.end());
    }
    sel.fraction = static_cast<double>(sel.sample_ids.size()) / static_cast<double>(table.size());
    return sel;
}

void export_beta_csv(const ImportanceTable& table, const Dataset& data,
                     std::span<const PrefixSample> samples, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write beta table: " + path);
    out << "sample_id,series_id,t,beta\n";
    for (const auto& [id, b] : table.entries()) {
        if (id < 0 || id >= static_cast<int>(samples.size()))
            throw ContractError("sample id " + std::to_string(id) + " outside the expansion");
        const PrefixSample& s = samples[id];
        char buf[32];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), b);
        out << id << ',' << data.series[s.series_index].id << ',' << s.t << ','
            << std::string_view(buf, ptr - buf) << "\n";
    }
}

}  // namespace cctrain
