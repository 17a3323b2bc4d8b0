#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cctrain/dataset.hpp"

namespace cctrain {

// Direction of the beta update for the loss term. `as_written` is the literal
// descent on the objective, under which hard samples end up with small beta;
// `narrative` flips the loss term so hard samples gain beta instead. The two
// directions are both defensible readings of the method and are kept apart
// from everything that consumes the table.
enum class Polarity { as_written, narrative };

struct ImportanceConfig {
    double lambda = 0.1;
    double lr_beta = 0.05;
    Polarity polarity = Polarity::as_written;
    double beta_max = 10.0;
};

// (sample_id, loss) pairs for one update step.
using SampleLosses = std::vector<std::pair<int, double>>;

// Learnable per-sample coefficient beta, initialized to 1 and clamped to
// [0, beta_max]. Covers exactly the samples of the current buffer.
class ImportanceTable {
public:
    ImportanceTable() = default;
    explicit ImportanceTable(std::span<const int> sample_ids);

    bool contains(int sample_id) const { return beta_.count(sample_id) > 0; }
    double beta(int sample_id) const;  // ContractError if missing
    void set_beta(int sample_id, double value);
    void insert(int sample_id, double beta = 1.0);
    size_t size() const { return beta_.size(); }
    bool empty() const { return beta_.empty(); }
    const std::map<int, double>& entries() const { return beta_; }

private:
    std::map<int, double> beta_;
};

// Mean over the batch of beta_i^2 * loss_i + lambda * (beta_i - 1)^2.
double importance_objective(const SampleLosses& losses, const ImportanceTable& table,
                            double lambda);

// d(objective)/d(beta_i) for one sample; batch_size is the |D| of the mean.
double importance_gradient(double beta, double loss, double lambda, size_t batch_size,
                           Polarity polarity);

// One descent step on every sample of `losses`; betas are clamped to
// [0, beta_max] afterwards.
void update_importance(ImportanceTable& table, const SampleLosses& losses,
                       const ImportanceConfig& cfg);

// epsilon = arithmetic mean of the betas.
double importance_threshold(const ImportanceTable& table);

enum class ReplayMode { threshold, fraction, none };

struct ReplaySelection {
    std::vector<int> sample_ids;  // ascending
    double epsilon = 0.0;         // threshold used (threshold mode only)
    double fraction = 0.0;        // fraction of the table selected
};

// threshold mode: every sample with beta strictly above the mean.
// fraction mode: the ceil(n / m) samples with the largest beta, ties broken
// by ascending sample id. none: empty selection.
ReplaySelection select_replay(const ImportanceTable& table, ReplayMode mode, int fraction_m);

// CSV rows (sample_id, series_id, t, beta) for the given expansion.
void export_beta_csv(const ImportanceTable& table, const Dataset& data,
                     std::span<const PrefixSample> samples, const std::string& path);

}  // namespace cctrain
