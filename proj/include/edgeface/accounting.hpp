#pragma once

#include <string>
#include <vector>

#include "edgeface/backbone.hpp"

namespace edgeface {

struct CostRow {
    std::string layer;
    int64_t params = 0;
    int64_t macs = 0;
};

// Per-layer parameter and multiply-accumulate census for one image. Norms,
// activations, softmax, and pooling carry zero MACs by convention. `mflops`
// counts multiply and add separately (two per MAC), which is the convention
// behind the published totals; `mmacs` is the plain MAC count.
struct CostReport {
    std::vector<CostRow> rows;
    int64_t total_params = 0;
    int64_t total_macs = 0;

    double mparams() const { return static_cast<double>(total_params) / 1e6; }
    double mflops() const { return 2.0 * static_cast<double>(total_macs) / 1e6; }
    double mmacs() const { return static_cast<double>(total_macs) / 1e6; }
};

struct SweepRow {
    bool is_reference = false;  // the default (full-linear) model
    double gamma = 0.0;
    double mparams = 0.0;
    double mflops = 0.0;
    double delta_params_pct = 0.0;  // percent change vs the reference row
    double delta_flops_pct = 0.0;
};

CostReport count(const EdgeFaceModel& model);
CostReport count_variant(const VariantSpec& spec, std::optional<double> gamma);

// MACs of one channel-attention call on a [tokens, channels] matrix, including
// the q/k/v and output projections.
int64_t xca_macs(const STDABlock& block, int tokens);

// One row per gamma plus a leading reference row for the default model.
std::vector<SweepRow> gamma_sweep(const VariantSpec& spec, const std::vector<double>& gammas);

std::string cost_report_csv(const CostReport& report);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace edgeface
