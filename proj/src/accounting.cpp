#include "edgeface/accounting.hpp"

#include <cstdio>
#include <stdexcept>

namespace edgeface {

namespace {

int64_t conv_params(const Conv2dLayer& c) {
    return static_cast<int64_t>(c.out_ch) * (c.in_ch / c.groups) * c.kh * c.kw +
           (c.bias.empty() ? 0 : c.out_ch);
}

int64_t conv_macs(const Conv2dLayer& c, int oh, int ow) {
    return static_cast<int64_t>(c.out_ch) * oh * ow * (c.in_ch / c.groups) * c.kh * c.kw;
}

int conv_out_side(const Conv2dLayer& c, int in_side) {
    return (in_side + 2 * c.padding - c.kh) / c.stride + 1;
}

LayerCost dense_cost(const DenseLayer& d) {
    if (d.lowrank.has_value())
        return loralin_cost(d.in_features, d.out_features, d.lowrank->gamma, d.has_bias);
    return full_linear_cost(d.in_features, d.out_features, d.has_bias);
}

struct Walker {
    CostReport report;

    void add(const std::string& name, int64_t params, int64_t macs) {
        report.rows.push_back({name, params, macs});
        report.total_params += params;
        report.total_macs += macs;
    }
    void conv(const Conv2dLayer& c, int side) { add(c.name, conv_params(c), conv_macs(c, side, side)); }
    void norm(const NormLayer& n) { add(n.name, 2 * static_cast<int64_t>(n.width), 0); }
    void dense(const DenseLayer& d, int64_t tokens) {
        const LayerCost lc = dense_cost(d);
        add(d.name, lc.params, lc.macs_per_row * tokens);
    }
};

}  // namespace

int64_t xca_macs(const STDABlock& block, int tokens) {
    const int d = block.channels / block.heads;
    const int64_t qkv = dense_cost(block.qkv).macs_per_row * tokens;
    const int64_t attn = 2ll * block.heads * d * d * tokens;  // QK^T and AV products
    const int64_t proj = dense_cost(block.proj).macs_per_row * tokens;
    return qkv + attn + proj;
}

CostReport count(const EdgeFaceModel& model) {
    Walker w;
    int side = model.spec.input_side;

    side = conv_out_side(model.stem_conv, side);
    w.conv(model.stem_conv, side);
    w.norm(model.stem_norm);

    for (const Stage& stage : model.stages) {
        if (stage.down.has_value()) {
            w.norm(stage.down->norm);
            side = conv_out_side(stage.down->conv, side);
            w.conv(stage.down->conv, side);
        }
        const int64_t tokens = static_cast<int64_t>(side) * side;
        for (const EncoderBlock& block : stage.blocks) {
            if (block.is_stda) {
                const STDABlock& s = block.stda;
                for (const Conv2dLayer& c : s.convs) w.conv(c, side);
                w.norm(s.norm_attn);
                w.dense(s.qkv, tokens);
                const int d = s.channels / s.heads;
                w.add(s.name + ".attn_map", s.heads, 2ll * s.heads * d * d * tokens);
                w.dense(s.proj, tokens);
                w.norm(s.norm_mlp);
                w.dense(s.pw1, tokens);
                w.dense(s.pw2, tokens);
            } else {
                const ConvBlock& c = block.conv;
                w.conv(c.dwconv, side);
                w.norm(c.norm);
                w.dense(c.pw1, tokens);
                w.dense(c.pw2, tokens);
            }
        }
    }

    w.norm(model.head.norm);
    w.dense(model.head.linear, 1);
    return w.report;
}

CostReport count_variant(const VariantSpec& spec, std::optional<double> gamma) {
    return count(assemble(spec, gamma));
}

std::vector<SweepRow> gamma_sweep(const VariantSpec& spec, const std::vector<double>& gammas) {
    for (double g : gammas)
        if (!(g > 0.0) || g > 1.0)
            throw std::invalid_argument("gamma_sweep: gamma " + std::to_string(g) + " outside (0, 1]");

    std::vector<SweepRow> rows;
    const CostReport ref = count_variant(spec, std::nullopt);
    SweepRow base;
    base.is_reference = true;
    base.mparams = ref.mparams();
    base.mflops = ref.mflops();
    rows.push_back(base);

    for (double g : gammas) {
        const CostReport r = count_variant(spec, g);
        SweepRow row;
        row.gamma = g;
        row.mparams = r.mparams();
        row.mflops = r.mflops();
        row.delta_params_pct = 100.0 * (row.mparams - base.mparams) / base.mparams;
        row.delta_flops_pct = 100.0 * (row.mflops - base.mflops) / base.mflops;
        rows.push_back(row);
    }
    return rows;
}

std::string cost_report_csv(const CostReport& report) {
    std::string out = "layer,params,macs\n";
    char buf[256];
    for (const CostRow& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%lld,%lld\n", r.layer.c_str(),
                      static_cast<long long>(r.params), static_cast<long long>(r.macs));
        out += buf;
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "gamma,mparams,mflops,delta_params_pct,delta_flops_pct\n";
    char buf[256];
    for (const SweepRow& r : rows) {
        if (r.is_reference)
            std::snprintf(buf, sizeof(buf), "default,%.6f,%.6f,0.000000,0.000000\n", r.mparams, r.mflops);
        else
            std::snprintf(buf, sizeof(buf), "%.6g,%.6f,%.6f,%.6f,%.6f\n", r.gamma, r.mparams, r.mflops,
                          r.delta_params_pct, r.delta_flops_pct);
        out += buf;
    }
    return out;
}

}  // namespace edgeface
