#pragma once

// Shared test helpers: deterministic RNG streams and independent oracles.
// Oracle implementations here must not share code paths with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "edgeface/backbone.hpp"
#include "edgeface/tensor.hpp"

namespace testutil {

class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}
    double uniform() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }
    double normal() {
        return std::sqrt(-2.0 * std::log(uniform())) * std::cos(2.0 * 3.14159265358979323846 * uniform());
    }
    float normal_f() { return static_cast<float>(normal()); }
    uint64_t raw() { return gen_(); }
    int below(int n) { return static_cast<int>(gen_() % static_cast<uint64_t>(n)); }

private:
    std::mt19937_64 gen_;
};

inline edgeface::Tensor random_tensor(std::vector<int> shape, Rng& rng, float scale = 1.0f) {
    edgeface::Tensor t(std::move(shape));
    for (float& x : t.data) x = scale * rng.normal_f();
    return t;
}

// Direct zero-padded grouped convolution, written as one flat 7-deep loop nest
// over a linear float buffer. Independent of the library kernel.
inline edgeface::Tensor conv_oracle(const edgeface::Tensor& in, const edgeface::Tensor& kernel,
                                    const std::vector<float>& bias, int stride, int padding,
                                    int groups) {
    const int n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
    const int oc = kernel.dim(0), icg = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (w + 2 * padding - kw) / stride + 1;
    const int ocg = oc / groups;
    edgeface::Tensor out({n, oc, oh, ow});
    for (int bn = 0; bn < n; ++bn)
        for (int o = 0; o < oc; ++o)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    float acc = bias.empty() ? 0.0f : bias[static_cast<size_t>(o)];
                    for (int ic = 0; ic < icg; ++ic)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const int iy = oy * stride + ky - padding;
                                const int ix = ox * stride + kx - padding;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                const int cin = (o / ocg) * icg + ic;
                                acc += in.data[((static_cast<size_t>(bn) * c + cin) * h + iy) * w + ix] *
                                       kernel.data[((static_cast<size_t>(o) * icg + ic) * kh + ky) * kw + kx];
                            }
                    out.data[((static_cast<size_t>(bn) * oc + o) * oh + oy) * ow + ox] = acc;
                }
    return out;
}

// Singular values via cyclic two-sided Jacobi eigen-iteration on the Gram
// matrix of the smaller side. A different algorithm from the library's
// one-sided column sweep, usable as an independent reference.
inline std::vector<double> singular_values_oracle(const edgeface::Tensor& a) {
    const int rows = a.dim(0), cols = a.dim(1);
    const int n = std::min(rows, cols);
    std::vector<double> g(static_cast<size_t>(n) * n, 0.0);
    if (rows >= cols) {  // G = A^T A
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int t = 0; t < rows; ++t)
                    s += static_cast<double>(a.at2(t, i)) * a.at2(t, j);
                g[static_cast<size_t>(i) * n + j] = s;
            }
    } else {  // G = A A^T
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int t = 0; t < cols; ++t)
                    s += static_cast<double>(a.at2(i, t)) * a.at2(j, t);
                g[static_cast<size_t>(i) * n + j] = s;
            }
    }

    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) off += std::abs(g[static_cast<size_t>(p) * n + q]);
        if (off < 1e-13) break;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = g[static_cast<size_t>(p) * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double app = g[static_cast<size_t>(p) * n + p];
                const double aqq = g[static_cast<size_t>(q) * n + q];
                const double theta = 0.5 * std::atan2(2.0 * apq, aqq - app);
                const double cs = std::cos(theta), sn = std::sin(theta);
                for (int i = 0; i < n; ++i) {
                    const double gp = g[static_cast<size_t>(i) * n + p];
                    const double gq = g[static_cast<size_t>(i) * n + q];
                    g[static_cast<size_t>(i) * n + p] = cs * gp - sn * gq;
                    g[static_cast<size_t>(i) * n + q] = sn * gp + cs * gq;
                }
                for (int i = 0; i < n; ++i) {
                    const double gp = g[static_cast<size_t>(p) * n + i];
                    const double gq = g[static_cast<size_t>(q) * n + i];
                    g[static_cast<size_t>(p) * n + i] = cs * gp - sn * gq;
                    g[static_cast<size_t>(q) * n + i] = sn * gp + cs * gq;
                }
            }
    }

    std::vector<double> sig(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) sig[static_cast<size_t>(i)] = std::sqrt(std::max(g[static_cast<size_t>(i) * n + i], 0.0));
    std::sort(sig.begin(), sig.end(), std::greater<double>());
    return sig;
}

// Miniature architecture for fast structural tests.
inline edgeface::VariantSpec mini_spec() {
    edgeface::VariantSpec s;
    s.name = "MINI";
    s.stage_channels = {8, 12, 16, 20};
    s.stage_depths = {1, 2, 2, 2};
    s.stage_kernel_sizes = {3, 3, 5, 5};
    s.stda_groups = {1, 2, 3, 4};
    s.attn_heads = 4;
    s.mlp_expansion = 4.0;
    s.head_dim = 32;
    s.input_side = 112;
    s.drop_rate = 0.0;
    return s;
}

}  // namespace testutil
