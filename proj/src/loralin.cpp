#include "edgeface/loralin.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "edgeface/ops.hpp"
#include "edgeface/runtime.hpp"

namespace edgeface {

int rank_for(int in_features, int out_features, double gamma) {
    if (in_features < 1 || out_features < 1)
        throw std::invalid_argument("rank_for: features must be >= 1");
    if (!(gamma > 0.0) || gamma > 1.0)
        throw std::invalid_argument("rank_for: gamma " + std::to_string(gamma) + " outside (0, 1]");
    const int mn = std::min(in_features, out_features);
    int r = std::max(2, static_cast<int>(std::floor(gamma * static_cast<double>(mn))));
    return std::min(r, mn);
}

Tensor loralin_forward(const LoRaLinLayer& layer, const Tensor& x) {
    if (x.rank() != 2)
        throw std::invalid_argument("loralin: input rank " + std::to_string(x.rank()) + ", expected 2");
    if (x.dim(1) != layer.in_features)
        throw std::invalid_argument("loralin: input width (" + std::to_string(x.dim(1)) +
                                    ") != in_features (" + std::to_string(layer.in_features) + ")");
    const int b = x.dim(0), m = layer.in_features, n = layer.out_features, r = layer.rank;

    // h = x * w1^T, y = h * w2^T (+ bias), all in fixed row-major order.
    Tensor h({b, r});
    for (int i = 0; i < b; ++i) {
        const float* xr = x.data.data() + static_cast<size_t>(i) * m;
        for (int j = 0; j < r; ++j) {
            const float* w1r = layer.w1.data.data() + static_cast<size_t>(j) * m;
            float acc = 0.0f;
            for (int t = 0; t < m; ++t) acc += xr[t] * w1r[t];
            h.at2(i, j) = acc;
        }
    }
    Tensor y({b, n});
    for (int i = 0; i < b; ++i) {
        const float* hr = h.data.data() + static_cast<size_t>(i) * r;
        for (int j = 0; j < n; ++j) {
            const float* w2r = layer.w2.data.data() + static_cast<size_t>(j) * r;
            float acc = 0.0f;
            for (int t = 0; t < r; ++t) acc += hr[t] * w2r[t];
            y.at2(i, j) = acc + (layer.bias.empty() ? 0.0f : layer.bias.data[static_cast<size_t>(j)]);
        }
    }
    if (mac_tally::enabled()) mac_tally::add(static_cast<uint64_t>(b) * r * (m + n));
    return y;
}

SvdResult jacobi_svd(const Tensor& a) {
    if (a.rank() != 2) throw std::invalid_argument("jacobi_svd: input must be rank 2");
    const int rows = a.dim(0), cols = a.dim(1);
    const bool transposed = rows < cols;  // work on the tall orientation

    // Columns of `work` are orthogonalized in place; `v` accumulates rotations.
    const int m = transposed ? cols : rows;
    const int n = transposed ? rows : cols;
    std::vector<double> work(static_cast<size_t>(m) * n);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            if (transposed)
                work[static_cast<size_t>(j) * n + i] = a.at2(i, j);
            else
                work[static_cast<size_t>(i) * n + j] = a.at2(i, j);
        }
    std::vector<double> v(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;

    constexpr double kTol = 1e-10;
    constexpr int kMaxSweeps = 100;
    bool converged = false;
    int sweep = 0;
    for (; sweep < kMaxSweeps && !converged; ++sweep) {
        converged = true;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (int i = 0; i < m; ++i) {
                    const double xp = work[static_cast<size_t>(i) * n + p];
                    const double xq = work[static_cast<size_t>(i) * n + q];
                    app += xp * xp;
                    aqq += xq * xq;
                    apq += xp * xq;
                }
                if (std::abs(apq) <= kTol * std::sqrt(app * aqq) || apq == 0.0) continue;
                converged = false;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (int i = 0; i < m; ++i) {
                    double* row = work.data() + static_cast<size_t>(i) * n;
                    const double xp = row[p], xq = row[q];
                    row[p] = cs * xp - sn * xq;
                    row[q] = sn * xp + cs * xq;
                }
                for (int i = 0; i < n; ++i) {
                    double* row = v.data() + static_cast<size_t>(i) * n;
                    const double xp = row[p], xq = row[q];
                    row[p] = cs * xp - sn * xq;
                    row[q] = sn * xp + cs * xq;
                }
            }
        }
    }

    std::vector<double> sig(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) {
            const double x = work[static_cast<size_t>(i) * n + j];
            s += x * x;
        }
        sig[static_cast<size_t>(j)] = std::sqrt(s);
    }
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return sig[static_cast<size_t>(i)] > sig[static_cast<size_t>(j)]; });

    // Tall-orientation factors: work -> left (m x n), v -> right (n x n).
    Tensor left({m, n});
    Tensor right({n, n});
    for (int j = 0; j < n; ++j) {
        const int src = order[static_cast<size_t>(j)];
        const double s = sig[static_cast<size_t>(src)];
        const double inv = s > 0.0 ? 1.0 / s : 0.0;
        for (int i = 0; i < m; ++i)
            left.at2(i, j) = static_cast<float>(work[static_cast<size_t>(i) * n + src] * inv);
        for (int i = 0; i < n; ++i) right.at2(i, j) = static_cast<float>(v[static_cast<size_t>(i) * n + src]);
    }

    SvdResult res;
    res.converged = converged;
    res.sweeps = sweep;
    res.sigma.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) res.sigma[static_cast<size_t>(j)] = static_cast<float>(sig[static_cast<size_t>(order[static_cast<size_t>(j)])]);

    if (!transposed) {
        res.u = std::move(left);
        res.vt = Tensor({n, cols});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < cols; ++j) res.vt.at2(i, j) = right.at2(j, i);
    } else {
        // a = (tall)^T = right * diag(s) * left^T
        res.u = Tensor({rows, n});
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < n; ++j) res.u.at2(i, j) = right.at2(i, j);
        res.vt = Tensor({n, cols});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < cols; ++j) res.vt.at2(i, j) = left.at2(j, i);
    }
    return res;
}

LoRaLinLayer loralin_from_full(const Tensor& full_weight, const std::optional<std::vector<float>>& bias,
                               double gamma) {
    if (full_weight.rank() != 2) throw std::invalid_argument("loralin_from_full: weight must be rank 2");
    for (float x : full_weight.data)
        if (!std::isfinite(x)) throw std::invalid_argument("loralin_from_full: non-finite weight entry");
    const int n = full_weight.dim(0), m = full_weight.dim(1);

    LoRaLinLayer layer;
    layer.in_features = m;
    layer.out_features = n;
    layer.gamma = gamma;
    layer.rank = rank_for(m, n, gamma);

    SvdResult svd = jacobi_svd(full_weight);
    if (!svd.converged)
        throw std::runtime_error("loralin_from_full: SVD did not converge for " + std::to_string(n) + "x" +
                                 std::to_string(m) + " weight");

    const int r = layer.rank;
    layer.w2 = Tensor({n, r});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < r; ++j) layer.w2.at2(i, j) = svd.u.at2(i, j) * svd.sigma[static_cast<size_t>(j)];
    layer.w1 = Tensor({r, m});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < m; ++j) layer.w1.at2(i, j) = svd.vt.at2(i, j);
    if (bias.has_value()) {
        if (static_cast<int>(bias->size()) != n)
            throw std::invalid_argument("loralin_from_full: bias length != out_features");
        layer.bias = Tensor({n}, *bias);
    }
    return layer;
}

LayerCost loralin_cost(int in_features, int out_features, double gamma, bool bias) {
    const int64_t r = rank_for(in_features, out_features, gamma);
    LayerCost c;
    c.params = r * in_features + r * out_features + (bias ? out_features : 0);
    c.macs_per_row = r * in_features + r * out_features;
    return c;
}

LayerCost full_linear_cost(int in_features, int out_features, bool bias) {
    LayerCost c;
    c.params = static_cast<int64_t>(in_features) * out_features + (bias ? out_features : 0);
    c.macs_per_row = static_cast<int64_t>(in_features) * out_features;
    return c;
}

}  // namespace edgeface
