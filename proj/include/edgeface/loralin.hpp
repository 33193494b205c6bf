#pragma once

#include <optional>

#include "edgeface/tensor.hpp"

namespace edgeface {

// Two-factor low-rank linear layer: an M->N dense map realized as M->r then
// r->N, with the retained rank controlled by the rank ratio gamma. Only the
// second factor carries a bias.
struct LoRaLinLayer {
    int in_features = 0;   // M
    int out_features = 0;  // N
    double gamma = 1.0;
    int rank = 0;     // r
    Tensor w1;        // [r, M], no bias
    Tensor w2;        // [N, r]
    Tensor bias;      // [N] or empty
};

struct LayerCost {
    int64_t params = 0;
    int64_t macs_per_row = 0;
};

// rank = max(2, floor(gamma * min(M, N))), clamped to min(M, N).
int rank_for(int in_features, int out_features, double gamma);

// y = (x * w1^T) * w2^T + bias for a row-major batch x of shape [B, M].
Tensor loralin_forward(const LoRaLinLayer& layer, const Tensor& x);

// Truncated-SVD factorization of a full weight matrix W [N, M]: keeps the top
// r singular triplets, w2 = U_r * S_r, w1 = V_r^T. The Frobenius reconstruction
// error is then the norm of the discarded singular values.
LoRaLinLayer loralin_from_full(const Tensor& full_weight, const std::optional<std::vector<float>>& bias,
                               double gamma);

LayerCost loralin_cost(int in_features, int out_features, double gamma, bool bias);
LayerCost full_linear_cost(int in_features, int out_features, bool bias);

// Thin SVD A = U * diag(s) * V^T via one-sided Jacobi rotations on the columns
// of A (tolerance 1e-10, at most 100 sweeps). Singular values are returned in
// non-increasing order.
struct SvdResult {
    Tensor u;                   // [rows, k]
    std::vector<float> sigma;   // k = min(rows, cols)
    Tensor vt;                  // [k, cols]
    bool converged = true;
    int sweeps = 0;
};
SvdResult jacobi_svd(const Tensor& a);

}  // namespace edgeface
