#pragma once

#include "edgeface/tensor.hpp"

namespace edgeface {

// Grouped 2-D convolution parameters. kernel is (out_ch, in_ch_per_group, kh, kw);
// depthwise means groups == input channels and in_ch_per_group == 1.
struct ConvParams {
    Tensor kernel;
    Tensor bias;  // empty => no bias
    int stride = 1;
    int padding = 0;
    int groups = 1;
};

enum class NormAxis { Channel, Last };

// Zero-padded grouped convolution, NCHW in / NCHW out.
Tensor conv2d(const Tensor& input, const ConvParams& p);

// Normalizes across channels at each (n,h,w) for rank-4 input, or across the
// last axis per row for rank-2 input. Variance is the population variance; the
// denominator is sqrt(var + eps).
Tensor layer_norm(const Tensor& x, NormAxis axis, float eps, const std::vector<float>& gain,
                  const std::vector<float>& offset);

// Max-shifted softmax. Rank-1 input is treated as a single row; rank-2 input is
// reduced along the chosen axis (0 = down columns, 1 = along rows).
Tensor softmax(const Tensor& x, int axis = -1);

// Global average pool to 1x1.
Tensor adaptive_avg_pool_1(const Tensor& x);

Tensor matmul(const Tensor& a, const Tensor& b);

// tanh-form GELU: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3))).
float gelu_scalar(float x);
Tensor gelu(const Tensor& x);

// Returns v/|v|, or all zeros when |v| < eps.
std::vector<float> l2_normalize(const std::vector<float>& v, float eps = 1e-12f);

}  // namespace edgeface
