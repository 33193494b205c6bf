#include "edgeface/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "edgeface/runtime.hpp"

namespace edgeface {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvParams& p) {
    require(input.rank() == 4, "conv2d: input rank " + std::to_string(input.rank()) + ", expected 4");
    require(p.kernel.rank() == 4, "conv2d: kernel rank " + std::to_string(p.kernel.rank()) + ", expected 4");
    require(p.stride >= 1, "conv2d: stride " + std::to_string(p.stride) + " < 1");
    require(p.padding >= 0, "conv2d: padding " + std::to_string(p.padding) + " < 0");
    require(p.groups >= 1, "conv2d: groups " + std::to_string(p.groups) + " < 1");

    const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int oc = p.kernel.dim(0), icg = p.kernel.dim(1), kh = p.kernel.dim(2), kw = p.kernel.dim(3);

    require(c == p.groups * icg, "conv2d: input channels (" + std::to_string(c) +
                                     ") != groups*in_ch_per_group (" + std::to_string(p.groups * icg) + ")");
    require(oc % p.groups == 0,
            "conv2d: out_ch (" + std::to_string(oc) + ") not divisible by groups (" + std::to_string(p.groups) + ")");
    require(h + 2 * p.padding >= kh, "conv2d: padded height (" + std::to_string(h + 2 * p.padding) +
                                         ") < kernel height (" + std::to_string(kh) + ")");
    require(w + 2 * p.padding >= kw, "conv2d: padded width (" + std::to_string(w + 2 * p.padding) +
                                         ") < kernel width (" + std::to_string(kw) + ")");
    if (!p.bias.empty())
        require(p.bias.numel() == oc, "conv2d: bias length (" + std::to_string(p.bias.numel()) +
                                          ") != out_ch (" + std::to_string(oc) + ")");

    const int oh = (h + 2 * p.padding - kh) / p.stride + 1;
    const int ow = (w + 2 * p.padding - kw) / p.stride + 1;
    const int oc_per_group = oc / p.groups;

    Tensor out({n, oc, oh, ow});
    const float* in = input.data.data();
    const float* ker = p.kernel.data.data();
    float* dst = out.data.data();

    parallel_for(static_cast<int64_t>(n) * oc, [&](int64_t lo, int64_t hi) {
        for (int64_t job = lo; job < hi; ++job) {
            const int bn = static_cast<int>(job / oc);
            const int o = static_cast<int>(job % oc);
            const int g = o / oc_per_group;
            const float b = p.bias.empty() ? 0.0f : p.bias.data[static_cast<size_t>(o)];
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    float acc = 0.0f;
                    for (int ic = 0; ic < icg; ++ic) {
                        const int cin = g * icg + ic;
                        const float* in_ch = in + (static_cast<size_t>(bn) * c + cin) * h * w;
                        const float* k_ch =
                            ker + (static_cast<size_t>(o) * icg + ic) * kh * kw;
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy * p.stride + ky - p.padding;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox * p.stride + kx - p.padding;
                                if (ix < 0 || ix >= w) continue;
                                acc += in_ch[static_cast<size_t>(iy) * w + ix] * k_ch[ky * kw + kx];
                            }
                        }
                    }
                    dst[((static_cast<size_t>(bn) * oc + o) * oh + oy) * ow + ox] = acc + b;
                }
            }
        }
    });
    if (mac_tally::enabled())
        mac_tally::add(static_cast<uint64_t>(n) * oc * oh * ow * icg * kh * kw);
    return out;
}

Tensor layer_norm(const Tensor& x, NormAxis axis, float eps, const std::vector<float>& gain,
                  const std::vector<float>& offset) {
    require(eps > 0.0f, "layer_norm: eps must be > 0");
    int width = 0;
    if (axis == NormAxis::Channel) {
        require(x.rank() == 4, "layer_norm: channel axis needs rank-4 input, got rank " +
                                   std::to_string(x.rank()));
        width = x.dim(1);
    } else {
        require(x.rank() == 2, "layer_norm: last axis needs rank-2 input, got rank " +
                                   std::to_string(x.rank()));
        width = x.dim(1);
    }
    require(width >= 1, "layer_norm: zero-length normalization axis");
    require(static_cast<int>(gain.size()) == width, "layer_norm: gain length (" +
                                                        std::to_string(gain.size()) + ") != axis extent (" +
                                                        std::to_string(width) + ")");
    require(static_cast<int>(offset.size()) == width, "layer_norm: offset length (" +
                                                          std::to_string(offset.size()) + ") != axis extent (" +
                                                          std::to_string(width) + ")");

    Tensor out(x.shape);
    if (axis == NormAxis::Last) {
        const int rows = x.dim(0);
        for (int r = 0; r < rows; ++r) {
            const float* src = x.data.data() + static_cast<size_t>(r) * width;
            float* dst = out.data.data() + static_cast<size_t>(r) * width;
            float mean = 0.0f;
            for (int i = 0; i < width; ++i) mean += src[i];
            mean /= static_cast<float>(width);
            float var = 0.0f;
            for (int i = 0; i < width; ++i) {
                float d = src[i] - mean;
                var += d * d;
            }
            var /= static_cast<float>(width);
            const float inv = 1.0f / std::sqrt(var + eps);
            for (int i = 0; i < width; ++i) dst[i] = (src[i] - mean) * inv * gain[static_cast<size_t>(i)] +
                                                     offset[static_cast<size_t>(i)];
        }
        return out;
    }

    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const size_t plane = static_cast<size_t>(h) * w;
    for (int bn = 0; bn < n; ++bn) {
        const float* src = x.data.data() + static_cast<size_t>(bn) * c * plane;
        float* dst = out.data.data() + static_cast<size_t>(bn) * c * plane;
        for (size_t px = 0; px < plane; ++px) {
            float mean = 0.0f;
            for (int ch = 0; ch < c; ++ch) mean += src[ch * plane + px];
            mean /= static_cast<float>(c);
            float var = 0.0f;
            for (int ch = 0; ch < c; ++ch) {
                float d = src[ch * plane + px] - mean;
                var += d * d;
            }
            var /= static_cast<float>(c);
            const float inv = 1.0f / std::sqrt(var + eps);
            for (int ch = 0; ch < c; ++ch)
                dst[ch * plane + px] = (src[ch * plane + px] - mean) * inv * gain[static_cast<size_t>(ch)] +
                                       offset[static_cast<size_t>(ch)];
        }
    }
    return out;
}

Tensor softmax(const Tensor& x, int axis) {
    require(x.rank() == 1 || x.rank() == 2, "softmax: rank " + std::to_string(x.rank()) + " unsupported");
    if (x.rank() == 1) {
        require(x.dim(0) >= 1, "softmax: empty axis");
        Tensor row({1, x.dim(0)}, x.data);
        Tensor out = softmax(row, 1);
        return Tensor({x.dim(0)}, std::move(out.data));
    }
    if (axis < 0) axis = 1;
    require(axis == 0 || axis == 1, "softmax: axis " + std::to_string(axis) + " out of range");
    const int rows = x.dim(0), cols = x.dim(1);
    Tensor out(x.shape);
    if (axis == 1) {
        for (int r = 0; r < rows; ++r) {
            const float* src = x.data.data() + static_cast<size_t>(r) * cols;
            float* dst = out.data.data() + static_cast<size_t>(r) * cols;
            float mx = src[0];
            for (int i = 1; i < cols; ++i) mx = std::max(mx, src[i]);
            float sum = 0.0f;
            for (int i = 0; i < cols; ++i) {
                dst[i] = std::exp(src[i] - mx);
                sum += dst[i];
            }
            for (int i = 0; i < cols; ++i) dst[i] /= sum;
        }
    } else {
        for (int cidx = 0; cidx < cols; ++cidx) {
            float mx = x.at2(0, cidx);
            for (int r = 1; r < rows; ++r) mx = std::max(mx, x.at2(r, cidx));
            float sum = 0.0f;
            for (int r = 0; r < rows; ++r) {
                out.at2(r, cidx) = std::exp(x.at2(r, cidx) - mx);
                sum += out.at2(r, cidx);
            }
            for (int r = 0; r < rows; ++r) out.at2(r, cidx) /= sum;
        }
    }
    return out;
}

Tensor adaptive_avg_pool_1(const Tensor& x) {
    require(x.rank() == 4, "adaptive_avg_pool_1: input rank " + std::to_string(x.rank()) + ", expected 4");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor out({n, c, 1, 1});
    const size_t plane = static_cast<size_t>(h) * w;
    for (int bn = 0; bn < n; ++bn) {
        for (int ch = 0; ch < c; ++ch) {
            const float* src = x.data.data() + (static_cast<size_t>(bn) * c + ch) * plane;
            float acc = 0.0f;
            for (size_t i = 0; i < plane; ++i) acc += src[i];
            out.at4(bn, ch, 0, 0) = acc / static_cast<float>(plane);
        }
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2, "matmul: both operands must be rank 2");
    require(a.dim(1) == b.dim(0), "matmul: inner dims disagree (" + std::to_string(a.dim(1)) + " vs " +
                                      std::to_string(b.dim(0)) + ")");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        const float* ar = a.data.data() + static_cast<size_t>(i) * k;
        float* dst = out.data.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (int t = 0; t < k; ++t) acc += ar[t] * b.data[static_cast<size_t>(t) * n + j];
            dst[j] = acc;
        }
    }
    if (mac_tally::enabled()) mac_tally::add(static_cast<uint64_t>(m) * k * n);
    return out;
}

float gelu_scalar(float x) {
    // Fixed constants so goldens are reproducible across builds.
    constexpr float kSqrt2OverPi = 0.7978845608028654f;
    constexpr float kCubic = 0.044715f;
    const float u = kSqrt2OverPi * (x + kCubic * x * x * x);
    return 0.5f * x * (1.0f + std::tanh(u));
}

Tensor gelu(const Tensor& x) {
    Tensor out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = gelu_scalar(x.data[i]);
    return out;
}

std::vector<float> l2_normalize(const std::vector<float>& v, float eps) {
    require(eps > 0.0f, "l2_normalize: eps must be > 0");
    float sq = 0.0f;
    for (float x : v) sq += x * x;
    const float norm = std::sqrt(sq);
    std::vector<float> out(v.size(), 0.0f);
    if (norm < eps) return out;
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
    return out;
}

}  // namespace edgeface
