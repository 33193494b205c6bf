#include "edgeface/backbone.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "edgeface/runtime.hpp"

namespace edgeface {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// Deterministic parameter initialization stream: uniforms come from fixed
// 64-bit draws, normals from Box-Muller, truncated at two sigma by redraw.
class InitRng {
public:
    explicit InitRng(uint64_t seed) : gen_(seed) {}

    double uniform() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    }

    float trunc_normal(float sigma) {
        for (;;) {
            const double u1 = uniform();
            const double u2 = uniform();
            const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
            if (std::abs(z) <= 2.0) return sigma * static_cast<float>(z);
        }
    }

private:
    std::mt19937_64 gen_;
};

std::vector<int> split_channels(int channels, int groups) {
    const int width = (channels + groups - 1) / groups;
    std::vector<int> widths;
    int rest = channels;
    while (rest > 0) {
        widths.push_back(std::min(width, rest));
        rest -= std::min(width, rest);
    }
    return widths;
}

Conv2dLayer make_conv(std::string name, int in_ch, int out_ch, int k, int stride, int padding,
                      int groups) {
    Conv2dLayer c;
    c.name = std::move(name);
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.kh = c.kw = k;
    c.stride = stride;
    c.padding = padding;
    c.groups = groups;
    c.weight = Tensor({out_ch, in_ch / groups, k, k});
    c.bias = Tensor({out_ch});
    return c;
}

NormLayer make_norm(std::string name, int width) {
    NormLayer n;
    n.name = std::move(name);
    n.width = width;
    n.gain = Tensor({width});
    n.offset = Tensor({width});
    return n;
}

DenseLayer make_dense(std::string name, int in_features, int out_features,
                      const std::optional<double>& gamma, bool has_bias = true) {
    DenseLayer d;
    d.name = std::move(name);
    d.in_features = in_features;
    d.out_features = out_features;
    d.has_bias = has_bias;
    if (gamma.has_value()) {
        LoRaLinLayer lr;
        lr.in_features = in_features;
        lr.out_features = out_features;
        lr.gamma = *gamma;
        lr.rank = rank_for(in_features, out_features, *gamma);
        lr.w1 = Tensor({lr.rank, in_features});
        lr.w2 = Tensor({out_features, lr.rank});
        if (has_bias) lr.bias = Tensor({out_features});
        d.lowrank = std::move(lr);
    } else {
        d.weight = Tensor({out_features, in_features});
        if (has_bias) d.bias = Tensor({out_features});
    }
    return d;
}

ConvBlock make_conv_block(const std::string& prefix, int channels, int kernel, double expansion,
                          const std::optional<double>& gamma) {
    ConvBlock b;
    b.dwconv = make_conv(prefix + ".dwconv", channels, channels, kernel, 1, kernel / 2, channels);
    b.norm = make_norm(prefix + ".norm", channels);
    const int hidden = static_cast<int>(std::lround(expansion * channels));
    b.pw1 = make_dense(prefix + ".pw1", channels, hidden, gamma);
    b.pw2 = make_dense(prefix + ".pw2", hidden, channels, gamma);
    return b;
}

STDABlock make_stda_block(const std::string& prefix, int channels, int splits, int heads,
                          double expansion, const std::optional<double>& gamma) {
    STDABlock b;
    b.name = prefix;
    b.channels = channels;
    b.heads = heads;
    b.split_widths = split_channels(channels, splits);
    const int cascades = std::max<int>(1, static_cast<int>(b.split_widths.size()) - 1);
    for (int i = 0; i < cascades; ++i) {
        const int w = b.split_widths[static_cast<size_t>(i)];
        b.convs.push_back(make_conv(prefix + ".conv" + std::to_string(i), w, w, 3, 1, 1, w));
    }
    b.norm_attn = make_norm(prefix + ".norm_attn", channels);
    b.qkv = make_dense(prefix + ".qkv", channels, 3 * channels, gamma);
    b.temperature = Tensor({heads});
    b.proj = make_dense(prefix + ".proj", channels, channels, gamma);
    b.norm_mlp = make_norm(prefix + ".norm_mlp", channels);
    const int hidden = static_cast<int>(std::lround(expansion * channels));
    b.pw1 = make_dense(prefix + ".pw1", channels, hidden, gamma);
    b.pw2 = make_dense(prefix + ".pw2", hidden, channels, gamma);
    return b;
}

}  // namespace

VariantSpec variant_spec(Variant v) {
    VariantSpec s;
    s.stage_kernel_sizes = {3, 5, 7, 9};
    s.stda_groups = {2, 2, 3, 4};
    s.attn_heads = 4;
    s.mlp_expansion = 4.0;
    s.head_dim = 512;
    s.input_side = 112;
    s.drop_rate = 0.0;
    switch (v) {
        case Variant::Small:
            s.name = "SMALL";
            s.stage_channels = {48, 96, 160, 304};
            s.stage_depths = {3, 3, 9, 3};
            break;
        case Variant::XSmall:
            s.name = "X-SMALL";
            s.stage_channels = {32, 64, 100, 192};
            s.stage_depths = {3, 3, 9, 3};
            break;
        case Variant::XXSmall:
            s.name = "XX-SMALL";
            s.stage_channels = {24, 48, 88, 168};
            s.stage_depths = {2, 2, 6, 2};
            break;
    }
    return s;
}

std::optional<Variant> parse_variant(const std::string& s) {
    if (s == "s" || s == "small" || s == "SMALL") return Variant::Small;
    if (s == "xs" || s == "x-small" || s == "X-SMALL") return Variant::XSmall;
    if (s == "xxs" || s == "xx-small" || s == "XX-SMALL") return Variant::XXSmall;
    return std::nullopt;
}

void validate_spec(const VariantSpec& spec) {
    for (int c : spec.stage_channels) require(c >= 1, "spec: stage channels must be positive");
    for (int d : spec.stage_depths) require(d >= 1, "spec: stage depths must be positive");
    for (int g : spec.stda_groups) require(g >= 1, "spec: stda groups must be positive");
    for (size_t i = 0; i < 4; ++i) {
        require(spec.stage_kernel_sizes[i] % 2 == 1, "spec: kernel sizes must be odd");
        if (i > 0)
            require(spec.stage_kernel_sizes[i] >= spec.stage_kernel_sizes[i - 1],
                    "spec: kernel sizes must be non-decreasing across stages");
    }
    require(spec.attn_heads >= 1, "spec: attention heads must be positive");
    for (size_t i = 1; i < 4; ++i)
        require(spec.stage_channels[i] % spec.attn_heads == 0,
                "spec: stage " + std::to_string(i + 1) + " channels (" +
                    std::to_string(spec.stage_channels[i]) + ") not divisible by heads (" +
                    std::to_string(spec.attn_heads) + ")");
    require(spec.mlp_expansion > 0.0, "spec: mlp expansion must be positive");
    require(spec.head_dim >= 1, "spec: head width must be positive");
    require(spec.input_side >= 16 && spec.input_side % 4 == 0,
            "spec: input side must be a positive multiple of 4");
    require(spec.drop_rate >= 0.0 && spec.drop_rate < 1.0, "spec: drop rate outside [0, 1)");
}

EdgeFaceModel assemble(const VariantSpec& spec, std::optional<double> gamma) {
    validate_spec(spec);
    if (gamma.has_value())
        require(*gamma > 0.0 && *gamma <= 1.0,
                "build: gamma " + std::to_string(*gamma) + " outside (0, 1]");

    EdgeFaceModel m;
    m.spec = spec;
    m.gamma = gamma;

    m.stem_conv = make_conv("stem.conv", 3, spec.stage_channels[0], 4, 4, 0, 1);
    m.stem_norm = make_norm("stem.norm", spec.stage_channels[0]);

    for (int si = 0; si < 4; ++si) {
        Stage& stage = m.stages[static_cast<size_t>(si)];
        const int ch = spec.stage_channels[static_cast<size_t>(si)];
        if (si > 0) {
            const int prev = spec.stage_channels[static_cast<size_t>(si - 1)];
            Downsample down;
            down.norm = make_norm("stage" + std::to_string(si + 1) + ".down.norm", prev);
            down.conv =
                make_conv("stage" + std::to_string(si + 1) + ".down.conv", prev, ch, 2, 2, 0, 1);
            stage.down = std::move(down);
        }
        const int depth = spec.stage_depths[static_cast<size_t>(si)];
        for (int bi = 0; bi < depth; ++bi) {
            const std::string prefix =
                "stage" + std::to_string(si + 1) + ".block" + std::to_string(bi);
            EncoderBlock block;
            // The last block of stages 2-4 is the attention block.
            if (si > 0 && bi == depth - 1) {
                block.is_stda = true;
                block.stda = make_stda_block(prefix, ch, spec.stda_groups[static_cast<size_t>(si)],
                                             spec.attn_heads, spec.mlp_expansion, gamma);
            } else {
                block.conv = make_conv_block(prefix, ch, spec.stage_kernel_sizes[static_cast<size_t>(si)],
                                             spec.mlp_expansion, gamma);
            }
            stage.blocks.push_back(std::move(block));
        }
    }

    m.head.norm = make_norm("head.norm", spec.stage_channels[3]);
    m.head.drop_rate = spec.drop_rate;
    m.head.linear = make_dense("head.linear", spec.stage_channels[3], spec.head_dim, gamma);
    return m;
}

namespace {

template <typename Model, typename Fn>
void for_each_parameter_impl(Model& m, const Fn& fn) {
    auto conv = [&](auto& c) {
        fn(c.name + ".weight", c.weight);
        if (!c.bias.empty()) fn(c.name + ".bias", c.bias);
    };
    auto norm = [&](auto& n) {
        fn(n.name + ".gain", n.gain);
        fn(n.name + ".offset", n.offset);
    };
    auto dense = [&](auto& d) {
        if (d.lowrank.has_value()) {
            fn(d.name + ".w1", d.lowrank->w1);
            fn(d.name + ".w2", d.lowrank->w2);
            if (!d.lowrank->bias.empty()) fn(d.name + ".bias", d.lowrank->bias);
        } else {
            fn(d.name + ".weight", d.weight);
            if (!d.bias.empty()) fn(d.name + ".bias", d.bias);
        }
    };

    conv(m.stem_conv);
    norm(m.stem_norm);
    for (auto& stage : m.stages) {
        if (stage.down.has_value()) {
            norm(stage.down->norm);
            conv(stage.down->conv);
        }
        for (auto& block : stage.blocks) {
            if (block.is_stda) {
                auto& s = block.stda;
                for (auto& c : s.convs) conv(c);
                norm(s.norm_attn);
                dense(s.qkv);
                fn(s.name + ".temperature", s.temperature);
                dense(s.proj);
                norm(s.norm_mlp);
                dense(s.pw1);
                dense(s.pw2);
            } else {
                auto& c = block.conv;
                conv(c.dwconv);
                norm(c.norm);
                dense(c.pw1);
                dense(c.pw2);
            }
        }
    }
    norm(m.head.norm);
    dense(m.head.linear);
}

}  // namespace

void for_each_parameter(EdgeFaceModel& model,
                        const std::function<void(const std::string&, Tensor&)>& fn) {
    for_each_parameter_impl(model, fn);
}

void for_each_parameter(const EdgeFaceModel& model,
                        const std::function<void(const std::string&, const Tensor&)>& fn) {
    for_each_parameter_impl(model, fn);
}

int64_t parameter_count(const EdgeFaceModel& model) {
    int64_t n = 0;
    for_each_parameter(model, [&](const std::string&, const Tensor& t) { n += t.numel(); });
    return n;
}

void for_each_dense(EdgeFaceModel& model, const std::function<void(DenseLayer&)>& fn) {
    for (Stage& stage : model.stages) {
        for (EncoderBlock& block : stage.blocks) {
            if (block.is_stda) {
                fn(block.stda.qkv);
                fn(block.stda.proj);
                fn(block.stda.pw1);
                fn(block.stda.pw2);
            } else {
                fn(block.conv.pw1);
                fn(block.conv.pw2);
            }
        }
    }
    fn(model.head.linear);
}

EdgeFaceModel factorize_dense_layers(const EdgeFaceModel& model, double gamma,
                                     std::vector<FactorizeError>* errors) {
    if (model.gamma.has_value())
        throw std::invalid_argument("factorize: model already uses low-rank layers");
    if (!(gamma > 0.0) || gamma > 1.0)
        throw std::invalid_argument("factorize: gamma " + std::to_string(gamma) + " outside (0, 1]");

    EdgeFaceModel out = model;
    out.gamma = gamma;
    for_each_dense(out, [&](DenseLayer& d) {
        std::optional<std::vector<float>> bias;
        if (!d.bias.empty()) bias = d.bias.data;
        LoRaLinLayer lr = loralin_from_full(d.weight, bias, gamma);
        if (errors != nullptr) {
            double sq = 0.0;
            const int n = d.out_features, m = d.in_features, r = lr.rank;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) {
                    double rec = 0.0;
                    for (int t = 0; t < r; ++t)
                        rec += static_cast<double>(lr.w2.at2(i, t)) * lr.w1.at2(t, j);
                    const double dlt = rec - d.weight.at2(i, j);
                    sq += dlt * dlt;
                }
            errors->push_back({d.name, std::sqrt(sq)});
        }
        d.lowrank = std::move(lr);
        d.weight = Tensor();
        d.bias = Tensor();
    });
    return out;
}

void initialize_parameters(EdgeFaceModel& model, uint64_t seed) {
    model.seed = seed;
    InitRng rng(seed);
    constexpr float kSigma = 0.02f;
    for_each_parameter(model, [&](const std::string& name, Tensor& t) {
        const bool is_gain = name.ends_with(".gain") || name.ends_with(".temperature");
        const bool is_zero = name.ends_with(".bias") || name.ends_with(".offset");
        if (is_gain) {
            for (float& x : t.data) x = 1.0f;
        } else if (is_zero) {
            for (float& x : t.data) x = 0.0f;
        } else {
            for (float& x : t.data) x = rng.trunc_normal(kSigma);
        }
    });
}

EdgeFaceModel build(const VariantSpec& spec, std::optional<double> gamma, uint64_t seed) {
    EdgeFaceModel m = assemble(spec, gamma);
    initialize_parameters(m, seed);
    return m;
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
    if (layer.lowrank.has_value()) return loralin_forward(*layer.lowrank, x);
    require(x.rank() == 2, "dense: input must be rank 2");
    require(x.dim(1) == layer.in_features, "dense " + layer.name + ": input width (" +
                                               std::to_string(x.dim(1)) + ") != in_features (" +
                                               std::to_string(layer.in_features) + ")");
    const int b = x.dim(0), m = layer.in_features, n = layer.out_features;
    Tensor y({b, n});
    for (int i = 0; i < b; ++i) {
        const float* xr = x.data.data() + static_cast<size_t>(i) * m;
        for (int j = 0; j < n; ++j) {
            const float* wr = layer.weight.data.data() + static_cast<size_t>(j) * m;
            float acc = 0.0f;
            for (int t = 0; t < m; ++t) acc += xr[t] * wr[t];
            y.at2(i, j) = acc + (layer.bias.empty() ? 0.0f : layer.bias.data[static_cast<size_t>(j)]);
        }
    }
    if (mac_tally::enabled()) mac_tally::add(static_cast<uint64_t>(b) * m * n);
    return y;
}

Tensor nchw_to_tokens(const Tensor& x, int batch_index) {
    const int c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor tok({h * w, c});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) tok.at2(y * w + xx, ch) = x.at4(batch_index, ch, y, xx);
    return tok;
}

void tokens_to_nchw(const Tensor& tokens, Tensor& x, int batch_index) {
    const int c = x.dim(1), h = x.dim(2), w = x.dim(3);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) x.at4(batch_index, ch, y, xx) = tokens.at2(y * w + xx, ch);
}

namespace {

Tensor norm_tokens(const Tensor& tok, const NormLayer& n) {
    return layer_norm(tok, NormAxis::Last, kNormEps, n.gain.data, n.offset.data);
}

Tensor mlp_tokens(const Tensor& tok, const DenseLayer& pw1, const DenseLayer& pw2) {
    return dense_forward(pw2, gelu(dense_forward(pw1, tok)));
}

}  // namespace

Tensor conv_block_forward(const Tensor& x, const ConvBlock& block) {
    ConvParams p;
    p.kernel = block.dwconv.weight;
    p.bias = block.dwconv.bias;
    p.stride = block.dwconv.stride;
    p.padding = block.dwconv.padding;
    p.groups = block.dwconv.groups;
    Tensor t = conv2d(x, p);

    Tensor out = x;
    const int n = x.dim(0);
    Tensor res({1, x.dim(1), x.dim(2), x.dim(3)});
    for (int bn = 0; bn < n; ++bn) {
        Tensor tok = nchw_to_tokens(t, bn);
        Tensor y = mlp_tokens(norm_tokens(tok, block.norm), block.pw1, block.pw2);
        tokens_to_nchw(y, res, 0);
        for (int ch = 0; ch < x.dim(1); ++ch)
            for (int yy = 0; yy < x.dim(2); ++yy)
                for (int xx = 0; xx < x.dim(3); ++xx)
                    out.at4(bn, ch, yy, xx) += res.at4(0, ch, yy, xx);
    }
    return out;
}

Tensor xca_attention(const Tensor& tokens, const STDABlock& block) {
    require(tokens.rank() == 2, "xca: tokens must be rank 2");
    const int t = tokens.dim(0), c = tokens.dim(1);
    require(c == block.channels, "xca: token width (" + std::to_string(c) + ") != block channels (" +
                                     std::to_string(block.channels) + ")");
    require(c % block.heads == 0, "xca: channels (" + std::to_string(c) + ") not divisible by heads (" +
                                      std::to_string(block.heads) + ")");
    const int heads = block.heads;
    const int d = c / heads;

    Tensor qkv = dense_forward(block.qkv, tokens);  // [T, 3C]
    Tensor out({t, c});

    // Per head: channel-major views [d, T] of Q, K, V.
    std::vector<float> qrow(static_cast<size_t>(t)), krow(static_cast<size_t>(t));
    Tensor qn({d, t}), kn({d, t}), vv({d, t});
    for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < d; ++i) {
            const int ch = h * d + i;
            for (int j = 0; j < t; ++j) {
                qrow[static_cast<size_t>(j)] = qkv.at2(j, ch);
                krow[static_cast<size_t>(j)] = qkv.at2(j, c + ch);
                vv.at2(i, j) = qkv.at2(j, 2 * c + ch);
            }
            const std::vector<float> qu = l2_normalize(qrow);
            const std::vector<float> ku = l2_normalize(krow);
            for (int j = 0; j < t; ++j) {
                qn.at2(i, j) = qu[static_cast<size_t>(j)];
                kn.at2(i, j) = ku[static_cast<size_t>(j)];
            }
        }
        // Attention map over channels: [d, d], rows softmax-normalized.
        const float temp = block.temperature.data[static_cast<size_t>(h)];
        Tensor logits({d, d});
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                float acc = 0.0f;
                for (int k = 0; k < t; ++k) acc += qn.at2(i, k) * kn.at2(j, k);
                logits.at2(i, j) = temp * acc;
            }
        Tensor attn = softmax(logits, 1);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < t; ++j) {
                float acc = 0.0f;
                for (int k = 0; k < d; ++k) acc += attn.at2(i, k) * vv.at2(k, j);
                out.at2(j, h * d + i) = acc;
            }
        if (mac_tally::enabled())
            mac_tally::add(2ull * static_cast<uint64_t>(d) * d * t);
    }
    return dense_forward(block.proj, out);
}

Tensor stda_forward(const Tensor& x, const STDABlock& block) {
    require(x.rank() == 4, "stda: input must be rank 4");
    require(x.dim(1) == block.channels, "stda: input channels (" + std::to_string(x.dim(1)) +
                                            ") != block channels (" + std::to_string(block.channels) + ")");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);

    // Cascaded depthwise convolutions over channel groups: each group's output
    // is added to the next group's input; a trailing group without a conv
    // passes through unchanged. The whole cascade sits behind a residual.
    Tensor cascade = x;
    Tensor carry;  // previous group's conv output
    int ch_base = 0;
    for (size_t g = 0; g < block.split_widths.size(); ++g) {
        const int width = block.split_widths[g];
        if (g >= block.convs.size()) {
            // passthrough group: cascade already holds x
            break;
        }
        Tensor part({n, width, h, w});
        for (int bn = 0; bn < n; ++bn)
            for (int ch = 0; ch < width; ++ch)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx) {
                        float v = x.at4(bn, ch_base + ch, yy, xx);
                        if (g > 0) v += carry.at4(bn, ch, yy, xx);
                        part.at4(bn, ch, yy, xx) = v;
                    }
        const Conv2dLayer& cl = block.convs[g];
        ConvParams p;
        p.kernel = cl.weight;
        p.bias = cl.bias;
        p.stride = cl.stride;
        p.padding = cl.padding;
        p.groups = cl.groups;
        carry = conv2d(part, p);
        for (int bn = 0; bn < n; ++bn)
            for (int ch = 0; ch < width; ++ch)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx)
                        cascade.at4(bn, ch_base + ch, yy, xx) = carry.at4(bn, ch, yy, xx);
        ch_base += width;
    }

    Tensor out({n, c, h, w});
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = x.data[i] + cascade.data[i];

    // Attention and MLP act on per-sample token matrices, each pre-normed and
    // residual-wrapped.
    for (int bn = 0; bn < n; ++bn) {
        Tensor tok = nchw_to_tokens(out, bn);
        Tensor a = xca_attention(norm_tokens(tok, block.norm_attn), block);
        for (int i = 0; i < tok.dim(0); ++i)
            for (int j = 0; j < tok.dim(1); ++j) tok.at2(i, j) += a.at2(i, j);
        Tensor m = mlp_tokens(norm_tokens(tok, block.norm_mlp), block.pw1, block.pw2);
        for (int i = 0; i < tok.dim(0); ++i)
            for (int j = 0; j < tok.dim(1); ++j) tok.at2(i, j) += m.at2(i, j);
        tokens_to_nchw(tok, out, bn);
    }
    return out;
}

namespace {

Tensor norm_nchw(const Tensor& x, const NormLayer& n) {
    return layer_norm(x, NormAxis::Channel, kNormEps, n.gain.data, n.offset.data);
}

Tensor run_conv(const Tensor& x, const Conv2dLayer& c) {
    ConvParams p;
    p.kernel = c.weight;
    p.bias = c.bias;
    p.stride = c.stride;
    p.padding = c.padding;
    p.groups = c.groups;
    return conv2d(x, p);
}

}  // namespace

Tensor embed(const EdgeFaceModel& model, const Tensor& image) {
    require(image.rank() == 4, "embed: input must be rank 4 (N,3,side,side)");
    require(image.dim(1) == 3, "embed: input channels (" + std::to_string(image.dim(1)) + ") != 3");
    require(image.dim(2) == model.spec.input_side && image.dim(3) == model.spec.input_side,
            "embed: spatial size " + std::to_string(image.dim(2)) + "x" + std::to_string(image.dim(3)) +
                " != required " + std::to_string(model.spec.input_side) + "x" +
                std::to_string(model.spec.input_side) + " (no implicit resize)");

    Tensor x = run_conv(image, model.stem_conv);
    x = norm_nchw(x, model.stem_norm);
    for (const Stage& stage : model.stages) {
        if (stage.down.has_value()) {
            x = norm_nchw(x, stage.down->norm);
            x = run_conv(x, stage.down->conv);
        }
        for (const EncoderBlock& block : stage.blocks)
            x = block.is_stda ? stda_forward(x, block.stda) : conv_block_forward(x, block.conv);
    }
    x = adaptive_avg_pool_1(x);
    x = norm_nchw(x, model.head.norm);
    Tensor flat({x.dim(0), x.dim(1)});
    for (int bn = 0; bn < x.dim(0); ++bn)
        for (int ch = 0; ch < x.dim(1); ++ch) flat.at2(bn, ch) = x.at4(bn, ch, 0, 0);
    // dropout is inactive at inference
    return dense_forward(model.head.linear, flat);
}

std::vector<ShapeRow> shape_trace(const VariantSpec& spec) {
    std::vector<ShapeRow> rows;
    const int side = spec.input_side / 4;
    rows.push_back({"stem", spec.stage_channels[0], side, side});
    int h = side;
    for (int si = 0; si < 4; ++si) {
        if (si > 0) h = (h - 2) / 2 + 1;
        rows.push_back({"stage" + std::to_string(si + 1), spec.stage_channels[static_cast<size_t>(si)],
                        h, h});
    }
    rows.push_back({"pool", spec.stage_channels[3], 1, 1});
    rows.push_back({"head", spec.head_dim, 0, 0});
    return rows;
}

std::vector<ShapeRow> shape_trace_forward(const EdgeFaceModel& model) {
    std::vector<ShapeRow> rows;
    Tensor x({1, 3, model.spec.input_side, model.spec.input_side});
    x = run_conv(x, model.stem_conv);
    x = norm_nchw(x, model.stem_norm);
    rows.push_back({"stem", x.dim(1), x.dim(2), x.dim(3)});
    int si = 0;
    for (const Stage& stage : model.stages) {
        if (stage.down.has_value()) {
            x = norm_nchw(x, stage.down->norm);
            x = run_conv(x, stage.down->conv);
        }
        for (const EncoderBlock& block : stage.blocks)
            x = block.is_stda ? stda_forward(x, block.stda) : conv_block_forward(x, block.conv);
        rows.push_back({"stage" + std::to_string(++si), x.dim(1), x.dim(2), x.dim(3)});
    }
    x = adaptive_avg_pool_1(x);
    rows.push_back({"pool", x.dim(1), x.dim(2), x.dim(3)});
    x = norm_nchw(x, model.head.norm);
    Tensor flat({x.dim(0), x.dim(1)});
    for (int ch = 0; ch < x.dim(1); ++ch) flat.at2(0, ch) = x.at4(0, ch, 0, 0);
    Tensor emb = dense_forward(model.head.linear, flat);
    rows.push_back({"head", emb.dim(1), 0, 0});
    return rows;
}

}  // namespace edgeface
