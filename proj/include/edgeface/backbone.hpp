#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "edgeface/loralin.hpp"
#include "edgeface/ops.hpp"
#include "edgeface/tensor.hpp"

namespace edgeface {

enum class Variant { Small, XSmall, XXSmall };

// Architecture configuration. The named presets reproduce the published layer
// structure; custom specs are allowed for miniature test networks.
struct VariantSpec {
    std::string name;
    std::array<int, 4> stage_channels{};
    std::array<int, 4> stage_depths{};
    std::array<int, 4> stage_kernel_sizes{};
    std::array<int, 4> stda_groups{};  // channel-split count for the attention block per stage
    int attn_heads = 4;
    double mlp_expansion = 4.0;
    int head_dim = 512;
    int input_side = 112;
    double drop_rate = 0.0;
};

VariantSpec variant_spec(Variant v);
std::optional<Variant> parse_variant(const std::string& s);
void validate_spec(const VariantSpec& spec);

constexpr float kNormEps = 1e-6f;

struct Conv2dLayer {
    std::string name;
    int in_ch = 0, out_ch = 0, kh = 0, kw = 0;
    int stride = 1, padding = 0, groups = 1;
    Tensor weight;  // (out_ch, in_ch/groups, kh, kw)
    Tensor bias;    // (out_ch)
};

struct NormLayer {
    std::string name;
    int width = 0;
    Tensor gain, offset;
};

// A dense map that is either one full matrix or a LoRaLin pair, decided at
// model assembly from the model-wide rank ratio.
struct DenseLayer {
    std::string name;
    int in_features = 0, out_features = 0;
    bool has_bias = true;
    std::optional<LoRaLinLayer> lowrank;
    Tensor weight;  // [out, in] when full
    Tensor bias;    // [out] when full and has_bias
};

struct ConvBlock {
    Conv2dLayer dwconv;
    NormLayer norm;
    DenseLayer pw1, pw2;
};

// Split depth-wise transpose attention block: a cascade of depthwise
// convolutions over channel groups, channel-wise (transposed) attention, and a
// pointwise MLP, each wrapped in a residual connection.
struct STDABlock {
    std::string name;
    int channels = 0;
    int heads = 0;
    std::vector<int> split_widths;      // exact partition of `channels`
    std::vector<Conv2dLayer> convs;     // one per cascaded group
    NormLayer norm_attn;
    DenseLayer qkv;                     // C -> 3C
    Tensor temperature;                 // [heads]
    DenseLayer proj;                    // C -> C
    NormLayer norm_mlp;
    DenseLayer pw1, pw2;
};

struct EncoderBlock {
    bool is_stda = false;
    ConvBlock conv;
    STDABlock stda;
};

struct Downsample {
    NormLayer norm;
    Conv2dLayer conv;  // 2x2, stride 2
};

struct Stage {
    std::optional<Downsample> down;
    std::vector<EncoderBlock> blocks;
};

struct Head {
    NormLayer norm;
    double drop_rate = 0.0;  // inactive at inference
    DenseLayer linear;
};

struct EdgeFaceModel {
    VariantSpec spec;
    std::optional<double> gamma;
    uint64_t seed = 0;
    Conv2dLayer stem_conv;
    NormLayer stem_norm;
    std::array<Stage, 4> stages;
    Head head;
};

// Assembles the layer structure (zero parameters) for a spec; build() also
// initializes parameters deterministically from the seed.
EdgeFaceModel assemble(const VariantSpec& spec, std::optional<double> gamma);
void initialize_parameters(EdgeFaceModel& model, uint64_t seed);
EdgeFaceModel build(const VariantSpec& spec, std::optional<double> gamma, uint64_t seed);

// Canonical parameter enumeration (network order); the same order defines
// initialization and serialization.
void for_each_parameter(EdgeFaceModel& model,
                        const std::function<void(const std::string&, Tensor&)>& fn);
void for_each_parameter(const EdgeFaceModel& model,
                        const std::function<void(const std::string&, const Tensor&)>& fn);
int64_t parameter_count(const EdgeFaceModel& model);

void for_each_dense(EdgeFaceModel& model, const std::function<void(DenseLayer&)>& fn);

struct FactorizeError {
    std::string layer;
    double frobenius_error = 0.0;
};
// Replaces every full dense layer by its truncated-SVD low-rank pair at the
// given rank ratio. The input model must not already be low-rank.
EdgeFaceModel factorize_dense_layers(const EdgeFaceModel& model, double gamma,
                                     std::vector<FactorizeError>* errors = nullptr);

Tensor dense_forward(const DenseLayer& layer, const Tensor& x);
Tensor conv_block_forward(const Tensor& x, const ConvBlock& block);
Tensor stda_forward(const Tensor& x, const STDABlock& block);
// Channel-wise attention on a [tokens, C] matrix; the attention map is
// (heads, d_head, d_head) so cost is linear in the token count.
Tensor xca_attention(const Tensor& tokens, const STDABlock& block);

// [N,3,side,side] -> [N, head_dim] raw embeddings. Inputs are expected in
// [-1, 1]; that is documented, not enforced. Wrong spatial size is rejected.
Tensor embed(const EdgeFaceModel& model, const Tensor& image);

struct ShapeRow {
    std::string layer;
    int channels = 0;
    int h = 0, w = 0;  // 0x0 once flattened
};
// Stage-level output shapes computed from the variant configuration alone.
std::vector<ShapeRow> shape_trace(const VariantSpec& spec);
// Same checkpoints measured on a real forward pass.
std::vector<ShapeRow> shape_trace_forward(const EdgeFaceModel& model);

// Token matrix layout helpers: row t = (h*W + w), column = channel.
Tensor nchw_to_tokens(const Tensor& x, int batch_index);
void tokens_to_nchw(const Tensor& tokens, Tensor& x, int batch_index);

}  // namespace edgeface
