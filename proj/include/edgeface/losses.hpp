#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "edgeface/tensor.hpp"

namespace edgeface {

enum class MarginKind { CosFace, ArcFace };

struct MarginLossConfig {
    MarginKind kind = MarginKind::CosFace;
    double scale = 64.0;
    double margin = 0.35;  // 0.5 is the usual ArcFace default
    int class_count = 0;
};
void validate_margin_config(const MarginLossConfig& cfg);

// Margin-softmax loss over a batch. Embedding and class-weight rows are
// L2-normalized internally; the target logit is s*(cos - m) for CosFace and
// s*cos(theta + m) for ArcFace. When theta + m would pass pi, ArcFace falls
// back to the linear penalty s*(cos - m*sin(m)). Returns the mean
// cross-entropy and analytic gradients. Computation runs in double so the
// gradients can be held against central differences.
double margin_loss_d(const std::vector<double>& emb, int batch, int dim,
                     const std::vector<double>& weights, const std::vector<int>& labels,
                     const MarginLossConfig& cfg, std::vector<double>* grad_emb,
                     std::vector<double>* grad_weights);

struct MarginLossResult {
    double loss = 0.0;
    Tensor grad_emb;
    Tensor grad_weights;
};
MarginLossResult margin_loss(const Tensor& emb, const Tensor& weights,
                             const std::vector<int>& labels, const MarginLossConfig& cfg);

// Central finite differences against an analytic gradient; returns the max
// over coordinates of |a - f| / max(1e-8, |a| + |f|).
double grad_check(const std::function<double(const std::vector<double>&)>& fn,
                  const std::vector<double>& point, const std::vector<double>& analytic,
                  double eps = 1e-3);

struct GradCheckCase {
    std::string name;
    double max_rel_err = 0.0;
};
// The full finite-difference suite: quadratic sanity case, normalize, both
// margin losses w.r.t. embeddings and weights, and the low-rank MLP
// parameters. `points` random points per case.
std::vector<GradCheckCase> run_gradient_suite(uint64_t seed, int points = 20);

struct ToyTrainConfig {
    int steps = 500;
    int batch = 32;
    double learning_rate = 0.1;
    double momentum = 0.9;
    uint64_t seed = 0;
    int input_dim = 8;
    int hidden_dim = 32;
    int embed_dim = 16;
    double gamma = 0.5;          // rank ratio of the MLP layers
    double blob_sigma = 0.05;
    int samples_per_class = 20;
};

struct TrainStep {
    int step = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct ToyTrainHistory {
    std::vector<TrainStep> steps;
    bool diverged = false;
    int divergence_step = -1;
    double final_accuracy = 0.0;
};

// Trains a two-layer low-rank MLP plus margin head on seeded Gaussian blobs
// scattered on the unit sphere. Single-threaded and bit-reproducible per seed.
ToyTrainHistory toy_train(const ToyTrainConfig& cfg, const MarginLossConfig& loss_cfg);

std::string history_csv(const ToyTrainHistory& history);

}  // namespace edgeface
