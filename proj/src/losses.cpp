#include "edgeface/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "edgeface/loralin.hpp"

namespace edgeface {

namespace {

constexpr double kPi = 3.14159265358979323846;

double row_norm(const double* v, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

double gelu_d(double x) {
    constexpr double kSqrt2OverPi = 0.7978845608028654;
    constexpr double kCubic = 0.044715;
    return 0.5 * x * (1.0 + std::tanh(kSqrt2OverPi * (x + kCubic * x * x * x)));
}

double gelu_grad_d(double x) {
    constexpr double kSqrt2OverPi = 0.7978845608028654;
    constexpr double kCubic = 0.044715;
    const double u = kSqrt2OverPi * (x + kCubic * x * x * x);
    const double t = std::tanh(u);
    const double du = kSqrt2OverPi * (1.0 + 3.0 * kCubic * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

}  // namespace

void validate_margin_config(const MarginLossConfig& cfg) {
    if (!(cfg.scale > 0.0)) throw std::invalid_argument("margin loss: scale must be > 0");
    if (cfg.margin < 0.0) throw std::invalid_argument("margin loss: margin must be >= 0");
    if (cfg.kind == MarginKind::ArcFace && cfg.margin >= kPi / 2.0)
        throw std::invalid_argument("margin loss: arcface margin must be < pi/2");
    if (cfg.kind == MarginKind::CosFace && cfg.margin >= 1.0)
        throw std::invalid_argument("margin loss: cosface margin must be < 1");
    if (cfg.class_count < 2) throw std::invalid_argument("margin loss: class count must be >= 2");
}

double margin_loss_d(const std::vector<double>& emb, int batch, int dim,
                     const std::vector<double>& weights, const std::vector<int>& labels,
                     const MarginLossConfig& cfg, std::vector<double>* grad_emb,
                     std::vector<double>* grad_weights) {
    validate_margin_config(cfg);
    const int k = cfg.class_count;
    if (static_cast<int>(emb.size()) != batch * dim)
        throw std::invalid_argument("margin loss: embedding size mismatch");
    if (static_cast<int>(weights.size()) != k * dim)
        throw std::invalid_argument("margin loss: weight size mismatch");
    if (static_cast<int>(labels.size()) != batch)
        throw std::invalid_argument("margin loss: label count mismatch");
    for (int l : labels)
        if (l < 0 || l >= k) throw std::invalid_argument("margin loss: label out of range");

    const double s = cfg.scale, m = cfg.margin;
    const double cos_m = std::cos(m), sin_m = std::sin(m);

    std::vector<double> en(emb.size()), wn(weights.size());
    std::vector<double> enorm(static_cast<size_t>(batch)), wnorm(static_cast<size_t>(k));
    for (int i = 0; i < batch; ++i) {
        const double* src = emb.data() + static_cast<size_t>(i) * dim;
        const double nv = row_norm(src, dim);
        enorm[static_cast<size_t>(i)] = nv;
        const double inv = nv > 1e-12 ? 1.0 / nv : 0.0;
        for (int j = 0; j < dim; ++j) en[static_cast<size_t>(i) * dim + j] = src[j] * inv;
    }
    for (int i = 0; i < k; ++i) {
        const double* src = weights.data() + static_cast<size_t>(i) * dim;
        const double nv = row_norm(src, dim);
        wnorm[static_cast<size_t>(i)] = nv;
        const double inv = nv > 1e-12 ? 1.0 / nv : 0.0;
        for (int j = 0; j < dim; ++j) wn[static_cast<size_t>(i) * dim + j] = src[j] * inv;
    }

    std::vector<double> cosv(static_cast<size_t>(batch) * k);
    for (int i = 0; i < batch; ++i)
        for (int j = 0; j < k; ++j) {
            double acc = 0.0;
            for (int t = 0; t < dim; ++t)
                acc += en[static_cast<size_t>(i) * dim + t] * wn[static_cast<size_t>(j) * dim + t];
            cosv[static_cast<size_t>(i) * k + j] = std::clamp(acc, -1.0, 1.0);
        }

    // Logits plus the target column's d(logit)/d(cos).
    std::vector<double> logits(static_cast<size_t>(batch) * k);
    std::vector<double> target_slope(static_cast<size_t>(batch), 1.0);
    for (int i = 0; i < batch; ++i) {
        const int y = labels[static_cast<size_t>(i)];
        for (int j = 0; j < k; ++j) {
            const double c = cosv[static_cast<size_t>(i) * k + j];
            double z = s * c;
            if (j == y) {
                if (cfg.kind == MarginKind::CosFace) {
                    z = s * (c - m);
                } else if (c > -cos_m) {  // theta + m < pi
                    const double sin_t = std::sqrt(std::max(1.0 - c * c, 1e-12));
                    z = s * (c * cos_m - sin_t * sin_m);
                    target_slope[static_cast<size_t>(i)] = cos_m + sin_m * c / sin_t;
                } else {  // past pi: linear fallback
                    z = s * (c - m * sin_m);
                    target_slope[static_cast<size_t>(i)] = 1.0;
                }
            }
            logits[static_cast<size_t>(i) * k + j] = z;
        }
    }

    double loss = 0.0;
    std::vector<double> prob(static_cast<size_t>(batch) * k);
    for (int i = 0; i < batch; ++i) {
        double* zr = logits.data() + static_cast<size_t>(i) * k;
        double* pr = prob.data() + static_cast<size_t>(i) * k;
        double mx = zr[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, zr[j]);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) {
            pr[j] = std::exp(zr[j] - mx);
            sum += pr[j];
        }
        for (int j = 0; j < k; ++j) pr[j] /= sum;
        loss -= std::log(std::max(pr[labels[static_cast<size_t>(i)]], 1e-300));
    }
    loss /= batch;

    if (grad_emb == nullptr && grad_weights == nullptr) return loss;

    std::vector<double> gcos(static_cast<size_t>(batch) * k);
    for (int i = 0; i < batch; ++i) {
        const int y = labels[static_cast<size_t>(i)];
        for (int j = 0; j < k; ++j) {
            double g = (prob[static_cast<size_t>(i) * k + j] - (j == y ? 1.0 : 0.0)) / batch;
            g *= s;
            if (j == y && cfg.kind == MarginKind::ArcFace) g *= target_slope[static_cast<size_t>(i)];
            gcos[static_cast<size_t>(i) * k + j] = g;
        }
    }

    // Through the row normalizations: d(v/|v|)^T g = (g - <g,u>u)/|v|.
    if (grad_emb != nullptr) {
        grad_emb->assign(emb.size(), 0.0);
        std::vector<double> gu(static_cast<size_t>(dim));
        for (int i = 0; i < batch; ++i) {
            std::fill(gu.begin(), gu.end(), 0.0);
            for (int j = 0; j < k; ++j) {
                const double g = gcos[static_cast<size_t>(i) * k + j];
                for (int t = 0; t < dim; ++t)
                    gu[static_cast<size_t>(t)] += g * wn[static_cast<size_t>(j) * dim + t];
            }
            const double nv = enorm[static_cast<size_t>(i)];
            if (nv <= 1e-12) continue;
            double dot = 0.0;
            for (int t = 0; t < dim; ++t)
                dot += gu[static_cast<size_t>(t)] * en[static_cast<size_t>(i) * dim + t];
            for (int t = 0; t < dim; ++t)
                (*grad_emb)[static_cast<size_t>(i) * dim + t] =
                    (gu[static_cast<size_t>(t)] - dot * en[static_cast<size_t>(i) * dim + t]) / nv;
        }
    }
    if (grad_weights != nullptr) {
        grad_weights->assign(weights.size(), 0.0);
        std::vector<double> gu(static_cast<size_t>(dim));
        for (int j = 0; j < k; ++j) {
            std::fill(gu.begin(), gu.end(), 0.0);
            for (int i = 0; i < batch; ++i) {
                const double g = gcos[static_cast<size_t>(i) * k + j];
                for (int t = 0; t < dim; ++t)
                    gu[static_cast<size_t>(t)] += g * en[static_cast<size_t>(i) * dim + t];
            }
            const double nv = wnorm[static_cast<size_t>(j)];
            if (nv <= 1e-12) continue;
            double dot = 0.0;
            for (int t = 0; t < dim; ++t)
                dot += gu[static_cast<size_t>(t)] * wn[static_cast<size_t>(j) * dim + t];
            for (int t = 0; t < dim; ++t)
                (*grad_weights)[static_cast<size_t>(j) * dim + t] =
                    (gu[static_cast<size_t>(t)] - dot * wn[static_cast<size_t>(j) * dim + t]) / nv;
        }
    }
    return loss;
}

MarginLossResult margin_loss(const Tensor& emb, const Tensor& weights,
                             const std::vector<int>& labels, const MarginLossConfig& cfg) {
    if (emb.rank() != 2 || weights.rank() != 2)
        throw std::invalid_argument("margin loss: emb and weights must be rank 2");
    if (emb.dim(1) != weights.dim(1))
        throw std::invalid_argument("margin loss: emb width (" + std::to_string(emb.dim(1)) +
                                    ") != weight width (" + std::to_string(weights.dim(1)) + ")");
    const int b = emb.dim(0), d = emb.dim(1);
    std::vector<double> ed(emb.data.begin(), emb.data.end());
    std::vector<double> wd(weights.data.begin(), weights.data.end());
    std::vector<double> ge, gw;
    MarginLossResult res;
    res.loss = margin_loss_d(ed, b, d, wd, labels, cfg, &ge, &gw);
    res.grad_emb = Tensor(emb.shape);
    res.grad_weights = Tensor(weights.shape);
    for (size_t i = 0; i < ge.size(); ++i) res.grad_emb.data[i] = static_cast<float>(ge[i]);
    for (size_t i = 0; i < gw.size(); ++i) res.grad_weights.data[i] = static_cast<float>(gw[i]);
    return res;
}

double grad_check(const std::function<double(const std::vector<double>&)>& fn,
                  const std::vector<double>& point, const std::vector<double>& analytic,
                  double eps) {
    if (point.size() != analytic.size())
        throw std::invalid_argument("grad_check: gradient length != point length");
    std::vector<double> x = point;
    double worst = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + eps;
        const double fp = fn(x);
        x[i] = keep - eps;
        const double fm = fn(x);
        x[i] = keep;
        const double fd = (fp - fm) / (2.0 * eps);
        const double a = analytic[i];
        const double rel = std::abs(a - fd) / std::max(1e-8, std::abs(a) + std::abs(fd));
        worst = std::max(worst, rel);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Toy trainer: double-precision low-rank MLP with hand-derived backward.

namespace {

struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> v;
    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}
    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
};

// y[B,N] = x[B,M] * w[N,M]^T
Mat matmul_bt(const Mat& x, const Mat& w) {
    Mat y(x.rows, w.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < w.rows; ++j) {
            double acc = 0.0;
            for (int t = 0; t < x.cols; ++t) acc += x.at(i, t) * w.at(j, t);
            y.at(i, j) = acc;
        }
    return y;
}

// g[N,M] += dy[B,N]^T * x[B,M]
void accum_weight_grad(Mat& g, const Mat& dy, const Mat& x) {
    for (int j = 0; j < g.rows; ++j)
        for (int t = 0; t < g.cols; ++t) {
            double acc = 0.0;
            for (int i = 0; i < dy.rows; ++i) acc += dy.at(i, j) * x.at(i, t);
            g.at(j, t) += acc;
        }
}

// dx[B,M] = dy[B,N] * w[N,M]
Mat backprop_input(const Mat& dy, const Mat& w) {
    Mat dx(dy.rows, w.cols);
    for (int i = 0; i < dy.rows; ++i)
        for (int t = 0; t < w.cols; ++t) {
            double acc = 0.0;
            for (int j = 0; j < w.rows; ++j) acc += dy.at(i, j) * w.at(j, t);
            dx.at(i, t) = acc;
        }
    return dx;
}

// Double-precision mirror of the low-rank layer: x -> x W1^T W2^T + b, rank
// from the shared rank formula. Only the second factor has a bias.
struct LowRankDense {
    Mat w1, w2;
    std::vector<double> bias;
    Mat gw1, gw2;
    std::vector<double> gbias;
    Mat vw1, vw2;
    std::vector<double> vbias;
    Mat cache_x, cache_h;

    void init(int in, int out, double gamma, std::mt19937_64& rng) {
        const int r = rank_for(in, out, gamma);
        w1 = Mat(r, in);
        w2 = Mat(out, r);
        bias.assign(static_cast<size_t>(out), 0.0);
        auto uniform = [&rng]() { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
        auto normal = [&]() {
            return std::sqrt(-2.0 * std::log(uniform())) * std::cos(2.0 * kPi * uniform());
        };
        const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(r));
        for (double& x : w1.v) x = s1 * normal();
        for (double& x : w2.v) x = s2 * normal();
        zero_grads();
        vw1 = Mat(r, in);
        vw2 = Mat(out, r);
        vbias.assign(static_cast<size_t>(out), 0.0);
    }
    void zero_grads() {
        gw1 = Mat(w1.rows, w1.cols);
        gw2 = Mat(w2.rows, w2.cols);
        gbias.assign(bias.size(), 0.0);
    }
    Mat forward(const Mat& x) {
        cache_x = x;
        cache_h = matmul_bt(x, w1);
        Mat y = matmul_bt(cache_h, w2);
        for (int i = 0; i < y.rows; ++i)
            for (int j = 0; j < y.cols; ++j) y.at(i, j) += bias[static_cast<size_t>(j)];
        return y;
    }
    Mat backward(const Mat& dy) {
        accum_weight_grad(gw2, dy, cache_h);
        for (int i = 0; i < dy.rows; ++i)
            for (int j = 0; j < dy.cols; ++j) gbias[static_cast<size_t>(j)] += dy.at(i, j);
        Mat dh = backprop_input(dy, w2);
        accum_weight_grad(gw1, dh, cache_x);
        return backprop_input(dh, w1);
    }
    void sgd_step(double lr, double mu) {
        auto upd = [&](Mat& w, const Mat& g, Mat& vel) {
            for (size_t i = 0; i < w.v.size(); ++i) {
                vel.v[i] = mu * vel.v[i] - lr * g.v[i];
                w.v[i] += vel.v[i];
            }
        };
        upd(w1, gw1, vw1);
        upd(w2, gw2, vw2);
        for (size_t i = 0; i < bias.size(); ++i) {
            vbias[i] = mu * vbias[i] - lr * gbias[i];
            bias[i] += vbias[i];
        }
    }
};

}  // namespace

ToyTrainHistory toy_train(const ToyTrainConfig& cfg, const MarginLossConfig& loss_cfg) {
    validate_margin_config(loss_cfg);
    if (cfg.steps < 1) throw std::invalid_argument("toy_train: steps must be >= 1");
    if (cfg.learning_rate < 0.0) throw std::invalid_argument("toy_train: learning rate must be >= 0");
    if (cfg.batch < 1) throw std::invalid_argument("toy_train: batch must be >= 1");

    const int k = loss_cfg.class_count;
    const int d = cfg.input_dim;
    const int n = k * cfg.samples_per_class;

    std::mt19937_64 rng(cfg.seed);
    auto uniform = [&rng]() { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
    auto normal = [&]() { return std::sqrt(-2.0 * std::log(uniform())) * std::cos(2.0 * kPi * uniform()); };

    // Class blobs: unit-sphere centers, samples re-projected onto the sphere.
    Mat centers(k, d);
    for (int i = 0; i < k; ++i) {
        double nv = 0.0;
        for (int j = 0; j < d; ++j) {
            centers.at(i, j) = normal();
            nv += centers.at(i, j) * centers.at(i, j);
        }
        nv = std::sqrt(nv);
        for (int j = 0; j < d; ++j) centers.at(i, j) /= nv;
    }
    Mat data(n, d);
    std::vector<int> labels(static_cast<size_t>(n));
    for (int c = 0; c < k; ++c)
        for (int s = 0; s < cfg.samples_per_class; ++s) {
            const int row = c * cfg.samples_per_class + s;
            labels[static_cast<size_t>(row)] = c;
            double nv = 0.0;
            for (int j = 0; j < d; ++j) {
                data.at(row, j) = centers.at(c, j) + cfg.blob_sigma * normal();
                nv += data.at(row, j) * data.at(row, j);
            }
            nv = std::sqrt(nv);
            for (int j = 0; j < d; ++j) data.at(row, j) /= nv;
        }

    LowRankDense layer1, layer2;
    layer1.init(d, cfg.hidden_dim, cfg.gamma, rng);
    layer2.init(cfg.hidden_dim, cfg.embed_dim, cfg.gamma, rng);
    std::vector<double> head(static_cast<size_t>(k) * cfg.embed_dim);
    for (double& x : head) x = normal();
    std::vector<double> head_vel(head.size(), 0.0);

    auto forward_embed = [&](const Mat& x, Mat* pre_act) -> Mat {
        Mat a = layer1.forward(x);
        if (pre_act != nullptr) *pre_act = a;
        Mat g(a.rows, a.cols);
        for (size_t i = 0; i < a.v.size(); ++i) g.v[i] = gelu_d(a.v[i]);
        return layer2.forward(g);
    };

    auto full_accuracy = [&]() -> double {
        Mat emb = forward_embed(data, nullptr);
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            const double e_norm = row_norm(&emb.v[static_cast<size_t>(i) * cfg.embed_dim], cfg.embed_dim);
            int best = -1;
            double best_cos = -2.0;
            for (int c = 0; c < k; ++c) {
                double dot = 0.0, wn2 = 0.0;
                for (int j = 0; j < cfg.embed_dim; ++j) {
                    const double wv = head[static_cast<size_t>(c) * cfg.embed_dim + j];
                    dot += emb.at(i, j) * wv;
                    wn2 += wv * wv;
                }
                const double cosv = dot / std::max(e_norm * std::sqrt(wn2), 1e-12);
                if (cosv > best_cos) {
                    best_cos = cosv;
                    best = c;
                }
            }
            if (best == labels[static_cast<size_t>(i)]) ++hits;
        }
        return static_cast<double>(hits) / n;
    };

    ToyTrainHistory hist;
    const int batch = std::min(cfg.batch, n);
    const bool full_batch = batch == n;  // fixed order, no resampling
    for (int step = 0; step < cfg.steps; ++step) {
        Mat xb(batch, d);
        std::vector<int> yb(static_cast<size_t>(batch));
        for (int i = 0; i < batch; ++i) {
            const int idx = full_batch ? i : static_cast<int>(rng() % static_cast<uint64_t>(n));
            for (int j = 0; j < d; ++j) xb.at(i, j) = data.at(idx, j);
            yb[static_cast<size_t>(i)] = labels[static_cast<size_t>(idx)];
        }

        Mat pre_act;
        Mat emb = forward_embed(xb, &pre_act);
        std::vector<double> ge, gw;
        const double loss = margin_loss_d(emb.v, batch, cfg.embed_dim, head, yb, loss_cfg, &ge, &gw);
        if (!std::isfinite(loss)) {
            hist.diverged = true;
            hist.divergence_step = step;
            break;
        }

        layer1.zero_grads();
        layer2.zero_grads();
        Mat demb(batch, cfg.embed_dim);
        demb.v = ge;
        Mat dg = layer2.backward(demb);
        Mat da(dg.rows, dg.cols);
        for (size_t i = 0; i < dg.v.size(); ++i) da.v[i] = dg.v[i] * gelu_grad_d(pre_act.v[i]);
        layer1.backward(da);

        layer1.sgd_step(cfg.learning_rate, cfg.momentum);
        layer2.sgd_step(cfg.learning_rate, cfg.momentum);
        for (size_t i = 0; i < head.size(); ++i) {
            head_vel[i] = cfg.momentum * head_vel[i] - cfg.learning_rate * gw[i];
            head[i] += head_vel[i];
        }

        hist.steps.push_back({step, loss, full_accuracy()});
    }
    hist.final_accuracy = hist.steps.empty() ? 0.0 : hist.steps.back().accuracy;
    return hist;
}

std::string history_csv(const ToyTrainHistory& history) {
    std::string out = "step,loss,accuracy\n";
    char buf[128];
    for (const TrainStep& s : history.steps) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.6f\n", s.step, s.loss, s.accuracy);
        out += buf;
    }
    if (history.diverged) {
        std::snprintf(buf, sizeof(buf), "# diverged at step %d\n", history.divergence_step);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gradient suite

std::vector<GradCheckCase> run_gradient_suite(uint64_t seed, int points) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng]() { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
    auto normal = [&]() { return std::sqrt(-2.0 * std::log(uniform())) * std::cos(2.0 * kPi * uniform()); };

    std::vector<GradCheckCase> cases;

    {  // central differences are near-exact on quadratics
        GradCheckCase c{"quadratic", 0.0};
        for (int p = 0; p < points; ++p) {
            std::vector<double> x(8), g(8);
            for (double& v : x) v = normal();
            for (size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * x[i];
            auto fn = [](const std::vector<double>& v) {
                double s = 0.0;
                for (double t : v) s += t * t;
                return s;
            };
            c.max_rel_err = std::max(c.max_rel_err, grad_check(fn, x, g));
        }
        cases.push_back(c);
    }

    {  // f(x) = <x/|x|, c>
        GradCheckCase c{"l2_normalize", 0.0};
        const int d = 6;
        for (int p = 0; p < points; ++p) {
            std::vector<double> x(d), dir(d);
            for (double& v : x) v = normal() + 0.1;
            for (double& v : dir) v = normal();
            const double nv = row_norm(x.data(), d);
            double dot = 0.0;
            for (int i = 0; i < d; ++i) dot += dir[static_cast<size_t>(i)] * x[static_cast<size_t>(i)] / nv;
            std::vector<double> g(d);
            for (int i = 0; i < d; ++i)
                g[static_cast<size_t>(i)] =
                    (dir[static_cast<size_t>(i)] - dot * x[static_cast<size_t>(i)] / nv) / nv;
            auto fn = [&dir, d](const std::vector<double>& v) {
                double n2 = 0.0;
                for (int i = 0; i < d; ++i) n2 += v[static_cast<size_t>(i)] * v[static_cast<size_t>(i)];
                const double inv = 1.0 / std::sqrt(n2);
                double s = 0.0;
                for (int i = 0; i < d; ++i) s += dir[static_cast<size_t>(i)] * v[static_cast<size_t>(i)] * inv;
                return s;
            };
            c.max_rel_err = std::max(c.max_rel_err, grad_check(fn, x, g));
        }
        cases.push_back(c);
    }

    const int b = 4, d = 8, k = 5;
    for (MarginKind kind : {MarginKind::CosFace, MarginKind::ArcFace}) {
        MarginLossConfig cfg;
        cfg.kind = kind;
        cfg.scale = 16.0;
        cfg.margin = kind == MarginKind::CosFace ? 0.35 : 0.5;
        cfg.class_count = k;
        const char* base = kind == MarginKind::CosFace ? "cosface" : "arcface";

        GradCheckCase ce{std::string(base) + "_emb", 0.0};
        GradCheckCase cw{std::string(base) + "_weights", 0.0};
        for (int p = 0; p < points; ++p) {
            std::vector<double> emb(static_cast<size_t>(b) * d), w(static_cast<size_t>(k) * d);
            for (double& v : emb) v = normal();
            for (double& v : w) v = normal();
            std::vector<int> labels(static_cast<size_t>(b));
            for (int i = 0; i < b; ++i) labels[static_cast<size_t>(i)] = static_cast<int>(rng() % k);

            std::vector<double> ge, gw;
            margin_loss_d(emb, b, d, w, labels, cfg, &ge, &gw);
            auto fe = [&](const std::vector<double>& v) {
                return margin_loss_d(v, b, d, w, labels, cfg, nullptr, nullptr);
            };
            auto fw = [&](const std::vector<double>& v) {
                return margin_loss_d(emb, b, d, v, labels, cfg, nullptr, nullptr);
            };
            ce.max_rel_err = std::max(ce.max_rel_err, grad_check(fe, emb, ge, 1e-4));
            cw.max_rel_err = std::max(cw.max_rel_err, grad_check(fw, w, gw, 1e-4));
        }
        cases.push_back(ce);
        cases.push_back(cw);
    }

    {  // low-rank MLP + squared error, gradient w.r.t. every parameter
        GradCheckCase c{"loralin_mlp_params", 0.0};
        const int in = 6, hidden = 10, out = 4, rows = 3;
        for (int p = 0; p < points; ++p) {
            std::mt19937_64 layer_rng(rng());
            LowRankDense l1, l2;
            l1.init(in, hidden, 0.5, layer_rng);
            l2.init(hidden, out, 0.5, layer_rng);
            Mat x(rows, in), target(rows, out);
            for (double& v : x.v) v = normal();
            for (double& v : target.v) v = normal();

            auto pack = [&]() {
                std::vector<double> theta;
                for (const std::vector<double>* m :
                     {&l1.w1.v, &l1.w2.v, &l1.bias, &l2.w1.v, &l2.w2.v, &l2.bias})
                    theta.insert(theta.end(), m->begin(), m->end());
                return theta;
            };
            auto unpack = [&](const std::vector<double>& theta) {
                size_t off = 0;
                for (std::vector<double>* m :
                     {&l1.w1.v, &l1.w2.v, &l1.bias, &l2.w1.v, &l2.w2.v, &l2.bias}) {
                    std::copy_n(theta.begin() + static_cast<long>(off), m->size(), m->begin());
                    off += m->size();
                }
            };
            auto value = [&]() {
                Mat a = l1.forward(x);
                Mat g(a.rows, a.cols);
                for (size_t i = 0; i < a.v.size(); ++i) g.v[i] = gelu_d(a.v[i]);
                Mat y = l2.forward(g);
                double s = 0.0;
                for (size_t i = 0; i < y.v.size(); ++i) {
                    const double dlt = y.v[i] - target.v[i];
                    s += 0.5 * dlt * dlt;
                }
                return s;
            };

            const std::vector<double> theta = pack();
            l1.zero_grads();
            l2.zero_grads();
            Mat a = l1.forward(x);
            Mat g(a.rows, a.cols);
            for (size_t i = 0; i < a.v.size(); ++i) g.v[i] = gelu_d(a.v[i]);
            Mat y = l2.forward(g);
            Mat dy(rows, out);
            for (size_t i = 0; i < y.v.size(); ++i) dy.v[i] = y.v[i] - target.v[i];
            Mat dgm = l2.backward(dy);
            Mat dam(dgm.rows, dgm.cols);
            for (size_t i = 0; i < dgm.v.size(); ++i) dam.v[i] = dgm.v[i] * gelu_grad_d(a.v[i]);
            l1.backward(dam);
            std::vector<double> analytic;
            for (const std::vector<double>* m :
                 {&l1.gw1.v, &l1.gw2.v, &l1.gbias, &l2.gw1.v, &l2.gw2.v, &l2.gbias})
                analytic.insert(analytic.end(), m->begin(), m->end());

            auto fn = [&](const std::vector<double>& t) {
                unpack(t);
                return value();
            };
            c.max_rel_err = std::max(c.max_rel_err, grad_check(fn, theta, analytic, 1e-4));
            unpack(theta);
        }
        cases.push_back(c);
    }

    return cases;
}

}  // namespace edgeface
