#include "edgeface/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace edgeface {

PairList parse_pair_list(const std::string& text) {
    PairList list;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        PairEntry e;
        std::string label;
        if (!(ls >> e.ref_a >> e.ref_b >> label))
            throw std::invalid_argument("pair list: malformed line " + std::to_string(lineno));
        std::string extra;
        if (ls >> extra)
            throw std::invalid_argument("pair list: trailing tokens on line " + std::to_string(lineno));
        if (label == "0")
            e.label = 0;
        else if (label == "1")
            e.label = 1;
        else
            throw std::invalid_argument("pair list: label must be 0 or 1 on line " + std::to_string(lineno));
        list.entries.push_back(std::move(e));
    }
    if (list.entries.empty()) throw std::invalid_argument("pair list: empty");
    return list;
}

std::string format_score_lines(const std::vector<ScoredPair>& pairs) {
    std::string out;
    char buf[64];
    for (const ScoredPair& p : pairs) {
        std::snprintf(buf, sizeof(buf), " %.6f\n", p.score);
        out += p.ref_a + " " + p.ref_b + buf;
    }
    return out;
}

double cosine_score(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine: embedding lengths differ (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    return dot / std::max(std::sqrt(na) * std::sqrt(nb), 1e-30);
}

ScoreResult score_pairs(const EdgeFaceModel& model, const PairList& pairs, const ImageLoader& loader) {
    ScoreResult res;
    std::unordered_map<std::string, std::optional<std::vector<float>>> cache;

    auto embedding_of = [&](const std::string& ref) -> const std::optional<std::vector<float>>& {
        auto it = cache.find(ref);
        if (it != cache.end()) return it->second;
        std::optional<Tensor> img = loader(ref);
        std::optional<std::vector<float>> emb;
        if (img.has_value()) {
            Tensor batched({1, img->dim(0), img->dim(1), img->dim(2)}, img->data);
            Tensor out = embed(model, batched);
            emb = out.data;
        }
        return cache.emplace(ref, std::move(emb)).first->second;
    };

    auto reject = [&](const std::string& ref) {
        if (std::find(res.rejects.begin(), res.rejects.end(), ref) == res.rejects.end())
            res.rejects.push_back(ref);
    };
    for (const PairEntry& e : pairs.entries) {
        const auto& ea = embedding_of(e.ref_a);
        if (!ea.has_value()) {
            reject(e.ref_a);
            continue;
        }
        const auto& eb = embedding_of(e.ref_b);
        if (!eb.has_value()) {
            reject(e.ref_b);
            continue;
        }
        const double score = cosine_score(*ea, *eb);
        res.pairs.push_back({e.ref_a, e.ref_b, score, e.label});
        (e.label == 1 ? res.scores.genuine : res.scores.impostor).push_back(score);
    }
    return res;
}

double accuracy_at(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
    if (scores.empty()) return 0.0;
    int hits = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        const int pred = scores[i] >= threshold ? 1 : 0;
        if (pred == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

namespace {

struct Candidate {
    double threshold;
    double gap;  // distance between the neighbors forming a midpoint, 0 for sentinels
};

std::vector<Candidate> threshold_candidates(const std::vector<double>& scores) {
    std::vector<double> u = scores;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    std::vector<Candidate> cand;
    cand.push_back({u.front() - 1.0, 0.0});  // accept everything
    for (size_t i = 1; i < u.size(); ++i) cand.push_back({(u[i - 1] + u[i]) / 2.0, u[i] - u[i - 1]});
    cand.push_back({u.back() + 1.0, 0.0});  // reject everything
    return cand;
}

}  // namespace

double best_threshold(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.empty()) throw std::invalid_argument("best_threshold: no scores");
    if (scores.size() != labels.size())
        throw std::invalid_argument("best_threshold: scores/labels length mismatch");

    // Sorted order admits O(1) accuracy per candidate: accepting above position
    // p classifies p rejects and n-p accepts.
    std::vector<size_t> order(scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    const size_t n = scores.size();
    // genuine_below[p] = #genuine among the p smallest scores
    std::vector<int> genuine_below(n + 1, 0);
    for (size_t p = 0; p < n; ++p) genuine_below[p + 1] = genuine_below[p] + (labels[order[p]] == 1 ? 1 : 0);
    const int genuine_total = genuine_below[n];

    const std::vector<Candidate> cand = threshold_candidates(scores);
    double best_t = cand.front().threshold;
    double best_gap = cand.front().gap;
    int best_hits = -1;
    for (const Candidate& c : cand) {
        // position = #scores strictly below the threshold
        const size_t pos = static_cast<size_t>(
            std::lower_bound(order.begin(), order.end(), c.threshold,
                             [&](size_t idx, double t) { return scores[idx] < t; }) -
            order.begin());
        const int hits = (genuine_total - genuine_below[pos])             // genuine accepted
                         + (static_cast<int>(pos) - genuine_below[pos]);  // impostor rejected
        if (hits > best_hits || (hits == best_hits && c.gap > best_gap) ||
            (hits == best_hits && c.gap == best_gap && c.threshold < best_t)) {
            best_hits = hits;
            best_gap = c.gap;
            best_t = c.threshold;
        }
    }
    return best_t;
}

KfoldResult kfold_accuracy(const std::vector<double>& scores, const std::vector<int>& labels, int k) {
    const int n = static_cast<int>(scores.size());
    if (scores.size() != labels.size())
        throw std::invalid_argument("kfold: scores/labels length mismatch");
    if (k < 1) throw std::invalid_argument("kfold: k must be >= 1");
    if (k > n) throw std::invalid_argument("kfold: k (" + std::to_string(k) + ") > number of pairs (" +
                                           std::to_string(n) + ")");

    // Contiguous folds in list order; the first n%k folds carry one extra pair.
    std::vector<int> fold_start(static_cast<size_t>(k) + 1, 0);
    const int base = n / k, extra = n % k;
    for (int f = 0; f < k; ++f)
        fold_start[static_cast<size_t>(f) + 1] = fold_start[static_cast<size_t>(f)] + base + (f < extra ? 1 : 0);

    KfoldResult res;
    double total = 0.0;
    for (int f = 0; f < k; ++f) {
        std::vector<double> train_s, test_s;
        std::vector<int> train_l, test_l;
        for (int i = 0; i < n; ++i) {
            const bool in_fold = i >= fold_start[static_cast<size_t>(f)] && i < fold_start[static_cast<size_t>(f) + 1];
            (in_fold ? test_s : train_s).push_back(scores[static_cast<size_t>(i)]);
            (in_fold ? test_l : train_l).push_back(labels[static_cast<size_t>(i)]);
        }
        const double t = k == 1 ? best_threshold(test_s, test_l) : best_threshold(train_s, train_l);
        const double acc = accuracy_at(test_s, test_l, t);
        res.folds.push_back(acc);
        total += acc;
    }
    res.accuracy = total / k;
    res.best_threshold = best_threshold(scores, labels);
    return res;
}

TarAtFarResult tar_at_far(const ScoreSet& s, const std::vector<double>& far_targets) {
    if (s.genuine.empty()) throw std::invalid_argument("tar_at_far: no genuine scores");
    if (s.impostor.empty()) throw std::invalid_argument("tar_at_far: no impostor scores");
    for (double x : s.genuine)
        if (!std::isfinite(x)) throw std::invalid_argument("tar_at_far: non-finite genuine score");
    for (double x : s.impostor)
        if (!std::isfinite(x)) throw std::invalid_argument("tar_at_far: non-finite impostor score");

    std::vector<double> gen = s.genuine, imp = s.impostor;
    std::sort(gen.begin(), gen.end());
    std::sort(imp.begin(), imp.end());
    const double ni = static_cast<double>(imp.size());
    const double ng = static_cast<double>(gen.size());

    auto far_of = [&](double t) {
        const size_t ge = imp.size() - static_cast<size_t>(std::lower_bound(imp.begin(), imp.end(), t) - imp.begin());
        return static_cast<double>(ge) / ni;
    };
    auto tar_of = [&](double t) {
        const size_t ge = gen.size() - static_cast<size_t>(std::lower_bound(gen.begin(), gen.end(), t) - gen.begin());
        return static_cast<double>(ge) / ng;
    };

    std::vector<double> all = gen;
    all.insert(all.end(), imp.begin(), imp.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    TarAtFarResult res;
    for (double target : far_targets) {
        if (!(target >= 0.0) || target > 1.0)
            throw std::invalid_argument("tar_at_far: far target outside [0, 1]");
        if (target < 1.0 / ni) res.floored.push_back(target);
        double threshold = std::nextafter(imp.back(), std::numeric_limits<double>::infinity());
        for (double t : all) {
            if (far_of(t) <= target) {
                threshold = t;
                break;
            }
        }
        res.threshold[target] = threshold;
        res.tar[target] = tar_of(threshold);
    }
    return res;
}

std::vector<std::pair<double, double>> roc_points(const ScoreSet& s) {
    std::vector<double> all = s.genuine;
    all.insert(all.end(), s.impostor.begin(), s.impostor.end());
    std::sort(all.begin(), all.end(), std::greater<double>());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    std::vector<double> gen = s.genuine, imp = s.impostor;
    std::sort(gen.begin(), gen.end());
    std::sort(imp.begin(), imp.end());

    std::vector<std::pair<double, double>> roc;
    roc.emplace_back(0.0, 0.0);
    for (double t : all) {
        const double far =
            imp.empty() ? 0.0
                        : static_cast<double>(imp.size() - static_cast<size_t>(std::lower_bound(imp.begin(), imp.end(), t) -
                                                                               imp.begin())) /
                              static_cast<double>(imp.size());
        const double tar =
            gen.empty() ? 0.0
                        : static_cast<double>(gen.size() - static_cast<size_t>(std::lower_bound(gen.begin(), gen.end(), t) -
                                                                               gen.begin())) /
                              static_cast<double>(gen.size());
        roc.emplace_back(far, tar);
    }
    return roc;
}

VerificationReport evaluate_scores(const std::vector<ScoredPair>& pairs, int folds,
                                   const std::vector<double>& far_targets) {
    if (pairs.empty()) throw std::invalid_argument("evaluate: no scored pairs");
    std::vector<double> scores;
    std::vector<int> labels;
    ScoreSet set;
    for (const ScoredPair& p : pairs) {
        scores.push_back(p.score);
        labels.push_back(p.label);
        (p.label == 1 ? set.genuine : set.impostor).push_back(p.score);
    }
    VerificationReport rep;
    const KfoldResult kf = kfold_accuracy(scores, labels, folds);
    rep.accuracy = kf.accuracy;
    rep.best_threshold = kf.best_threshold;
    rep.folds = kf.folds;
    rep.roc = roc_points(set);
    if (!set.genuine.empty() && !set.impostor.empty() && !far_targets.empty())
        rep.tar = tar_at_far(set, far_targets);
    return rep;
}

}  // namespace edgeface
