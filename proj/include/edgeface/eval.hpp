#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edgeface/backbone.hpp"

namespace edgeface {

struct PairEntry {
    std::string ref_a, ref_b;
    int label = 0;  // 1 genuine, 0 impostor
};

struct PairList {
    std::vector<PairEntry> entries;
};

// Parses "<ref_a> <ref_b> <label>" lines, single-space separated.
PairList parse_pair_list(const std::string& text);
std::string format_score_lines(const std::vector<struct ScoredPair>& pairs);

struct ScoredPair {
    std::string ref_a, ref_b;
    double score = 0.0;
    int label = 0;
};

struct ScoreSet {
    std::vector<double> genuine;
    std::vector<double> impostor;
};

using ImageLoader = std::function<std::optional<Tensor>(const std::string&)>;

// Cosine similarity of two embedding vectors, accumulated in double.
double cosine_score(const std::vector<float>& a, const std::vector<float>& b);

struct ScoreResult {
    std::vector<ScoredPair> pairs;   // pair-list order, skipped pairs omitted
    ScoreSet scores;
    std::vector<std::string> rejects;  // unresolvable references
};

// Cosine similarity of the two embeddings per pair; embeddings are cached per
// unique reference. Unresolvable references reject the pair, not the run.
ScoreResult score_pairs(const EdgeFaceModel& model, const PairList& pairs, const ImageLoader& loader);

// Accept rule is score >= threshold everywhere. Candidate thresholds are the
// midpoints between consecutive sorted unique scores plus accept-all /
// reject-all sentinels; ties prefer the midpoint with the widest gap, then the
// smallest threshold.
double accuracy_at(const std::vector<double>& scores, const std::vector<int>& labels, double threshold);
double best_threshold(const std::vector<double>& scores, const std::vector<int>& labels);

struct KfoldResult {
    double accuracy = 0.0;
    std::vector<double> folds;
    double best_threshold = 0.0;  // tuned on the full set
};

// Standard 10-fold verification protocol over contiguous folds in list order:
// each fold is scored with the threshold tuned on the other k-1 folds.
KfoldResult kfold_accuracy(const std::vector<double>& scores, const std::vector<int>& labels, int k = 10);

struct TarAtFarResult {
    std::map<double, double> tar;        // far target -> TAR
    std::map<double, double> threshold;  // far target -> threshold used
    std::vector<double> floored;         // targets below 1/#impostors
};

// threshold = smallest observed score t with FAR(t) <= target; when no score
// qualifies the threshold moves strictly above the top impostor score. Targets
// finer than 1/#impostors are flagged, not extrapolated.
TarAtFarResult tar_at_far(const ScoreSet& s, const std::vector<double>& far_targets);

// (FAR, TAR) pairs swept over descending thresholds, starting from (0, 0).
std::vector<std::pair<double, double>> roc_points(const ScoreSet& s);

struct VerificationReport {
    double accuracy = 0.0;
    double best_threshold = 0.0;
    std::vector<double> folds;
    std::vector<std::pair<double, double>> roc;
    TarAtFarResult tar;
    std::vector<std::string> rejects;
};

VerificationReport evaluate_scores(const std::vector<ScoredPair>& pairs, int folds,
                                   const std::vector<double>& far_targets);

}  // namespace edgeface
