#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "edgeface/eval.hpp"
#include "test_util.hpp"

using namespace edgeface;
using testutil::Rng;

namespace {

// Exhaustive threshold search evaluated by naive recounting. Same candidate
// definition and tie-breaking as the library contract, different machinery.
double oracle_best_threshold(const std::vector<double>& s, const std::vector<int>& l) {
    std::set<double> uniq(s.begin(), s.end());
    std::vector<double> u(uniq.begin(), uniq.end());
    struct Cand {
        double t, gap;
    };
    std::vector<Cand> cands;
    cands.push_back({u.front() - 1.0, 0.0});
    for (size_t i = 1; i < u.size(); ++i) cands.push_back({(u[i - 1] + u[i]) / 2.0, u[i] - u[i - 1]});
    cands.push_back({u.back() + 1.0, 0.0});

    double best_t = cands.front().t, best_gap = cands.front().gap;
    int best_hits = -1;
    for (const Cand& c : cands) {
        int hits = 0;
        for (size_t i = 0; i < s.size(); ++i) {
            const int pred = s[i] >= c.t ? 1 : 0;
            if (pred == l[i]) ++hits;
        }
        if (hits > best_hits || (hits == best_hits && c.gap > best_gap) ||
            (hits == best_hits && c.gap == best_gap && c.t < best_t)) {
            best_hits = hits;
            best_gap = c.gap;
            best_t = c.t;
        }
    }
    return best_t;
}

std::vector<double> oracle_kfold(const std::vector<double>& s, const std::vector<int>& l, int k) {
    const int n = static_cast<int>(s.size());
    std::vector<double> folds;
    int start = 0;
    for (int f = 0; f < k; ++f) {
        const int len = n / k + (f < n % k ? 1 : 0);
        std::vector<double> tr_s, te_s;
        std::vector<int> tr_l, te_l;
        for (int i = 0; i < n; ++i) {
            if (i >= start && i < start + len) {
                te_s.push_back(s[static_cast<size_t>(i)]);
                te_l.push_back(l[static_cast<size_t>(i)]);
            } else {
                tr_s.push_back(s[static_cast<size_t>(i)]);
                tr_l.push_back(l[static_cast<size_t>(i)]);
            }
        }
        const double t = oracle_best_threshold(tr_s.empty() ? te_s : tr_s, tr_s.empty() ? te_l : tr_l);
        int hits = 0;
        for (size_t i = 0; i < te_s.size(); ++i)
            if ((te_s[i] >= t ? 1 : 0) == te_l[i]) ++hits;
        folds.push_back(static_cast<double>(hits) / static_cast<double>(te_s.size()));
        start += len;
    }
    return folds;
}

// Exhaustive threshold scan over every observed score for the TAR@FAR rule.
std::pair<double, double> oracle_tar_at_far(const ScoreSet& set, double target) {
    std::vector<double> all = set.genuine;
    all.insert(all.end(), set.impostor.begin(), set.impostor.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    auto far_at = [&](double t) {
        int c = 0;
        for (double v : set.impostor)
            if (v >= t) ++c;
        return static_cast<double>(c) / static_cast<double>(set.impostor.size());
    };
    auto tar_at = [&](double t) {
        int c = 0;
        for (double v : set.genuine)
            if (v >= t) ++c;
        return static_cast<double>(c) / static_cast<double>(set.genuine.size());
    };

    for (double t : all)
        if (far_at(t) <= target) return {t, tar_at(t)};
    const double t = std::nextafter(*std::max_element(set.impostor.begin(), set.impostor.end()),
                                    std::numeric_limits<double>::infinity());
    return {t, tar_at(t)};
}

EdgeFaceModel tiny_model() {
    return build(testutil::mini_spec(), std::nullopt, 17);
}

Tensor synth_image(uint64_t key) {
    Rng rng(key);
    Tensor img({3, 112, 112});
    for (float& v : img.data) v = 0.5f * rng.normal_f();
    for (float& v : img.data) v = std::clamp(v, -1.0f, 1.0f);
    return img;
}

}  // namespace

TEST_CASE("pair list parsing and validation") {
    const PairList list = parse_pair_list("a.ppm b.ppm 1\nc.ppm d.ppm 0\n");
    REQUIRE(list.entries.size() == 2);
    CHECK(list.entries[0].label == 1);
    CHECK(list.entries[1].ref_b == "d.ppm");
    CHECK_THROWS_AS(parse_pair_list(""), std::invalid_argument);
    CHECK_THROWS_AS(parse_pair_list("a b 2\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_pair_list("a b\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_pair_list("a b 1 extra\n"), std::invalid_argument);
}

TEST_CASE("score_pairs caches embeddings and scores identical references at 1") {
    const EdgeFaceModel model = tiny_model();
    int loads = 0;
    ImageLoader loader = [&](const std::string& ref) -> std::optional<Tensor> {
        ++loads;
        if (ref == "missing") return std::nullopt;
        return synth_image(std::hash<std::string>{}(ref));
    };
    PairList pairs;
    pairs.entries = {{"x", "x", 1}, {"x", "y", 0}, {"missing", "y", 1}, {"y", "x", 0}};
    const ScoreResult res = score_pairs(model, pairs, loader);
    CHECK(loads == 3);  // x, y, missing each resolved once
    REQUIRE(res.pairs.size() == 3);
    CHECK(res.pairs[0].score == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.rejects == std::vector<std::string>{"missing"});
    // symmetric pair gives a symmetric score
    CHECK(res.pairs[1].score == doctest::Approx(res.pairs[2].score).epsilon(1e-9));
    CHECK(res.scores.genuine.size() == 1);
    CHECK(res.scores.impostor.size() == 2);
}

TEST_CASE("cosine score on hand-built embeddings") {
    std::vector<float> v = {0.5f, -1.0f, 2.0f, 0.25f};
    std::vector<float> neg(v.size());
    for (size_t i = 0; i < v.size(); ++i) neg[i] = -v[i];
    CHECK(cosine_score(v, v) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(cosine_score(v, neg) == doctest::Approx(-1.0).epsilon(1e-6));

    // dot products over norms, computed by hand
    std::vector<float> a = {1.0f, 0.0f, 0.0f};
    std::vector<float> b = {0.0f, 2.0f, 0.0f};
    std::vector<float> c = {3.0f, 4.0f, 0.0f};
    CHECK(cosine_score(a, b) == doctest::Approx(0.0));
    CHECK(cosine_score(a, c) == doctest::Approx(3.0 / 5.0).epsilon(1e-9));
    CHECK(cosine_score(b, c) == doctest::Approx(4.0 / 5.0).epsilon(1e-9));
    CHECK_THROWS_AS(cosine_score(a, v), std::invalid_argument);
}

TEST_CASE("score file lines carry six decimals") {
    std::vector<ScoredPair> pairs = {{"a", "b", 0.123456789, 1}, {"c", "d", -1.0, 0}};
    CHECK(format_score_lines(pairs) == "a b 0.123457\nc d -1.000000\n");
}

TEST_CASE("perfectly separated scores give unit accuracy for any fold count") {
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) {
        scores.push_back(0.9 + 1e-3 * i);
        labels.push_back(1);
        scores.push_back(0.1 - 1e-3 * i);
        labels.push_back(0);
    }
    for (int k : {1, 2, 3, 5, 10, 60}) {
        const KfoldResult r = kfold_accuracy(scores, labels, k);
        CHECK(r.accuracy == doctest::Approx(1.0));
        for (double f : r.folds) CHECK(f == doctest::Approx(1.0));
    }
}

TEST_CASE("degenerate identical scores with balanced labels score one half") {
    std::vector<double> scores(40, 0.5);
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) labels.push_back(i % 2);
    const KfoldResult r = kfold_accuracy(scores, labels, 10);
    CHECK(r.accuracy == doctest::Approx(0.5));
}

TEST_CASE("kfold rejects more folds than pairs") {
    std::vector<double> s(5, 0.1);
    std::vector<int> l(5, 1);
    CHECK_THROWS_AS(kfold_accuracy(s, l, 6), std::invalid_argument);
    CHECK_THROWS_AS(kfold_accuracy(s, l, 0), std::invalid_argument);
}

TEST_CASE("kfold equals the exhaustive-threshold oracle on random data") {
    Rng rng(100);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 200;
        std::vector<double> scores;
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            const int lab = rng.below(2);
            scores.push_back(lab == 1 ? 0.3 + 0.5 * rng.uniform() : 0.6 * rng.uniform());
            labels.push_back(lab);
        }
        const KfoldResult got = kfold_accuracy(scores, labels, 10);
        const std::vector<double> want = oracle_kfold(scores, labels, 10);
        REQUIRE(got.folds.size() == want.size());
        for (size_t i = 0; i < want.size(); ++i) CHECK(got.folds[i] == want[i]);
        CHECK(got.best_threshold == oracle_best_threshold(scores, labels));
    }
}

TEST_CASE("tar_at_far hand example") {
    ScoreSet s;
    s.genuine = {0.9, 0.8};
    s.impostor = {0.2, 0.1};
    const TarAtFarResult r = tar_at_far(s, {0.5, 1.0});
    CHECK(r.threshold.at(0.5) == doctest::Approx(0.2));
    CHECK(r.tar.at(0.5) == doctest::Approx(1.0));
    CHECK(r.tar.at(1.0) == doctest::Approx(1.0));
    CHECK(r.floored.empty());
}

TEST_CASE("tar_at_far flags targets finer than the impostor resolution") {
    ScoreSet s;
    s.genuine = {0.9, 0.8, 0.3};
    s.impostor = {0.5, 0.4, 0.2, 0.1};
    const TarAtFarResult r = tar_at_far(s, {1e-4});
    REQUIRE(r.floored.size() == 1);
    CHECK(r.floored[0] == doctest::Approx(1e-4));
    // threshold strictly above the top impostor: only the two high genuine pass
    CHECK(r.tar.at(1e-4) == doctest::Approx(2.0 / 3.0));
    CHECK(r.threshold.at(1e-4) > 0.5);
}

TEST_CASE("tar_at_far validates inputs") {
    ScoreSet s;
    s.impostor = {0.5};
    CHECK_THROWS_AS(tar_at_far(s, {0.1}), std::invalid_argument);
    s.genuine = {0.9};
    s.impostor.clear();
    CHECK_THROWS_AS(tar_at_far(s, {0.1}), std::invalid_argument);
    s.impostor = {0.5};
    CHECK_THROWS_AS(tar_at_far(s, {1.5}), std::invalid_argument);
}

TEST_CASE("tar_at_far equals the exhaustive scan on overlapping distributions") {
    Rng rng(200);
    ScoreSet s;
    for (int i = 0; i < 500; ++i) {
        s.genuine.push_back(0.4 + 0.4 * rng.uniform() + 0.2 * rng.normal() * 0.1);
        s.impostor.push_back(0.1 + 0.4 * rng.uniform() + 0.2 * rng.normal() * 0.1);
    }
    for (double target : {1e-2, 1e-1, 0.5}) {
        const TarAtFarResult got = tar_at_far(s, {target});
        const auto [t, tar] = oracle_tar_at_far(s, target);
        CHECK(got.threshold.at(target) == t);
        CHECK(got.tar.at(target) == tar);
    }
}

TEST_CASE("roc points are monotone") {
    Rng rng(300);
    ScoreSet s;
    for (int i = 0; i < 300; ++i) {
        s.genuine.push_back(rng.uniform());
        s.impostor.push_back(rng.uniform() * 0.8);
    }
    const auto roc = roc_points(s);
    REQUIRE(roc.front() == std::pair{0.0, 0.0});
    for (size_t i = 1; i < roc.size(); ++i) {
        CHECK(roc[i].first >= roc[i - 1].first);
        CHECK(roc[i].second >= roc[i - 1].second);
    }
    CHECK(roc.back().first == doctest::Approx(1.0));
    CHECK(roc.back().second == doctest::Approx(1.0));
}

TEST_CASE("metrics are invariant under strictly monotone score transforms") {
    Rng rng(400);
    const int n = 240;
    std::vector<double> scores;
    std::vector<int> labels;
    ScoreSet set;
    for (int i = 0; i < n; ++i) {
        const int lab = rng.below(2);
        const double v = lab == 1 ? 0.2 + 0.7 * rng.uniform() : 0.6 * rng.uniform();
        scores.push_back(v);
        labels.push_back(lab);
        (lab == 1 ? set.genuine : set.impostor).push_back(v);
    }
    auto warp = [](double v) { return std::tanh(2.0 * v) + 0.3 * v; };  // strictly increasing
    std::vector<double> wscores;
    ScoreSet wset;
    for (int i = 0; i < n; ++i) {
        wscores.push_back(warp(scores[static_cast<size_t>(i)]));
        (labels[static_cast<size_t>(i)] == 1 ? wset.genuine : wset.impostor)
            .push_back(warp(scores[static_cast<size_t>(i)]));
    }

    const KfoldResult a = kfold_accuracy(scores, labels, 10);
    const KfoldResult b = kfold_accuracy(wscores, labels, 10);
    CHECK(a.accuracy == doctest::Approx(b.accuracy));
    for (size_t i = 0; i < a.folds.size(); ++i) CHECK(a.folds[i] == doctest::Approx(b.folds[i]));

    for (double target : {0.05, 0.2}) {
        CHECK(tar_at_far(set, {target}).tar.at(target) ==
              doctest::Approx(tar_at_far(wset, {target}).tar.at(target)));
    }

    const auto ra = roc_points(set);
    const auto rb = roc_points(wset);
    REQUIRE(ra.size() == rb.size());
    for (size_t i = 0; i < ra.size(); ++i) {
        CHECK(ra[i].first == doctest::Approx(rb[i].first));
        CHECK(ra[i].second == doctest::Approx(rb[i].second));
    }
}

TEST_CASE("evaluate_scores assembles the full report") {
    Rng rng(500);
    std::vector<ScoredPair> pairs;
    for (int i = 0; i < 100; ++i) {
        const int lab = rng.below(2);
        const double v = lab == 1 ? 0.3 + 0.6 * rng.uniform() : 0.5 * rng.uniform();
        pairs.push_back({"a" + std::to_string(i), "b" + std::to_string(i), v, lab});
    }
    const VerificationReport rep = evaluate_scores(pairs, 10, {1e-1, 1e-2});
    CHECK(rep.accuracy > 0.5);
    CHECK(rep.folds.size() == 10);
    CHECK(rep.roc.size() >= 2);
    CHECK(rep.tar.tar.count(1e-1) == 1);
    CHECK(rep.tar.tar.count(1e-2) == 1);
}
