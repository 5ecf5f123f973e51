#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dispat/metrics.hpp"
#include "dispat/rng.hpp"

using namespace dispat;

namespace {

// exhaustive pair summation oracle, any iteration order
double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double sum = 0.0;
    long long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) sum += 1.0;
            else if (scores[i] == scores[j]) sum += 0.5;
        }
    }
    return sum / static_cast<double>(pairs);
}

} // namespace

TEST_CASE("auc on the worked four-sample set") {
    const std::vector<double> scores{0.9, 0.6, 0.4, 0.2};
    const std::vector<int> labels{1, 0, 1, 0};
    Metrics m = compute_metrics(scores, labels);
    REQUIRE(m.auc.has_value());
    CHECK(*m.auc == 0.75);
}

TEST_CASE("auc equals pair counting on random sets") {
    SplitMix64 rng(404);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_below(60));
        std::vector<double> scores;
        std::vector<int> labels;
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            // coarse grid so exact ties actually happen
            scores.push_back(static_cast<double>(rng.next_below(8)) / 8.0);
            labels.push_back(static_cast<int>(rng.next_below(2)));
            pos += labels.back();
        }
        if (pos == 0 || pos == n) {
            CHECK_FALSE(rank_auc(scores, labels).has_value());
            continue;
        }
        auto auc = rank_auc(scores, labels);
        REQUIRE(auc.has_value());
        CHECK(*auc == pairwise_auc(scores, labels));
    }
}

TEST_CASE("confusion counts and macro f1 by hand") {
    const std::vector<double> scores{0.9, 0.8, 0.3, 0.6, 0.2};
    const std::vector<int> labels{1, 0, 0, 1, 0};
    Metrics m = compute_metrics(scores, labels);
    CHECK(m.tp == 2);
    CHECK(m.fp == 1);
    CHECK(m.tn == 2);
    CHECK(m.fn == 0);
    CHECK(m.acc == 0.8);
    // f1+ = 4/5, f1- = 4/5
    CHECK(m.macro_f1 == 0.8);
}

TEST_CASE("always-approve on a 57.47 percent positive set") {
    const int n = 10000, pos = 5747;
    std::vector<double> scores(n, 0.9);
    std::vector<int> labels(n, 0);
    for (int i = 0; i < pos; ++i) labels[i] = 1;
    Metrics m = compute_metrics(scores, labels);
    CHECK(m.acc == 0.5747);
    CHECK(m.tp == pos);
    CHECK(m.fp == n - pos);
    CHECK(m.tn == 0);
    CHECK(m.fn == 0);
    // f1+ = 2*5747 / (2*5747 + 4253), f1- undefined -> 0
    const double f1_pos = 11494.0 / 15747.0;
    CHECK(m.macro_f1 == 0.5 * f1_pos);
    CHECK(m.macro_f1 == Catch::Approx(0.364958).margin(1e-6));
    REQUIRE(m.auc.has_value());
    CHECK(*m.auc == 0.5); // every pair tied
}

TEST_CASE("single-class labels leave auc absent") {
    Metrics m = compute_metrics({0.9, 0.8, 0.7}, {1, 1, 1});
    CHECK_FALSE(m.auc.has_value());
    CHECK(m.acc == 1.0);
    CHECK(m.macro_f1 == 0.5); // f1+ = 1, f1- undefined -> 0

    Metrics neg = compute_metrics({0.1, 0.2}, {0, 0});
    CHECK_FALSE(neg.auc.has_value());
    CHECK(neg.acc == 1.0);
}

TEST_CASE("perfect separation gives auc one") {
    Metrics m = compute_metrics({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0});
    REQUIRE(m.auc.has_value());
    CHECK(*m.auc == 1.0);
    CHECK(m.acc == 1.0);
    CHECK(m.macro_f1 == 1.0);
}

TEST_CASE("threshold is inclusive at one half") {
    Metrics m = compute_metrics({0.5, 0.4999999}, {1, 0});
    CHECK(m.tp == 1);
    CHECK(m.tn == 1);
}

TEST_CASE("metrics input validation") {
    CHECK_THROWS_AS(compute_metrics({0.5}, {1, 0}), ValidationError);
    CHECK_THROWS_AS(compute_metrics({}, {}), ValidationError);
    CHECK_THROWS_AS(compute_metrics({0.5, 0.5}, {1, 2}), ValidationError);
    CHECK_THROWS_AS(compute_metrics({0.5}, {-1}), ValidationError);
}

TEST_CASE("metrics json carries null auc for single-class sets") {
    nlohmann::json j = metrics_to_json(compute_metrics({0.9}, {1}));
    CHECK(j["auc"].is_null());
    CHECK(j["acc"] == 1.0);
    CHECK(j["confusion"]["tp"] == 1);

    nlohmann::json j2 = metrics_to_json(compute_metrics({0.9, 0.1}, {1, 0}));
    CHECK(j2["auc"] == 1.0);
}
