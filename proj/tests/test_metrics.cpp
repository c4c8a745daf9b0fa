#include <doctest.h>

#include <cmath>

#include "lrea/errors.hpp"
#include "lrea/metrics.hpp"
#include "lrea/rng.hpp"
#include "oracles.hpp"

using namespace lrea;

TEST_CASE("auc on the worked example and degenerate orderings") {
    CHECK(auc({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0}) == doctest::Approx(0.75));
    CHECK(auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
    CHECK(auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.5));
}

TEST_CASE("auc rejects undefined inputs") {
    CHECK_THROWS_AS(auc({}, {}), MetricError);
    CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), MetricError);
    CHECK_THROWS_AS(auc({0.1, 0.2}, {0, 0}), MetricError);
    CHECK_THROWS_AS(auc({0.1}, {1, 0}), MetricError);
    CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 2}), MetricError);
}

TEST_CASE("auc matches the exhaustive pairwise oracle, ties included") {
    Rng rng(51);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + rng.index(200);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has_pos = false, has_neg = false;
        for (int i = 0; i < n; ++i) {
            // quantized scores so ties actually occur
            scores[i] = rng.index(8) / 8.0;
            labels[i] = rng.bernoulli(0.4) ? 1 : 0;
            (labels[i] == 1 ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) continue;
        CHECK(auc(scores, labels) ==
              doctest::Approx(oracle::auc_pairwise(scores, labels)).epsilon(1e-9));
    }
}

TEST_CASE("auc is invariant under strictly increasing score transforms") {
    Rng rng(52);
    std::vector<double> scores(60);
    std::vector<int> labels(60);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = rng.uniform(-2.0, 2.0);
        labels[i] = i % 3 == 0 ? 1 : 0;
    }
    const double base = auc(scores, labels);
    std::vector<double> warped = scores;
    for (double& s : warped) s = std::exp(2.0 * s) + 5.0;
    CHECK(auc(warped, labels) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("gauc: single group equals auc, weighted example, invariances") {
    std::vector<double> scores = {0.9, 0.8, 0.3, 0.2};
    std::vector<int> labels = {1, 0, 1, 0};
    CHECK(gauc(scores, labels, {5, 5, 5, 5}) ==
          doctest::Approx(auc(scores, labels)).epsilon(1e-12));

    // group 1: perfectly ordered pair (weight 2); group 2: fully inverted
    // triple (weight 3) -> (1.0*2 + 0.0*3) / 5
    std::vector<double> s2 = {0.9, 0.1, 0.2, 0.8, 0.6};
    std::vector<int> l2 = {1, 0, 1, 0, 1};
    std::vector<std::int64_t> g2 = {1, 1, 2, 2, 2};
    CHECK(gauc(s2, l2, g2) == doctest::Approx(0.4));

    // duplicating every sample within each group leaves the value unchanged
    std::vector<double> s3 = s2;
    std::vector<int> l3 = l2;
    std::vector<std::int64_t> g3 = g2;
    for (std::size_t i = 0; i < s2.size(); ++i) {
        s3.push_back(s2[i]);
        l3.push_back(l2[i]);
        g3.push_back(g2[i]);
    }
    CHECK(gauc(s3, l3, g3) == doctest::Approx(gauc(s2, l2, g2)).epsilon(1e-12));

    // single-class groups are skipped entirely
    std::vector<double> s4 = s2;
    std::vector<int> l4 = l2;
    std::vector<std::int64_t> g4 = g2;
    s4.push_back(0.99);
    l4.push_back(1);
    g4.push_back(3);
    CHECK(gauc(s4, l4, g4) == doctest::Approx(gauc(s2, l2, g2)).epsilon(1e-12));
}

TEST_CASE("gauc rejects inputs with no scoreable group") {
    CHECK_THROWS_AS(gauc({0.1, 0.9}, {1, 1}, {1, 1}), MetricError);
    CHECK_THROWS_AS(gauc({0.1, 0.9}, {1, 0}, {1, 2}), MetricError);
    CHECK_THROWS_AS(gauc({}, {}, {}), MetricError);
}

TEST_CASE("gauc matches the per-group pairwise oracle") {
    Rng rng(53);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 10 + rng.index(150);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        std::vector<std::int64_t> groups(n);
        for (int i = 0; i < n; ++i) {
            scores[i] = rng.index(10) / 10.0;
            labels[i] = rng.bernoulli(0.5) ? 1 : 0;
            groups[i] = rng.index(6);
        }
        try {
            const double got = gauc(scores, labels, groups);
            CHECK(got ==
                  doctest::Approx(oracle::gauc_pairwise(scores, labels, groups))
                      .epsilon(1e-9));
        } catch (const MetricError&) {
            // all groups single-class in this draw
        }
    }
}
