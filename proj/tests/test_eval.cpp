#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "bemf/eval.hpp"
#include "bemf/random.hpp"

using namespace bemf;
using doctest::Approx;

namespace {

ScoreSet five() { return ScoreSet::parse("1,5,1"); }

/// Textbook single-pass Pearson, negated.
double rpi_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sx += x[k];
        sy += y[k];
        sxx += x[k] * x[k];
        syy += y[k] * y[k];
        sxy += x[k] * y[k];
    }
    return -(n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

struct ToyInstance {
    std::size_t users = 20;
    std::size_t items = 30;
    std::vector<TestRating> test;
    std::vector<std::optional<double>> predicted;
};

ToyInstance toy(std::uint64_t seed) {
    SplitMixRng rng(seed);
    ToyInstance t;
    for (std::uint32_t u = 0; u < t.users; ++u)
        for (std::uint32_t i = 0; i < t.items; ++i) {
            if (rng.uniform() > 0.35) continue;
            t.test.push_back({u, i, static_cast<double>(1 + rng.below(5))});
            if (rng.uniform() < 0.15) t.predicted.push_back(std::nullopt);
            else t.predicted.push_back(1.0 + 4.0 * rng.uniform());
        }
    return t;
}

}  // namespace

TEST_SUITE("mae and coverage") {
    TEST_CASE("small examples") {
        std::vector<PredictedPair> perfect{{4, 4.0}, {2, 2.0}, {5, 5.0}};
        CHECK(mae(perfect) == 0.0);
        CHECK(coverage(perfect) == 1.0);
        std::vector<PredictedPair> pairs{{4, 5.0}, {2, 2.0}};
        CHECK(mae(pairs) == 0.5);
        std::vector<PredictedPair> partial{{4, 5.0}, {2, 2.0}, {3, std::nullopt}, {1, 1.0}};
        CHECK(coverage(partial) == 0.75);
        CHECK(mae(partial) == Approx(1.0 / 3.0).epsilon(1e-15));
    }

    TEST_CASE("errors") {
        std::vector<PredictedPair> none{{4, std::nullopt}};
        CHECK_THROWS_AS(mae(none), std::invalid_argument);
        CHECK_THROWS_AS(coverage(std::vector<PredictedPair>{}), std::invalid_argument);
    }

    TEST_CASE("1000 random pairs against naive sums") {
        SplitMixRng rng(1);
        std::vector<PredictedPair> pairs;
        double sum = 0;
        int n = 0;
        for (int k = 0; k < 1000; ++k) {
            double a = 1 + static_cast<double>(rng.below(5));
            if (rng.uniform() < 0.2) {
                pairs.push_back({a, std::nullopt});
            } else {
                double p = 1 + 4 * rng.uniform();
                pairs.push_back({a, p});
                sum += std::abs(a - p);
                ++n;
            }
        }
        CHECK(std::abs(mae(pairs) - sum / n) < 1e-12);
        CHECK(coverage(pairs) == static_cast<double>(n) / 1000.0);
    }
}

TEST_SUITE("precision and recall") {
    TEST_CASE("every listed item liked") {
        std::vector<TestRating> test{{0, 0, 5}, {0, 1, 4}, {0, 2, 1}};
        auto pr = precision_recall_at_n({{0, 1}}, test, 1, 10, 4);
        CHECK(pr.precision == 1.0);
        CHECK(pr.recall == 1.0);
    }

    TEST_CASE("recall contribution one half") {
        std::vector<TestRating> test{{0, 0, 5}, {0, 1, 4}, {0, 2, 4}, {0, 3, 5}, {0, 4, 2}};
        auto pr = precision_recall_at_n({{0, 4, 2}}, test, 1, 3, 4);
        CHECK(pr.recall == 0.5);
        CHECK(pr.precision == Approx(2.0 / 3.0).epsilon(1e-15));
    }

    TEST_CASE("exclusion rules and errors") {
        std::vector<TestRating> test{{0, 0, 5}, {1, 1, 2}, {2, 2, 1}};
        auto pr = precision_recall_at_n({{}, {1}, {}}, test, 3, 10, 4);
        CHECK(pr.precision_users == 1);
        CHECK(pr.recall_users == 1);
        CHECK(pr.precision == 0.0);
        CHECK(pr.recall == 0.0);
        auto none = precision_recall_at_n({}, {}, 3, 10, 4);
        CHECK(none.precision == 0.0);
        CHECK(none.precision_users == 0);
        CHECK_THROWS_AS(precision_recall_at_n({}, test, 3, 0, 4), std::invalid_argument);
        CHECK_THROWS_AS(precision_recall_at_n({{0, 1}}, test, 3, 1, 4), std::invalid_argument);
    }

    TEST_CASE("20-user instance against per-user counting") {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            auto t = toy(seed);
            auto candidates = candidates_by_prediction(t.users, t.test, t.predicted);
            for (double theta : {3.0, 4.0})
                for (int n : {1, 3, 10}) {
                    auto recs = build_recommendations(candidates, theta, n);
                    auto pr = precision_recall_at_n(recs, t.test, t.users, n, theta);
                    double psum = 0, rsum = 0;
                    int pu = 0, ru = 0;
                    for (std::uint32_t u = 0; u < t.users; ++u) {
                        std::vector<std::pair<double, std::uint32_t>> ranked;
                        int liked = 0;
                        for (std::size_t x = 0; x < t.test.size(); ++x) {
                            if (t.test[x].user != u) continue;
                            if (t.test[x].value >= theta) ++liked;
                            if (t.predicted[x] && *t.predicted[x] >= theta)
                                ranked.push_back({-*t.predicted[x], t.test[x].item});
                        }
                        std::sort(ranked.begin(), ranked.end());
                        if (ranked.size() > static_cast<std::size_t>(n)) ranked.resize(n);
                        int hits = 0;
                        for (auto [neg, item] : ranked)
                            for (const auto& r : t.test)
                                if (r.user == u && r.item == item && r.value >= theta) ++hits;
                        if (!ranked.empty()) {
                            psum += static_cast<double>(hits) / static_cast<double>(ranked.size());
                            ++pu;
                        }
                        if (liked) {
                            rsum += static_cast<double>(hits) / liked;
                            ++ru;
                        }
                    }
                    CHECK(std::abs(pr.precision - (pu ? psum / pu : 0.0)) < 1e-10);
                    CHECK(std::abs(pr.recall - (ru ? rsum / ru : 0.0)) < 1e-10);
                }
        }
    }

    TEST_CASE("recall grows with n") {
        auto t = toy(8);
        auto candidates = candidates_by_prediction(t.users, t.test, t.predicted);
        double prev = 0.0;
        for (int n = 1; n <= 12; ++n) {
            auto pr = precision_recall_at_n(build_recommendations(candidates, 0.0, n), t.test, t.users, n, 4);
            CHECK(pr.recall >= prev);
            prev = pr.recall;
        }
    }
}

TEST_SUITE("recommendations") {
    TEST_CASE("ranking equals a sort with item tie-break") {
        std::vector<std::vector<Candidate>> c{{{4, 0.2}, {1, 0.9}, {3, 0.5}, {0, 0.5}, {2, 0.1}}};
        CHECK(build_recommendations(c, 0.0, 10)[0] == std::vector<std::uint32_t>{1, 0, 3, 4, 2});
        CHECK(build_recommendations(c, 0.0, 2)[0] == std::vector<std::uint32_t>{1, 0});
        CHECK(build_recommendations(c, 0.5, 10)[0] == std::vector<std::uint32_t>{1, 0, 3});
        CHECK(build_recommendations(c, 0.95, 10)[0].empty());
        CHECK_THROWS_AS(build_recommendations(c, 0.0, 0), std::invalid_argument);
    }

    TEST_CASE("liking probability sums the upper mass") {
        std::vector<double> phi{0.1, 0.2, 0.3, 0.25, 0.15};
        CHECK(liking_probability(phi, five(), 4) == Approx(0.4).epsilon(1e-15));
        CHECK(liking_probability(phi, five(), 3.5) == Approx(0.4).epsilon(1e-15));
        CHECK(liking_probability(phi, five(), 1) == Approx(1.0).epsilon(1e-15));
        CHECK(liking_probability(phi, five(), 6) == 0.0);
    }

    TEST_CASE("BeMF candidates rank by liking probability") {
        Hyperparams hp;
        hp.factors = 2;
        hp.seed = 4;
        auto m = BeMFModel::initialized(five(), hp, 3, 5);
        std::vector<TestRating> test;
        for (std::uint32_t i = 0; i < 5; ++i) test.push_back({1, i, 3});
        auto c = candidates_by_liking(m, test, 4);
        REQUIRE(c.size() == 3);
        REQUIRE(c[1].size() == 5);
        for (const auto& cand : c[1]) {
            auto phi = m.predict_distribution(1, cand.item);
            CHECK(cand.score == Approx(phi.probabilities[3] + phi.probabilities[4]).epsilon(1e-14));
        }
    }
}

TEST_SUITE("rpi") {
    TEST_CASE("conventions") {
        std::vector<ReliabilityError> inverse{{0.9, 0.1}, {0.7, 0.4}, {0.5, 1.0}, {0.2, 2.0}};
        CHECK(rpi(inverse) > 0.0);
        std::vector<ReliabilityError> constant{{0.5, 0.1}, {0.5, 1.0}, {0.5, 3.0}};
        CHECK(rpi(constant) == 0.0);
        std::vector<ReliabilityError> one{{0.5, 0.1}};
        CHECK(rpi(one) == 0.0);
        std::vector<ReliabilityError> same_error{{0.1, 1.0}, {0.9, 1.0}};
        CHECK(rpi(same_error) == 0.0);
    }

    TEST_CASE("100 pairs against the textbook formula") {
        SplitMixRng rng(33);
        std::vector<ReliabilityError> pairs;
        std::vector<double> x, y;
        for (int k = 0; k < 100; ++k) {
            double r = rng.uniform();
            double e = std::abs(2.0 * (1 - r) + rng.normal());
            pairs.push_back({r, e});
            x.push_back(r);
            y.push_back(e);
        }
        CHECK(std::abs(rpi(pairs) - rpi_oracle(x, y)) < 1e-10);

        auto scaled = pairs;
        for (auto& p : scaled) p.reliability = 3.0 * p.reliability + 7.0;
        CHECK(std::abs(rpi(scaled) - rpi(pairs)) < 1e-12);

        std::vector<ReliabilityError> weighted(pairs.begin(), pairs.begin() + 10);
        weighted[0].weight = 2.0;
        std::vector<ReliabilityError> duplicated(pairs.begin(), pairs.begin() + 10);
        duplicated.push_back(pairs[0]);
        CHECK(std::abs(rpi(weighted) - rpi(duplicated)) < 1e-12);
    }
}

TEST_SUITE("confusion matrix") {
    TEST_CASE("perfect and degenerate predictors") {
        std::vector<LabelPair> perfect;
        for (std::size_t a = 0; a < 5; ++a)
            for (int rep = 0; rep < 3; ++rep) perfect.push_back({a, a});
        auto m = confusion_matrix(perfect, 5);
        for (std::size_t a = 0; a < 5; ++a)
            for (std::size_t b = 0; b < 5; ++b) CHECK(m.at(a, b) == (a == b ? 1.0 : 0.0));
        std::vector<LabelPair> top{{0, 4}, {2, 4}, {4, 4}};
        auto t = confusion_matrix(top, 5);
        for (std::size_t a = 0; a < 5; ++a)
            for (std::size_t b = 0; b < 4; ++b) CHECK(t.at(a, b) == 0.0);
        CHECK(t.at(2, 4) == 1.0);
        CHECK(t.at(1, 4) == 0.0);
        CHECK_THROWS_AS(confusion_matrix(std::vector<LabelPair>{{5, 0}}, 5), std::out_of_range);
    }

    TEST_CASE("200 random pairs against a tally") {
        SplitMixRng rng(3);
        std::vector<LabelPair> pairs;
        std::map<std::pair<std::size_t, std::size_t>, int> tally;
        std::map<std::size_t, int> rows;
        for (int k = 0; k < 200; ++k) {
            std::size_t a = rng.below(5), b = rng.below(5);
            pairs.push_back({a, b});
            ++tally[{a, b}];
            ++rows[a];
        }
        auto m = confusion_matrix(pairs, 5);
        for (std::size_t a = 0; a < 5; ++a) {
            double sum = 0;
            for (std::size_t b = 0; b < 5; ++b) {
                CHECK(m.count(a, b) == static_cast<std::size_t>(tally[{a, b}]));
                CHECK(std::abs(m.at(a, b) - static_cast<double>(tally[{a, b}]) / rows[a]) < 1e-10);
                sum += m.at(a, b);
            }
            if (rows[a]) CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_SUITE("histogram and sweeps") {
    TEST_CASE("histogram bins") {
        std::vector<double> r{0.0, 0.04999, 0.05, 0.5, 0.99, 1.0};
        auto h = reliability_histogram(r);
        REQUIRE(h.size() == 20);
        CHECK(h[0] == 2);
        CHECK(h[1] == 1);
        CHECK(h[10] == 1);
        CHECK(h[19] == 2);
        CHECK(std::accumulate(h.begin(), h.end(), std::size_t{0}) == r.size());
        CHECK_THROWS_AS(reliability_histogram(std::vector<double>{1.5}), std::invalid_argument);
    }

    TEST_CASE("sweep equals direct filtering") {
        SplitMixRng rng(12);
        std::vector<ReliablePrediction> preds;
        for (int k = 0; k < 300; ++k)
            preds.push_back({1.0 + rng.below(5), 1.0 + rng.below(5), rng.uniform()});
        std::vector<double> thresholds{0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0};
        auto sweep = threshold_sweep(preds, thresholds);
        REQUIRE(sweep.size() == thresholds.size());
        double prev = 1.0;
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            std::vector<PredictedPair> kept;
            for (const auto& p : preds)
                kept.push_back({p.actual, p.reliability >= thresholds[t] ? p.predicted : std::nullopt});
            CHECK(sweep[t].coverage == coverage(kept));
            CHECK(sweep[t].coverage <= prev);
            prev = sweep[t].coverage;
            bool any = std::any_of(kept.begin(), kept.end(), [](const auto& p) { return p.predicted.has_value(); });
            CHECK(sweep[t].mae.has_value() == any);
            if (any) CHECK(*sweep[t].mae == mae(kept));
        }
        CHECK(sweep[0].coverage == 1.0);
        CHECK_FALSE(sweep.back().mae);
        std::vector<double> descending{0.5, 0.1};
        CHECK_THROWS_AS(threshold_sweep(preds, descending), std::invalid_argument);
    }

    TEST_CASE("BeMF sweep at zero covers everything") {
        Hyperparams hp;
        hp.factors = 3;
        auto m = BeMFModel::initialized(five(), hp, 4, 4);
        std::vector<TestRating> test{{0, 0, 3}, {1, 2, 5}, {3, 3, 1}};
        std::vector<double> zero{0.0};
        auto s = threshold_sweep(m, test, zero);
        REQUIRE(s.size() == 1);
        CHECK(s[0].coverage == 1.0);
    }
}

TEST_SUITE("csv") {
    TEST_CASE("headers, precision and missing values") {
        std::ostringstream sweep;
        std::vector<SweepPoint> points{{0.0, 1.0 / 3.0, 1.0}, {0.9, std::nullopt, 0.0}};
        write_sweep_csv(sweep, points);
        CHECK(sweep.str() == "threshold,mae,coverage\n0,0.3333333333,1\n0.9,NA,0\n");

        std::ostringstream pr;
        std::vector<PrecisionRecallPoint> prp{{4.0, {0.5, 0.25, 3, 4}}};
        write_precision_recall_csv(pr, prp);
        CHECK(pr.str() == "threshold,precision,recall\n4,0.5,0.25\n");

        std::ostringstream cm;
        write_confusion_csv(cm, confusion_matrix(std::vector<LabelPair>{{0, 0}, {0, 1}, {1, 1}}, 2),
                            ScoreSet::parse("0.5,1,0.5"));
        CHECK(cm.str() == "actual,pred_0.5,pred_1\n0.5,0.5,0.5\n1,0,1\n");

        std::ostringstream hist;
        std::vector<std::size_t> counts(20, 0);
        counts[19] = 2;
        write_histogram_csv(hist, counts);
        std::string text = hist.str();
        CHECK(text.rfind("bin_start,bin_end,count\n0,0.05,0\n", 0) == 0);
        CHECK(text.find("0.95,1,2\n") != std::string::npos);
    }
}
