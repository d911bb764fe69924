#include "bemf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace bemf {

namespace {

class CsvNumber {
public:
    explicit CsvNumber(std::optional<double> v) : v_(v) {}
    friend std::ostream& operator<<(std::ostream& os, const CsvNumber& n) {
        if (!n.v_) return os << "NA";
        return os << std::setprecision(10) << *n.v_;
    }

private:
    std::optional<double> v_;
};

}  // namespace

double mae(std::span<const PredictedPair> pairs) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& p : pairs) {
        if (!p.predicted) continue;
        sum += std::abs(p.actual - *p.predicted);
        ++count;
    }
    if (count == 0) throw std::invalid_argument("mae: every prediction abstained");
    return sum / static_cast<double>(count);
}

double coverage(std::span<const PredictedPair> pairs) {
    if (pairs.empty()) throw std::invalid_argument("coverage: empty test set");
    auto predicted = std::count_if(pairs.begin(), pairs.end(), [](const PredictedPair& p) { return p.predicted.has_value(); });
    return static_cast<double>(predicted) / static_cast<double>(pairs.size());
}

PrecisionRecall precision_recall_at_n(const std::vector<std::vector<std::uint32_t>>& recommendations,
                                      std::span<const TestRating> test, std::size_t num_users, int n,
                                      double like_threshold) {
    if (n <= 0) throw std::invalid_argument("n must be positive");
    if (recommendations.size() > num_users) throw std::invalid_argument("more recommendation lists than users");

    std::vector<std::unordered_map<std::uint32_t, double>> rated(num_users);
    std::vector<std::size_t> liked(num_users, 0);
    for (const TestRating& t : test) {
        if (t.user >= num_users) throw std::out_of_range("test rating user out of range");
        rated[t.user][t.item] = t.value;
        if (t.value >= like_threshold) ++liked[t.user];
    }

    PrecisionRecall out;
    double precision_sum = 0.0;
    double recall_sum = 0.0;
    for (std::size_t u = 0; u < num_users; ++u) {
        const std::vector<std::uint32_t> empty;
        const auto& list = u < recommendations.size() ? recommendations[u] : empty;
        if (list.size() > static_cast<std::size_t>(n)) throw std::invalid_argument("recommendation list longer than n");
        std::size_t hits = 0;
        for (std::uint32_t item : list) {
            auto it = rated[u].find(item);
            if (it != rated[u].end() && it->second >= like_threshold) ++hits;
        }
        if (!list.empty()) {
            precision_sum += static_cast<double>(hits) / static_cast<double>(list.size());
            ++out.precision_users;
        }
        if (liked[u] > 0) {
            recall_sum += static_cast<double>(hits) / static_cast<double>(liked[u]);
            ++out.recall_users;
        }
    }
    if (out.precision_users) out.precision = precision_sum / static_cast<double>(out.precision_users);
    if (out.recall_users) out.recall = recall_sum / static_cast<double>(out.recall_users);
    return out;
}

std::vector<std::vector<std::uint32_t>> build_recommendations(const std::vector<std::vector<Candidate>>& candidates,
                                                              double min_score, int n) {
    if (n <= 0) throw std::invalid_argument("n must be positive");
    std::vector<std::vector<std::uint32_t>> out(candidates.size());
    for (std::size_t u = 0; u < candidates.size(); ++u) {
        std::vector<Candidate> kept;
        for (const Candidate& c : candidates[u])
            if (c.score >= min_score) kept.push_back(c);
        std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
            return a.score != b.score ? a.score > b.score : a.item < b.item;
        });
        if (kept.size() > static_cast<std::size_t>(n)) kept.resize(static_cast<std::size_t>(n));
        out[u].reserve(kept.size());
        for (const Candidate& c : kept) out[u].push_back(c.item);
    }
    return out;
}

double liking_probability(std::span<const double> probabilities, const ScoreSet& scores, double like_threshold) {
    double p = 0.0;
    for (std::size_t a = scores.first_index_at_least(like_threshold); a < probabilities.size(); ++a)
        p += probabilities[a];
    return p;
}

std::vector<std::vector<Candidate>> candidates_by_liking(const BeMFModel& model, std::span<const TestRating> test,
                                                         double like_threshold) {
    std::vector<std::vector<Candidate>> out(model.num_users());
    for (const TestRating& t : test) {
        auto phi = model.predict_distribution(t.user, t.item);
        out[t.user].push_back({t.item, liking_probability(phi.probabilities, model.scores(), like_threshold)});
    }
    return out;
}

std::vector<std::vector<Candidate>> candidates_by_prediction(std::size_t num_users,
                                                             std::span<const TestRating> test,
                                                             std::span<const std::optional<double>> predictions) {
    if (predictions.size() != test.size()) throw std::invalid_argument("one prediction per test rating expected");
    std::vector<std::vector<Candidate>> out(num_users);
    for (std::size_t x = 0; x < test.size(); ++x) {
        if (predictions[x]) out[test[x].user].push_back({test[x].item, *predictions[x]});
    }
    return out;
}

double rpi(std::span<const ReliabilityError> pairs) {
    if (pairs.size() < 2) return 0.0;
    double w = 0.0;
    double mr = 0.0;
    double me = 0.0;
    for (const auto& p : pairs) {
        w += p.weight;
        mr += p.weight * p.reliability;
        me += p.weight * p.abs_error;
    }
    if (!(w > 0.0)) return 0.0;
    mr /= w;
    me /= w;
    double cov = 0.0;
    double vr = 0.0;
    double ve = 0.0;
    for (const auto& p : pairs) {
        double dr = p.reliability - mr;
        double de = p.abs_error - me;
        cov += p.weight * dr * de;
        vr += p.weight * dr * dr;
        ve += p.weight * de * de;
    }
    if (vr <= 0.0 || ve <= 0.0) return 0.0;
    return -cov / std::sqrt(vr * ve);
}

ConfusionMatrix confusion_matrix(std::span<const LabelPair> pairs, std::size_t num_scores) {
    ConfusionMatrix m;
    m.size = num_scores;
    m.counts.assign(num_scores * num_scores, 0);
    m.fractions.assign(num_scores * num_scores, 0.0);
    for (const LabelPair& p : pairs) {
        if (p.actual >= num_scores || p.predicted >= num_scores) throw std::out_of_range("label out of range");
        ++m.counts[p.actual * num_scores + p.predicted];
    }
    for (std::size_t a = 0; a < num_scores; ++a) {
        std::size_t row = 0;
        for (std::size_t b = 0; b < num_scores; ++b) row += m.counts[a * num_scores + b];
        if (row == 0) continue;
        for (std::size_t b = 0; b < num_scores; ++b)
            m.fractions[a * num_scores + b] = static_cast<double>(m.counts[a * num_scores + b]) / static_cast<double>(row);
    }
    return m;
}

std::vector<std::size_t> reliability_histogram(std::span<const double> reliabilities) {
    const std::size_t bins = static_cast<std::size_t>(std::lround(1.0 / kHistogramBinWidth));
    std::vector<std::size_t> counts(bins, 0);
    for (double r : reliabilities) {
        if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("reliability outside [0, 1]");
        auto b = static_cast<std::size_t>(r * static_cast<double>(bins));
        ++counts[std::min(b, bins - 1)];
    }
    return counts;
}

std::vector<SweepPoint> threshold_sweep(std::span<const ReliablePrediction> predictions,
                                        std::span<const double> thresholds) {
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw std::invalid_argument("thresholds must be ascending");
    std::vector<SweepPoint> out;
    out.reserve(thresholds.size());
    std::vector<PredictedPair> pairs(predictions.size());
    for (double t : thresholds) {
        std::size_t issued = 0;
        for (std::size_t x = 0; x < predictions.size(); ++x) {
            const auto& p = predictions[x];
            bool keep = p.predicted && p.reliability >= t;
            pairs[x] = PredictedPair{p.actual, keep ? p.predicted : std::nullopt};
            issued += keep;
        }
        SweepPoint point{t, std::nullopt, pairs.empty() ? 0.0 : coverage(pairs)};
        if (issued) point.mae = mae(pairs);
        out.push_back(point);
    }
    return out;
}

std::vector<ReliablePrediction> bemf_predictions(const BeMFModel& model, std::span<const TestRating> test) {
    std::vector<ReliablePrediction> out;
    out.reserve(test.size());
    for (const TestRating& t : test) {
        auto phi = model.predict_distribution(t.user, t.item);
        out.push_back({t.value, model.scores().value(*phi.predicted), phi.reliability});
    }
    return out;
}

std::vector<SweepPoint> threshold_sweep(const BeMFModel& model, std::span<const TestRating> test,
                                        std::span<const double> thresholds) {
    auto predictions = bemf_predictions(model, test);
    return threshold_sweep(predictions, thresholds);
}

std::vector<PrecisionRecallPoint> precision_recall_sweep(const std::vector<std::vector<Candidate>>& candidates,
                                                         std::span<const TestRating> test, std::size_t num_users,
                                                         std::span<const double> thresholds, int n,
                                                         double like_threshold) {
    std::vector<PrecisionRecallPoint> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) {
        auto recs = build_recommendations(candidates, t, n);
        out.push_back({t, precision_recall_at_n(recs, test, num_users, n, like_threshold)});
    }
    return out;
}

std::vector<TestRating> to_test_ratings(std::span<const Rating> ratings, const ScoreSet& scores) {
    std::vector<TestRating> out;
    out.reserve(ratings.size());
    for (const Rating& r : ratings) out.push_back({r.user, r.item, scores.value(r.score)});
    return out;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points) {
    out << "threshold,mae,coverage\n";
    for (const auto& p : points)
        out << CsvNumber(p.threshold) << ',' << CsvNumber(p.mae) << ',' << CsvNumber(p.coverage) << '\n';
}

void write_precision_recall_csv(std::ostream& out, std::span<const PrecisionRecallPoint> points) {
    out << "threshold,precision,recall\n";
    for (const auto& p : points)
        out << CsvNumber(p.threshold) << ',' << CsvNumber(p.value.precision) << ',' << CsvNumber(p.value.recall)
            << '\n';
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& matrix, const ScoreSet& scores) {
    out << "actual";
    for (std::size_t b = 0; b < matrix.size; ++b) out << ",pred_" << format_ticks(scores.ticks(b));
    out << '\n';
    for (std::size_t a = 0; a < matrix.size; ++a) {
        out << format_ticks(scores.ticks(a));
        for (std::size_t b = 0; b < matrix.size; ++b) out << ',' << CsvNumber(matrix.at(a, b));
        out << '\n';
    }
}

void write_histogram_csv(std::ostream& out, std::span<const std::size_t> counts) {
    out << "bin_start,bin_end,count\n";
    for (std::size_t b = 0; b < counts.size(); ++b) {
        out << CsvNumber(static_cast<double>(b) * kHistogramBinWidth) << ','
            << CsvNumber(static_cast<double>(b + 1) * kHistogramBinWidth) << ',' << counts[b] << '\n';
    }
}

}  // namespace bemf
