#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "bemf/bemf.hpp"
#include "bemf/dataset.hpp"
#include "bemf/score_set.hpp"

namespace bemf {

/// Actual rating value and the prediction, if one was issued.
struct PredictedPair {
    double actual = 0.0;
    std::optional<double> predicted;
};

/// Mean |actual - predicted| over pairs with a prediction. Throws if none.
double mae(std::span<const PredictedPair> pairs);

/// Fraction of pairs with a prediction. Throws on empty input.
double coverage(std::span<const PredictedPair> pairs);

struct TestRating {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    double value = 0.0;
};

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    std::size_t precision_users = 0;  // users with a non-empty list
    std::size_t recall_users = 0;     // users with at least one liked test item
};

/// recommendations[u] is T^n_u (item indices, length <= n). Users with an
/// empty list are left out of the precision mean; users without liked test
/// items are left out of the recall mean. Both means are 0 when no user
/// qualifies.
PrecisionRecall precision_recall_at_n(const std::vector<std::vector<std::uint32_t>>& recommendations,
                                      std::span<const TestRating> test, std::size_t num_users, int n,
                                      double like_threshold);

/// A test item with the quantity used for ranking and filtering.
struct Candidate {
    std::uint32_t item = 0;
    double score = 0.0;
};

/// Per user: drop candidates with score < min_score, sort by descending score
/// (ties by item index), keep the first n.
std::vector<std::vector<std::uint32_t>> build_recommendations(const std::vector<std::vector<Candidate>>& candidates,
                                                              double min_score, int n);

/// Sum of the distribution mass on scores >= like_threshold.
double liking_probability(std::span<const double> probabilities, const ScoreSet& scores, double like_threshold);

/// Candidates ranked by probability of liking (for filtering with a
/// reliability threshold).
std::vector<std::vector<Candidate>> candidates_by_liking(const BeMFModel& model, std::span<const TestRating> test,
                                                         double like_threshold);

/// Candidates ranked by predicted score (for filtering with like_threshold).
std::vector<std::vector<Candidate>> candidates_by_prediction(std::size_t num_users,
                                                             std::span<const TestRating> test,
                                                             std::span<const std::optional<double>> predictions);

struct ReliabilityError {
    double reliability = 0.0;
    double abs_error = 0.0;
    double weight = 1.0;
};

/// Negated weighted Pearson correlation between reliability and absolute
/// error: positive when reliable predictions err less. 0 for fewer than two
/// pairs or zero variance in either coordinate.
double rpi(std::span<const ReliabilityError> pairs);

struct ConfusionMatrix {
    std::size_t size = 0;
    std::vector<std::size_t> counts;   // row = actual, column = predicted
    std::vector<double> fractions;     // row-normalized; empty rows stay 0

    double at(std::size_t actual, std::size_t predicted) const { return fractions[actual * size + predicted]; }
    std::size_t count(std::size_t actual, std::size_t predicted) const { return counts[actual * size + predicted]; }
};

struct LabelPair {
    std::size_t actual = 0;
    std::size_t predicted = 0;
};

ConfusionMatrix confusion_matrix(std::span<const LabelPair> pairs, std::size_t num_scores);

inline constexpr double kHistogramBinWidth = 0.05;

/// Counts per [b*0.05, (b+1)*0.05) bin over [0, 1]; 1.0 lands in the last bin.
std::vector<std::size_t> reliability_histogram(std::span<const double> reliabilities);

/// A prediction together with its reliability.
struct ReliablePrediction {
    double actual = 0.0;
    std::optional<double> predicted;
    double reliability = 0.0;
};

struct SweepPoint {
    double threshold = 0.0;
    std::optional<double> mae;  // nullopt when every prediction was filtered
    double coverage = 0.0;
};

/// For each threshold: predictions with reliability < threshold are dropped.
/// Thresholds must be ascending.
std::vector<SweepPoint> threshold_sweep(std::span<const ReliablePrediction> predictions,
                                        std::span<const double> thresholds);

/// BeMF predictions on the test ratings (no abstention).
std::vector<ReliablePrediction> bemf_predictions(const BeMFModel& model, std::span<const TestRating> test);

std::vector<SweepPoint> threshold_sweep(const BeMFModel& model, std::span<const TestRating> test,
                                        std::span<const double> thresholds);

struct PrecisionRecallPoint {
    double threshold = 0.0;
    PrecisionRecall value;
};

std::vector<PrecisionRecallPoint> precision_recall_sweep(const std::vector<std::vector<Candidate>>& candidates,
                                                         std::span<const TestRating> test, std::size_t num_users,
                                                         std::span<const double> thresholds, int n,
                                                         double like_threshold);

std::vector<TestRating> to_test_ratings(std::span<const Rating> ratings, const ScoreSet& scores);

// CSV output. Every file has a header row; numbers use 10 significant digits
// and a missing value is written as NA.
void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points);
void write_precision_recall_csv(std::ostream& out, std::span<const PrecisionRecallPoint> points);
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& matrix, const ScoreSet& scores);
void write_histogram_csv(std::ostream& out, std::span<const std::size_t> counts);

}  // namespace bemf
