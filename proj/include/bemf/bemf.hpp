#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bemf/dataset.hpp"
#include "bemf/score_set.hpp"

namespace bemf {

enum class Activation { logistic };

inline constexpr double kActivationEpsilon = 1e-12;

/// Logistic function clamped to [eps, 1 - eps] so that log() and the
/// normalization denominator never see an exact 0 or 1.
double activation(double x, Activation kind = Activation::logistic);

struct Hyperparams {
    std::size_t factors = 2;          // k
    double learning_rate = 0.006;     // gamma
    double regularization = 0.16;     // eta (same for users and items)
    std::size_t iterations = 100;     // m
    Activation activation = Activation::logistic;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// D x rows x k block of factors, row-major and contiguous per score.
class FactorTensor {
public:
    FactorTensor() = default;
    FactorTensor(std::size_t scores, std::size_t rows, std::size_t rank)
        : scores_(scores), rows_(rows), rank_(rank), data_(scores * rows * rank, 0.0) {}

    std::size_t scores() const { return scores_; }
    std::size_t rows() const { return rows_; }
    std::size_t rank() const { return rank_; }

    std::span<double> row(std::size_t score, std::size_t r) {
        return {data_.data() + (score * rows_ + r) * rank_, rank_};
    }
    std::span<const double> row(std::size_t score, std::size_t r) const {
        return {data_.data() + (score * rows_ + r) * rank_, rank_};
    }
    std::span<double> slice(std::size_t score) { return {data_.data() + score * rows_ * rank_, rows_ * rank_}; }
    std::span<const double> slice(std::size_t score) const {
        return {data_.data() + score * rows_ * rank_, rows_ * rank_};
    }
    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    friend bool operator==(const FactorTensor&, const FactorTensor&) = default;

private:
    std::size_t scores_ = 0;
    std::size_t rows_ = 0;
    std::size_t rank_ = 0;
    std::vector<double> data_;
};

/// Full BeMF output for one (user, item) pair.
struct PredictionOutput {
    std::vector<double> probabilities;       // Phi(u, i), sums to 1
    std::optional<std::size_t> predicted;    // argmax, nullopt when abstaining
    double reliability = 0.0;                // max entry of probabilities
};

struct Prediction {
    std::optional<std::size_t> score;
    double reliability = 0.0;
};

class BeMFModel {
public:
    BeMFModel() = default;
    /// All factors zero.
    BeMFModel(ScoreSet scores, Hyperparams hp, std::size_t num_users, std::size_t num_items);

    /// Factors drawn i.i.d. from U[0,1), each entry keyed by (seed, side, score, row, factor).
    static BeMFModel initialized(ScoreSet scores, Hyperparams hp, std::size_t num_users, std::size_t num_items);

    const ScoreSet& scores() const { return scores_; }
    const Hyperparams& hyperparams() const { return hp_; }
    std::size_t num_scores() const { return scores_.size(); }
    std::size_t num_users() const { return users_.rows(); }
    std::size_t num_items() const { return items_.rows(); }
    std::size_t rank() const { return hp_.factors; }

    FactorTensor& user_factors() { return users_; }
    const FactorTensor& user_factors() const { return users_; }
    FactorTensor& item_factors() { return items_; }
    const FactorTensor& item_factors() const { return items_; }

    /// psi(U_u^s . V_i^s) before normalization.
    double activation_of(std::size_t score, std::size_t user, std::size_t item) const;

    PredictionOutput predict_distribution(std::size_t user, std::size_t item) const;
    /// Abstains iff reliability < threshold. threshold must lie in [0, 1].
    Prediction predict(std::size_t user, std::size_t item, double threshold) const;

    friend bool operator==(const BeMFModel&, const BeMFModel&) = default;

private:
    ScoreSet scores_;
    Hyperparams hp_;
    FactorTensor users_;
    FactorTensor items_;
};

/// A factor became NaN or infinite during training.
class NumericError : public std::runtime_error {
public:
    NumericError(std::size_t iteration, std::optional<std::size_t> score, const std::string& what)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) +
                             (score ? ", score index " + std::to_string(*score) : std::string()) + ")"),
          iteration_(iteration),
          score_(score) {}
    std::size_t iteration() const { return iteration_; }
    std::optional<std::size_t> score() const { return score_; }

private:
    std::size_t iteration_;
    std::optional<std::size_t> score_;
};

/// Negative log-posterior of the binary factorization for one score.
double cost(const BeMFModel& model, const BinaryScoreView& view);

struct FactorGradient {
    std::vector<double> users;  // num_users x k
    std::vector<double> items;  // num_items x k
};

/// Analytic gradient of cost() with respect to U^s and V^s.
FactorGradient gradient(const BeMFModel& model, const BinaryScoreView& view);

struct FitOptions {
    unsigned workers = 1;  // 0 = default_workers()
    /// Called after each completed iteration with its zero-based index.
    std::function<void(std::size_t, const BeMFModel&)> on_iteration;
};

/// One user phase then one item phase for a single score. Only the factors
/// of that score are touched.
void train_score(BeMFModel& model, const BinaryScoreView& view, unsigned workers = 1);

/// Runs hp.iterations passes over all scores starting from `model`.
void run_iterations(BeMFModel& model, const RatingDataset& train, const FitOptions& options = {});

/// Seeded initialization followed by training.
BeMFModel fit(const RatingDataset& train, const ScoreSet& scores, const Hyperparams& hp,
              const FitOptions& options = {});

}  // namespace bemf
