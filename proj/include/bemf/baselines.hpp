#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bemf/dataset.hpp"
#include "bemf/score_set.hpp"

namespace bemf {

// ---------------------------------------------------------------------------
// Regression matrix factorization (PMF / BiasedMF)

enum class MfVariant { pmf, biased };

struct MfConfig {
    MfVariant variant = MfVariant::pmf;
    std::size_t factors = 8;
    double learning_rate = 0.01;
    double regularization = 0.045;  // lambda
    std::size_t iterations = 100;
    std::uint64_t seed = 0;
    /// Initial factors are U[0,1) scaled by this.
    double init_scale = 0.1;

    void validate() const;
    friend bool operator==(const MfConfig&, const MfConfig&) = default;
};

struct RealRating {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    double value = 0.0;
};

/// SGD-trained factorization of a real-valued sparse matrix.
/// PMF predicts U_u . V_i; BiasedMF predicts mu + b_u + b_i + U_u . V_i.
class MfRegressor {
public:
    MfRegressor() = default;
    MfRegressor(MfConfig config, std::size_t num_users, std::size_t num_items);

    const MfConfig& config() const { return config_; }
    std::size_t num_users() const { return num_users_; }
    std::size_t num_items() const { return num_items_; }

    /// Unclamped model output.
    double raw_predict(std::size_t user, std::size_t item) const;

    std::vector<double>& user_factors() { return user_factors_; }
    const std::vector<double>& user_factors() const { return user_factors_; }
    std::vector<double>& item_factors() { return item_factors_; }
    const std::vector<double>& item_factors() const { return item_factors_; }
    std::vector<double>& user_bias() { return user_bias_; }
    const std::vector<double>& user_bias() const { return user_bias_; }
    std::vector<double>& item_bias() { return item_bias_; }
    const std::vector<double>& item_bias() const { return item_bias_; }
    double global_mean() const { return global_mean_; }
    void set_global_mean(double mu) { global_mean_ = mu; }

    friend bool operator==(const MfRegressor&, const MfRegressor&) = default;

private:
    MfConfig config_;
    std::size_t num_users_ = 0;
    std::size_t num_items_ = 0;
    std::vector<double> user_factors_;
    std::vector<double> item_factors_;
    std::vector<double> user_bias_;
    std::vector<double> item_bias_;
    double global_mean_ = 0.0;
};

/// Seeded SGD on squared error with L2 weight lambda. Ratings are visited in
/// a per-epoch seeded shuffle. Throws NumericError on divergence.
MfRegressor fit_mf_regressor(std::size_t num_users, std::size_t num_items, std::span<const RealRating> ratings,
                             const MfConfig& config,
                             const std::function<void(std::size_t, const MfRegressor&)>& on_iteration = {});

/// A regressor over a score scale; predictions are clamped to [s_1, s_D].
struct MfBaselineModel {
    ScoreSet scores;
    MfRegressor regressor;

    double predict(std::size_t user, std::size_t item) const;
    friend bool operator==(const MfBaselineModel&, const MfBaselineModel&) = default;
};

std::vector<RealRating> to_real_ratings(const RatingDataset& data, const ScoreSet& scores);

MfBaselineModel fit_mf_baseline(const RatingDataset& train, const ScoreSet& scores, const MfConfig& config,
                                const std::function<void(std::size_t, const MfRegressor&)>& on_iteration = {});

// ---------------------------------------------------------------------------
// KNN with JMSD similarity

/// Jaccard(a, b) * (1 - MSD(a, b)), MSD taken over co-rated entries with
/// ratings min-max normalized to [0, 1]. Profiles must be sorted by index.
double jmsd(std::span<const Neighbor> a, std::span<const Neighbor> b, const ScoreSet& scores);

enum class KnnMode { user_based, item_based };

struct KnnConfig {
    KnnMode mode = KnnMode::user_based;
    std::size_t neighbors = 50;  // K
    bool cache_similarities = false;

    friend bool operator==(const KnnConfig&, const KnnConfig&) = default;
};

class KnnPredictor {
public:
    KnnPredictor(RatingDataset train, ScoreSet scores, KnnConfig config, unsigned workers = 1);

    const KnnConfig& config() const { return config_; }
    const RatingDataset& train() const { return train_; }

    /// Similarity-weighted mean over the K most similar neighbours that rated
    /// the target (ties broken by lower index). nullopt when no neighbour with
    /// positive similarity qualifies.
    std::optional<double> predict(std::size_t user, std::size_t item) const;
    double similarity(std::size_t a, std::size_t b) const;

private:
    RatingDataset train_;
    ScoreSet scores_;
    KnnConfig config_;
    std::size_t rows_ = 0;
    std::vector<double> cache_;
};

// ---------------------------------------------------------------------------
// Reliability retrofitted from a factorization of the training error matrix

using BasePredictor = std::function<std::optional<double>(std::size_t user, std::size_t item)>;

class ReliabilityAddOn {
public:
    ReliabilityAddOn() = default;
    explicit ReliabilityAddOn(MfRegressor error_model) : error_model_(std::move(error_model)) {}

    static double from_error(double predicted_error);

    double predicted_error(std::size_t user, std::size_t item) const {
        return error_model_.raw_predict(user, item);
    }
    /// 1 / (1 + max(0, predicted error)), in (0, 1].
    double reliability(std::size_t user, std::size_t item) const {
        return from_error(predicted_error(user, item));
    }
    const MfRegressor& error_model() const { return error_model_; }

private:
    MfRegressor error_model_;
};

/// Fits a PMF-style model to E = |R - base(u, i)| over training pairs the
/// base predictor does not abstain on. `config.variant` is ignored.
ReliabilityAddOn enforce_reliability(const BasePredictor& base, const RatingDataset& train, const ScoreSet& scores,
                                     const MfConfig& config);

}  // namespace bemf
