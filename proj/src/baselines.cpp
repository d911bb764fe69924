#include "bemf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bemf/bemf.hpp"
#include "bemf/parallel.hpp"
#include "bemf/random.hpp"

namespace bemf {

void MfConfig::validate() const {
    if (factors < 1) throw std::invalid_argument("factors must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("learning_rate must be positive");
    if (!(regularization >= 0.0) || !std::isfinite(regularization))
        throw std::invalid_argument("regularization must be >= 0");
    if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw std::invalid_argument("init_scale must be >= 0");
}

MfRegressor::MfRegressor(MfConfig config, std::size_t num_users, std::size_t num_items)
    : config_(config),
      num_users_(num_users),
      num_items_(num_items),
      user_factors_(num_users * config.factors, 0.0),
      item_factors_(num_items * config.factors, 0.0) {
    config_.validate();
    if (config_.variant == MfVariant::biased) {
        user_bias_.assign(num_users, 0.0);
        item_bias_.assign(num_items, 0.0);
    }
}

double MfRegressor::raw_predict(std::size_t user, std::size_t item) const {
    const std::size_t k = config_.factors;
    double s = 0.0;
    for (std::size_t f = 0; f < k; ++f) s += user_factors_[user * k + f] * item_factors_[item * k + f];
    if (config_.variant == MfVariant::biased) s += global_mean_ + user_bias_[user] + item_bias_[item];
    return s;
}

MfRegressor fit_mf_regressor(std::size_t num_users, std::size_t num_items, std::span<const RealRating> ratings,
                             const MfConfig& config,
                             const std::function<void(std::size_t, const MfRegressor&)>& on_iteration) {
    if (ratings.empty()) throw std::invalid_argument("training set is empty");
    MfRegressor model(config, num_users, num_items);
    const std::size_t k = config.factors;
    auto& U = model.user_factors();
    auto& V = model.item_factors();
    for (std::size_t u = 0; u < num_users; ++u)
        for (std::size_t f = 0; f < k; ++f) U[u * k + f] = config.init_scale * counter_uniform(config.seed, 0x55, 0, u, f);
    for (std::size_t i = 0; i < num_items; ++i)
        for (std::size_t f = 0; f < k; ++f) V[i * k + f] = config.init_scale * counter_uniform(config.seed, 0x49, 0, i, f);

    const bool biased = config.variant == MfVariant::biased;
    if (biased) {
        double sum = 0.0;
        for (const RealRating& r : ratings) sum += r.value;
        model.set_global_mean(sum / static_cast<double>(ratings.size()));
    }
    auto& bu = model.user_bias();
    auto& bi = model.item_bias();
    const double gamma = config.learning_rate;
    const double lambda = config.regularization;

    std::vector<std::size_t> order(ratings.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMixRng rng(splitmix64(config.seed ^ 0x5ca1ab1eULL));

    for (std::size_t it = 0; it < config.iterations; ++it) {
        for (std::size_t x = order.size(); x > 1; --x) std::swap(order[x - 1], order[rng.below(x)]);
        for (std::size_t idx : order) {
            const RealRating& r = ratings[idx];
            double err = r.value - model.raw_predict(r.user, r.item);
            double* u = &U[r.user * k];
            double* v = &V[r.item * k];
            for (std::size_t f = 0; f < k; ++f) {
                double uf = u[f];
                u[f] += gamma * (err * v[f] - lambda * uf);
                v[f] += gamma * (err * uf - lambda * v[f]);
            }
            if (biased) {
                bu[r.user] += gamma * (err - lambda * bu[r.user]);
                bi[r.item] += gamma * (err - lambda * bi[r.item]);
            }
        }
        auto finite = [](const std::vector<double>& xs) {
            return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
        };
        if (!finite(U) || !finite(V) || !finite(bu) || !finite(bi))
            throw NumericError(it, std::nullopt, "matrix factorization diverged");
        if (on_iteration) on_iteration(it, model);
    }
    return model;
}

double MfBaselineModel::predict(std::size_t user, std::size_t item) const {
    return std::clamp(regressor.raw_predict(user, item), scores.min(), scores.max());
}

std::vector<RealRating> to_real_ratings(const RatingDataset& data, const ScoreSet& scores) {
    std::vector<RealRating> out;
    out.reserve(data.size());
    for (const Rating& r : data.ratings()) out.push_back({r.user, r.item, scores.value(r.score)});
    return out;
}

MfBaselineModel fit_mf_baseline(const RatingDataset& train, const ScoreSet& scores, const MfConfig& config,
                                const std::function<void(std::size_t, const MfRegressor&)>& on_iteration) {
    if (train.num_scores() != scores.size()) throw std::invalid_argument("score set does not match training data");
    auto real = to_real_ratings(train, scores);
    return MfBaselineModel{scores, fit_mf_regressor(train.num_users(), train.num_items(), real, config, on_iteration)};
}

double jmsd(std::span<const Neighbor> a, std::span<const Neighbor> b, const ScoreSet& scores) {
    const double range = scores.max() - scores.min();
    std::size_t common = 0;
    double squared = 0.0;
    std::size_t x = 0;
    std::size_t y = 0;
    while (x < a.size() && y < b.size()) {
        if (a[x].index < b[y].index) {
            ++x;
        } else if (b[y].index < a[x].index) {
            ++y;
        } else {
            double d = (scores.value(a[x].score) - scores.value(b[y].score)) / range;
            squared += d * d;
            ++common;
            ++x;
            ++y;
        }
    }
    if (common == 0) return 0.0;
    double jaccard = static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
    double msd = squared / static_cast<double>(common);
    return jaccard * (1.0 - msd);
}

KnnPredictor::KnnPredictor(RatingDataset train, ScoreSet scores, KnnConfig config, unsigned workers)
    : train_(std::move(train)), scores_(std::move(scores)), config_(config) {
    if (config_.neighbors < 1) throw std::invalid_argument("neighbors must be >= 1");
    if (train_.num_scores() != scores_.size()) throw std::invalid_argument("score set does not match training data");
    if (!config_.cache_similarities) return;
    rows_ = config_.mode == KnnMode::user_based ? train_.num_users() : train_.num_items();
    cache_.assign(rows_ * rows_, 0.0);
    // Each worker fills whole rows; the matrix is computed in full so rows stay independent.
    parallel_for(rows_, workers, [&](std::size_t a) {
        for (std::size_t b = 0; b < rows_; ++b) {
            cache_[a * rows_ + b] = config_.mode == KnnMode::user_based
                                        ? jmsd(train_.items_of(a), train_.items_of(b), scores_)
                                        : jmsd(train_.users_of(a), train_.users_of(b), scores_);
        }
    });
}

double KnnPredictor::similarity(std::size_t a, std::size_t b) const {
    if (!cache_.empty()) return cache_[a * rows_ + b];
    return config_.mode == KnnMode::user_based ? jmsd(train_.items_of(a), train_.items_of(b), scores_)
                                               : jmsd(train_.users_of(a), train_.users_of(b), scores_);
}

std::optional<double> KnnPredictor::predict(std::size_t user, std::size_t item) const {
    if (user >= train_.num_users() || item >= train_.num_items()) return std::nullopt;
    const bool by_user = config_.mode == KnnMode::user_based;
    // Candidates: users who rated the item, or items the user rated.
    auto candidates = by_user ? train_.users_of(item) : train_.items_of(user);
    const std::size_t self = by_user ? user : item;

    struct Scored {
        double sim;
        std::uint32_t index;
        double rating;
    };
    std::vector<Scored> scored;
    scored.reserve(candidates.size());
    for (const Neighbor& n : candidates) {
        if (n.index == self) continue;
        double sim = similarity(self, n.index);
        if (sim > 0.0) scored.push_back({sim, n.index, scores_.value(n.score)});
    }
    if (scored.empty()) return std::nullopt;
    std::size_t keep = std::min(config_.neighbors, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                      [](const Scored& a, const Scored& b) { return a.sim != b.sim ? a.sim > b.sim : a.index < b.index; });
    double num = 0.0;
    double den = 0.0;
    for (std::size_t x = 0; x < keep; ++x) {
        num += scored[x].sim * scored[x].rating;
        den += scored[x].sim;
    }
    return num / den;
}

double ReliabilityAddOn::from_error(double predicted_error) { return 1.0 / (1.0 + std::max(0.0, predicted_error)); }

ReliabilityAddOn enforce_reliability(const BasePredictor& base, const RatingDataset& train, const ScoreSet& scores,
                                     const MfConfig& config) {
    std::vector<RealRating> errors;
    errors.reserve(train.size());
    for (const Rating& r : train.ratings()) {
        auto predicted = base(r.user, r.item);
        if (!predicted) continue;
        errors.push_back({r.user, r.item, std::abs(scores.value(r.score) - *predicted)});
    }
    if (errors.empty()) throw std::invalid_argument("base predictor abstained on every training pair");
    MfConfig cfg = config;
    cfg.variant = MfVariant::pmf;
    return ReliabilityAddOn(fit_mf_regressor(train.num_users(), train.num_items(), errors, cfg));
}

}  // namespace bemf
