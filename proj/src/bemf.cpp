#include "bemf/bemf.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "bemf/parallel.hpp"
#include "bemf/random.hpp"

namespace bemf {

namespace {

constexpr std::uint64_t kUserStream = 0x55;
constexpr std::uint64_t kItemStream = 0x49;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t f = 0; f < a.size(); ++f) s += a[f] * b[f];
    return s;
}

void check_view(const BeMFModel& model, const BinaryScoreView& view) {
    const RatingDataset& d = view.dataset();
    if (d.num_users() != model.num_users() || d.num_items() != model.num_items() ||
        d.num_scores() != model.num_scores() || view.score() >= model.num_scores())
        throw std::invalid_argument("model dimensions do not match the rating data");
}

bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

double activation(double x, Activation kind) {
    switch (kind) {
        case Activation::logistic:
            break;
    }
    double y = 1.0 / (1.0 + std::exp(-x));
    return std::clamp(y, kActivationEpsilon, 1.0 - kActivationEpsilon);
}

void Hyperparams::validate() const {
    if (factors < 1) throw std::invalid_argument("factors must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("learning_rate must be positive");
    if (!(regularization >= 0.0) || !std::isfinite(regularization))
        throw std::invalid_argument("regularization must be >= 0");
}

BeMFModel::BeMFModel(ScoreSet scores, Hyperparams hp, std::size_t num_users, std::size_t num_items)
    : scores_(std::move(scores)),
      hp_(hp),
      users_(scores_.size(), num_users, hp.factors),
      items_(scores_.size(), num_items, hp.factors) {
    hp_.validate();
}

BeMFModel BeMFModel::initialized(ScoreSet scores, Hyperparams hp, std::size_t num_users, std::size_t num_items) {
    BeMFModel model(std::move(scores), hp, num_users, num_items);
    const std::size_t k = hp.factors;
    for (std::size_t s = 0; s < model.num_scores(); ++s) {
        for (std::size_t u = 0; u < num_users; ++u) {
            auto row = model.users_.row(s, u);
            for (std::size_t f = 0; f < k; ++f) row[f] = counter_uniform(hp.seed, kUserStream, s, u, f);
        }
        for (std::size_t i = 0; i < num_items; ++i) {
            auto row = model.items_.row(s, i);
            for (std::size_t f = 0; f < k; ++f) row[f] = counter_uniform(hp.seed, kItemStream, s, i, f);
        }
    }
    return model;
}

double BeMFModel::activation_of(std::size_t score, std::size_t user, std::size_t item) const {
    return activation(dot(users_.row(score, user), items_.row(score, item)), hp_.activation);
}

PredictionOutput BeMFModel::predict_distribution(std::size_t user, std::size_t item) const {
    if (user >= num_users() || item >= num_items()) throw std::out_of_range("user or item index out of range");
    PredictionOutput out;
    out.probabilities.resize(num_scores());
    double total = 0.0;
    for (std::size_t s = 0; s < num_scores(); ++s) {
        out.probabilities[s] = activation_of(s, user, item);
        total += out.probabilities[s];
    }
    std::size_t best = 0;
    for (std::size_t s = 0; s < num_scores(); ++s) {
        out.probabilities[s] /= total;
        if (out.probabilities[s] > out.probabilities[best]) best = s;
    }
    out.predicted = best;
    out.reliability = out.probabilities[best];
    return out;
}

Prediction BeMFModel::predict(std::size_t user, std::size_t item, double threshold) const {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("reliability threshold must be in [0, 1]");
    PredictionOutput full = predict_distribution(user, item);
    Prediction p{full.predicted, full.reliability};
    if (full.reliability < threshold) p.score.reset();
    return p;
}

double cost(const BeMFModel& model, const BinaryScoreView& view) {
    check_view(model, view);
    const std::size_t s = view.score();
    const Activation act = model.hyperparams().activation;
    const auto& U = model.user_factors();
    const auto& V = model.item_factors();
    double total = 0.0;
    for (const Rating& r : view.dataset().ratings()) {
        double p = activation(dot(U.row(s, r.user), V.row(s, r.item)), act);
        total -= view.label(r) ? std::log(p) : std::log(1.0 - p);
    }
    double norms = 0.0;
    for (double x : U.slice(s)) norms += x * x;
    for (double x : V.slice(s)) norms += x * x;
    return total + 0.5 * model.hyperparams().regularization * norms;
}

FactorGradient gradient(const BeMFModel& model, const BinaryScoreView& view) {
    check_view(model, view);
    const std::size_t s = view.score();
    const std::size_t k = model.rank();
    const double eta = model.hyperparams().regularization;
    const Activation act = model.hyperparams().activation;
    const auto& U = model.user_factors();
    const auto& V = model.item_factors();

    FactorGradient g;
    g.users.resize(model.num_users() * k);
    g.items.resize(model.num_items() * k);
    auto us = U.slice(s);
    auto vs = V.slice(s);
    for (std::size_t x = 0; x < us.size(); ++x) g.users[x] = eta * us[x];
    for (std::size_t x = 0; x < vs.size(); ++x) g.items[x] = eta * vs[x];

    for (const Rating& r : view.dataset().ratings()) {
        auto u = U.row(s, r.user);
        auto v = V.row(s, r.item);
        double p = activation(dot(u, v), act);
        // d/dx of -log(psi) is -(1 - psi); of -log(1 - psi) it is psi.
        double w = view.label(r) ? -(1.0 - p) : p;
        for (std::size_t f = 0; f < k; ++f) {
            g.users[r.user * k + f] += w * v[f];
            g.items[r.item * k + f] += w * u[f];
        }
    }
    return g;
}

void train_score(BeMFModel& model, const BinaryScoreView& view, unsigned workers) {
    check_view(model, view);
    const RatingDataset& data = view.dataset();
    const std::size_t s = view.score();
    const std::size_t k = model.rank();
    const double gamma = model.hyperparams().learning_rate;
    const double eta = model.hyperparams().regularization;
    const Activation act = model.hyperparams().activation;
    FactorTensor& U = model.user_factors();
    FactorTensor& V = model.item_factors();

    // User phase: each row reads its own old value and the frozen item factors.
    parallel_for(data.num_users(), workers, [&](std::size_t u) {
        auto row = U.row(s, u);
        std::vector<double> delta(k, 0.0);
        for (const Neighbor& n : data.items_of(u)) {
            auto v = std::as_const(V).row(s, n.index);
            double p = activation(dot(row, v), act);
            double w = view.label(n) ? 1.0 - p : -p;
            for (std::size_t f = 0; f < k; ++f) delta[f] += w * v[f];
        }
        for (std::size_t f = 0; f < k; ++f) row[f] += gamma * (delta[f] - eta * row[f]);
    });

    // Item phase reads the user factors just updated above.
    parallel_for(data.num_items(), workers, [&](std::size_t i) {
        auto row = V.row(s, i);
        std::vector<double> delta(k, 0.0);
        for (const Neighbor& n : data.users_of(i)) {
            auto u = std::as_const(U).row(s, n.index);
            double p = activation(dot(u, row), act);
            double w = view.label(n) ? 1.0 - p : -p;
            for (std::size_t f = 0; f < k; ++f) delta[f] += w * u[f];
        }
        for (std::size_t f = 0; f < k; ++f) row[f] += gamma * (delta[f] - eta * row[f]);
    });
}

void run_iterations(BeMFModel& model, const RatingDataset& train, const FitOptions& options) {
    auto views = score_views(train);
    for (std::size_t it = 0; it < model.hyperparams().iterations; ++it) {
        for (const auto& view : views) {
            train_score(model, view, options.workers);
            if (!all_finite(model.user_factors().slice(view.score())) ||
                !all_finite(model.item_factors().slice(view.score())))
                throw NumericError(it, view.score(), "non-finite factor detected");
        }
        if (options.on_iteration) options.on_iteration(it, model);
    }
}

BeMFModel fit(const RatingDataset& train, const ScoreSet& scores, const Hyperparams& hp, const FitOptions& options) {
    if (train.empty()) throw std::invalid_argument("training set is empty");
    if (train.num_scores() != scores.size()) throw std::invalid_argument("score set does not match training data");
    hp.validate();
    BeMFModel model = BeMFModel::initialized(scores, hp, train.num_users(), train.num_items());
    run_iterations(model, train, options);
    return model;
}

}  // namespace bemf
