#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "bemf/bemf.hpp"
#include "bemf/dataset.hpp"

namespace bemf::testing {

/// Two-score scale: index 0 = dislike (0), index 1 = like (1).
inline constexpr std::size_t kDislike = 0;
inline constexpr std::size_t kLike = 1;

using FactorRows4 = std::array<std::array<double, 3>, 4>;
using FactorRows6 = std::array<std::array<double, 3>, 6>;

struct FactorTables {
    FactorRows4 users_like;
    FactorRows4 users_dislike;
    FactorRows6 items_like;
    FactorRows6 items_dislike;
};

inline ScoreSet example_scores() { return ScoreSet::from_values({0.0, 1.0}); }

/// 4 users x 6 items, 14 known ratings.
inline RatingDataset example_ratings() {
    const std::uint32_t D = kDislike;
    const std::uint32_t L = kLike;
    std::vector<Rating> r{{0, 0, D}, {0, 1, L}, {0, 3, L}, {1, 0, L}, {1, 2, L}, {1, 3, D}, {1, 4, D},
                          {2, 1, L}, {2, 2, L}, {2, 5, D}, {3, 0, D}, {3, 2, D}, {3, 4, L}, {3, 5, L}};
    return RatingDataset(4, 6, 2, std::move(r));
}

inline const FactorTables& example_initial() {
    static const FactorTables t{
        {{{.99, .26, .55}, {.77, .77, .85}, {.2, .27, .35}, {.11, .96, .13}}},
        {{{.61, .83, .47}, {.12, .02, .54}, {.11, .41, .07}, {.81, .92, .52}}},
        {{{.91, .15, .27}, {.54, .54, .79}, {.31, .57, .09}, {1, .83, .75}, {.68, .03, .05}, {.35, .5, .75}}},
        {{{.92, .53, .67}, {.4, .24, .12}, {.64, .22, .89}, {.64, .86, .6}, {.51, .12, .41}, {.92, .23, .75}}},
    };
    return t;
}

/// Published factors after one iteration, rounded to two decimals.
inline const FactorTables& example_after_one_iteration() {
    static const FactorTables t{
        {{{.96, .27, .56}, {.72, .75, .81}, {.21, .29, .34}, {.05, .92, .12}}},
        {{{.55, .76, .43}, {.07, .02, .49}, {.10, .39, .05}, {.73, .90, .46}}},
        {{{.82, .13, .24}, {.58, .58, .84}, {.31, .58, .09}, {.95, .79, .71}, {.66, .03, .05}, {.34, .48, .72}}},
        {{{.90, .52, .66}, {.36, .21, .11}, {.57, .20, .80}, {.61, .82, .58}, {.50, .12, .40}, {.89, .22, .73}}},
    };
    return t;
}

inline Hyperparams example_hyperparams() {
    Hyperparams hp;
    hp.factors = 3;
    hp.learning_rate = 0.1;
    hp.regularization = 0.01;
    hp.iterations = 1;
    return hp;
}

template <class Rows>
void load_rows(FactorTensor& t, std::size_t score, const Rows& rows) {
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t f = 0; f < 3; ++f) t.row(score, r)[f] = rows[r][f];
}

inline BeMFModel example_model(const FactorTables& t) {
    BeMFModel m(example_scores(), example_hyperparams(), 4, 6);
    load_rows(m.user_factors(), kLike, t.users_like);
    load_rows(m.user_factors(), kDislike, t.users_dislike);
    load_rows(m.item_factors(), kLike, t.items_like);
    load_rows(m.item_factors(), kDislike, t.items_dislike);
    return m;
}

/// Largest |model - table| over every factor entry.
inline double max_deviation(const BeMFModel& m, const FactorTables& t) {
    double worst = 0.0;
    auto cmp = [&](const FactorTensor& x, std::size_t score, const auto& rows) {
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t f = 0; f < 3; ++f) {
                double d = x.row(score, r)[f] - rows[r][f];
                worst = std::max(worst, d < 0 ? -d : d);
            }
    };
    cmp(m.user_factors(), kLike, t.users_like);
    cmp(m.user_factors(), kDislike, t.users_dislike);
    cmp(m.item_factors(), kLike, t.items_like);
    cmp(m.item_factors(), kDislike, t.items_dislike);
    return worst;
}

}  // namespace bemf::testing
