#pragma once

#include <cstdint>

#include "bemf/dataset.hpp"
#include "bemf/score_set.hpp"

namespace bemf {

/// Planted low-rank rating generator for benchmarks and tests.
///
/// A latent value mean + spread * (a_u . b_v) / sqrt(rank) + noise * N(0,1),
/// with a_u, b_v standard normal, is rounded onto the integer scale 1..D.
/// Each (user, item) pair is observed independently with probability density.
struct SyntheticSpec {
    std::size_t users = 500;
    std::size_t items = 200;
    std::size_t scores = 5;
    std::size_t rank = 3;
    double density = 0.1;
    double spread = 1.2;
    double noise = 0.4;
    std::uint64_t seed = 1;
};

struct SyntheticData {
    ScoreSet scores;
    RatingDataset ratings;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace bemf
