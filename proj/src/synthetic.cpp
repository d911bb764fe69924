#include "bemf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bemf/random.hpp"

namespace bemf {

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.scores < 2 || spec.rank < 1 || !(spec.density > 0.0 && spec.density <= 1.0))
        throw std::invalid_argument("invalid synthetic spec");
    SplitMixRng rng(spec.seed);
    auto draw = [&](std::size_t rows) {
        std::vector<double> m(rows * spec.rank);
        for (double& x : m) x = rng.normal();
        return m;
    };
    std::vector<double> a = draw(spec.users);
    std::vector<double> b = draw(spec.items);

    const double mean = 0.5 * static_cast<double>(spec.scores + 1);
    const double norm = 1.0 / std::sqrt(static_cast<double>(spec.rank));
    std::vector<Rating> ratings;
    for (std::size_t u = 0; u < spec.users; ++u) {
        for (std::size_t i = 0; i < spec.items; ++i) {
            if (rng.uniform() >= spec.density) continue;
            double dot = 0.0;
            for (std::size_t f = 0; f < spec.rank; ++f) dot += a[u * spec.rank + f] * b[i * spec.rank + f];
            double latent = mean + spec.spread * dot * norm + spec.noise * rng.normal();
            double clamped = std::clamp(std::round(latent), 1.0, static_cast<double>(spec.scores));
            ratings.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(i),
                               static_cast<std::uint32_t>(clamped) - 1});
        }
    }
    std::vector<std::int64_t> ticks;
    for (std::size_t s = 1; s <= spec.scores; ++s) ticks.push_back(static_cast<std::int64_t>(s) * ScoreSet::kTicksPerUnit);
    return {ScoreSet(std::move(ticks)), RatingDataset(spec.users, spec.items, spec.scores, std::move(ratings))};
}

}  // namespace bemf
