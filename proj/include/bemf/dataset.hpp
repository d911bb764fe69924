#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <ranges>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "bemf/score_set.hpp"

namespace bemf {

/// One known entry of the rating matrix; score is an index into the ScoreSet.
struct Rating {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    std::uint32_t score = 0;

    friend bool operator==(const Rating&, const Rating&) = default;
};

/// Adjacency entry: the other endpoint plus the score index.
struct Neighbor {
    std::uint32_t index = 0;
    std::uint32_t score = 0;
};

/// Thrown on malformed rating input; carries the 1-based line number (0 if n/a).
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// External id <-> contiguous index, in first-appearance order.
class IdMap {
public:
    std::uint32_t intern(const std::string& id);
    std::optional<std::uint32_t> find(const std::string& id) const;
    const std::string& id(std::uint32_t index) const { return ids_.at(index); }
    std::size_t size() const { return ids_.size(); }
    /// Ensures ids "0".."n-1" exist; used for synthetic datasets.
    static IdMap numeric(std::size_t n);

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::uint32_t> lookup_;
};

/// Immutable sparse rating matrix with per-user and per-item adjacency.
class RatingDataset {
public:
    RatingDataset() = default;
    /// Validates ranges and uniqueness of (user, item). Ratings are stored
    /// sorted by (user, item).
    RatingDataset(std::size_t num_users, std::size_t num_items, std::size_t num_scores,
                  std::vector<Rating> ratings);
    RatingDataset(std::size_t num_users, std::size_t num_items, std::size_t num_scores,
                  std::vector<Rating> ratings, IdMap users, IdMap items);

    std::size_t num_users() const { return num_users_; }
    std::size_t num_items() const { return num_items_; }
    std::size_t num_scores() const { return num_scores_; }
    std::size_t size() const { return ratings_.size(); }
    bool empty() const { return ratings_.empty(); }

    std::span<const Rating> ratings() const { return ratings_; }
    std::span<const Neighbor> items_of(std::size_t user) const {
        return {user_adj_.data() + user_offsets_[user], user_adj_.data() + user_offsets_[user + 1]};
    }
    std::span<const Neighbor> users_of(std::size_t item) const {
        return {item_adj_.data() + item_offsets_[item], item_adj_.data() + item_offsets_[item + 1]};
    }
    /// Score index of (user, item) or nullopt when unrated.
    std::optional<std::uint32_t> find(std::size_t user, std::size_t item) const;

    const IdMap& user_ids() const { return user_ids_; }
    const IdMap& item_ids() const { return item_ids_; }

private:
    void build();

    std::size_t num_users_ = 0;
    std::size_t num_items_ = 0;
    std::size_t num_scores_ = 0;
    std::vector<Rating> ratings_;
    std::vector<std::size_t> user_offsets_{0};
    std::vector<Neighbor> user_adj_;
    std::vector<std::size_t> item_offsets_{0};
    std::vector<Neighbor> item_adj_;
    IdMap user_ids_;
    IdMap item_ids_;
};

struct ParseOptions {
    char delimiter = '\t';
    bool skip_header = false;
};

RatingDataset parse_ratings(std::istream& in, const ScoreSet& scores, const ParseOptions& options = {});

/// Parses ratings whose ids must already exist in `reference` (e.g. a
/// pre-split test file). Unknown ids and duplicates are rejected.
std::vector<Rating> parse_ratings_against(std::istream& in, const ScoreSet& scores,
                                          const RatingDataset& reference,
                                          const ParseOptions& options = {});

/// Writes `user<sep>item<sep>rating` lines using the external ids.
void write_ratings(std::ostream& out, const RatingDataset& data, const ScoreSet& scores,
                   std::span<const Rating> ratings, char delimiter = '\t');

struct SplitDataset {
    RatingDataset train;
    std::vector<Rating> test;
    std::uint64_t seed = 0;
    double test_ratio = 0.0;
};

/// Each rating goes to test independently with probability `test_ratio`.
SplitDataset split_train_test(const RatingDataset& data, double test_ratio, std::uint64_t seed);

/// Per-score binary view R^s over the known ratings: positives are ratings
/// equal to the score, negatives are all other known ratings.
class BinaryScoreView {
public:
    BinaryScoreView(const RatingDataset& data, std::size_t score) : data_(&data), score_(score) {}

    std::size_t score() const { return score_; }
    const RatingDataset& dataset() const { return *data_; }
    bool label(const Rating& r) const { return r.score == score_; }
    bool label(const Neighbor& n) const { return n.score == score_; }

    auto positives() const {
        return data_->ratings() | std::views::filter([s = score_](const Rating& r) { return r.score == s; });
    }
    auto negatives() const {
        return data_->ratings() | std::views::filter([s = score_](const Rating& r) { return r.score != s; });
    }

private:
    const RatingDataset* data_;
    std::size_t score_;
};

std::vector<BinaryScoreView> score_views(const RatingDataset& data);

}  // namespace bemf
