#include "bemf/dataset.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string_view>

#include "bemf/random.hpp"

namespace bemf {

std::uint32_t IdMap::intern(const std::string& id) {
    auto [it, inserted] = lookup_.try_emplace(id, static_cast<std::uint32_t>(ids_.size()));
    if (inserted) ids_.push_back(id);
    return it->second;
}

std::optional<std::uint32_t> IdMap::find(const std::string& id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

IdMap IdMap::numeric(std::size_t n) {
    IdMap map;
    for (std::size_t i = 0; i < n; ++i) map.intern(std::to_string(i));
    return map;
}

RatingDataset::RatingDataset(std::size_t num_users, std::size_t num_items, std::size_t num_scores,
                             std::vector<Rating> ratings)
    : RatingDataset(num_users, num_items, num_scores, std::move(ratings), IdMap::numeric(num_users),
                    IdMap::numeric(num_items)) {}

RatingDataset::RatingDataset(std::size_t num_users, std::size_t num_items, std::size_t num_scores,
                             std::vector<Rating> ratings, IdMap users, IdMap items)
    : num_users_(num_users),
      num_items_(num_items),
      num_scores_(num_scores),
      ratings_(std::move(ratings)),
      user_ids_(std::move(users)),
      item_ids_(std::move(items)) {
    if (user_ids_.size() != num_users_ || item_ids_.size() != num_items_)
        throw std::invalid_argument("id maps do not match dataset dimensions");
    build();
}

void RatingDataset::build() {
    for (const Rating& r : ratings_) {
        if (r.user >= num_users_ || r.item >= num_items_)
            throw std::invalid_argument("rating index out of range");
        if (r.score >= num_scores_) throw std::invalid_argument("score index out of range");
    }
    std::sort(ratings_.begin(), ratings_.end(), [](const Rating& a, const Rating& b) {
        return a.user != b.user ? a.user < b.user : a.item < b.item;
    });
    for (std::size_t k = 1; k < ratings_.size(); ++k) {
        if (ratings_[k].user == ratings_[k - 1].user && ratings_[k].item == ratings_[k - 1].item)
            throw std::invalid_argument("duplicate rating for user " + user_ids_.id(ratings_[k].user) +
                                        ", item " + item_ids_.id(ratings_[k].item));
    }

    user_offsets_.assign(num_users_ + 1, 0);
    item_offsets_.assign(num_items_ + 1, 0);
    for (const Rating& r : ratings_) {
        ++user_offsets_[r.user + 1];
        ++item_offsets_[r.item + 1];
    }
    for (std::size_t u = 0; u < num_users_; ++u) user_offsets_[u + 1] += user_offsets_[u];
    for (std::size_t i = 0; i < num_items_; ++i) item_offsets_[i + 1] += item_offsets_[i];

    user_adj_.resize(ratings_.size());
    item_adj_.resize(ratings_.size());
    std::vector<std::size_t> ucur(user_offsets_.begin(), user_offsets_.end() - 1);
    std::vector<std::size_t> icur(item_offsets_.begin(), item_offsets_.end() - 1);
    // ratings_ is sorted by (user, item), so both adjacency lists end up sorted.
    for (const Rating& r : ratings_) {
        user_adj_[ucur[r.user]++] = Neighbor{r.item, r.score};
        item_adj_[icur[r.item]++] = Neighbor{r.user, r.score};
    }
}

std::optional<std::uint32_t> RatingDataset::find(std::size_t user, std::size_t item) const {
    if (user >= num_users_) return std::nullopt;
    auto row = items_of(user);
    auto it = std::lower_bound(row.begin(), row.end(), item,
                               [](const Neighbor& n, std::size_t v) { return n.index < v; });
    if (it == row.end() || it->index != item) return std::nullopt;
    return it->score;
}

namespace {

struct RawRecord {
    std::string user;
    std::string item;
    std::uint32_t score;
};

template <typename Visitor>
void read_records(std::istream& in, const ScoreSet& scores, const ParseOptions& options, Visitor&& visit) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && options.skip_header) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        std::string_view rest = line;
        std::string_view fields[3];
        for (int f = 0; f < 3; ++f) {
            auto pos = rest.find(options.delimiter);
            if (f < 2 && pos == std::string_view::npos)
                throw ParseError(line_no, "malformed line: expected user, item and rating");
            fields[f] = rest.substr(0, pos);
            rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
        }
        // Columns past the rating (e.g. timestamps) are ignored.
        if (fields[0].empty() || fields[1].empty())
            throw ParseError(line_no, "malformed line: empty user or item id");
        auto score = scores.index_of(fields[2]);
        if (!score)
            throw ParseError(line_no, "rating not in score set: '" + std::string(fields[2]) + "'");
        visit(line_no, RawRecord{std::string(fields[0]), std::string(fields[1]),
                                 static_cast<std::uint32_t>(*score)});
    }
}

void reject_duplicates(std::vector<std::pair<Rating, std::size_t>>& rows, const IdMap& users,
                       const IdMap& items) {
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.first.user != b.first.user ? a.first.user < b.first.user : a.first.item < b.first.item;
    });
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const Rating& a = rows[k - 1].first;
        const Rating& b = rows[k].first;
        if (a.user == b.user && a.item == b.item) {
            std::size_t line = std::max(rows[k - 1].second, rows[k].second);
            throw ParseError(line, "duplicate rating for user '" + users.id(a.user) + "', item '" +
                                       items.id(a.item) + "'");
        }
    }
}

}  // namespace

RatingDataset parse_ratings(std::istream& in, const ScoreSet& scores, const ParseOptions& options) {
    IdMap users;
    IdMap items;
    std::vector<std::pair<Rating, std::size_t>> rows;
    read_records(in, scores, options, [&](std::size_t line, RawRecord rec) {
        Rating r{users.intern(rec.user), items.intern(rec.item), rec.score};
        rows.emplace_back(r, line);
    });
    reject_duplicates(rows, users, items);
    std::vector<Rating> ratings;
    ratings.reserve(rows.size());
    for (const auto& [r, line] : rows) ratings.push_back(r);
    std::size_t n = users.size();
    std::size_t m = items.size();
    return RatingDataset(n, m, scores.size(), std::move(ratings), std::move(users), std::move(items));
}

std::vector<Rating> parse_ratings_against(std::istream& in, const ScoreSet& scores,
                                          const RatingDataset& reference, const ParseOptions& options) {
    if (reference.num_scores() != scores.size())
        throw std::invalid_argument("score set does not match reference dataset");
    std::vector<std::pair<Rating, std::size_t>> rows;
    read_records(in, scores, options, [&](std::size_t line, RawRecord rec) {
        auto u = reference.user_ids().find(rec.user);
        if (!u) throw ParseError(line, "unknown user '" + rec.user + "'");
        auto i = reference.item_ids().find(rec.item);
        if (!i) throw ParseError(line, "unknown item '" + rec.item + "'");
        rows.emplace_back(Rating{*u, *i, rec.score}, line);
    });
    reject_duplicates(rows, reference.user_ids(), reference.item_ids());
    std::vector<Rating> out;
    out.reserve(rows.size());
    for (const auto& [r, line] : rows) out.push_back(r);
    return out;
}

void write_ratings(std::ostream& out, const RatingDataset& data, const ScoreSet& scores,
                   std::span<const Rating> ratings, char delimiter) {
    for (const Rating& r : ratings) {
        out << data.user_ids().id(r.user) << delimiter << data.item_ids().id(r.item) << delimiter
            << format_ticks(scores.ticks(r.score)) << '\n';
    }
}

SplitDataset split_train_test(const RatingDataset& data, double test_ratio, std::uint64_t seed) {
    if (!(test_ratio > 0.0 && test_ratio < 1.0)) throw std::invalid_argument("test ratio must be in (0, 1)");
    if (data.empty()) throw std::invalid_argument("cannot split an empty dataset");
    SplitMixRng rng(seed);
    std::vector<Rating> train;
    std::vector<Rating> test;
    for (const Rating& r : data.ratings()) {
        (rng.uniform() < test_ratio ? test : train).push_back(r);
    }
    SplitDataset split{RatingDataset(data.num_users(), data.num_items(), data.num_scores(), std::move(train),
                                     data.user_ids(), data.item_ids()),
                       std::move(test), seed, test_ratio};
    return split;
}

std::vector<BinaryScoreView> score_views(const RatingDataset& data) {
    std::vector<BinaryScoreView> views;
    views.reserve(data.num_scores());
    for (std::size_t s = 0; s < data.num_scores(); ++s) views.emplace_back(data, s);
    return views;
}

}  // namespace bemf
