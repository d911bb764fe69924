#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bemf {

/// Ordered discrete rating scale s_1 < ... < s_D.
///
/// Values are held as integer multiples of 1e-6 ("ticks") so that half-star
/// and decimal scales compare exactly; ratings in files are matched against
/// the scale textually, never through floating-point equality.
class ScoreSet {
public:
    static constexpr std::int64_t kTicksPerUnit = 1'000'000;

    ScoreSet() = default;
    explicit ScoreSet(std::vector<std::int64_t> ticks);

    static ScoreSet from_values(const std::vector<double>& values);
    static ScoreSet from_range(std::string_view min, std::string_view max, std::string_view step);
    /// Accepts "min,max,step" or an explicit list "a;b;c" / "a b c".
    static ScoreSet parse(std::string_view spec);

    std::size_t size() const { return ticks_.size(); }
    double value(std::size_t index) const;
    std::int64_t ticks(std::size_t index) const { return ticks_.at(index); }
    const std::vector<std::int64_t>& all_ticks() const { return ticks_; }
    double min() const { return value(0); }
    double max() const { return value(size() - 1); }

    std::optional<std::size_t> index_of_ticks(std::int64_t ticks) const;
    /// Exact textual lookup, e.g. "3.5" or "4".
    std::optional<std::size_t> index_of(std::string_view text) const;
    /// Index of the scale value closest to x (ties go to the lower score).
    std::size_t nearest_index(double x) const;
    /// Smallest index whose value is >= threshold, or size() if none.
    std::size_t first_index_at_least(double threshold) const;

    std::string to_string() const;

    friend bool operator==(const ScoreSet&, const ScoreSet&) = default;

private:
    std::vector<std::int64_t> ticks_;
};

/// Parses a plain decimal literal ("4", "-0.5", "3.50") into ticks of 1e-6.
/// Returns nullopt for anything else, including values needing finer precision.
std::optional<std::int64_t> parse_decimal_ticks(std::string_view text);

std::string format_ticks(std::int64_t ticks);

}  // namespace bemf
