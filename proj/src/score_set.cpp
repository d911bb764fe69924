#include "bemf/score_set.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace bemf {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::int64_t require_ticks(std::string_view text) {
    auto t = parse_decimal_ticks(trim(text));
    if (!t) throw std::invalid_argument("score set: not a decimal value: '" + std::string(text) + "'");
    return *t;
}

}  // namespace

std::optional<std::int64_t> parse_decimal_ticks(std::string_view text) {
    if (text.empty()) return std::nullopt;
    bool negative = false;
    if (text.front() == '+' || text.front() == '-') {
        negative = text.front() == '-';
        text.remove_prefix(1);
    }
    auto dot = text.find('.');
    std::string_view whole = text.substr(0, dot);
    std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
    if (whole.empty() && frac.empty()) return std::nullopt;
    if (whole.size() > 12) return std::nullopt;

    std::int64_t value = 0;
    for (char c : whole) {
        if (c < '0' || c > '9') return std::nullopt;
        value = value * 10 + (c - '0');
    }
    std::int64_t scale = ScoreSet::kTicksPerUnit;
    std::int64_t fraction = 0;
    for (char c : frac) {
        if (c < '0' || c > '9') return std::nullopt;
        if (scale == 1) {
            if (c != '0') return std::nullopt;  // finer than a tick
            continue;
        }
        scale /= 10;
        fraction += (c - '0') * scale;
    }
    std::int64_t ticks = value * ScoreSet::kTicksPerUnit + fraction;
    return negative ? -ticks : ticks;
}

std::string format_ticks(std::int64_t ticks) {
    std::string sign = ticks < 0 ? "-" : "";
    std::int64_t a = std::llabs(ticks);
    std::string out = sign + std::to_string(a / ScoreSet::kTicksPerUnit);
    std::int64_t frac = a % ScoreSet::kTicksPerUnit;
    if (frac != 0) {
        std::string digits = std::to_string(frac);
        digits.insert(0, 6 - digits.size(), '0');
        while (digits.back() == '0') digits.pop_back();
        out += "." + digits;
    }
    return out;
}

ScoreSet::ScoreSet(std::vector<std::int64_t> ticks) : ticks_(std::move(ticks)) {
    if (ticks_.size() < 2) throw std::invalid_argument("score set needs at least two scores");
    for (std::size_t i = 1; i < ticks_.size(); ++i) {
        if (ticks_[i] <= ticks_[i - 1]) throw std::invalid_argument("score set must be strictly increasing");
    }
}

ScoreSet ScoreSet::from_values(const std::vector<double>& values) {
    std::vector<std::int64_t> ticks;
    ticks.reserve(values.size());
    for (double v : values) {
        double scaled = v * static_cast<double>(kTicksPerUnit);
        double rounded = std::round(scaled);
        if (!std::isfinite(v) || std::abs(scaled - rounded) > 1e-6)
            throw std::invalid_argument("score set: value not representable in 1e-6 ticks");
        ticks.push_back(static_cast<std::int64_t>(rounded));
    }
    return ScoreSet(std::move(ticks));
}

ScoreSet ScoreSet::from_range(std::string_view min, std::string_view max, std::string_view step) {
    std::int64_t lo = require_ticks(min);
    std::int64_t hi = require_ticks(max);
    std::int64_t st = require_ticks(step);
    if (st <= 0) throw std::invalid_argument("score set: step must be positive");
    if (hi <= lo) throw std::invalid_argument("score set: max must exceed min");
    if ((hi - lo) % st != 0) throw std::invalid_argument("score set: (max - min) is not a multiple of step");
    std::vector<std::int64_t> ticks;
    for (std::int64_t t = lo; t <= hi; t += st) ticks.push_back(t);
    return ScoreSet(std::move(ticks));
}

ScoreSet ScoreSet::parse(std::string_view spec) {
    spec = trim(spec);
    std::vector<std::string_view> parts;
    char sep = spec.find(';') != std::string_view::npos ? ';' : (spec.find(',') != std::string_view::npos ? ',' : ' ');
    std::size_t start = 0;
    while (start <= spec.size()) {
        auto pos = spec.find(sep, start);
        auto part = trim(spec.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (!part.empty()) parts.push_back(part);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    if (sep == ',' && parts.size() == 3) return from_range(parts[0], parts[1], parts[2]);
    std::vector<std::int64_t> ticks;
    for (auto p : parts) ticks.push_back(require_ticks(p));
    return ScoreSet(std::move(ticks));
}

double ScoreSet::value(std::size_t index) const {
    return static_cast<double>(ticks_.at(index)) / static_cast<double>(kTicksPerUnit);
}

std::optional<std::size_t> ScoreSet::index_of_ticks(std::int64_t t) const {
    auto it = std::lower_bound(ticks_.begin(), ticks_.end(), t);
    if (it == ticks_.end() || *it != t) return std::nullopt;
    return static_cast<std::size_t>(it - ticks_.begin());
}

std::optional<std::size_t> ScoreSet::index_of(std::string_view text) const {
    auto t = parse_decimal_ticks(trim(text));
    if (!t) return std::nullopt;
    return index_of_ticks(*t);
}

std::size_t ScoreSet::nearest_index(double x) const {
    std::size_t best = 0;
    double best_dist = std::abs(x - value(0));
    for (std::size_t a = 1; a < size(); ++a) {
        double d = std::abs(x - value(a));
        if (d < best_dist) {
            best = a;
            best_dist = d;
        }
    }
    return best;
}

std::size_t ScoreSet::first_index_at_least(double threshold) const {
    for (std::size_t a = 0; a < size(); ++a) {
        if (value(a) >= threshold) return a;
    }
    return size();
}

std::string ScoreSet::to_string() const {
    std::string out;
    for (std::size_t a = 0; a < ticks_.size(); ++a) {
        if (a) out += ';';
        out += format_ticks(ticks_[a]);
    }
    return out;
}

}  // namespace bemf
