#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>

#include "bemf/baselines.hpp"
#include "bemf/bemf.hpp"

namespace bemf {

/// KNN has no fitted parameters; the stored spec is replayed against the
/// training data at evaluation time.
struct KnnModelSpec {
    ScoreSet scores;
    KnnConfig config;
    std::size_t num_users = 0;
    std::size_t num_items = 0;

    friend bool operator==(const KnnModelSpec&, const KnnModelSpec&) = default;
};

using StoredModel = std::variant<BeMFModel, MfBaselineModel, KnnModelSpec>;

class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary container: 8-byte magic, format version, variant tag, score set,
/// hyperparameters, dimensions, then every factor as a little-endian IEEE-754
/// double. Reading back yields a bit-identical model.
void save_model(std::ostream& out, const StoredModel& model);
StoredModel load_model(std::istream& in);

void save_model_file(const std::string& path, const StoredModel& model);
StoredModel load_model_file(const std::string& path);

const ScoreSet& model_scores(const StoredModel& model);
std::string model_kind(const StoredModel& model);

}  // namespace bemf
