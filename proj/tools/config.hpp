#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bemf/baselines.hpp"
#include "bemf/bemf.hpp"
#include "bemf/score_set.hpp"

namespace bemf::cli {

/// Invalid or inconsistent configuration; the message names the field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ModelKind { bemf, pmf, biasedmf, knn_user, knn_item };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct DatasetConfig {
    std::string path;        // single file, split by ratio
    std::string train_path;  // or an explicit train/test pair
    std::string test_path;
    char delimiter = '\t';
    bool header = false;

    friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct SplitConfig {
    double test_ratio = 0.2;
    std::uint64_t seed = 42;

    friend bool operator==(const SplitConfig&, const SplitConfig&) = default;
};

struct ModelParams {
    std::size_t factors = 2;
    double learning_rate = 0.006;
    double regularization = 0.16;
    std::size_t iterations = 100;
    std::uint64_t seed = 0;
    std::size_t neighbors = 50;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct AddonConfig {
    bool enabled = false;
    std::size_t factors = 8;
    double learning_rate = 0.01;
    double regularization = 0.045;
    std::size_t iterations = 100;
    std::uint64_t seed = 0;

    friend bool operator==(const AddonConfig&, const AddonConfig&) = default;
};

struct EvalConfig {
    int n = 10;
    double like_threshold = 4.0;
    std::vector<double> reliability_thresholds{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

    friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

/// Empty lists fall back to the single value in ModelParams.
struct GridConfig {
    std::vector<std::size_t> factors;
    std::vector<double> learning_rate;
    std::vector<double> regularization;
    std::vector<std::size_t> iterations;

    std::size_t cells() const;
    friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

/// k in {2,4,6,8}, gamma in {0.002..0.02 step 0.002}, eta in {0.01..0.2 step
/// 0.01}, m in {50, 75, 100}: 2400 cells.
GridConfig reference_grid();

struct ExperimentConfig {
    DatasetConfig dataset;
    std::string scores = "1,5,1";
    SplitConfig split;
    ModelKind model = ModelKind::bemf;
    ModelParams hyperparams;
    AddonConfig reliability_addon;
    EvalConfig evaluation;
    GridConfig grid;
    std::string output_dir = "out";
    std::size_t max_grid_cells = 10000;

    ScoreSet score_set() const;
    Hyperparams bemf_hyperparams() const;
    MfConfig mf_config() const;
    MfConfig addon_config() const;
    KnnConfig knn_config() const;

    /// Checks value ranges and that referenced files exist.
    void validate() const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Strict: unknown keys and wrongly typed values raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Reads a JSON config; relative paths inside it are resolved against the
/// config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace bemf::cli
