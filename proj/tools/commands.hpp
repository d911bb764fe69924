#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bemf/dataset.hpp"
#include "bemf/model_io.hpp"
#include "config.hpp"

namespace bemf::cli {

struct RunOptions {
    unsigned workers = 0;  // 0 = default_workers()
    bool confirmed = false;
    std::ostream* log = nullptr;  // progress messages; nullptr = silent
};

struct LoadedData {
    ScoreSet scores;
    SplitDataset split;
};

/// Parses the configured dataset and produces the train/test split.
LoadedData load_data(const ExperimentConfig& config);

/// Trains the configured model on the train split (no files written).
StoredModel train_model(const ExperimentConfig& config, const LoadedData& data, const RunOptions& options,
                        std::string* training_log = nullptr);

/// Writes <output_dir>/model.bin and <output_dir>/training_log.csv.
void cmd_train(const ExperimentConfig& config, const RunOptions& options);

struct GridCell {
    std::size_t index = 0;
    std::size_t factors = 0;
    double learning_rate = 0.0;
    double regularization = 0.0;
    std::size_t iterations = 0;
    double mae = 0.0;
    double coverage = 0.0;
};

std::vector<GridCell> enumerate_grid(const ExperimentConfig& config);

/// Trains and scores every cell; result sorted by MAE ascending, ties by cell index.
std::vector<GridCell> run_grid(const ExperimentConfig& config, const LoadedData& data, const RunOptions& options);

/// Reports the cell count; runs only when options.confirmed. Writes
/// <output_dir>/grid_search.csv.
void cmd_grid_search(const ExperimentConfig& config, const RunOptions& options);

/// Files produced by an evaluation, keyed by file name.
struct EvaluationFiles {
    std::vector<std::pair<std::string, std::string>> files;
};

EvaluationFiles evaluate_model(const ExperimentConfig& config, const StoredModel& model, const LoadedData& data,
                               const RunOptions& options);

/// Writes summary.csv, confusion.csv and, when available, mae_coverage.csv,
/// precision_recall.csv and histogram.csv under output_dir. Nothing is written
/// if validation fails.
void cmd_evaluate(const ExperimentConfig& config, const std::string& model_path, const RunOptions& options);

/// Writes train.tsv and test.tsv (config delimiter) under output_dir.
void cmd_split(const ExperimentConfig& config, const RunOptions& options);

/// Dataset statistics (and optionally model header) as text.
void cmd_info(const ExperimentConfig& config, const std::string& model_path, std::ostream& out);

}  // namespace bemf::cli
