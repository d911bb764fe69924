#include "cli.hpp"

#include <CLI11.hpp>
#include <optional>
#include <ostream>

#include "bemf/bemf.hpp"
#include "bemf/dataset.hpp"
#include "bemf/model_io.hpp"
#include "commands.hpp"

namespace bemf::cli {

namespace {

struct Overrides {
    std::optional<std::string> output;
    std::optional<std::string> model;
    std::optional<std::size_t> factors;
    std::optional<double> learning_rate;
    std::optional<double> regularization;
    std::optional<std::size_t> iterations;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> split_seed;

    void apply(ExperimentConfig& c) const {
        if (output) c.output_dir = *output;
        if (model) c.model = parse_model_kind(*model);
        if (factors) c.hyperparams.factors = *factors;
        if (learning_rate) c.hyperparams.learning_rate = *learning_rate;
        if (regularization) c.hyperparams.regularization = *regularization;
        if (iterations) c.hyperparams.iterations = *iterations;
        if (seed) c.hyperparams.seed = *seed;
        if (split_seed) c.split.seed = *split_seed;
    }
};

void add_common(CLI::App* cmd, std::string& config_path, Overrides& ov, unsigned& workers) {
    cmd->add_option("-c,--config", config_path, "JSON experiment config")->required();
    cmd->add_option("-o,--output", ov.output, "output directory (overrides config)");
    cmd->add_option("-w,--workers", workers, "worker threads (0 = BEMF_WORKERS or hardware)");
    cmd->add_option("--model-type", ov.model, "bemf, pmf, biasedmf, knn-user or knn-item");
    cmd->add_option("--factors", ov.factors);
    cmd->add_option("--learning-rate", ov.learning_rate);
    cmd->add_option("--regularization", ov.regularization);
    cmd->add_option("--iterations", ov.iterations);
    cmd->add_option("--seed", ov.seed, "model initialization seed");
    cmd->add_option("--split-seed", ov.split_seed);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bernoulli matrix factorization recommender toolkit", "bemf"};
    app.require_subcommand(1);

    std::string config_path;
    std::string model_path;
    Overrides ov;
    unsigned workers = 0;
    bool confirmed = false;

    auto* train = app.add_subcommand("train", "train a model and write model.bin and training_log.csv");
    add_common(train, config_path, ov, workers);
    auto* grid = app.add_subcommand("grid-search", "train and rank every grid combination by MAE");
    add_common(grid, config_path, ov, workers);
    grid->add_flag("-y,--yes", confirmed, "run the grid after reporting its size");
    auto* evaluate = app.add_subcommand("evaluate", "write evaluation CSVs for a trained model");
    add_common(evaluate, config_path, ov, workers);
    evaluate->add_option("-m,--model", model_path, "model file written by train")->required();
    auto* split = app.add_subcommand("split", "write the train/test split");
    add_common(split, config_path, ov, workers);
    auto* info = app.add_subcommand("info", "print dataset and model statistics");
    add_common(info, config_path, ov, workers);
    info->add_option("-m,--model", model_path);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << '\n';
        return 1;
    }

    RunOptions options{workers, confirmed, &err};
    try {
        ExperimentConfig config = load_config(config_path);
        ov.apply(config);
        if (train->parsed()) cmd_train(config, options);
        else if (grid->parsed()) cmd_grid_search(config, options);
        else if (evaluate->parsed()) cmd_evaluate(config, model_path, options);
        else if (split->parsed()) cmd_split(config, options);
        else if (info->parsed()) cmd_info(config, model_path, out);
        return 0;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const ModelFormatError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace bemf::cli
