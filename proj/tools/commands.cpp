#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bemf/eval.hpp"
#include "bemf/parallel.hpp"

namespace bemf::cli {

namespace {

namespace fs = std::filesystem;

void log_line(const RunOptions& options, const std::string& msg) {
    if (options.log) *options.log << msg << '\n';
}

bool worth_logging(std::size_t it, std::size_t total) { return it == 0 || (it + 1) % 10 == 0 || it + 1 == total; }

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    return in;
}

/// One evaluated test rating.
struct EvalRow {
    double actual = 0.0;
    std::size_t actual_index = 0;
    std::optional<double> predicted;
    std::optional<std::size_t> predicted_index;
    std::optional<double> reliability;
};

}  // namespace

LoadedData load_data(const ExperimentConfig& config) {
    config.validate();
    LoadedData data{config.score_set(), {}};
    ParseOptions opts{config.dataset.delimiter, config.dataset.header};
    if (!config.dataset.path.empty()) {
        auto in = open_input(config.dataset.path);
        RatingDataset full = parse_ratings(in, data.scores, opts);
        data.split = split_train_test(full, config.split.test_ratio, config.split.seed);
    } else {
        auto train_in = open_input(config.dataset.train_path);
        RatingDataset train = parse_ratings(train_in, data.scores, opts);
        auto test_in = open_input(config.dataset.test_path);
        std::vector<Rating> test;
        try {
            test = parse_ratings_against(test_in, data.scores, train, opts);
        } catch (const ParseError& e) {
            throw ParseError(e.line(), config.dataset.test_path + ": " + e.what());
        }
        data.split = SplitDataset{std::move(train), std::move(test), 0, 0.0};
    }
    if (data.split.train.empty()) throw ConfigError("training split is empty");
    return data;
}

StoredModel train_model(const ExperimentConfig& config, const LoadedData& data, const RunOptions& options,
                        std::string* training_log) {
    const RatingDataset& train = data.split.train;
    std::ostringstream log;
    switch (config.model) {
        case ModelKind::bemf: {
            log << "iteration,score,cost\n";
            auto views = score_views(train);
            FitOptions fo;
            fo.workers = options.workers;
            fo.on_iteration = [&](std::size_t it, const BeMFModel& m) {
                double total = 0.0;
                for (const auto& view : views) {
                    double c = cost(m, view);
                    total += c;
                    log << it + 1 << ',' << format_ticks(data.scores.ticks(view.score())) << ',' << num(c) << '\n';
                }
                if (!std::isfinite(total)) throw NumericError(it, std::nullopt, "cost diverged");
                if (worth_logging(it, m.hyperparams().iterations))
                    log_line(options, "iteration " + std::to_string(it + 1) + ": total cost " + num(total));
            };
            BeMFModel model = fit(train, data.scores, config.bemf_hyperparams(), fo);
            if (training_log) *training_log = log.str();
            return model;
        }
        case ModelKind::pmf:
        case ModelKind::biasedmf: {
            log << "iteration,train_rmse\n";
            auto real = to_real_ratings(train, data.scores);
            auto on_iteration = [&](std::size_t it, const MfRegressor& r) {
                double se = 0.0;
                for (const auto& x : real) {
                    double p = std::clamp(r.raw_predict(x.user, x.item), data.scores.min(), data.scores.max());
                    se += (x.value - p) * (x.value - p);
                }
                double rmse = std::sqrt(se / static_cast<double>(real.size()));
                log << it + 1 << ',' << num(rmse) << '\n';
                if (worth_logging(it, config.hyperparams.iterations))
                    log_line(options, "iteration " + std::to_string(it + 1) + ": train rmse " + num(rmse));
            };
            MfBaselineModel model = fit_mf_baseline(train, data.scores, config.mf_config(), on_iteration);
            if (training_log) *training_log = log.str();
            return model;
        }
        case ModelKind::knn_user:
        case ModelKind::knn_item:
            if (training_log) training_log->clear();
            return KnnModelSpec{data.scores, config.knn_config(), train.num_users(), train.num_items()};
    }
    throw ConfigError("unsupported model");
}

void cmd_train(const ExperimentConfig& config, const RunOptions& options) {
    LoadedData data = load_data(config);
    log_line(options, "training " + to_string(config.model) + " on " + std::to_string(data.split.train.size()) +
                          " ratings (" + std::to_string(data.split.train.num_users()) + " users, " +
                          std::to_string(data.split.train.num_items()) + " items)");
    std::string training_log;
    StoredModel model = train_model(config, data, options, &training_log);
    fs::create_directories(config.output_dir);
    save_model_file((fs::path(config.output_dir) / "model.bin").string(), model);
    if (!training_log.empty()) write_file(fs::path(config.output_dir) / "training_log.csv", training_log);
    log_line(options, "wrote " + (fs::path(config.output_dir) / "model.bin").string());
}

std::vector<GridCell> enumerate_grid(const ExperimentConfig& config) {
    const auto& g = config.grid;
    const auto& h = config.hyperparams;
    auto or_default = [](const auto& values, auto fallback) {
        using V = std::decay_t<decltype(values)>;
        return values.empty() ? V{fallback} : values;
    };
    auto ks = or_default(g.factors, h.factors);
    auto gammas = or_default(g.learning_rate, h.learning_rate);
    auto etas = or_default(g.regularization, h.regularization);
    auto ms = or_default(g.iterations, h.iterations);
    std::vector<GridCell> cells;
    cells.reserve(ks.size() * gammas.size() * etas.size() * ms.size());
    for (auto k : ks)
        for (auto gamma : gammas)
            for (auto eta : etas)
                for (auto m : ms) cells.push_back(GridCell{cells.size(), k, gamma, eta, m, 0.0, 0.0});
    return cells;
}

std::vector<GridCell> run_grid(const ExperimentConfig& config, const LoadedData& data, const RunOptions& options) {
    if (config.model != ModelKind::bemf && config.model != ModelKind::pmf && config.model != ModelKind::biasedmf)
        throw ConfigError("config: model: grid search supports bemf, pmf and biasedmf");
    std::vector<GridCell> cells = enumerate_grid(config);
    if (cells.size() > config.max_grid_cells)
        throw ConfigError("config: max_grid_cells: grid has " + std::to_string(cells.size()) +
                          " cells, limit is " + std::to_string(config.max_grid_cells));
    auto test = to_test_ratings(data.split.test, data.scores);
    if (test.empty()) throw ConfigError("test split is empty");

    RunOptions quiet = options;
    quiet.log = nullptr;
    quiet.workers = 1;
    parallel_for(cells.size(), options.workers, [&](std::size_t c) {
        GridCell& cell = cells[c];
        ExperimentConfig cfg = config;
        cfg.hyperparams.factors = cell.factors;
        cfg.hyperparams.learning_rate = cell.learning_rate;
        cfg.hyperparams.regularization = cell.regularization;
        cfg.hyperparams.iterations = cell.iterations;
        StoredModel model = train_model(cfg, data, quiet);
        std::vector<PredictedPair> pairs;
        pairs.reserve(test.size());
        for (const auto& t : test) {
            if (const auto* b = std::get_if<BeMFModel>(&model)) {
                pairs.push_back({t.value, data.scores.value(*b->predict_distribution(t.user, t.item).predicted)});
            } else {
                pairs.push_back({t.value, std::get<MfBaselineModel>(model).predict(t.user, t.item)});
            }
        }
        cell.mae = mae(pairs);
        cell.coverage = coverage(pairs);
    });
    std::stable_sort(cells.begin(), cells.end(), [](const GridCell& a, const GridCell& b) { return a.mae < b.mae; });
    return cells;
}

void cmd_grid_search(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    std::size_t count = config.grid.cells();
    log_line(options, "grid search: " + std::to_string(count) + " combinations");
    if (count > config.max_grid_cells)
        throw ConfigError("config: max_grid_cells: grid has " + std::to_string(count) + " cells, limit is " +
                          std::to_string(config.max_grid_cells));
    if (!options.confirmed) {
        log_line(options, "not running; pass --yes to train all combinations");
        return;
    }
    LoadedData data = load_data(config);
    auto cells = run_grid(config, data, options);
    std::ostringstream csv;
    csv << "rank,cell,factors,learning_rate,regularization,iterations,mae,coverage\n";
    for (std::size_t r = 0; r < cells.size(); ++r) {
        const auto& c = cells[r];
        csv << r + 1 << ',' << c.index << ',' << c.factors << ',' << num(c.learning_rate) << ','
            << num(c.regularization) << ',' << c.iterations << ',' << num(c.mae) << ',' << num(c.coverage) << '\n';
    }
    fs::create_directories(config.output_dir);
    write_file(fs::path(config.output_dir) / "grid_search.csv", csv.str());
    if (!cells.empty()) {
        const auto& b = cells.front();
        log_line(options, "best: k=" + std::to_string(b.factors) + " learning_rate=" + num(b.learning_rate) +
                              " regularization=" + num(b.regularization) + " iterations=" +
                              std::to_string(b.iterations) + " mae=" + num(b.mae));
    }
}

EvaluationFiles evaluate_model(const ExperimentConfig& config, const StoredModel& model, const LoadedData& data,
                               const RunOptions& options) {
    const ScoreSet& scores = data.scores;
    const RatingDataset& train = data.split.train;
    if (!(model_scores(model) == scores))
        throw ConfigError("model score set (" + model_scores(model).to_string() + ") does not match config scores (" +
                          scores.to_string() + ")");
    auto dims = std::visit(
        [](const auto& m) -> std::pair<std::size_t, std::size_t> {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, BeMFModel>) return {m.num_users(), m.num_items()};
            else if constexpr (std::is_same_v<T, MfBaselineModel>) return {m.regressor.num_users(), m.regressor.num_items()};
            else return {m.num_users, m.num_items};
        },
        model);
    if (dims.first != train.num_users() || dims.second != train.num_items())
        throw ConfigError("model dimensions (" + std::to_string(dims.first) + " users, " + std::to_string(dims.second) +
                          " items) do not match the dataset (" + std::to_string(train.num_users()) + ", " +
                          std::to_string(train.num_items()) + ")");
    auto test = to_test_ratings(data.split.test, scores);
    if (test.empty()) throw ConfigError("test split is empty");

    const auto* bemf_model = std::get_if<BeMFModel>(&model);
    std::optional<KnnPredictor> knn;
    if (const auto* spec = std::get_if<KnnModelSpec>(&model)) knn.emplace(train, scores, spec->config, options.workers);

    BasePredictor base = [&](std::size_t u, std::size_t i) -> std::optional<double> {
        if (bemf_model) return scores.value(*bemf_model->predict_distribution(u, i).predicted);
        if (knn) return knn->predict(u, i);
        return std::get<MfBaselineModel>(model).predict(u, i);
    };

    std::vector<EvalRow> rows;
    rows.reserve(test.size());
    for (std::size_t x = 0; x < test.size(); ++x) {
        EvalRow row;
        row.actual = test[x].value;
        row.actual_index = data.split.test[x].score;
        if (bemf_model) {
            auto phi = bemf_model->predict_distribution(test[x].user, test[x].item);
            row.predicted_index = phi.predicted;
            row.predicted = scores.value(*phi.predicted);
            row.reliability = phi.reliability;
        } else {
            row.predicted = base(test[x].user, test[x].item);
            if (row.predicted) row.predicted_index = scores.nearest_index(*row.predicted);
        }
        rows.push_back(row);
    }

    std::optional<double> rpi_native;
    std::optional<double> rpi_enforced;
    auto rpi_of = [&](const std::vector<std::optional<double>>& rel) {
        std::vector<ReliabilityError> pairs;
        for (std::size_t x = 0; x < rows.size(); ++x)
            if (rows[x].predicted && rel[x]) pairs.push_back({*rel[x], std::abs(rows[x].actual - *rows[x].predicted)});
        return rpi(pairs);
    };
    if (bemf_model) {
        std::vector<std::optional<double>> rel;
        for (const auto& r : rows) rel.push_back(r.reliability);
        rpi_native = rpi_of(rel);
    }
    if (config.reliability_addon.enabled) {
        log_line(options, "fitting error-matrix reliability model");
        ReliabilityAddOn addon = enforce_reliability(base, train, scores, config.addon_config());
        std::vector<std::optional<double>> rel;
        for (std::size_t x = 0; x < rows.size(); ++x)
            rel.push_back(rows[x].predicted ? std::optional(addon.reliability(test[x].user, test[x].item)) : std::nullopt);
        rpi_enforced = rpi_of(rel);
        if (!bemf_model)
            for (std::size_t x = 0; x < rows.size(); ++x) rows[x].reliability = rel[x];
    }

    std::vector<PredictedPair> pairs;
    std::vector<LabelPair> labels;
    std::vector<ReliablePrediction> reliable;
    std::vector<double> reliabilities;
    std::vector<std::optional<double>> predictions;
    bool has_reliability = bemf_model || config.reliability_addon.enabled;
    for (const auto& r : rows) {
        pairs.push_back({r.actual, r.predicted});
        predictions.push_back(r.predicted);
        if (r.predicted_index) labels.push_back({r.actual_index, *r.predicted_index});
        if (has_reliability) {
            reliable.push_back({r.actual, r.predicted, r.reliability.value_or(0.0)});
            if (r.reliability) reliabilities.push_back(*r.reliability);
        }
    }

    const int n = config.evaluation.n;
    const double theta = config.evaluation.like_threshold;
    const auto& thresholds = config.evaluation.reliability_thresholds;
    std::optional<double> overall_mae;
    if (std::any_of(pairs.begin(), pairs.end(), [](const PredictedPair& p) { return p.predicted.has_value(); }))
        overall_mae = mae(pairs);

    EvaluationFiles out;
    PrecisionRecall pr;
    std::ostringstream prcsv;
    if (bemf_model) {
        auto candidates = candidates_by_liking(*bemf_model, test, theta);
        pr = precision_recall_at_n(build_recommendations(candidates, 0.0, n), test, train.num_users(), n, theta);
        auto sweep = precision_recall_sweep(candidates, test, train.num_users(), thresholds, n, theta);
        write_precision_recall_csv(prcsv, sweep);
    } else {
        auto candidates = candidates_by_prediction(train.num_users(), test, predictions);
        pr = precision_recall_at_n(build_recommendations(candidates, theta, n), test, train.num_users(), n, theta);
        PrecisionRecallPoint point{theta, pr};
        write_precision_recall_csv(prcsv, std::span(&point, 1));
    }

    std::ostringstream summary;
    summary << "metric,value\n"
            << "model," << model_kind(model) << '\n'
            << "test_ratings," << test.size() << '\n'
            << "mae," << num(overall_mae) << '\n'
            << "coverage," << num(coverage(pairs)) << '\n'
            << "precision_at_n," << num(pr.precision) << '\n'
            << "recall_at_n," << num(pr.recall) << '\n'
            << "n," << n << '\n'
            << "like_threshold," << num(theta) << '\n'
            << "rpi_native," << num(rpi_native) << '\n'
            << "rpi_enforced," << num(rpi_enforced) << '\n'
            << "rpi_definition,negated_pearson(reliability;abs_error)\n";
    out.files.emplace_back("summary.csv", summary.str());

    std::ostringstream confusion;
    write_confusion_csv(confusion, confusion_matrix(labels, scores.size()), scores);
    out.files.emplace_back("confusion.csv", confusion.str());
    out.files.emplace_back("precision_recall.csv", prcsv.str());

    if (has_reliability) {
        std::ostringstream sweep;
        write_sweep_csv(sweep, threshold_sweep(reliable, thresholds));
        out.files.emplace_back("mae_coverage.csv", sweep.str());
        std::ostringstream hist;
        write_histogram_csv(hist, reliability_histogram(reliabilities));
        out.files.emplace_back("histogram.csv", hist.str());
    }
    return out;
}

void cmd_evaluate(const ExperimentConfig& config, const std::string& model_path, const RunOptions& options) {
    if (!fs::is_regular_file(model_path)) throw ConfigError("model file not found: " + model_path);
    StoredModel model = [&] {
        try {
            return load_model_file(model_path);
        } catch (const ModelFormatError& e) {
            throw ConfigError(model_path + ": " + e.what());
        }
    }();
    LoadedData data = load_data(config);
    EvaluationFiles files = evaluate_model(config, model, data, options);
    fs::create_directories(config.output_dir);
    for (const auto& [name, content] : files.files) write_file(fs::path(config.output_dir) / name, content);
    log_line(options, "wrote " + std::to_string(files.files.size()) + " report files to " + config.output_dir);
}

void cmd_split(const ExperimentConfig& config, const RunOptions& options) {
    LoadedData data = load_data(config);
    std::ostringstream train;
    std::ostringstream test;
    const RatingDataset& d = data.split.train;
    write_ratings(train, d, data.scores, d.ratings(), config.dataset.delimiter);
    write_ratings(test, d, data.scores, data.split.test, config.dataset.delimiter);
    fs::create_directories(config.output_dir);
    write_file(fs::path(config.output_dir) / "train.tsv", train.str());
    write_file(fs::path(config.output_dir) / "test.tsv", test.str());
    log_line(options, "split: " + std::to_string(d.size()) + " train, " + std::to_string(data.split.test.size()) +
                          " test ratings");
}

void cmd_info(const ExperimentConfig& config, const std::string& model_path, std::ostream& out) {
    LoadedData data = load_data(config);
    const RatingDataset& train = data.split.train;
    std::vector<std::size_t> per_score(data.scores.size(), 0);
    for (const Rating& r : train.ratings()) ++per_score[r.score];
    for (const Rating& r : data.split.test) ++per_score[r.score];
    std::size_t total = train.size() + data.split.test.size();
    out << "users: " << train.num_users() << '\n'
        << "items: " << train.num_items() << '\n'
        << "ratings: " << total << '\n'
        << "train ratings: " << train.size() << '\n'
        << "test ratings: " << data.split.test.size() << '\n'
        << "density: " << num(static_cast<double>(total) / (static_cast<double>(train.num_users()) *
                                                           static_cast<double>(train.num_items())))
        << '\n'
        << "scores: " << data.scores.to_string() << '\n';
    for (std::size_t s = 0; s < per_score.size(); ++s)
        out << "  " << format_ticks(data.scores.ticks(s)) << ": " << per_score[s] << '\n';
    if (!model_path.empty()) {
        StoredModel model = load_model_file(model_path);
        out << "model: " << model_kind(model) << '\n';
        if (const auto* b = std::get_if<BeMFModel>(&model)) {
            const auto& hp = b->hyperparams();
            out << "  factors: " << hp.factors << "\n  learning_rate: " << num(hp.learning_rate)
                << "\n  regularization: " << num(hp.regularization) << "\n  iterations: " << hp.iterations
                << "\n  seed: " << hp.seed << "\n  users: " << b->num_users() << "\n  items: " << b->num_items()
                << '\n';
        }
    }
}

}  // namespace bemf::cli
