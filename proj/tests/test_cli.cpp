#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <tuple>
#include <sstream>

#include "bemf/eval.hpp"
#include "bemf/parallel.hpp"
#include "bemf/synthetic.hpp"
#include "cli.hpp"
#include "commands.hpp"
#include "config.hpp"

using namespace bemf;
using namespace bemf::cli;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = fs::temp_directory_path() / ("bemf_cli_" + name + "_" + std::to_string(::getpid()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& p) const { return path_ / p; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

/// Writes a synthetic rating file and returns a config pointing at it.
ExperimentConfig synthetic_config(const TempDir& dir, std::size_t users = 60, std::size_t items = 40,
                                  double density = 0.3) {
    SyntheticSpec spec;
    spec.users = users;
    spec.items = items;
    spec.density = density;
    spec.seed = 5;
    auto data = generate_synthetic(spec);
    std::ofstream out(dir / "ratings.tsv");
    write_ratings(out, data.ratings, data.scores, data.ratings.ratings());
    out.close();
    ExperimentConfig c;
    c.dataset.path = (dir / "ratings.tsv").string();
    c.scores = "1,5,1";
    c.hyperparams.factors = 3;
    c.hyperparams.learning_rate = 0.02;
    c.hyperparams.regularization = 0.05;
    c.hyperparams.iterations = 20;
    c.hyperparams.seed = 11;
    c.output_dir = (dir / "out").string();
    return c;
}

std::map<std::string, std::string> read_summary(const fs::path& p) {
    std::map<std::string, std::string> out;
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        auto comma = line.find(',');
        out[line.substr(0, comma)] = line.substr(comma + 1);
    }
    return out;
}

std::string fmt10(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    if (err_text) *err_text = err.str();
    return code;
}

void save_config(const ExperimentConfig& c, const fs::path& p) {
    std::ofstream out(p);
    out << to_json(c).dump(2);
}

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("round trip through JSON") {
        ExperimentConfig c;
        c.dataset.train_path = "a.tsv";
        c.dataset.test_path = "b.tsv";
        c.dataset.delimiter = ',';
        c.dataset.header = true;
        c.scores = "0.5;1;1.5;2";
        c.split = {0.3, 99};
        c.model = ModelKind::knn_item;
        c.hyperparams = {8, 0.01, 0.045, 75, 3, 25};
        c.reliability_addon = {true, 4, 0.02, 0.1, 30, 6};
        c.evaluation.n = 5;
        c.evaluation.like_threshold = 3.5;
        c.evaluation.reliability_thresholds = {0.0, 0.5, 0.75};
        c.grid.factors = {2, 4};
        c.grid.learning_rate = {0.002, 0.004};
        c.output_dir = "results";
        c.max_grid_cells = 12;
        auto j = to_json(c);
        CHECK(config_from_json(j) == c);
        CHECK(config_from_json(nlohmann::json::parse(j.dump())) == c);
        CHECK(config_from_json(to_json(ExperimentConfig{})) == ExperimentConfig{});
    }

    TEST_CASE("strict parsing names the field") {
        auto bad_key = nlohmann::json::parse(R"({"hyperparams": {"factor": 2}})");
        CHECK_THROWS_WITH_AS(config_from_json(bad_key), doctest::Contains("unknown key 'factor'"), ConfigError);
        auto bad_type = nlohmann::json::parse(R"({"hyperparams": {"learning_rate": "fast"}})");
        CHECK_THROWS_WITH_AS(config_from_json(bad_type), doctest::Contains("hyperparams.learning_rate"), ConfigError);
        auto bad_model = nlohmann::json::parse(R"({"model": "svd"})");
        CHECK_THROWS_WITH_AS(config_from_json(bad_model), doctest::Contains("unknown model"), ConfigError);
        auto negative = nlohmann::json::parse(R"({"hyperparams": {"factors": -2}})");
        CHECK_THROWS_AS(config_from_json(negative), ConfigError);
        auto scores = nlohmann::json::parse(R"({"scores": [1, 2, 3.5]})");
        CHECK(config_from_json(scores).scores == "1;2;3.5");
    }

    TEST_CASE("validation messages") {
        TempDir dir("validate");
        auto c = synthetic_config(dir);
        CHECK_NOTHROW(c.validate());
        auto missing = c;
        missing.dataset.path = (dir / "nope.tsv").string();
        CHECK_THROWS_WITH_AS(missing.validate(), doctest::Contains("dataset.path"), ConfigError);
        auto lr = c;
        lr.hyperparams.learning_rate = 0.0;
        CHECK_THROWS_WITH_AS(lr.validate(), doctest::Contains("hyperparams.learning_rate"), ConfigError);
        auto ratio = c;
        ratio.split.test_ratio = 1.0;
        CHECK_THROWS_WITH_AS(ratio.validate(), doctest::Contains("split.test_ratio"), ConfigError);
        auto th = c;
        th.evaluation.reliability_thresholds = {0.5, 0.2};
        CHECK_THROWS_WITH_AS(th.validate(), doctest::Contains("reliability_thresholds"), ConfigError);
        auto both = c;
        both.dataset.train_path = c.dataset.path;
        CHECK_THROWS_WITH_AS(both.validate(), doctest::Contains("dataset"), ConfigError);
        auto sc = c;
        sc.scores = "5,1,1";
        CHECK_THROWS_WITH_AS(sc.validate(), doctest::Contains("scores"), ConfigError);
    }

    TEST_CASE("optimum and baseline settings are accepted") {
        TempDir dir("optimum");
        auto c = synthetic_config(dir);
        c.hyperparams = {2, 0.006, 0.16, 100, 0, 50};
        CHECK_NOTHROW(c.validate());
        c.model = ModelKind::pmf;
        c.hyperparams = {8, 0.01, 0.045, 100, 0, 50};
        CHECK_NOTHROW(c.validate());
    }

    TEST_CASE("relative paths resolve against the config file") {
        TempDir dir("relative");
        auto c = synthetic_config(dir);
        c.dataset.path = "ratings.tsv";
        c.output_dir = "out";
        save_config(c, dir / "cfg.json");
        auto loaded = load_config(dir / "cfg.json");
        CHECK(fs::equivalent(loaded.dataset.path, dir / "ratings.tsv"));
        CHECK(fs::path(loaded.output_dir) == (dir / "out").lexically_normal());
    }

    TEST_CASE("reference grid has 2400 cells") {
        auto g = reference_grid();
        CHECK(g.cells() == 2400);
        CHECK(g.factors == std::vector<std::size_t>{2, 4, 6, 8});
        CHECK(g.learning_rate.size() == 10);
        CHECK(g.learning_rate.back() == doctest::Approx(0.02));
        CHECK(g.regularization.size() == 20);
        CHECK(g.regularization.front() == doctest::Approx(0.01));
        CHECK(g.regularization.back() == doctest::Approx(0.2));
        CHECK(g.iterations == std::vector<std::size_t>{50, 75, 100});
        ExperimentConfig c = config_from_json(nlohmann::json::parse(R"({"grid": "reference"})"));
        CHECK(c.grid == g);
        auto cells = enumerate_grid(c);
        CHECK(cells.size() == 2400);
        for (std::size_t x = 0; x < cells.size(); ++x) CHECK(cells[x].index == x);
    }
}

TEST_SUITE("commands") {
    TEST_CASE("train with zero iterations writes the initialization") {
        TempDir dir("train0");
        auto c = synthetic_config(dir);
        c.hyperparams.iterations = 0;
        cmd_train(c, {});
        auto model = std::get<BeMFModel>(load_model_file((fs::path(c.output_dir) / "model.bin").string()));
        auto data = load_data(c);
        auto init = BeMFModel::initialized(data.scores, c.bemf_hyperparams(), data.split.train.num_users(),
                                           data.split.train.num_items());
        CHECK(model == init);
        CHECK(slurp(fs::path(c.output_dir) / "training_log.csv") == "iteration,score,cost\n");
    }

    TEST_CASE("training log has one row per iteration and score") {
        TempDir dir("trainlog");
        auto c = synthetic_config(dir);
        c.hyperparams.iterations = 4;
        cmd_train(c, {});
        auto log = slurp(fs::path(c.output_dir) / "training_log.csv");
        CHECK(line_count(log) == 1 + 4 * 5);
        CHECK(log.find("\n4,5,") != std::string::npos);
    }

    TEST_CASE("train is bit-identical across runs and worker counts") {
        TempDir dir("determinism");
        auto c = synthetic_config(dir);
        std::string reference;
        for (unsigned workers : {1u, 1u, 2u, 4u, 0u}) {
            cmd_train(c, {workers, false, nullptr});
            auto bytes = slurp(fs::path(c.output_dir) / "model.bin");
            if (reference.empty()) reference = bytes;
            CHECK(bytes == reference);
        }
        for (auto kind : {ModelKind::pmf, ModelKind::biasedmf, ModelKind::knn_user}) {
            c.model = kind;
            cmd_train(c, {1, false, nullptr});
            auto first = slurp(fs::path(c.output_dir) / "model.bin");
            cmd_train(c, {3, false, nullptr});
            CHECK(slurp(fs::path(c.output_dir) / "model.bin") == first);
        }
    }

    TEST_CASE("grid ranking matches independent per-cell runs") {
        TempDir dir("grid");
        auto c = synthetic_config(dir, 12, 10, 0.55);
        auto data = load_data(c);
        CHECK(data.split.train.size() + data.split.test.size() >= 50);
        c.grid.factors = {2, 3};
        c.grid.learning_rate = {0.01, 0.05};
        auto cells = run_grid(c, data, {3, true, nullptr});
        REQUIRE(cells.size() == 4);

        auto test = to_test_ratings(data.split.test, data.scores);
        std::vector<std::pair<double, std::size_t>> oracle;
        std::size_t index = 0;
        for (std::size_t k : {2u, 3u})
            for (double gamma : {0.01, 0.05}) {
                auto cfg = c;
                cfg.hyperparams.factors = k;
                cfg.hyperparams.learning_rate = gamma;
                auto model = std::get<BeMFModel>(train_model(cfg, data, {}));
                double sum = 0.0;
                for (const auto& t : test) {
                    auto phi = model.predict_distribution(t.user, t.item);
                    sum += std::abs(t.value - data.scores.value(*phi.predicted));
                }
                oracle.push_back({sum / static_cast<double>(test.size()), index++});
            }
        std::stable_sort(oracle.begin(), oracle.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t r = 0; r < 4; ++r) {
            CHECK(cells[r].index == oracle[r].second);
            CHECK(std::abs(cells[r].mae - oracle[r].first) < 1e-12);
            CHECK(cells[r].coverage == 1.0);
        }
        CHECK(run_grid(c, data, {1, true, nullptr})[0].mae == cells[0].mae);
    }

    TEST_CASE("grid search needs confirmation and respects the cell limit") {
        TempDir dir("gridconfirm");
        auto c = synthetic_config(dir, 12, 10, 0.45);
        c.grid.factors = {2, 3};
        std::ostringstream log;
        cmd_grid_search(c, {1, false, &log});
        CHECK(log.str().find("2 combinations") != std::string::npos);
        CHECK_FALSE(fs::exists(fs::path(c.output_dir) / "grid_search.csv"));
        cmd_grid_search(c, {1, true, nullptr});
        auto csv = slurp(fs::path(c.output_dir) / "grid_search.csv");
        CHECK(csv.rfind("rank,cell,factors,learning_rate,regularization,iterations,mae,coverage\n", 0) == 0);
        CHECK(line_count(csv) == 3);

        c.grid = reference_grid();
        std::ostringstream big;
        cmd_grid_search(c, {1, false, &big});
        CHECK(big.str().find("2400 combinations") != std::string::npos);
        c.max_grid_cells = 100;
        CHECK_THROWS_WITH_AS(cmd_grid_search(c, {1, true, nullptr}), doctest::Contains("max_grid_cells"), ConfigError);
        c.max_grid_cells = 10000;
        c.grid = GridConfig{};
        c.model = ModelKind::knn_user;
        CHECK_THROWS_AS(cmd_grid_search(c, {1, true, nullptr}), ConfigError);
    }

    TEST_CASE("one-point grid equals train then evaluate") {
        TempDir dir("onepoint");
        auto c = synthetic_config(dir);
        c.grid.factors = {c.hyperparams.factors};
        cmd_grid_search(c, {2, true, nullptr});
        cmd_train(c, {});
        cmd_evaluate(c, (fs::path(c.output_dir) / "model.bin").string(), {});
        auto summary = read_summary(fs::path(c.output_dir) / "summary.csv");
        auto grid_csv = slurp(fs::path(c.output_dir) / "grid_search.csv");
        auto row = grid_csv.substr(grid_csv.find('\n') + 1);
        CHECK(row.find("," + summary["mae"] + "," + summary["coverage"] + "\n") != std::string::npos);

        for (auto kind : {ModelKind::pmf, ModelKind::biasedmf}) {
            c.model = kind;
            cmd_grid_search(c, {2, true, nullptr});
            cmd_train(c, {});
            cmd_evaluate(c, (fs::path(c.output_dir) / "model.bin").string(), {});
            auto s = read_summary(fs::path(c.output_dir) / "summary.csv");
            auto g = slurp(fs::path(c.output_dir) / "grid_search.csv");
            CHECK(g.find("," + s["mae"] + ",1\n") != std::string::npos);
        }
    }

    TEST_CASE("BeMF evaluation files") {
        TempDir dir("evalbemf");
        auto c = synthetic_config(dir);
        c.reliability_addon.enabled = true;
        cmd_train(c, {});
        auto model_path = (fs::path(c.output_dir) / "model.bin").string();
        cmd_evaluate(c, model_path, {});
        fs::path out(c.output_dir);
        auto curve = slurp(out / "mae_coverage.csv");
        CHECK(curve.rfind("threshold,mae,coverage\n", 0) == 0);
        CHECK(line_count(curve) == 11);
        auto pr = slurp(out / "precision_recall.csv");
        CHECK(pr.rfind("threshold,precision,recall\n", 0) == 0);
        CHECK(line_count(pr) == 11);
        CHECK(slurp(out / "histogram.csv").rfind("bin_start,bin_end,count\n", 0) == 0);
        CHECK(line_count(slurp(out / "histogram.csv")) == 21);
        CHECK(slurp(out / "confusion.csv").rfind("actual,pred_1,pred_2,pred_3,pred_4,pred_5\n", 0) == 0);
        auto summary = read_summary(out / "summary.csv");
        CHECK(summary["model"] == "bemf");
        CHECK(summary["coverage"] == "1");
        CHECK(summary["rpi_native"] != "NA");
        CHECK(summary["rpi_enforced"] != "NA");

        // Summary MAE equals a direct recomputation from the stored model.
        auto data = load_data(c);
        auto model = std::get<BeMFModel>(load_model_file(model_path));
        std::vector<PredictedPair> pairs;
        for (const auto& t : to_test_ratings(data.split.test, data.scores))
            pairs.push_back({t.value, data.scores.value(*model.predict_distribution(t.user, t.item).predicted)});
        CHECK(summary["mae"] == fmt10(mae(pairs)));

        std::map<std::string, std::string> first;
        for (const auto& e : fs::directory_iterator(out)) first[e.path().filename().string()] = slurp(e.path());
        cmd_evaluate(c, model_path, {4, false, nullptr});
        for (const auto& [name, bytes] : first) CHECK(slurp(out / name) == bytes);
    }

    TEST_CASE("KNN evaluation with a like threshold of 4") {
        TempDir dir("evalknn");
        auto c = synthetic_config(dir);
        c.model = ModelKind::knn_user;
        c.evaluation.like_threshold = 4;
        cmd_train(c, {});
        cmd_evaluate(c, (fs::path(c.output_dir) / "model.bin").string(), {});
        auto pr = slurp(fs::path(c.output_dir) / "precision_recall.csv");
        CHECK(pr.rfind("threshold,precision,recall\n4,", 0) == 0);
        auto summary = read_summary(fs::path(c.output_dir) / "summary.csv");
        CHECK(summary["model"] == "knn-user");
        CHECK(summary["rpi_native"] == "NA");
        CHECK_FALSE(fs::exists(fs::path(c.output_dir) / "mae_coverage.csv"));
    }

    TEST_CASE("incompatible model leaves no output") {
        TempDir dir("mismatch");
        auto c = synthetic_config(dir);
        cmd_train(c, {});
        auto model_path = (fs::path(c.output_dir) / "model.bin").string();
        auto other = c;
        other.scores = "1,6,1";
        other.output_dir = (dir / "report").string();
        CHECK_THROWS_WITH_AS(cmd_evaluate(other, model_path, {}), doctest::Contains("score set"), ConfigError);
        CHECK_FALSE(fs::exists(other.output_dir));
        CHECK_THROWS_AS(cmd_evaluate(c, (dir / "missing.bin").string(), {}), ConfigError);

        auto smaller = synthetic_config(dir, 30, 20);
        smaller.output_dir = (dir / "report2").string();
        CHECK_THROWS_WITH_AS(cmd_evaluate(smaller, model_path, {}), doctest::Contains("dimensions"), ConfigError);
        CHECK_FALSE(fs::exists(smaller.output_dir));
    }

    TEST_CASE("split files reload as a pre-split pair") {
        TempDir dir("split");
        auto c = synthetic_config(dir);
        cmd_split(c, {});
        auto original = load_data(c);
        auto pair = c;
        pair.dataset.path.clear();
        pair.dataset.train_path = (fs::path(c.output_dir) / "train.tsv").string();
        pair.dataset.test_path = (fs::path(c.output_dir) / "test.tsv").string();
        auto reloaded = load_data(pair);
        CHECK(reloaded.split.train.size() == original.split.train.size());
        CHECK(reloaded.split.test.size() == original.split.test.size());
        auto labelled = [](const LoadedData& d) {
            std::multiset<std::tuple<std::string, std::string, double>> out;
            for (const auto& r : d.split.test)
                out.insert({d.split.train.user_ids().id(r.user), d.split.train.item_ids().id(r.item),
                            d.scores.value(r.score)});
            return out;
        };
        CHECK(labelled(original) == labelled(reloaded));
    }

    TEST_CASE("info reports counts") {
        TempDir dir("info");
        auto c = synthetic_config(dir);
        cmd_train(c, {});
        std::ostringstream out;
        cmd_info(c, (fs::path(c.output_dir) / "model.bin").string(), out);
        CHECK(out.str().find("users: 60") != std::string::npos);
        CHECK(out.str().find("model: bemf") != std::string::npos);
    }
}

TEST_SUITE("cli") {
    TEST_CASE("exit codes") {
        TempDir dir("exit");
        auto c = synthetic_config(dir);
        save_config(c, dir / "cfg.json");
        auto input_before = slurp(dir / "ratings.tsv");
        auto cfg = (dir / "cfg.json").string();

        CHECK(run({"train", "-c", cfg}) == 0);
        CHECK(run({"evaluate", "-c", cfg, "-m", c.output_dir + "/model.bin"}) == 0);
        CHECK(run({"split", "-c", cfg, "-o", (dir / "split").string()}) == 0);
        CHECK(fs::exists(dir / "split" / "train.tsv"));
        CHECK(run({"info", "-c", cfg}) == 0);
        CHECK(run({"grid-search", "-c", cfg}) == 0);
        CHECK(slurp(dir / "ratings.tsv") == input_before);

        std::string err;
        CHECK(run({"train", "-c", cfg, "--learning-rate", "-1"}, &err) == 1);
        CHECK(err.find("hyperparams.learning_rate") != std::string::npos);
        CHECK(run({"train", "-c", (dir / "absent.json").string()}) == 1);
        CHECK(run({"frobnicate"}) == 1);
        CHECK(run({"train"}) == 1);
        CHECK(run({"evaluate", "-c", cfg, "-m", (dir / "ratings.tsv").string()}) == 1);
        CHECK(run({"train", "-c", cfg, "--learning-rate", "1e9", "-o", (dir / "div").string()}, &err) == 2);
        CHECK(err.find("iteration") != std::string::npos);
        CHECK(run({"--help"}) == 0);

        std::ofstream bad(dir / "bad.tsv");
        bad << "a\tb\t3\na\tc\t9\n";
        bad.close();
        auto broken = c;
        broken.dataset.path = (dir / "bad.tsv").string();
        save_config(broken, dir / "broken.json");
        CHECK(run({"train", "-c", (dir / "broken.json").string()}, &err) == 1);
        CHECK(err.find("line 2") != std::string::npos);
    }

    TEST_CASE("flags override the config") {
        TempDir dir("override");
        auto c = synthetic_config(dir);
        save_config(c, dir / "cfg.json");
        CHECK(run({"train", "-c", (dir / "cfg.json").string(), "--model-type", "biasedmf", "--factors", "5",
                   "--iterations", "3", "-o", (dir / "o").string()}) == 0);
        auto m = load_model_file((dir / "o" / "model.bin").string());
        REQUIRE(std::holds_alternative<MfBaselineModel>(m));
        CHECK(std::get<MfBaselineModel>(m).regressor.config().factors == 5);
        CHECK(model_kind(m) == "biasedmf");
    }

    TEST_CASE("worker count from the environment") {
        ::setenv("BEMF_WORKERS", "3", 1);
        CHECK(default_workers() == 3);
        ::setenv("BEMF_WORKERS", "0", 1);
        CHECK(default_workers() >= 1);
        ::unsetenv("BEMF_WORKERS");
        CHECK(default_workers() >= 1);
    }
}
