#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace bemf::cli {

using nlohmann::json;

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::bemf: return "bemf";
        case ModelKind::pmf: return "pmf";
        case ModelKind::biasedmf: return "biasedmf";
        case ModelKind::knn_user: return "knn-user";
        case ModelKind::knn_item: return "knn-item";
    }
    return "bemf";
}

ModelKind parse_model_kind(const std::string& name) {
    for (auto k : {ModelKind::bemf, ModelKind::pmf, ModelKind::biasedmf, ModelKind::knn_user, ModelKind::knn_item})
        if (to_string(k) == name) return k;
    throw ConfigError("config: model: unknown model '" + name + "' (expected bemf, pmf, biasedmf, knn-user, knn-item)");
}

std::size_t GridConfig::cells() const {
    auto n = [](std::size_t s) { return s == 0 ? std::size_t{1} : s; };
    return n(factors.size()) * n(learning_rate.size()) * n(regularization.size()) * n(iterations.size());
}

GridConfig reference_grid() {
    GridConfig g;
    for (std::size_t k = 2; k <= 8; k += 2) g.factors.push_back(k);
    for (int x = 1; x <= 10; ++x) g.learning_rate.push_back(0.002 * x);
    for (int x = 1; x <= 20; ++x) g.regularization.push_back(0.01 * x);
    g.iterations = {50, 75, 100};
    return g;
}

ScoreSet ExperimentConfig::score_set() const {
    try {
        return ScoreSet::parse(scores);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: scores: ") + e.what());
    }
}

Hyperparams ExperimentConfig::bemf_hyperparams() const {
    Hyperparams hp;
    hp.factors = hyperparams.factors;
    hp.learning_rate = hyperparams.learning_rate;
    hp.regularization = hyperparams.regularization;
    hp.iterations = hyperparams.iterations;
    hp.seed = hyperparams.seed;
    return hp;
}

MfConfig ExperimentConfig::mf_config() const {
    MfConfig c;
    c.variant = model == ModelKind::biasedmf ? MfVariant::biased : MfVariant::pmf;
    c.factors = hyperparams.factors;
    c.learning_rate = hyperparams.learning_rate;
    c.regularization = hyperparams.regularization;
    c.iterations = hyperparams.iterations;
    c.seed = hyperparams.seed;
    return c;
}

MfConfig ExperimentConfig::addon_config() const {
    MfConfig c;
    c.factors = reliability_addon.factors;
    c.learning_rate = reliability_addon.learning_rate;
    c.regularization = reliability_addon.regularization;
    c.iterations = reliability_addon.iterations;
    c.seed = reliability_addon.seed;
    return c;
}

KnnConfig ExperimentConfig::knn_config() const {
    KnnConfig c;
    c.mode = model == ModelKind::knn_item ? KnnMode::item_based : KnnMode::user_based;
    c.neighbors = hyperparams.neighbors;
    return c;
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& msg) { throw ConfigError("config: " + field + ": " + msg); };
    bool single = !dataset.path.empty();
    bool pair = !dataset.train_path.empty() || !dataset.test_path.empty();
    if (single == pair) fail("dataset", "give either 'path' or both 'train_path' and 'test_path'");
    if (pair && (dataset.train_path.empty() || dataset.test_path.empty()))
        fail("dataset", "'train_path' and 'test_path' must be given together");
    for (const auto& [field, p] : {std::pair{"dataset.path", dataset.path}, std::pair{"dataset.train_path", dataset.train_path},
                                   std::pair{"dataset.test_path", dataset.test_path}}) {
        if (!p.empty() && !std::filesystem::is_regular_file(p)) fail(field, "file not found: " + p);
    }
    if (dataset.delimiter != '\t' && dataset.delimiter != ',') fail("dataset.delimiter", "must be tab or comma");
    score_set();
    if (single && !(split.test_ratio > 0.0 && split.test_ratio < 1.0)) fail("split.test_ratio", "must be in (0, 1)");
    if (hyperparams.factors < 1) fail("hyperparams.factors", "must be >= 1");
    if (!(hyperparams.learning_rate > 0.0)) fail("hyperparams.learning_rate", "must be positive");
    if (!(hyperparams.regularization >= 0.0)) fail("hyperparams.regularization", "must be >= 0");
    if (hyperparams.neighbors < 1) fail("hyperparams.neighbors", "must be >= 1");
    if (reliability_addon.factors < 1) fail("reliability_addon.factors", "must be >= 1");
    if (!(reliability_addon.learning_rate > 0.0)) fail("reliability_addon.learning_rate", "must be positive");
    if (!(reliability_addon.regularization >= 0.0)) fail("reliability_addon.regularization", "must be >= 0");
    if (evaluation.n <= 0) fail("evaluation.n", "must be positive");
    const auto& th = evaluation.reliability_thresholds;
    if (th.empty()) fail("evaluation.reliability_thresholds", "must not be empty");
    for (std::size_t x = 0; x < th.size(); ++x) {
        if (!(th[x] >= 0.0 && th[x] <= 1.0)) fail("evaluation.reliability_thresholds", "values must be in [0, 1]");
        if (x && th[x] < th[x - 1]) fail("evaluation.reliability_thresholds", "must be ascending");
    }
    for (auto k : grid.factors)
        if (k < 1) fail("grid.factors", "values must be >= 1");
    for (auto g : grid.learning_rate)
        if (!(g > 0.0)) fail("grid.learning_rate", "values must be positive");
    for (auto e : grid.regularization)
        if (!(e >= 0.0)) fail("grid.regularization", "values must be >= 0");
    if (output_dir.empty()) fail("output_dir", "must not be empty");
}

namespace {

std::string delimiter_name(char d) { return d == ',' ? "comma" : "tab"; }

json params_json(const ModelParams& p) {
    return {{"factors", p.factors},         {"learning_rate", p.learning_rate},
            {"regularization", p.regularization}, {"iterations", p.iterations},
            {"seed", p.seed},               {"neighbors", p.neighbors}};
}

class Object {
public:
    Object(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config: " + where() + "expected an object");
        for (const auto& [key, value] : j_.items()) {
            if (!allowed.count(key)) throw ConfigError("config: " + where() + "unknown key '" + key + "'");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    const json& at(const std::string& key) const { return j_.at(key); }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <typename T>
    void read(const std::string& key, T& out) const {
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("expected a boolean");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_unsigned() && !(v.is_number_integer() && v.template get<std::int64_t>() >= 0))
                    throw ConfigError("expected a non-negative integer");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ConfigError("expected a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError("expected a string");
            } else {
                if (!v.is_array()) throw ConfigError("expected an array");
                for (const auto& e : v) {
                    using E = typename T::value_type;
                    if constexpr (std::is_integral_v<E>) {
                        if (!e.is_number_unsigned()) throw ConfigError("expected non-negative integers");
                    } else if (!e.is_number()) {
                        throw ConfigError("expected numbers");
                    }
                }
            }
            out = v.template get<T>();
        } catch (const ConfigError& e) {
            throw ConfigError("config: " + field(key) + ": " + e.what());
        }
    }

private:
    std::string where() const { return path_.empty() ? "" : path_ + ": "; }
    const json& j_;
    std::string path_;
};

}  // namespace

json to_json(const ExperimentConfig& c) {
    json dataset = {{"delimiter", delimiter_name(c.dataset.delimiter)}, {"header", c.dataset.header}};
    if (!c.dataset.path.empty()) dataset["path"] = c.dataset.path;
    if (!c.dataset.train_path.empty()) dataset["train_path"] = c.dataset.train_path;
    if (!c.dataset.test_path.empty()) dataset["test_path"] = c.dataset.test_path;
    const auto& a = c.reliability_addon;
    return {
        {"dataset", dataset},
        {"scores", c.scores},
        {"split", {{"test_ratio", c.split.test_ratio}, {"seed", c.split.seed}}},
        {"model", to_string(c.model)},
        {"hyperparams", params_json(c.hyperparams)},
        {"reliability_addon",
         {{"enabled", a.enabled}, {"factors", a.factors}, {"learning_rate", a.learning_rate},
          {"regularization", a.regularization}, {"iterations", a.iterations}, {"seed", a.seed}}},
        {"evaluation",
         {{"n", c.evaluation.n}, {"like_threshold", c.evaluation.like_threshold},
          {"reliability_thresholds", c.evaluation.reliability_thresholds}}},
        {"grid",
         {{"factors", c.grid.factors}, {"learning_rate", c.grid.learning_rate},
          {"regularization", c.grid.regularization}, {"iterations", c.grid.iterations}}},
        {"output_dir", c.output_dir},
        {"max_grid_cells", c.max_grid_cells},
    };
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    Object root(j, "", {"dataset", "scores", "split", "model", "hyperparams", "reliability_addon", "evaluation", "grid",
                        "output_dir", "max_grid_cells"});
    if (root.has("dataset")) {
        Object d(root.at("dataset"), "dataset", {"path", "train_path", "test_path", "delimiter", "header"});
        d.read("path", c.dataset.path);
        d.read("train_path", c.dataset.train_path);
        d.read("test_path", c.dataset.test_path);
        d.read("header", c.dataset.header);
        std::string delim = delimiter_name(c.dataset.delimiter);
        d.read("delimiter", delim);
        if (delim == "tab" || delim == "\t") c.dataset.delimiter = '\t';
        else if (delim == "comma" || delim == ",") c.dataset.delimiter = ',';
        else throw ConfigError("config: dataset.delimiter: expected 'tab' or 'comma'");
    }
    if (root.has("scores")) {
        const json& s = root.at("scores");
        if (s.is_array()) {
            std::string spec;
            for (const auto& v : s) {
                if (!v.is_number()) throw ConfigError("config: scores: expected numbers");
                if (!spec.empty()) spec += ';';
                spec += format_ticks(static_cast<std::int64_t>(std::llround(v.get<double>() * ScoreSet::kTicksPerUnit)));
            }
            c.scores = spec;
        } else {
            root.read("scores", c.scores);
        }
    }
    if (root.has("split")) {
        Object s(root.at("split"), "split", {"test_ratio", "seed"});
        s.read("test_ratio", c.split.test_ratio);
        s.read("seed", c.split.seed);
    }
    if (root.has("model")) {
        std::string name;
        root.read("model", name);
        c.model = parse_model_kind(name);
    }
    if (root.has("hyperparams")) {
        Object h(root.at("hyperparams"), "hyperparams",
                 {"factors", "learning_rate", "regularization", "iterations", "seed", "neighbors"});
        h.read("factors", c.hyperparams.factors);
        h.read("learning_rate", c.hyperparams.learning_rate);
        h.read("regularization", c.hyperparams.regularization);
        h.read("iterations", c.hyperparams.iterations);
        h.read("seed", c.hyperparams.seed);
        h.read("neighbors", c.hyperparams.neighbors);
    }
    if (root.has("reliability_addon")) {
        Object a(root.at("reliability_addon"), "reliability_addon",
                 {"enabled", "factors", "learning_rate", "regularization", "iterations", "seed"});
        a.read("enabled", c.reliability_addon.enabled);
        a.read("factors", c.reliability_addon.factors);
        a.read("learning_rate", c.reliability_addon.learning_rate);
        a.read("regularization", c.reliability_addon.regularization);
        a.read("iterations", c.reliability_addon.iterations);
        a.read("seed", c.reliability_addon.seed);
    }
    if (root.has("evaluation")) {
        Object e(root.at("evaluation"), "evaluation", {"n", "like_threshold", "reliability_thresholds"});
        std::size_t n = static_cast<std::size_t>(c.evaluation.n);
        e.read("n", n);
        c.evaluation.n = static_cast<int>(n);
        e.read("like_threshold", c.evaluation.like_threshold);
        e.read("reliability_thresholds", c.evaluation.reliability_thresholds);
    }
    if (root.has("grid") && root.at("grid").is_string()) {
        if (root.at("grid").get<std::string>() != "reference")
            throw ConfigError("config: grid: expected an object or the string 'reference'");
        c.grid = reference_grid();
    } else if (root.has("grid")) {
        Object g(root.at("grid"), "grid", {"factors", "learning_rate", "regularization", "iterations"});
        g.read("factors", c.grid.factors);
        g.read("learning_rate", c.grid.learning_rate);
        g.read("regularization", c.grid.regularization);
        g.read("iterations", c.grid.iterations);
    }
    root.read("output_dir", c.output_dir);
    root.read("max_grid_cells", c.max_grid_cells);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    ExperimentConfig c = config_from_json(j);
    auto base = path.parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
    };
    resolve(c.dataset.path);
    resolve(c.dataset.train_path);
    resolve(c.dataset.test_path);
    resolve(c.output_dir);
    return c;
}

}  // namespace bemf::cli
