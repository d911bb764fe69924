#include "bemf/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace bemf {

namespace {

constexpr std::array<char, 8> kMagic{'B', 'E', 'M', 'F', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

enum class Tag : std::uint8_t { bemf = 1, mf_baseline = 2, knn = 3 };

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u64(std::uint64_t v) {
        std::array<char, 8> bytes;
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xFF);
        out_.write(bytes.data(), bytes.size());
    }
    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void doubles(std::span<const double> vs) {
        u64(vs.size());
        for (double v : vs) f64(v);
    }
    void scores(const ScoreSet& s) {
        u64(s.size());
        for (std::int64_t t : s.all_ticks()) u64(static_cast<std::uint64_t>(t));
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::uint64_t u64() {
        std::array<unsigned char, 8> bytes;
        read(bytes.data(), bytes.size());
        std::uint64_t v = 0;
        for (int b = 7; b >= 0; --b) v = (v << 8) | bytes[b];
        return v;
    }
    std::uint8_t u8() {
        unsigned char c;
        read(&c, 1);
        return c;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t count(std::uint64_t limit = std::uint64_t{1} << 40) {
        std::uint64_t n = u64();
        if (n > limit) throw ModelFormatError("model file: implausible size field");
        return static_cast<std::size_t>(n);
    }
    void doubles(std::span<double> out) {
        if (count() != out.size()) throw ModelFormatError("model file: tensor size mismatch");
        for (double& v : out) v = f64();
    }
    std::vector<double> doubles() {
        std::vector<double> out(count());
        for (double& v : out) v = f64();
        return out;
    }
    ScoreSet scores() {
        std::vector<std::int64_t> ticks(count(1 << 16));
        for (auto& t : ticks) t = static_cast<std::int64_t>(u64());
        try {
            return ScoreSet(std::move(ticks));
        } catch (const std::invalid_argument& e) {
            throw ModelFormatError(std::string("model file: ") + e.what());
        }
    }

private:
    void read(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw ModelFormatError("model file: unexpected end of data");
    }
    std::istream& in_;
};

void write_body(Writer& w, const BeMFModel& m) {
    w.u8(static_cast<std::uint8_t>(Tag::bemf));
    w.scores(m.scores());
    const Hyperparams& hp = m.hyperparams();
    w.u64(hp.factors);
    w.f64(hp.learning_rate);
    w.f64(hp.regularization);
    w.u64(hp.iterations);
    w.u8(static_cast<std::uint8_t>(hp.activation));
    w.u64(hp.seed);
    w.u64(m.num_users());
    w.u64(m.num_items());
    w.doubles(m.user_factors().data());
    w.doubles(m.item_factors().data());
}

void write_body(Writer& w, const MfBaselineModel& m) {
    w.u8(static_cast<std::uint8_t>(Tag::mf_baseline));
    w.scores(m.scores);
    const MfRegressor& r = m.regressor;
    const MfConfig& c = r.config();
    w.u8(static_cast<std::uint8_t>(c.variant));
    w.u64(c.factors);
    w.f64(c.learning_rate);
    w.f64(c.regularization);
    w.u64(c.iterations);
    w.u64(c.seed);
    w.f64(c.init_scale);
    w.u64(r.num_users());
    w.u64(r.num_items());
    w.f64(r.global_mean());
    w.doubles(r.user_factors());
    w.doubles(r.item_factors());
    w.doubles(r.user_bias());
    w.doubles(r.item_bias());
}

void write_body(Writer& w, const KnnModelSpec& m) {
    w.u8(static_cast<std::uint8_t>(Tag::knn));
    w.scores(m.scores);
    w.u8(static_cast<std::uint8_t>(m.config.mode));
    w.u64(m.config.neighbors);
    w.u8(m.config.cache_similarities ? 1 : 0);
    w.u64(m.num_users);
    w.u64(m.num_items);
}

BeMFModel read_bemf(Reader& r) {
    ScoreSet scores = r.scores();
    Hyperparams hp;
    hp.factors = r.count(1 << 20);
    hp.learning_rate = r.f64();
    hp.regularization = r.f64();
    hp.iterations = r.count();
    if (r.u8() != static_cast<std::uint8_t>(Activation::logistic)) throw ModelFormatError("model file: unknown activation");
    hp.activation = Activation::logistic;
    hp.seed = r.u64();
    std::size_t n = r.count();
    std::size_t m = r.count();
    BeMFModel model(std::move(scores), hp, n, m);
    r.doubles(model.user_factors().data());
    r.doubles(model.item_factors().data());
    return model;
}

MfBaselineModel read_mf(Reader& r) {
    ScoreSet scores = r.scores();
    MfConfig c;
    std::uint8_t variant = r.u8();
    if (variant > static_cast<std::uint8_t>(MfVariant::biased)) throw ModelFormatError("model file: unknown MF variant");
    c.variant = static_cast<MfVariant>(variant);
    c.factors = r.count(1 << 20);
    c.learning_rate = r.f64();
    c.regularization = r.f64();
    c.iterations = r.count();
    c.seed = r.u64();
    c.init_scale = r.f64();
    std::size_t n = r.count();
    std::size_t m = r.count();
    MfRegressor reg(c, n, m);
    reg.set_global_mean(r.f64());
    r.doubles(reg.user_factors());
    r.doubles(reg.item_factors());
    r.doubles(reg.user_bias());
    r.doubles(reg.item_bias());
    return MfBaselineModel{std::move(scores), std::move(reg)};
}

KnnModelSpec read_knn(Reader& r) {
    KnnModelSpec spec;
    spec.scores = r.scores();
    std::uint8_t mode = r.u8();
    if (mode > static_cast<std::uint8_t>(KnnMode::item_based)) throw ModelFormatError("model file: unknown KNN mode");
    spec.config.mode = static_cast<KnnMode>(mode);
    spec.config.neighbors = r.count();
    spec.config.cache_similarities = r.u8() != 0;
    spec.num_users = r.count();
    spec.num_items = r.count();
    return spec;
}

}  // namespace

void save_model(std::ostream& out, const StoredModel& model) {
    out.write(kMagic.data(), kMagic.size());
    Writer w(out);
    w.u64(kVersion);
    std::visit([&](const auto& m) { write_body(w, m); }, model);
    if (!out) throw std::runtime_error("failed to write model");
}

StoredModel load_model(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != 8 || magic != kMagic) throw ModelFormatError("not a model file (bad magic)");
    Reader r(in);
    if (r.u64() != kVersion) throw ModelFormatError("unsupported model file version");
    switch (static_cast<Tag>(r.u8())) {
        case Tag::bemf:
            return read_bemf(r);
        case Tag::mf_baseline:
            return read_mf(r);
        case Tag::knn:
            return read_knn(r);
    }
    throw ModelFormatError("model file: unknown model kind");
}

void save_model_file(const std::string& path, const StoredModel& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    save_model(out, model);
}

StoredModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file " + path);
    return load_model(in);
}

const ScoreSet& model_scores(const StoredModel& model) {
    return std::visit(
        [](const auto& m) -> const ScoreSet& {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, BeMFModel>)
                return m.scores();
            else
                return m.scores;
        },
        model);
}

std::string model_kind(const StoredModel& model) {
    if (const auto* mf = std::get_if<MfBaselineModel>(&model))
        return mf->regressor.config().variant == MfVariant::pmf ? "pmf" : "biasedmf";
    if (const auto* knn = std::get_if<KnnModelSpec>(&model))
        return knn->config.mode == KnnMode::user_based ? "knn-user" : "knn-item";
    return "bemf";
}

}  // namespace bemf
