#pragma once
// Fitted model bundle: feature pipeline, DMAP references and one predictor per
// (scorer, source), plus the versioned JSON file that stores it.
//
// Numbers are written as shortest round-trip decimal text, so a loaded bundle
// reproduces the saved one bit for bit.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "loccal/corpus.hpp"
#include "loccal/detector.hpp"
#include "loccal/dmap.hpp"
#include "loccal/error.hpp"
#include "loccal/features.hpp"
#include "loccal/parallel.hpp"
#include "loccal/pca.hpp"
#include "loccal/predictor.hpp"
#include "loccal/scorers.hpp"

namespace loccal {

inline constexpr const char* kBundleFormat = "loccal-bundle";
inline constexpr int kBundleVersion = 1;
inline constexpr const char* kBundleEncoding = "decimal-shortest-roundtrip";

struct PredictorEntry {
    ScorerId scorer = ScorerId::log_surprisal;
    std::string source;
    std::shared_ptr<const Predictor> predictor;
};

struct ModelBundle {
    std::shared_ptr<const FeaturePipeline> features;
    BinPartition partition;
    TrainConfig train;
    std::string human_label = "human";
    std::vector<std::string> generators;
    std::vector<ScorerId> scorers;
    std::vector<std::pair<std::string, BinVector>> dmap_refs;  // per source, smoothed
    std::vector<PredictorEntry> predictors;
    std::optional<std::size_t> cap_tokens;

    std::vector<std::string> sources() const {
        std::vector<std::string> out{human_label};
        out.insert(out.end(), generators.begin(), generators.end());
        return out;
    }

    bool has_scorer(ScorerId s) const { return std::find(scorers.begin(), scorers.end(), s) != scorers.end(); }

    bool has_generator(const std::string& g) const {
        return std::find(generators.begin(), generators.end(), g) != generators.end();
    }

    const BinVector& dmap_reference_of(const std::string& source) const {
        for (const auto& [name, q] : dmap_refs)
            if (name == source) return q;
        throw ConfigError("bundle has no DMAP reference for source '" + source + "'");
    }

    std::shared_ptr<const Predictor> predictor(ScorerId scorer, const std::string& source) const {
        for (const auto& e : predictors)
            if (e.scorer == scorer && e.source == source) return e.predictor;
        throw ConfigError("bundle has no '" + std::string(to_string(scorer)) + "' predictor for source '" + source + "'");
    }

    DmapReferences dmap_pair(const std::string& generator) const {
        return {dmap_reference_of(human_label), dmap_reference_of(generator)};
    }

    DetectorBundle detector(ScorerId scorer, const std::string& generator) const {
        if (!has_generator(generator)) throw ConfigError("bundle has no generator '" + generator + "'");
        DetectorBundle b;
        b.scorer = scorer;
        b.generator = generator;
        b.features = features;
        b.human = predictor(scorer, human_label);
        b.machine = predictor(scorer, generator);
        b.partition = partition;
        b.dmap_refs = dmap_pair(generator);
        b.validate();
        return b;
    }
};

// ---- fitting -------------------------------------------------------------------

struct FitOptions {
    std::size_t pca_dim = kDefaultPcaDim;
    std::size_t top_k = kDefaultTopK;
    BinPartition partition;
    TrainConfig train;
    std::string human_label = "human";
    std::vector<ScorerId> scorers{kCalibratedScorers.begin(), kCalibratedScorers.end()};
    std::optional<std::size_t> cap_tokens = 200;
    std::size_t threads = 1;
    // Receives progress lines, including per-epoch losses.
    std::function<void(const std::string&)> log;
};

namespace detail {

inline std::string format_loss_line(ScorerId scorer, const std::string& source, std::size_t epoch, double loss) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, loss, std::chars_format::fixed, 6);
    return std::string(to_string(scorer)) + " " + source + " epoch " + std::to_string(epoch) + " loss " +
           std::string(buf, res.ptr);
}

}  // namespace detail

// PCA on pooled training hidden states, per-source DMAP references, then independent
// predictors for every (scorer, source). Training tasks run in parallel; each writes its
// own slot, and their progress lines are emitted afterwards in task order.
inline ModelBundle fit_bundle(const Corpus& raw_train, const FitOptions& opts) {
    opts.train.validate();
    const Corpus train = cap_tokens(raw_train, opts.cap_tokens);
    validate_corpus(train);
    for (ScorerId s : opts.scorers)
        if (s == ScorerId::fd_full) throw ConfigError("fd_full has no token-level target and cannot be calibrated");
    if (opts.scorers.empty()) throw ConfigError("fit needs at least one scorer");

    ModelBundle b;
    b.partition = opts.partition;
    b.train = opts.train;
    b.human_label = opts.human_label;
    b.scorers = opts.scorers;
    b.cap_tokens = opts.cap_tokens;
    const std::vector<std::string> all_sources = sources_of(train);
    if (std::find(all_sources.begin(), all_sources.end(), opts.human_label) == all_sources.end())
        throw ValidationError("training corpus has no '" + opts.human_label + "' source");
    for (const auto& s : all_sources)
        if (s != opts.human_label) b.generators.push_back(s);
    if (b.generators.empty()) throw ValidationError("training corpus needs at least one machine source");
    const std::vector<std::string> sources = b.sources();

    if (opts.log) opts.log("fitting PCA to " + std::to_string(opts.pca_dim) + " dimensions");
    FeaturePipeline pipeline{fit_pca(hidden_matrix(train), opts.pca_dim), opts.top_k};
    b.features = std::make_shared<const FeaturePipeline>(std::move(pipeline));

    std::vector<Corpus> by_source(sources.size());
    for (const auto& text : train) {
        const auto idx = static_cast<std::size_t>(std::find(sources.begin(), sources.end(), text.source) - sources.begin());
        by_source[idx].push_back(text);
    }
    for (std::size_t s = 0; s < sources.size(); ++s)
        b.dmap_refs.emplace_back(sources[s], dmap_reference(by_source[s], b.partition));

    std::vector<Matrix> features(sources.size());
    parallel_for(sources.size(), opts.threads, [&](std::size_t s) {
        for (const auto& text : by_source[s])
            for (const auto& t : text.tokens) features[s].append_row((*b.features)(t));
    });

    struct Task {
        ScorerId scorer;
        std::size_t source;
    };
    std::vector<Task> tasks;
    for (ScorerId sc : b.scorers)
        for (std::size_t s = 0; s < sources.size(); ++s) tasks.push_back({sc, s});
    std::vector<std::shared_ptr<const Predictor>> trained(tasks.size());
    std::vector<std::vector<std::string>> logs(tasks.size());
    parallel_for(tasks.size(), opts.threads, [&](std::size_t i) {
        const Task& task = tasks[i];
        Dataset data;
        data.features = features[task.source];
        if (task.scorer == ScorerId::dmap) {
            data.head = HeadKind::categorical;
            for (const auto& text : by_source[task.source])
                for (const auto& t : text.tokens) data.dist_targets.append_row(bin_proportions(t, b.partition));
        } else {
            data.head = HeadKind::gaussian;
            for (const auto& text : by_source[task.source])
                for (const auto& t : text.tokens) data.scalar_targets.push_back(score_token(task.scorer, t).value);
        }
        TrainConfig cfg = opts.train;
        cfg.seed = derive_seed(opts.train.seed, i);
        trained[i] = std::make_shared<const Predictor>(train_predictor(data, cfg, [&](std::size_t epoch, double loss) {
            logs[i].push_back(detail::format_loss_line(task.scorer, sources[task.source], epoch, loss));
        }));
    });
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (opts.log)
            for (const auto& line : logs[i]) opts.log(line);
        b.predictors.push_back({tasks[i].scorer, sources[tasks[i].source], trained[i]});
    }
    return b;
}

// ---- serialization ---------------------------------------------------------------

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson tensor_json(const char* name, std::vector<std::size_t> shape, std::span<const double> data) {
    ojson j;
    j["name"] = name;
    j["shape"] = std::move(shape);
    j["data"] = std::vector<double>(data.begin(), data.end());
    return j;
}

inline ojson predictor_json(const PredictorEntry& e) {
    const Predictor& p = *e.predictor;
    ojson j;
    j["scorer"] = std::string(to_string(e.scorer));
    j["source"] = e.source;
    j["head"] = std::string(to_string(p.head));
    j["dropout"] = p.net.dropout_rate;
    j["input_mean"] = p.input_mean;
    j["input_scale"] = p.input_scale;
    j["target_mean"] = p.target_mean;
    j["target_scale"] = p.target_scale;
    j["tensors"] = ojson::array({tensor_json("w1", {p.net.hidden, p.net.in}, p.net.w1()),
                                 tensor_json("b1", {p.net.hidden}, p.net.b1()),
                                 tensor_json("w2", {p.net.out, p.net.hidden}, p.net.w2()),
                                 tensor_json("b2", {p.net.out}, p.net.b2())});
    return j;
}

inline ojson train_config_json(const TrainConfig& c) {
    ojson j;
    j["epochs"] = c.epochs;
    j["learning_rate"] = c.learning_rate;
    j["weight_decay"] = c.weight_decay;
    j["batch_size"] = c.batch_size;
    j["dropout"] = c.dropout;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["eps"] = c.eps;
    j["hidden"] = c.hidden;
    j["seed"] = c.seed;
    return j;
}

inline TrainConfig train_config_from(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.eps = j.at("eps").get<double>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline std::vector<double> tensor_from(const nlohmann::json& tensors, const char* name, std::vector<std::size_t> shape) {
    for (const auto& t : tensors) {
        if (t.at("name").get<std::string>() != name) continue;
        if (t.at("shape").get<std::vector<std::size_t>>() != shape)
            throw ValidationError(std::string("bundle tensor '") + name + "' has an unexpected shape");
        auto data = t.at("data").get<std::vector<double>>();
        std::size_t n = 1;
        for (std::size_t s : shape) n *= s;
        if (data.size() != n) throw ValidationError(std::string("bundle tensor '") + name + "' has the wrong length");
        return data;
    }
    throw ValidationError(std::string("bundle is missing tensor '") + name + "'");
}

inline PredictorEntry predictor_from(const nlohmann::json& j) {
    PredictorEntry e;
    e.scorer = parse_scorer_id(j.at("scorer").get<std::string>());
    e.source = j.at("source").get<std::string>();
    Predictor p;
    p.head = parse_head_kind(j.at("head").get<std::string>());
    p.input_mean = j.at("input_mean").get<std::vector<double>>();
    p.input_scale = j.at("input_scale").get<std::vector<double>>();
    p.target_mean = j.at("target_mean").get<double>();
    p.target_scale = j.at("target_scale").get<double>();
    const auto& tensors = j.at("tensors");
    std::vector<std::size_t> w1_shape;
    std::vector<std::size_t> w2_shape;
    for (const auto& t : tensors) {
        if (t.at("name") == "w1") w1_shape = t.at("shape").get<std::vector<std::size_t>>();
        if (t.at("name") == "w2") w2_shape = t.at("shape").get<std::vector<std::size_t>>();
    }
    if (w1_shape.size() != 2 || w2_shape.size() != 2 || w2_shape[1] != w1_shape[0])
        throw ValidationError("bundle predictor has inconsistent layer shapes");
    const std::size_t hidden = w1_shape[0], in = w1_shape[1], out = w2_shape[0];
    p.net = MlpParams(in, hidden, out, j.at("dropout").get<double>());
    auto copy = [](const std::vector<double>& src, std::span<double> dst) { std::copy(src.begin(), src.end(), dst.begin()); };
    copy(tensor_from(tensors, "w1", {hidden, in}), p.net.w1());
    copy(tensor_from(tensors, "b1", {hidden}), p.net.b1());
    copy(tensor_from(tensors, "w2", {out, hidden}), p.net.w2());
    copy(tensor_from(tensors, "b2", {out}), p.net.b2());
    if (p.input_mean.size() != in || p.input_scale.size() != in)
        throw ValidationError("bundle predictor standardization does not match its input width");
    e.predictor = std::make_shared<const Predictor>(std::move(p));
    return e;
}

}  // namespace detail

inline nlohmann::ordered_json bundle_to_json(const ModelBundle& b) {
    using detail::ojson;
    ojson j;
    j["format"] = kBundleFormat;
    j["version"] = kBundleVersion;
    j["numeric_encoding"] = kBundleEncoding;
    j["human_label"] = b.human_label;
    j["generators"] = b.generators;
    std::vector<std::string> scorers;
    for (ScorerId s : b.scorers) scorers.emplace_back(to_string(s));
    j["scorers"] = scorers;
    if (b.cap_tokens)
        j["cap_tokens"] = *b.cap_tokens;
    else
        j["cap_tokens"] = nullptr;
    j["train_config"] = detail::train_config_json(b.train);
    j["partition"] = b.partition.edges();
    const PcaModel& pca = b.features->pca;
    ojson pj;
    pj["mean"] = pca.mean;
    pj["explained_variance"] = pca.explained_variance;
    pj["components"] = detail::tensor_json("components", {pca.components.rows, pca.components.cols}, pca.components.data);
    j["pca"] = std::move(pj);
    j["top_k"] = b.features->k;
    ojson refs = ojson::array();
    for (const auto& [source, q] : b.dmap_refs) refs.push_back({{"source", source}, {"probs", q}});
    j["dmap_references"] = std::move(refs);
    ojson preds = ojson::array();
    for (const auto& e : b.predictors) preds.push_back(detail::predictor_json(e));
    j["predictors"] = std::move(preds);
    return j;
}

inline ModelBundle bundle_from_json(const nlohmann::json& j) {
    ModelBundle b;
    try {
        if (j.at("format").get<std::string>() != kBundleFormat) throw ValidationError("not a model bundle file");
        if (j.at("version").get<int>() != kBundleVersion)
            throw ValidationError("unsupported bundle version " + j.at("version").dump());
        if (j.at("numeric_encoding").get<std::string>() != kBundleEncoding)
            throw ValidationError("unsupported numeric encoding " + j.at("numeric_encoding").dump());
        b.human_label = j.at("human_label").get<std::string>();
        b.generators = j.at("generators").get<std::vector<std::string>>();
        for (const auto& s : j.at("scorers")) b.scorers.push_back(parse_scorer_id(s.get<std::string>()));
        if (!j.at("cap_tokens").is_null()) b.cap_tokens = j.at("cap_tokens").get<std::size_t>();
        b.train = detail::train_config_from(j.at("train_config"));
        b.partition = BinPartition(j.at("partition").get<std::vector<double>>());
        const auto& pj = j.at("pca");
        PcaModel pca;
        pca.mean = pj.at("mean").get<std::vector<double>>();
        pca.explained_variance = pj.at("explained_variance").get<std::vector<double>>();
        const auto shape = pj.at("components").at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2 || shape[1] != pca.mean.size()) throw ValidationError("bundle PCA components have a bad shape");
        pca.components = Matrix(shape[0], shape[1]);
        pca.components.data = detail::tensor_from(nlohmann::json::array({pj.at("components")}), "components", shape);
        b.features = std::make_shared<const FeaturePipeline>(FeaturePipeline{std::move(pca), j.at("top_k").get<std::size_t>()});
        for (const auto& r : j.at("dmap_references"))
            b.dmap_refs.emplace_back(r.at("source").get<std::string>(), r.at("probs").get<BinVector>());
        for (const auto& p : j.at("predictors")) b.predictors.push_back(detail::predictor_from(p));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed bundle: ") + e.what());
    }
    for (ScorerId s : b.scorers)
        for (const auto& g : b.generators) b.detector(s, g);  // validates heads and widths
    return b;
}

inline std::string bundle_to_string(const ModelBundle& b) { return bundle_to_json(b).dump(1) + "\n"; }

inline void save_bundle(const std::string& path, const ModelBundle& b) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write bundle '" + path + "'");
    out << bundle_to_string(b);
    if (!out) throw IoError("failed writing bundle '" + path + "'");
}

inline ModelBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open bundle '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return bundle_from_json(j);
}

}  // namespace loccal
