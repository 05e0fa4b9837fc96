// loccal: fit, score, evaluate and diagnose locally calibrated detectors.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loccal/loccal.hpp"

namespace {

using namespace loccal;

struct Options {
    std::string corpus;
    std::string bundle;
    std::string out;
    std::string report;
    std::string train_out;
    std::string test_out;
    std::string world;
    std::string world_out;
    std::string preset = "simpson";
    std::vector<std::string> scorers;
    std::vector<std::string> generators;
    std::size_t cap_tokens = 200;
    std::size_t threads = 1;
    std::uint64_t seed = 0;
    std::size_t n_texts = 1000;
    std::size_t d = kDefaultPcaDim;
    std::size_t k = kDefaultTopK;
    std::vector<double> bins = BinPartition::default_edges();
    std::size_t clusters = kDefaultClusters;
    std::size_t bootstrap_iters = 10000;
    double level = 0.95;
    double train_fraction = 0.5;
    std::string human_label = "human";
    TrainConfig train;
    bool quiet = false;
    bool shared_mix = false;
};

std::optional<std::size_t> cap_of(const Options& o) {
    if (o.cap_tokens == 0) return std::nullopt;
    return o.cap_tokens;
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

std::vector<ScorerId> scorer_ids(const std::vector<std::string>& names) {
    std::vector<ScorerId> out;
    for (const auto& n : names) out.push_back(parse_scorer_id(n));
    return out;
}

// Writes to `path`, or stdout when it is empty.
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
    if (path.empty()) {
        fn(std::cout);
        std::cout.flush();
        return;
    }
    write_text_file(path, fn);
}

void cmd_fit(const Options& o) {
    require(o.corpus, "--corpus");
    require(o.bundle, "--bundle");
    FitOptions f;
    f.pca_dim = o.d;
    f.top_k = o.k;
    f.partition = BinPartition(o.bins);
    f.train = o.train;
    f.train.seed = o.seed;
    f.human_label = o.human_label;
    if (!o.scorers.empty()) f.scorers = scorer_ids(o.scorers);
    f.cap_tokens = cap_of(o);
    f.threads = o.threads;
    if (!o.quiet) f.log = [](const std::string& line) { std::cerr << line << '\n'; };
    const ModelBundle b = fit_bundle(read_corpus_file(o.corpus), f);
    save_bundle(o.bundle, b);
}

void cmd_score(const Options& o) {
    require(o.corpus, "--corpus");
    require(o.bundle, "--bundle");
    const ModelBundle b = load_bundle(o.bundle);
    ScoreOptions s;
    s.scorers = scorer_ids(o.scorers);
    s.generators = o.generators;
    s.threads = o.threads;
    const auto rows = score_corpus(b, read_corpus_file(o.corpus), s);
    emit(o.out, [&](std::ostream& out) { write_score_report(out, rows); });
}

void cmd_eval(const Options& o) {
    require(o.report, "--report");
    EvalOptions e;
    e.human_label = o.human_label;
    e.bootstrap_iters = o.bootstrap_iters;
    e.level = o.level;
    e.seed = o.seed;
    e.threads = o.threads;
    auto rows = read_score_report_file(o.report);
    if (!o.scorers.empty() || !o.generators.empty()) {
        std::erase_if(rows, [&](const ScoreRow& r) {
            const bool scorer_ok = o.scorers.empty() || std::find(o.scorers.begin(), o.scorers.end(), r.scorer) != o.scorers.end();
            const bool gen_ok =
                o.generators.empty() || std::find(o.generators.begin(), o.generators.end(), r.generator) != o.generators.end();
            return !(scorer_ok && gen_ok);
        });
    }
    const Table t = metrics_table(evaluate_scores(rows, e));
    emit(o.out, [&](std::ostream& out) { t.write(out); });
}

void cmd_diagnose(const Options& o) {
    require(o.corpus, "--corpus");
    require(o.bundle, "--bundle");
    require(o.out, "--out");
    const ModelBundle b = load_bundle(o.bundle);
    DiagnoseOptions d;
    d.clusters = o.clusters;
    d.seed = o.seed;
    const Diagnostics diag = diagnose(b, read_corpus_file(o.corpus), d);
    std::error_code ec;
    std::filesystem::create_directories(o.out, ec);
    if (ec) throw IoError("cannot create directory '" + o.out + "': " + ec.message());
    const std::filesystem::path dir(o.out);
    auto put = [&](const char* name, const Table& t) {
        write_text_file((dir / name).string(), [&](std::ostream& out) { t.write(out); });
    };
    put("clusters.tsv", diag.clusters);
    put("zscores.tsv", diag.zscore_hist);
    put("zscore_summary.tsv", diag.zscore_summary);
    put("dmap_histograms.tsv", diag.dmap_hist);
}

void cmd_synth(const Options& o, bool seed_given) {
    require(o.out, "--out");
    SyntheticWorld w;
    if (!o.world.empty()) {
        w = read_world_file(o.world);
        if (seed_given) w.seed = o.seed;
    } else if (o.preset == "simpson") {
        w = seed_given ? simpson_world(o.seed) : simpson_world();
    } else if (o.preset == "random") {
        RandomWorldOptions r;
        if (!o.generators.empty()) r.generators = o.generators;
        r.shared_mix = o.shared_mix;
        w = random_world(o.seed, r);
    } else {
        throw ConfigError("unknown preset '" + o.preset + "' (expected simpson or random)");
    }
    write_corpus_file(o.out, generate_world(w, o.n_texts));
    if (!o.world_out.empty())
        write_text_file(o.world_out, [&](std::ostream& out) { out << world_to_json(w).dump(1) << '\n'; });
}

void cmd_split(const Options& o) {
    require(o.corpus, "--corpus");
    require(o.train_out, "--train-out");
    require(o.test_out, "--test-out");
    const CorpusSplit s = split_by_prompt_group(read_corpus_file(o.corpus), {o.train_fraction, o.seed, std::nullopt});
    write_corpus_file(o.train_out, s.train);
    write_corpus_file(o.test_out, s.test);
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Locally calibrated detection of machine-generated text"};
    app.set_config("--config", "", "Flat config file (TOML/INI); command-line flags take precedence");
    app.require_subcommand(1);

    app.add_option("--corpus", o.corpus, "Corpus file (JSON lines)");
    app.add_option("--bundle", o.bundle, "Model bundle file");
    app.add_option("--out", o.out, "Output file (directory for diagnose; stdout if omitted for score/eval)");
    app.add_option("--report", o.report, "Score report to evaluate");
    app.add_option("--train-out", o.train_out, "split: training corpus output");
    app.add_option("--test-out", o.test_out, "split: test corpus output");
    app.add_option("--world", o.world, "synth: world definition (JSON)");
    app.add_option("--world-out", o.world_out, "synth: also write the world definition here");
    app.add_option("--preset", o.preset, "synth: built-in world when --world is absent (simpson, random)");
    app.add_option("--scorer", o.scorers, "Scorer ids to fit/score/evaluate")->delimiter(',');
    app.add_option("--generator", o.generators, "Generators to score/evaluate")->delimiter(',');
    app.add_option("--cap-tokens", o.cap_tokens, "Score only the first N tokens of each text (0 = no cap)");
    app.add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
    auto* seed_opt = app.add_option("--seed", o.seed, "Master seed");
    app.add_option("--n-texts", o.n_texts, "synth: texts per source")->check(CLI::PositiveNumber);
    app.add_option("--d", o.d, "PCA dimension")->check(CLI::PositiveNumber);
    app.add_option("--k", o.k, "Top-k probabilities in the features");
    app.add_option("--bins", o.bins, "DMAP partition edges")->delimiter(',');
    app.add_option("--hidden", o.train.hidden, "Predictor hidden width")->check(CLI::PositiveNumber);
    app.add_option("--epochs", o.train.epochs, "Training epochs")->check(CLI::PositiveNumber);
    app.add_option("--lr", o.train.learning_rate, "AdamW learning rate");
    app.add_option("--weight-decay", o.train.weight_decay, "AdamW weight decay");
    app.add_option("--batch-size", o.train.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
    app.add_option("--dropout", o.train.dropout, "Dropout rate");
    app.add_option("--clusters", o.clusters, "diagnose: k-means clusters")->check(CLI::PositiveNumber);
    app.add_option("--bootstrap-iters", o.bootstrap_iters, "eval: bootstrap replicates")->check(CLI::PositiveNumber);
    app.add_option("--level", o.level, "eval: confidence level");
    app.add_option("--train-fraction", o.train_fraction, "split: fraction of prompt groups used for training");
    app.add_option("--human-label", o.human_label, "Source label of human-written texts");
    app.add_flag("--quiet", o.quiet, "fit: suppress per-epoch losses");
    app.add_flag("--shared-mix", o.shared_mix, "synth: random preset gives every source the human cluster weights");

    auto* fit = app.add_subcommand("fit", "Fit PCA, DMAP references and predictors; write a bundle")->fallthrough();
    auto* score = app.add_subcommand("score", "Write naive and calibrated scores per text")->fallthrough();
    auto* eval = app.add_subcommand("eval", "Metrics table with bootstrap intervals from a score report")->fallthrough();
    auto* diag = app.add_subcommand("diagnose", "Cluster table, z-score and DMAP histograms")->fallthrough();
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus")->fallthrough();
    auto* split = app.add_subcommand("split", "Split a corpus by prompt group")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_code(ErrorKind::config);
    }

    try {
        if (*fit) cmd_fit(o);
        if (*score) cmd_score(o);
        if (*eval) cmd_eval(o);
        if (*diag) cmd_diagnose(o);
        if (*synth) cmd_synth(o, seed_opt->count() > 0);
        if (*split) cmd_split(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
