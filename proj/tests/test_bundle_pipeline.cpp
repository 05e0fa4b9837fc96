#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "loccal/loccal.hpp"

using namespace loccal;

namespace {

SyntheticWorld two_generator_world() {
    RandomWorldOptions o;
    o.clusters = 3;
    o.hidden_dim = 6;
    o.tokens_per_text = 30;
    o.generators = {"gen_a", "gen_b"};
    return random_world(17, o);
}

FitOptions quick_fit() {
    FitOptions f;
    f.pca_dim = 3;
    f.train.epochs = 2;
    f.train.hidden = 8;
    f.train.batch_size = 128;
    f.train.seed = 4;
    return f;
}

struct Fitted {
    SyntheticWorld world = two_generator_world();
    Corpus corpus = generate_world(world, 12);
    ModelBundle bundle = fit_bundle(corpus, quick_fit());
};

const Fitted& fitted() {
    static const Fitted f;
    return f;
}

std::string report_string(const std::vector<ScoreRow>& rows) {
    std::ostringstream os;
    write_score_report(os, rows);
    return os.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("loccal_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST(FitBundle, Contents) {
    const ModelBundle& b = fitted().bundle;
    EXPECT_EQ(b.sources(), (std::vector<std::string>{"human", "gen_a", "gen_b"}));
    EXPECT_EQ(b.scorers.size(), kCalibratedScorers.size());
    EXPECT_EQ(b.predictors.size(), 15u);
    EXPECT_EQ(b.features->dim(), 3u + 5u);
    EXPECT_EQ(b.cap_tokens, std::optional<std::size_t>(200));
    EXPECT_NO_THROW(b.detector(ScorerId::dmap, "gen_b").validate());
    EXPECT_THROW(b.detector(ScorerId::log_rank, "gen_c"), ConfigError);
}

TEST(FitBundle, DeterministicAcrossRunsAndThreads) {
    FitOptions f = quick_fit();
    f.threads = 3;
    std::vector<std::string> log;
    f.log = [&](const std::string& l) { log.push_back(l); };
    const ModelBundle again = fit_bundle(fitted().corpus, f);
    EXPECT_EQ(bundle_to_string(again), bundle_to_string(fitted().bundle));
    ASSERT_FALSE(log.empty());
    EXPECT_EQ(log.front(), "fitting PCA to 3 dimensions");
    EXPECT_EQ(log[1].rfind("log_surprisal human epoch 1 loss ", 0), 0u);
}

TEST(FitBundle, Errors) {
    FitOptions f = quick_fit();
    f.scorers = {ScorerId::fd_full};
    EXPECT_THROW(fit_bundle(fitted().corpus, f), ConfigError);
    Corpus machines;
    for (const auto& t : fitted().corpus)
        if (t.source != "human") machines.push_back(t);
    EXPECT_THROW(fit_bundle(machines, quick_fit()), ValidationError);
    Corpus humans;
    for (const auto& t : fitted().corpus)
        if (t.source == "human") humans.push_back(t);
    EXPECT_THROW(fit_bundle(humans, quick_fit()), ValidationError);
}

TEST(Bundle, SaveLoadRoundTrip) {
    const auto dir = scratch_dir("bundle");
    const std::string path = (dir / "b.json").string();
    save_bundle(path, fitted().bundle);
    const ModelBundle loaded = load_bundle(path);
    EXPECT_EQ(bundle_to_string(loaded), bundle_to_string(fitted().bundle));
    EXPECT_EQ(report_string(score_corpus(loaded, fitted().corpus)), report_string(score_corpus(fitted().bundle, fitted().corpus)));
    const auto j = nlohmann::json::parse(bundle_to_string(loaded));
    EXPECT_EQ(j.at("format"), kBundleFormat);
    EXPECT_EQ(j.at("version"), kBundleVersion);
}

TEST(Bundle, LoadErrors) {
    EXPECT_THROW(load_bundle("/nonexistent/b.json"), IoError);
    const auto dir = scratch_dir("bad_bundle");
    const std::string path = (dir / "bad.json").string();
    write_text_file(path, [](std::ostream& o) { o << "{\"format\": \"other\"}"; });
    EXPECT_THROW(load_bundle(path), ValidationError);
    write_text_file(path, [](std::ostream& o) { o << "{not json"; });
    EXPECT_THROW(load_bundle(path), ValidationError);
    auto j = nlohmann::json::parse(bundle_to_string(fitted().bundle));
    j["version"] = 99;
    EXPECT_THROW(bundle_from_json(j), ValidationError);
}

TEST(ScoreCorpus, RowLayout) {
    const auto rows = score_corpus(fitted().bundle, fitted().corpus);
    // 5 calibrated scorers x (2 generators + "all") + fd_full x 2 generators, per text.
    const std::size_t per_text = 5 * 3 + 2;
    ASSERT_EQ(rows.size(), fitted().corpus.size() * per_text);
    EXPECT_EQ(rows[0].text_id, fitted().corpus[0].text_id);
    EXPECT_EQ(rows[0].scorer, "log_surprisal");
    EXPECT_EQ(rows[2].generator, kAllGenerators);
    // The pooled row takes the generator with the most machine evidence.
    EXPECT_EQ(rows[2].calibrated, std::min(rows[0].calibrated, rows[1].calibrated));
    for (const auto& r : rows) {
        if (r.scorer == "fd_full")
            EXPECT_TRUE(std::isnan(r.calibrated));
        else
            EXPECT_TRUE(std::isfinite(r.calibrated));
    }
}

TEST(ScoreCorpus, SelectionThreadsAndErrors) {
    ScoreOptions o;
    o.scorers = {ScorerId::log_rank};
    o.generators = {"gen_b"};
    const auto rows = score_corpus(fitted().bundle, fitted().corpus, o);
    ASSERT_EQ(rows.size(), fitted().corpus.size());
    const auto& text = fitted().corpus[3];
    EXPECT_EQ(rows[3].calibrated, lambda4_score(text, fitted().bundle.detector(ScorerId::log_rank, "gen_b")));
    EXPECT_EQ(rows[3].naive, mean_token_score(ScorerId::log_rank, text).value);

    ScoreOptions threaded;
    threaded.threads = 4;
    EXPECT_EQ(report_string(score_corpus(fitted().bundle, fitted().corpus, threaded)),
              report_string(score_corpus(fitted().bundle, fitted().corpus)));

    o.generators = {"gen_z"};
    EXPECT_THROW(score_corpus(fitted().bundle, fitted().corpus, o), ConfigError);
    Corpus narrow = fitted().corpus;
    for (auto& t : narrow[0].tokens) t.hidden.pop_back();
    EXPECT_THROW(score_corpus(fitted().bundle, narrow), ValidationError);
}

TEST(ScoreReport, RoundTripAndErrors) {
    const auto rows = score_corpus(fitted().bundle, fitted().corpus);
    const std::string text = report_string(rows);
    std::istringstream in(text);
    const auto back = read_score_report(in);
    EXPECT_EQ(report_string(back), text);
    std::istringstream bad_header("a\tb\n");
    EXPECT_THROW(read_score_report(bad_header), ParseError);
    std::istringstream bad_number(std::string(kScoreHeader) + "\nt\th\ts\tg\tx\t1\n");
    EXPECT_THROW(read_score_report(bad_number), ParseError);
    EXPECT_THROW(read_score_report_file("/nonexistent/r.tsv"), IoError);
}

TEST(Evaluate, TableShape) {
    EvalOptions e;
    e.bootstrap_iters = 50;
    ScoreOptions s;
    s.scorers = {ScorerId::log_surprisal, ScorerId::fd_full};
    const auto rows = score_corpus(fitted().bundle, fitted().corpus, s);
    const auto metrics = evaluate_scores(rows, e);
    // log_surprisal: naive + calibrated for gen_a, gen_b, all; fd_full: naive for gen_a, gen_b.
    ASSERT_EQ(metrics.size(), 8u);
    EXPECT_EQ(metrics[0].method, "naive");
    EXPECT_EQ(metrics[1].method, "calibrated");
    EXPECT_EQ(metrics[0].n_human, 12u);
    EXPECT_EQ(metrics[0].n_machine, 12u);
    EXPECT_EQ(metrics[4].generator, "all");
    EXPECT_EQ(metrics[4].n_machine, 24u);
    for (const auto& m : metrics) {
        EXPECT_LE(m.auroc.ci.lo, m.auroc.ci.hi);
        EXPECT_GE(m.auroc.value, 0.0);
        EXPECT_LE(m.auroc.value, 1.0);
    }
    const Table t = metrics_table(metrics);
    EXPECT_EQ(t.header[5], "TPR@0.1%");
    EXPECT_EQ(format_metric({0.5, {0.25, 0.75}}), "0.5000 (0.2500–0.7500)");
    EXPECT_EQ(metrics_table(evaluate_scores(rows, e)).str(), t.str());

    std::vector<ScoreRow> humans_only;
    for (const auto& r : rows)
        if (r.source == "human") humans_only.push_back(r);
    EXPECT_THROW(evaluate_scores(humans_only, e), ValidationError);
    EXPECT_THROW(evaluate_scores({}, e), ValidationError);
}

TEST(Diagnose, Tables) {
    DiagnoseOptions o;
    o.clusters = 4;
    const Diagnostics d = diagnose(fitted().bundle, fitted().corpus, o);
    EXPECT_EQ(d.clusters.rows.size(), 5u);
    EXPECT_EQ(d.clusters.rows.back()[0], "all");
    EXPECT_EQ(d.clusters.header[3], "prop_human");
    EXPECT_FALSE(d.zscore_hist.rows.empty());
    EXPECT_FALSE(d.zscore_summary.rows.empty());
    EXPECT_EQ(d.dmap_hist.rows.size(), 6u * 3u);
}
