#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(LOCCAL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("loccal_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const char* kQuickTrain = " --d 3 --hidden 8 --epochs 2 --batch-size 256 --quiet";

}  // namespace

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("codes");
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("fit --no-such-flag"), 2);
    EXPECT_EQ(run("fit --bundle x.json"), 2);
    EXPECT_EQ(run("fit --corpus /nonexistent/c.jsonl --bundle " + (dir / "b.json").string()), 3);
    std::ofstream(dir / "bad.jsonl") << "{\"text_id\": 1}\n";
    EXPECT_EQ(run("fit --corpus " + (dir / "bad.jsonl").string() + " --bundle " + (dir / "b.json").string()), 4);
    EXPECT_EQ(run("synth --preset nope --out " + (dir / "c.jsonl").string()), 2);
    EXPECT_EQ(run("fit --scorer fd_full --corpus " + (dir / "bad.jsonl").string() + " --bundle x"), 4);
    EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, EndToEnd) {
    const fs::path dir = scratch("e2e");
    const std::string d = dir.string();
    ASSERT_EQ(run("synth --preset random --seed 3 --n-texts 16 --out " + d + "/all.jsonl --world-out " + d + "/world.json"), 0);
    ASSERT_EQ(run("split --corpus " + d + "/all.jsonl --train-out " + d + "/train.jsonl --test-out " + d +
                  "/test.jsonl --seed 1"),
              0);
    ASSERT_EQ(run("fit --corpus " + d + "/train.jsonl --bundle " + d + "/b.json --seed 2" + kQuickTrain), 0);
    ASSERT_EQ(run("score --corpus " + d + "/test.jsonl --bundle " + d + "/b.json --out " + d + "/scores.tsv"), 0);
    ASSERT_EQ(run("eval --report " + d + "/scores.tsv --bootstrap-iters 50 --out " + d + "/metrics.tsv"), 0);
    ASSERT_EQ(run("diagnose --corpus " + d + "/test.jsonl --bundle " + d + "/b.json --clusters 3 --out " + d + "/diag"), 0);

    EXPECT_EQ(slurp(dir / "metrics.tsv").rfind("method\tscorer\tgenerator", 0), 0u);
    for (const char* f : {"clusters.tsv", "zscores.tsv", "zscore_summary.tsv", "dmap_histograms.tsv"})
        EXPECT_TRUE(fs::exists(dir / "diag" / f)) << f;

    // Regenerating from the saved world definition reproduces the corpus.
    ASSERT_EQ(run("synth --world " + d + "/world.json --n-texts 16 --out " + d + "/again.jsonl"), 0);
    EXPECT_EQ(slurp(dir / "again.jsonl"), slurp(dir / "all.jsonl"));

    // Scorer selection and a bundle/corpus mismatch.
    ASSERT_EQ(run("score --scorer log_rank --corpus " + d + "/test.jsonl --bundle " + d + "/b.json --out " + d +
                  "/rank.tsv"),
              0);
    std::istringstream rank(slurp(dir / "rank.tsv"));
    std::string line;
    std::getline(rank, line);
    while (std::getline(rank, line)) EXPECT_NE(line.find("\tlog_rank\t"), std::string::npos);
    EXPECT_EQ(run("score --scorer binoculars --corpus " + d + "/test.jsonl --bundle " + d + "/b.json"), 2);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
    const fs::path dir = scratch("config");
    const std::string d = dir.string();
    std::ofstream(dir / "run.toml") << "n-texts = 4\nseed = 9\npreset = \"simpson\"\n";
    ASSERT_EQ(run("synth --config " + d + "/run.toml --out " + d + "/a.jsonl"), 0);
    ASSERT_EQ(run("synth --preset simpson --seed 9 --n-texts 4 --out " + d + "/b.jsonl"), 0);
    EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
    ASSERT_EQ(run("synth --config " + d + "/run.toml --n-texts 2 --out " + d + "/c.jsonl"), 0);
    ASSERT_EQ(run("synth --preset simpson --seed 9 --n-texts 2 --out " + d + "/d.jsonl"), 0);
    EXPECT_EQ(slurp(dir / "c.jsonl"), slurp(dir / "d.jsonl"));
}
