// Runs the vbforge binary as a subprocess.

#include <gtest/gtest.h>

#include <cstdio>
#include <sys/wait.h>

#include "test_support.hpp"
#include "vbforge/corpus_model.hpp"

using namespace test_support;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result cli(const std::string & args) {
    const std::string cmd = std::string(VBFORGE_CLI_PATH) + " " + args + " 2>&1";
    Result r;
    FILE * p = ::popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string q(const fs::path & p) { return "'" + p.string() + "'"; }

} // namespace

TEST(Cli, MalformedConfigExitsTwoWithoutOutputs) {
    TempDir d("cli-bad");
    write_fixture(d.path(), standard_blocks());
    auto j = standard_config();
    j["surprise"] = true;
    write_json_file(d / "config.json", j);
    auto r = cli("--config " + q(d / "config.json") + " run");
    EXPECT_EQ(r.code, 2) << r.out;
    EXPECT_NE(r.out.find("surprise"), std::string::npos);
    EXPECT_FALSE(fs::exists(d / "out"));

    write_file(d / "broken.json", "{");
    r = cli("--config " + q(d / "broken.json") + " ingest");
    EXPECT_EQ(r.code, 2) << r.out;
    EXPECT_FALSE(fs::exists(d / "out"));
}

TEST(Cli, MissingConfigIsUsageError) {
    EXPECT_EQ(cli("run").code, 2);
}

TEST(Cli, UnknownFlagAndConflictingModes) {
    EXPECT_EQ(cli("--frobnicate run").code, 2);
    EXPECT_EQ(cli("--strict --lenient run").code, 2);
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, TileplanLargerEncoder) {
    const auto r = cli("tileplan 1024 1024 --encoder 512/16 --max-tiles 4");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["plan"]["grid"], nlohmann::json::array({2, 2}));
    EXPECT_EQ(j["effective_config"]["encoder"], "512/16");
    EXPECT_EQ(j["effective_config"]["max_tiles"], 4);

    const auto t = cli("tileplan 768 384 --text");
    ASSERT_EQ(t.code, 0);
    EXPECT_NE(t.out.find("grid 1x2"), std::string::npos);
    EXPECT_NE(t.out.find("2187 total"), std::string::npos);

    EXPECT_EQ(cli("tileplan 0 10").code, 2);
    EXPECT_EQ(cli("tileplan 10 10 --encoder 512").code, 2);
}

TEST(Cli, StatsOnRegistry) {
    TempDir d("cli-stats");
    auto r = cli("stats " + std::string(VBFORGE_DATA_DIR) + "/visionblocks_table6.json --out " + q(d / "s"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("Overall Total"), std::string::npos);
    EXPECT_NE(r.out.find("6,351,515"), std::string::npos);
    EXPECT_TRUE(fs::exists(d / "s" / "stats.json"));
    EXPECT_TRUE(fs::exists(d / "s" / "effective_config.json"));

    r = cli("stats " + std::string(VBFORGE_DATA_DIR) + "/visionblocks_table6.json --json");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(nlohmann::json::parse(r.out)["overall_total"], 6351515);

    EXPECT_EQ(cli("stats " + q(d / "missing.json")).code, 1);
}

TEST(Cli, Recipe) {
    auto r = cli("recipe all");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["stages"].size(), 3u);
    EXPECT_EQ(j["effective_config"]["max_tiles"], 6);

    TempDir d("cli-recipe");
    r = cli("--max-tiles 4 --out " + q(d / "plans") + " recipe 2");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto s2 = read_json_file(d / "plans" / "stage2.json");
    EXPECT_EQ(s2["visual_policy"]["max_tiles"], 4);
    EXPECT_TRUE(fs::exists(d / "plans" / "effective_config.json"));

    EXPECT_EQ(cli("recipe 4").code, 2);
    EXPECT_EQ(cli("recipe two").code, 2);
}

TEST(Cli, RunEndToEnd) {
    TempDir d("cli-run");
    write_fixture(d.path(), standard_blocks());
    write_json_file(d / "config.json", standard_config());
    const auto r = cli("--config " + q(d / "config.json") + " --workers 4 run");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("ingest: 1000 samples"), std::string::npos);
    EXPECT_NE(r.out.find("Overall Total"), std::string::npos);
    EXPECT_TRUE(fs::exists(d / "out" / "compose" / "manifest.json"));
    EXPECT_EQ(read_json_file(d / "out" / "compose" / "effective_config.json")["workers"], 4);

    // stages rerun on their own, and stats can read the composed manifest
    EXPECT_EQ(cli("--config " + q(d / "config.json") + " compose").code, 0);
    const auto s = cli("stats " + q(d / "out" / "compose" / "manifest.json"));
    EXPECT_EQ(s.code, 0);
    EXPECT_NE(s.out.find("Text-only share"), std::string::npos);
}

TEST(Cli, OverridesAndLenientMode) {
    TempDir d("cli-lenient");
    write_fixture(d.path(), standard_blocks());
    write_json_file(d / "config.json", standard_config());
    std::ofstream(d / "blocks" / "chat.jsonl", std::ios::app) << "not json at all\n";
    auto r = cli("--config " + q(d / "config.json") + " ingest");
    EXPECT_EQ(r.code, 1) << r.out;
    EXPECT_FALSE(read_json_file(d / "out" / "ingest" / "manifest.json")["complete"].get<bool>());

    r = cli("--config " + q(d / "config.json") + " --lenient --seed 9 --out " + q(d / "o2") + " ingest");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto m = read_json_file(d / "o2" / "ingest" / "manifest.json");
    EXPECT_EQ(m["seed"], 9);
    EXPECT_EQ(m["total_count"], 1000);
}
