#include "teach/app/pipelines.hpp"

#include "app_fixture.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

namespace teach::app {
namespace {

using testing_support::TempDir;

int teach(const std::string& args) {
    const std::string cmd = std::string(TEACH_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
    TempDir dir;
    EXPECT_EQ(teach("--help"), 0);
    EXPECT_EQ(teach(""), 2);
    EXPECT_EQ(teach("fly"), 2);
    EXPECT_EQ(teach("run --fixed-profile reckless"), 2);
    EXPECT_EQ(teach("run --esn " + dir.file("missing.json") + " --fixed-profile normal"), 2);

    std::ofstream(dir.file("bad.json")) << R"({"seed": 1, "unknown_key": true})";
    EXPECT_EQ(teach("gen-data --config " + dir.file("bad.json")), 2);

    std::ofstream(dir.file("small.json")) << R"({"episode_length": 10, "gen_data": {"hold_min": 2, "hold_max": 4}})";
    EXPECT_EQ(teach("gen-data --config " + dir.file("small.json") + " --episodes 1 --out " + dir.file("data")), 0);
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "data" / "episode_000.csv"));
    EXPECT_EQ(teach("gen-data --episodes 1 --out /proc/teach-no-such-dir"), 3);
}

TEST(Cli, RunTwiceIsByteIdentical) {
    TempDir dir;
    save_esn(testing_support::test_esn(), dir.file("esn.json"));
    save_agent(agent::Agent(agent::AgentConfig{}), dir.file("agent.json"));
    std::ofstream(dir.file("cfg.json")) << R"({"episode_length": 20})";
    const std::string common = "run --config " + dir.file("cfg.json") + " --seed 4 --esn " + dir.file("esn.json") +
                               " --agent " + dir.file("agent.json");
    ASSERT_EQ(teach(common + " --out " + dir.file("a")), 0);
    ASSERT_EQ(teach(common + " --out " + dir.file("b")), 0);
    const auto a = testing_support::read_file(dir.path() / "a" / "episode.jsonl");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, testing_support::read_file(dir.path() / "b" / "episode.jsonl"));
}

TEST(Cli, CorruptArtifactIsAConfigError) {
    TempDir dir;
    save_esn(testing_support::test_esn(), dir.file("esn.json"));
    auto text = testing_support::read_file(dir.path() / "esn.json");
    text[text.size() / 2] = text[text.size() / 2] == '1' ? '2' : '1';
    std::ofstream(dir.file("esn.json"), std::ios::trunc | std::ios::binary) << text;
    EXPECT_EQ(teach("run --esn " + dir.file("esn.json") + " --fixed-profile normal --out " + dir.file("r")), 2);
}

}  // namespace
}  // namespace teach::app
