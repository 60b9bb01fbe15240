#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("tcmot_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    int run(const std::string& args) const {
        const std::string cmd = std::string(TCMOT_CLI_PATH) + " " + args + " >" + path("stdout.txt") + " 2>" +
                                path("stderr.txt");
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string read(const std::string& name) const {
        std::ifstream in(path(name));
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void synth(const std::string& extra = "") const {
        ASSERT_EQ(run("synth --out " + path("det.csv") + " --gt " + path("gt.csv") +
                      " --n_frames 120 --d_in 6 " + extra),
                  0)
            << read("stderr.txt");
    }

    fs::path dir_;
};

const char* kSmallNet = "--d_in 6 --d_hidden 12 --d_emb 6";

}  // namespace

TEST_F(Cli, SynthTrackEval) {
    synth();
    EXPECT_TRUE(fs::exists(path("det.csv.feat")));
    ASSERT_EQ(run(std::string("track ") + kSmallNet + " --detections " + path("det.csv") + " --out " +
                  path("pred.csv") + " --dump-dir " + path("dump")),
              0)
        << read("stderr.txt");
    for (const char* f : {"tracklets.csv", "metrics.txt", "net.txt", "affinity.csv", "assignment.csv"}) {
        EXPECT_TRUE(fs::exists(dir_ / "dump" / "0" / f)) << f;
    }
    ASSERT_EQ(run("eval --gt " + path("gt.csv") + " --pred " + path("pred.csv") + " --json " + path("r.json")), 0)
        << read("stderr.txt");
    EXPECT_NE(read("stdout.txt").find("MOTA"), std::string::npos);
    const auto j = nlohmann::json::parse(read("r.json"));
    EXPECT_GT(j["mota"].get<double>(), 0.5);
}

TEST_F(Cli, GroundTruthAgainstItself) {
    synth();
    ASSERT_EQ(run("eval --gt " + path("gt.csv") + " --pred " + path("gt.csv") + " --json " + path("r.json")), 0);
    const auto j = nlohmann::json::parse(read("r.json"));
    EXPECT_EQ(j["mota"].get<double>(), 1.0);
    EXPECT_EQ(j["ids"].get<int>(), 0);
}

TEST_F(Cli, TrackIsByteIdenticalAcrossRuns) {
    synth();
    const std::string base = std::string("track ") + kSmallNet + " --detections " + path("det.csv") + " --out ";
    ASSERT_EQ(run(base + path("a.csv")), 0) << read("stderr.txt");
    ASSERT_EQ(run(base + path("b.csv")), 0) << read("stderr.txt");
    EXPECT_FALSE(read("a.csv").empty());
    EXPECT_EQ(read("a.csv"), read("b.csv"));
}

TEST_F(Cli, StagedCommandsMatchTrack) {
    synth();
    ASSERT_EQ(run(std::string("learn ") + kSmallNet + " --detections " + path("det.csv") + " --metrics-out " +
                  path("m.txt") + " --net-out " + path("n.txt")),
              0)
        << read("stderr.txt");
    ASSERT_EQ(run(std::string("associate ") + kSmallNet + " --detections " + path("det.csv") + " --metrics " +
                  path("m.txt") + " --net " + path("n.txt") + " --out " + path("staged.csv")),
              0)
        << read("stderr.txt");
    ASSERT_EQ(run(std::string("track ") + kSmallNet + " --detections " + path("det.csv") + " --out " +
                  path("full.csv")),
              0);
    EXPECT_EQ(read("staged.csv"), read("full.csv"));
    ASSERT_EQ(run("tracklets --detections " + path("det.csv") + " --out " + path("t.csv")), 0);
    EXPECT_FALSE(read("t.csv").empty());
}

TEST_F(Cli, ConfigFileAndFlagOverride) {
    synth();
    {
        std::ofstream cfg(path("cfg.txt"));
        cfg << "kappa=1\n";
    }
    EXPECT_EQ(run(std::string("track ") + kSmallNet + " --config " + path("cfg.txt") + " --detections " +
                  path("det.csv") + " --out " + path("x.csv")),
              1);
    EXPECT_NE(read("stderr.txt").find("kappa"), std::string::npos);
    EXPECT_EQ(run(std::string("track ") + kSmallNet + " --config " + path("cfg.txt") + " --kappa 3 --detections " +
                  path("det.csv") + " --out " + path("x.csv")),
              0)
        << read("stderr.txt");
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("no-such-command"), 1);
    EXPECT_EQ(run("eval --gt " + path("missing.csv") + " --pred " + path("missing.csv")), 1);
    {
        std::ofstream bad(path("bad.csv"));
        bad << "1,-1,10,20,-5,40,0.9\n";
    }
    EXPECT_EQ(run("tracklets --detections " + path("bad.csv") + " --out " + path("t.csv")), 1);
    EXPECT_NE(read("stderr.txt").find("line 1"), std::string::npos) << read("stderr.txt");
    synth();
    // Metrics learned for one segment count cannot serve a sequence with more segments.
    {
        std::ofstream m(path("m.txt"));
        m << "";
    }
    EXPECT_NE(run(std::string("associate ") + kSmallNet + " --detections " + path("det.csv") + " --metrics " +
                  path("m.txt") + " --net " + path("m.txt") + " --out " + path("o.csv")),
              0);
}
