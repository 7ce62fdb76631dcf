#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* kSmallConfig =
    "n_instances = 200\n"
    "train_per_condition = 50\n"
    "val_per_condition = 25\n"
    "test_per_condition = 25\n"
    "embed_dim = 8\n"
    "epochs = 2\n"
    "batch_size = 32\n";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / (std::string("condsim_cli_") + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
    cfg_ = path("small.cfg");
    std::ofstream(cfg_) << kSmallConfig;
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string path(const std::string& rel) const { return (root_ / rel).string(); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(CONDSIM_BIN) + " " + args + " > " + path("stdout.txt") +
                            " 2> " + path("stderr.txt");
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  }

  std::string with_cfg(const std::string& sub, const std::string& rest) const {
    return sub + " --config " + cfg_ + " " + rest;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
  }

  static int lines(const std::string& p) {
    std::ifstream is(p);
    int n = 0;
    for (std::string l; std::getline(is, l);) ++n;
    return n;
  }

  fs::path root_;
  std::string cfg_;
};

}  // namespace

TEST_F(Cli, GenIsDeterministic) {
  ASSERT_EQ(run(with_cfg("gen", "--out " + path("a"))), 0);
  ASSERT_EQ(run(with_cfg("gen", "--out " + path("b"))), 0);
  for (const char* f : {"train.triplets", "val.triplets", "test.triplets", "config.resolved"})
    EXPECT_EQ(slurp(path(std::string("a/") + f)), slurp(path(std::string("b/") + f))) << f;
  EXPECT_FALSE(slurp(path("a/train.triplets")).empty());
  ASSERT_EQ(run(with_cfg("gen", "--seed 1 --out " + path("c"))), 0);
  EXPECT_NE(slurp(path("a/train.triplets")), slurp(path("c/train.triplets")));
}

TEST_F(Cli, ZeroConditionsIsConfigErrorAndWritesNothing) {
  EXPECT_EQ(run(with_cfg("gen", "--set n_conditions=0 --out " + path("z"))), 2);
  EXPECT_FALSE(fs::exists(path("z")));
  EXPECT_EQ(run(with_cfg("gen", "--set no_such_key=1 --out " + path("z"))), 2);
  EXPECT_EQ(run("gen --bogus-flag"), 2);
  EXPECT_EQ(run(with_cfg("train", "--variant nope --data " + path("d"))), 2);
}

TEST_F(Cli, MissingInputsAreIoErrors) {
  EXPECT_EQ(run(with_cfg("train", "--data " + path("missing") + " --out " + path("r"))), 4);
  EXPECT_EQ(run("gen --config " + path("nope.cfg")), 4);
  EXPECT_EQ(run(with_cfg("report", "--in " + path("nope.txt") + " --out " + path("r"))), 4);
}

TEST_F(Cli, SupervisedOnUnlabeledDataIsDataError) {
  ASSERT_EQ(run(with_cfg("gen", "--set train_labels=false --out " + path("d"))), 0);
  EXPECT_EQ(run(with_cfg("train", "--variant supervised --data " + path("d") + " --out " +
                                      path("r"))),
            3);
  EXPECT_EQ(run(with_cfg("train", "--variant fusion --data " + path("d") + " --out " + path("r"))),
            0);
}

TEST_F(Cli, TrainEvalReportPipelineIsReproducible) {
  ASSERT_EQ(run(with_cfg("gen", "--out " + path("d"))), 0);
  for (const char* r : {"r1", "r2"}) {
    ASSERT_EQ(run(with_cfg("train", "--variant disc_reg --data " + path("d") + " --out " + path(r))),
              0);
    ASSERT_EQ(run(with_cfg("eval", "--variant disc_reg --data " + path("d") + " --out " + path(r))),
              0);
    ASSERT_EQ(run(with_cfg("report", "--in " + path(std::string(r) + "/report.txt") + " --out " +
                                         path(std::string(r) + "/csv"))),
              0);
  }
  for (const char* f : {"model.ckpt", "train.log", "report.txt", "config.resolved",
                        "csv/summary.csv", "csv/per_condition.csv", "csv/cost.csv", "csv/plan.csv"})
    EXPECT_EQ(slurp(path(std::string("r1/") + f)), slurp(path(std::string("r2/") + f))) << f;
  EXPECT_EQ(lines(path("r1/train.log")), 2);
  EXPECT_EQ(lines(path("r1/csv/per_condition.csv")), 5);
  EXPECT_EQ(lines(path("r1/csv/cost.csv")), 5);
  EXPECT_NE(slurp(path("r1/csv/summary.csv")).find("ot_accuracy,"), std::string::npos);
}

TEST_F(Cli, EvalRejectsEmbeddingCountMismatch) {
  ASSERT_EQ(run(with_cfg("gen", "--out " + path("d"))), 0);
  ASSERT_EQ(run(with_cfg("train", "--data " + path("d") + " --out " + path("r"))), 0);
  EXPECT_EQ(run(with_cfg("eval", "--set n_embeddings=6 --data " + path("d") + " --out " + path("r"))),
            2);
  // A corrupted checkpoint is a data problem.
  std::ofstream(path("bad.ckpt")) << "garbage";
  EXPECT_EQ(run(with_cfg("eval", "--checkpoint " + path("bad.ckpt") + " --data " + path("d") +
                                     " --out " + path("r"))),
            3);
}

TEST_F(Cli, ReversedWritesTwoRowsPerCheckpoint) {
  ASSERT_EQ(run(with_cfg("gen", "--out " + path("d"))), 0);
  ASSERT_EQ(run(with_cfg("train", "--variant fusion --data " + path("d") + " --out " + path("f"))), 0);
  ASSERT_EQ(run(with_cfg("train", "--variant supervised --data " + path("d") + " --out " + path("s"))),
            0);
  ASSERT_EQ(run(with_cfg("reversed", "--data " + path("d") + " --checkpoint " + path("f/model.ckpt") +
                                         " --checkpoint " + path("s/model.ckpt") + " --out " +
                                         path("cmp"))),
            0);
  const std::string csv = slurp(path("cmp/reversed.csv"));
  EXPECT_EQ(lines(path("cmp/reversed.csv")), 5);
  EXPECT_EQ(csv.rfind("variant,checkpoint,mode,orig_rate,rev_rate,both_valid,total\n", 0), 0u);
  EXPECT_NE(csv.find("fusion,"), std::string::npos);
  EXPECT_NE(csv.find("supervised,"), std::string::npos);
}

TEST_F(Cli, SweepWritesOneRowPerGridPoint) {
  ASSERT_EQ(run(with_cfg("sweep", "--param K --set epochs=1 --set sweep_grid=2,4 --out " +
                                      path("sw"))),
            0);
  EXPECT_EQ(lines(path("sw/sweep.csv")), 3);
  EXPECT_NE(slurp(path("sw/sweep.csv")).find("\nK,2,"), std::string::npos);
  // A bad grid point fails before anything is trained.
  EXPECT_EQ(run(with_cfg("sweep", "--param lambda --set sweep_grid=0.1,abc --out " + path("sw2"))),
            2);
  EXPECT_FALSE(fs::exists(path("sw2/sweep.csv")));
  EXPECT_EQ(run(with_cfg("sweep", "--param depth --out " + path("sw3"))), 2);
}
