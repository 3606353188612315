// Copyright 2026 The c2v Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs the CLI through the shell with `args` appended.
CliRun cli(const std::string& args, const std::string& env = "") {
  const fs::path dir = fs::temp_directory_path() / "c2v_cli_capture";
  fs::create_directories(dir);
  const std::string cmd = env + " '" + std::string(C2V_CLI_PATH) + "' " + args + " >'" +
                          (dir / "out").string() + "' 2>'" + (dir / "err").string() + "'";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(dir / "out");
  r.err = slurp(dir / "err");
  return r;
}

class CliWorkspace : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "c2v_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream(root_ / "synth.toml")
        << "n_products = 160\nn_clusters = 4\nd_img_in = 8\nvocab_size = 120\n"
           "tokens_per_product = 8\ngamma = 0.0\nn_categories = 2\nseed = 5\n";
    std::ofstream(root_ / "model.toml")
        << "seed = 2\nmax_epochs = 3\nbatch_size = 128\nd_img_out = 8\nd_word = 4\n"
           "w2v_epochs = 2\nd_txt = 6\nmax_len = 6\nd_cf = 5\ncf_epochs = 3\nd_res = 4\n"
           "d_z = 8\n";
    ASSERT_EQ(cli("synth --config " + p("synth.toml") + " --out " + p("data")).code, 0);
    ASSERT_EQ(cli("split --catalog " + p("data/catalog.jsonl") + " --pairs " +
                  p("data/pairs.tsv") + " --seed 3 --out " + p("split"))
                  .code,
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::string p(const std::string& rel) { return (root_ / rel).string(); }
  static std::string data_args() {
    return " --catalog " + p("data/catalog.jsonl") + " --split " + p("split");
  }

  static fs::path root_;
};

fs::path CliWorkspace::root_;

TEST(Cli, UnknownSubcommandIsUsageError) {
  const CliRun r = cli("frobnicate");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("retrieve --store x --query y --bogus").code, 1);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(cli("--help").code, 0); }

TEST(Cli, MissingInputIsDataError) {
  const CliRun r = cli("retrieve --store /nonexistent/x.store --query p1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/x.store"), std::string::npos);
}

TEST(Cli, BadThreadCountIsUsageError) {
  EXPECT_EQ(cli("retrieve --store /nonexistent/x.store --query p1", "C2V_THREADS=abc").code, 1);
  EXPECT_EQ(cli("retrieve --store /nonexistent/x.store --query p1", "C2V_THREADS=0").code, 1);
}

TEST_F(CliWorkspace, SynthAndSplitWriteTheirFiles) {
  for (const char* f : {"data/catalog.jsonl", "data/pairs.tsv", "data/synth.toml",
                        "split/train.tsv", "split/validation.tsv", "split/test.tsv",
                        "split/split.toml"}) {
    EXPECT_TRUE(fs::exists(root_ / f)) << f;
  }
}

TEST_F(CliWorkspace, StageImageTrainsOnlyTheImageHead) {
  const CliRun r = cli("train --config " + p("model.toml") + data_args() +
                    " --stage image --out " + p("image_only"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root_ / "image_only/image.c2vm"));
  for (const char* f : {"text.c2vm", "words.txt", "cf.c2vm", "fusion.c2vm"}) {
    EXPECT_FALSE(fs::exists(root_ / "image_only" / f)) << f;
  }
  const CliRun bad = cli("train --config " + p("model.toml") + data_args() +
                      " --stage fusion --out " + p("image_only"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_EQ(cli("train" + data_args() + " --stage audio --out " + p("x")).code, 1);
}

TEST_F(CliWorkspace, StagedTrainingEvalEmbedRetrieve) {
  const std::string model = p("staged");
  ASSERT_EQ(cli("train --config " + p("model.toml") + data_args() +
                " --stage image,text,cf --out " + model).code, 0);
  const std::string image_bytes = slurp(root_ / "staged/image.c2vm");
  const CliRun f = cli("train --config " + p("model.toml") + data_args() +
                    " --stage fusion --fusion compressed --out " + model);
  ASSERT_EQ(f.code, 0) << f.err;
  EXPECT_EQ(slurp(root_ / "staged/image.c2vm"), image_bytes);
  EXPECT_TRUE(fs::exists(root_ / "staged/fusion.c2vm"));

  const std::string eval = "eval --config " + p("model.toml") + data_args() + " --model " +
                           model + " --seed 7 --home cat0 --out ";
  ASSERT_EQ(cli(eval + p("report1")).code, 0);
  ASSERT_EQ(cli(eval + p("report2")).code, 0);
  EXPECT_EQ(slurp(root_ / "report1/report.txt"), slurp(root_ / "report2/report.txt"));
  EXPECT_EQ(slurp(root_ / "report1/report.json"), slurp(root_ / "report2/report.json"));
  const std::string report = slurp(root_ / "report1/report.txt");
  EXPECT_NE(report.find("Content2Vec-compressed"), std::string::npos);
  EXPECT_NE(report.find("mixed"), std::string::npos);

  ASSERT_EQ(cli("embed --catalog " + p("data/catalog.jsonl") + " --model " + model +
                " --fusion compressed --out " + p("stores")).code, 0);
  const std::string store = slurp(root_ / "stores/compressed.store");
  EXPECT_EQ(store.rfind("c2v-store v1 dim=8 kind=compressed seed=1", 0), 0u);
  const std::string first_id = store.substr(store.find('\n') + 1,
                                            store.find('\t') - store.find('\n') - 1);
  const CliRun hits = cli("retrieve --store " + p("stores/compressed.store") + " --query " +
                       first_id + " --k 3 --out " + p("hits"));
  ASSERT_EQ(hits.code, 0) << hits.err;
  EXPECT_EQ(std::count(hits.out.begin(), hits.out.end(), '\n'), 3);
  EXPECT_EQ(slurp(root_ / "hits/retrieve.tsv"), hits.out);
  EXPECT_EQ(hits.out.find(first_id + "\t"), std::string::npos);
  EXPECT_EQ(cli("retrieve --store " + p("stores/compressed.store") + " --query nope").code, 2);
  EXPECT_EQ(cli("retrieve --store " + p("stores/compressed.store") + " --query " + first_id +
                " --k 0").code, 1);
}

TEST_F(CliWorkspace, IdenticalRunsGiveIdenticalArtifacts) {
  for (const char* out : {"run_a", "run_b"}) {
    ASSERT_EQ(cli("train --config " + p("model.toml") + data_args() + " --out " + p(out)).code, 0);
    ASSERT_EQ(cli("eval --config " + p("model.toml") + data_args() + " --model " + p(out) +
                  " --seed 7 --out " + p(std::string(out) + "/report")).code, 0);
  }
  for (const char* f : {"image.c2vm", "text.c2vm", "words.txt", "cf.c2vm", "fusion.c2vm",
                        "ensemble.c2vm", "report/report.txt", "report/report.json"}) {
    EXPECT_EQ(slurp(root_ / "run_a" / f), slurp(root_ / "run_b" / f)) << f;
  }
  ASSERT_EQ(cli("train --config " + p("model.toml") + data_args() + " --seed 9 --out " +
                p("run_c")).code, 0);
  EXPECT_NE(slurp(root_ / "run_a/image.c2vm"), slurp(root_ / "run_c/image.c2vm"));
}

}  // namespace
