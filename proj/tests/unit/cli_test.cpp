// Copyright 2026 The MDER Authors.
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
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mder_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = "MDER_DATA_DIR='" + mder::testing::data_dir() + "' '" +
                            MDER_CLI_PATH + "' " + args + " >'" + out.string() + "' 2>'" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

const char* kSmallModel =
    "--rule-dim 4 --char-dim 16 --hidden-dim 16 --attention-dim 32 --cnn-kernels 4 ";

TEST_F(CliTest, HelpListsCommandsAndFlags) {
  const CliRun r = run("--help");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* s : {"prepare", "split", "mix", "synth", "train", "eval", "grid", "predict",
                        "augment", "mine", "report", "--config", "--seed", "--lexicon-dir",
                        "--ablation", "--multiplier", "--repeats", "--min-edge-weight",
                        "--top-k", "--alias-file", "--exclude-file", "--split", "--epochs",
                        "--batch-size", "--lr", "--dropout"}) {
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
  }
}

TEST_F(CliTest, ErrorsAreJsonOnStderr) {
  const CliRun r = run("eval " + path("missing.ckpt") + " " + path("missing.jsonl"));
  EXPECT_NE(r.code, 0);
  const json j = json::parse(r.err);
  EXPECT_TRUE(j.contains("error"));
  EXPECT_TRUE(j.contains("message"));

  const CliRun bad = run("--ablation nothing synth nlp " + path("x.jsonl"));
  EXPECT_NE(bad.code, 0);
  EXPECT_EQ(json::parse(bad.err).at("error"), "usage");
}

TEST_F(CliTest, SynthTrainEvalPredict) {
  ASSERT_EQ(run("--seed 4 synth nlp " + path("all.jsonl") + " -n 120").code, 0);
  const json prov = json::parse(slurp(path("all.jsonl.run.json")));
  EXPECT_EQ(prov.at("run").at("seed"), 4);
  EXPECT_EQ(prov.at("sentences"), 120);

  CliRun r = run("--seed 4 split " + path("all.jsonl") + " " + path("folds"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out).at("train"), 84);

  r = run(std::string("-q --seed 4 --epochs 25 --lr 0.003 --batch-size 2 ") + kSmallModel + "train " +
          path("folds/train.jsonl") + " " + path("folds/val.jsonl") + " -o " +
          path("model.ckpt") + " --report " + path("train.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json rep = json::parse(slurp(path("train.json")));
  EXPECT_EQ(rep.at("run").at("model").at("hidden_dim"), 16);
  EXPECT_EQ(rep.at("runs").size(), 1u);

  r = run("eval " + path("model.ckpt") + " " + path("folds/test.jsonl") + " -o " +
          path("eval.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json ev = json::parse(slurp(path("eval.json")));
  EXPECT_GT(ev.at("f1").get<double>(), 0.3);
  EXPECT_TRUE(ev.at("per_type").contains("M"));
  EXPECT_EQ(ev.at("run").at("model").at("hidden_dim"), 16);

  {
    std::ofstream in(path("raw.jsonl"));
    in << json{{"id", 7}, {"text", "We train BERT on SQuAD."}}.dump() << "\n";
  }
  r = run("predict " + path("model.ckpt") + " " + path("raw.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json pred = json::parse(r.out);
  EXPECT_EQ(pred.at("id"), 7);
  ASSERT_TRUE(pred.at("entities").is_array());
  for (const auto& e : pred.at("entities")) {
    EXPECT_LT(e.at("start").get<int>(), e.at("end").get<int>());
  }

  ASSERT_EQ(run("report " + path("eval.json") + " " + path("eval.json") + " --format csv")
                .code,
            0);
  r = run("report " + path("eval.json") + " " + path("eval.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(json::parse(r.out).at("f1").at("std").get<double>(), 0.0, 1e-12);
}

TEST_F(CliTest, ConfigFileIsOverriddenByFlags) {
  {
    std::ofstream c(path("cfg.json"));
    c << json{{"seed", 9}, {"split", "8:1:1"}}.dump();
  }
  ASSERT_EQ(run("synth nlp " + path("a.jsonl") + " -n 100").code, 0);
  CliRun r = run("--config " + path("cfg.json") + " split " + path("a.jsonl") + " " + path("f"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out).at("train"), 80);
  r = run("--config " + path("cfg.json") + " --split 7:1:2 split " + path("a.jsonl") + " " +
          path("g"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out).at("train"), 70);
  EXPECT_EQ(json::parse(slurp(path("g/train.jsonl.run.json"))).at("run").at("seed"), 9);
}

TEST_F(CliTest, GridEmitsSquareMatrix) {
  ASSERT_EQ(run("synth nlp " + path("nlp.jsonl") + " -n 60").code, 0);
  ASSERT_EQ(run("synth cv " + path("cv.jsonl") + " -n 60").code, 0);
  ASSERT_EQ(run("mix " + path("mixed.jsonl") + " " + path("nlp.jsonl") + " " +
                path("cv.jsonl") + " --per-area 30")
                .code,
            0);
  const CliRun r = run(std::string("-q --epochs 2 ") + kSmallModel + "grid " + path("nlp.jsonl") +
                    " " + path("cv.jsonl") + " " + path("mixed.jsonl") + " -o " +
                    path("grid.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json g = json::parse(slurp(path("grid.json")));
  ASSERT_EQ(g.at("f1").size(), 3u);
  for (const auto& row : g.at("rows")) {
    EXPECT_EQ(row.at("f1").size(), 3u);
    EXPECT_TRUE(row.contains("std"));
  }
  EXPECT_EQ(g.at("corpora")[2], "mixed");
}

TEST_F(CliTest, AugmentScalesCorpus) {
  ASSERT_EQ(run("synth dm " + path("d.jsonl") + " -n 40").code, 0);
  const CliRun r = run("--multiplier 2.5 augment " + path("d.jsonl") + " " + path("aug.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out).at("output"), 100);
  const mder::Corpus c = mder::load_corpus(path("aug.jsonl"));
  EXPECT_EQ(c.size(), 100u);
  EXPECT_NO_THROW(mder::validate(c));
}

TEST_F(CliTest, MineWritesGraphsAndRankings) {
  const std::string fx = mder::testing::fixture_dir();
  const CliRun r = run("--alias-file " + fx + "/mining_aliases.tsv mine " + fx +
                    "/mining_papers.jsonl " + path("mined"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json g = json::parse(slurp(path("mined/graph_2021.json")));
  EXPECT_EQ(g.at("links").size(), 3u);
  EXPECT_TRUE(fs::exists(path("mined/graph_2021.graphml")));
  EXPECT_TRUE(fs::exists(path("mined/graph_2020.json")));
  const std::string rankings = slurp(path("mined/rankings.csv"));
  EXPECT_EQ(rankings.rfind("year,rank,entity,score\n", 0), 0u);
  EXPECT_NE(rankings.find("2021,1,lstm,1"), std::string::npos);
  EXPECT_NE(slurp(path("mined/datasets.csv")).find("2021,conll-2003,2"), std::string::npos);
}

TEST_F(CliTest, PrepareSegmentsPlainText) {
  {
    std::ofstream in(path("doc.txt"));
    in << "We use BERT. It works well.\n\nA second paragraph follows.\n";
  }
  const CliRun r = run("prepare " + path("doc.txt") + " " + path("doc.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(mder::load_corpus(path("doc.jsonl")).size(), 3u);
}

}  // namespace
