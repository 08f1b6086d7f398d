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

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace mder {
namespace {

TEST(ModelConfigTest, DefaultsAndDerivedWidths) {
  const ModelConfig c;
  EXPECT_EQ(input_dim(c, {}), 240u);
  EXPECT_EQ(cnn_map_width(c, {}), 120u);
  EXPECT_EQ(encoder_dim(c, {}), 430u);
  EXPECT_EQ(encoder_dim(c, parse_ablation({"cnn"})), 400u);
  EXPECT_EQ(input_dim(c, parse_ablation({"rule"})), 200u);
  EXPECT_THROW(parse_ablation({"lstm"}), ConfigError);
  ModelConfig bad;
  bad.kernel_rows = 2;
  EXPECT_THROW(validate(bad, {}), ConfigError);
  bad = ModelConfig{};
  bad.stride_rows = 2;
  EXPECT_THROW(validate(bad, {}), ConfigError);
}

TEST(ModelConfigTest, JsonRoundTrip) {
  ModelConfig c = testing::small_config();
  c.stride_cols = 3;
  const nlohmann::json j = c;
  const ModelConfig back = j.get<ModelConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  const AblationFlags a = parse_ablation({"cnn", "crf"});
  EXPECT_EQ(nlohmann::json(a).get<AblationFlags>().no_crf, true);
  EXPECT_EQ(ablation_label(a), "w/o cnn+crf");
}

TEST(ModelParamsTest, ShapesFollowTheConfig) {
  std::mt19937_64 rng(1);
  const ModelConfig c;
  const auto p = init_params<float>(c, {}, 50, rng);
  EXPECT_EQ(p.rule_embedding.rows(), 7);
  EXPECT_EQ(p.rule_embedding.cols(), 40);
  EXPECT_EQ(p.char_embedding.rows(), 50);
  EXPECT_EQ(p.lstm.size(), 2u);
  EXPECT_EQ(p.lstm[0][0].w.rows(), 800);
  EXPECT_EQ(p.lstm[0][0].w.cols(), 440);
  EXPECT_EQ(p.lstm[1][1].w.cols(), 600);
  EXPECT_EQ(p.cnn_kernels.rows(), 30);
  EXPECT_EQ(p.query.rows(), 430);
  EXPECT_EQ(p.query.cols(), 400);
  EXPECT_EQ(p.proj_weight.cols(), 6);
  EXPECT_EQ(p.transitions.rows(), 8);
  EXPECT_TRUE(p.rule_embedding.row(kPadRule).isZero());
  EXPECT_TRUE(p.char_embedding.row(kPadChar).isZero());
  EXPECT_EQ(p.key, p.query);
  EXPECT_EQ(p.lstm[0][0].b(250, 0), 1.0f);
  EXPECT_EQ(p.lstm[0][0].b(50, 0), 0.0f);
  EXPECT_NO_THROW(check_params(p));
}

TEST(ModelParamsTest, EveryAblationRemovesParameters) {
  std::mt19937_64 rng(2);
  const ModelConfig c = testing::small_config();
  const std::size_t full = init_params<float>(c, {}, 30, rng).parameter_count();
  for (const std::string name : {"rule", "cnn", "attention", "crf"}) {
    const auto p = init_params<float>(c, parse_ablation({name}), 30, rng);
    EXPECT_LT(p.parameter_count(), full) << name;
    EXPECT_NO_THROW(check_params(p));
  }
}

TEST(ModelParamsTest, CheckRejectsCorruptTensors) {
  std::mt19937_64 rng(3);
  auto p = init_params<float>(testing::tiny_config(), {}, 5, rng);
  p.query(0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(check_params(p), ShapeError);
  p = init_params<float>(testing::tiny_config(), {}, 5, rng);
  p.proj_bias.resize(5, 1);
  EXPECT_THROW(check_params(p), ShapeError);
}

TEST(VocabularyTest, ReservedIndicesAndUnknowns) {
  const Corpus c{"v", {{"bca", {}}, {"ab", {}}}};
  const CharVocabulary v = CharVocabulary::build(c);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.index(U'a'), 2u);
  EXPECT_EQ(v.index(U'c'), 4u);
  EXPECT_EQ(v.index(U'z'), kUnkChar);
}

TEST(VocabularyTest, EncodingPadsAndTruncates) {
  const Corpus c{"v", {{"SVM x", {}}}};
  const CharVocabulary v = CharVocabulary::build(c);
  const RuleLexicon lex({"SVM"}, {}, {});
  const EncodedSequence s = encode_sequence(std::string_view("SVM x"), v, lex, 600, 8);
  EXPECT_EQ(s.size(), 8u);
  EXPECT_EQ(s.real_length(), 5u);
  EXPECT_EQ(s.rule_ids[0], static_cast<std::uint32_t>(RuleTag::BM));
  EXPECT_EQ(s.rule_ids[4], static_cast<std::uint32_t>(RuleTag::UNK));
  EXPECT_EQ(s.rule_ids[6], kPadRule);
  EXPECT_EQ(s.char_ids[7], kPadChar);
  EXPECT_EQ(encode_sequence(std::string_view("SVM x"), v, lex, 3).size(), 3u);
}

TEST(NetworkTest, ForwardShapesAndMasking) {
  std::mt19937_64 rng(4);
  const Corpus c{"v", {{"abc def", {}}}};
  const CharVocabulary v = CharVocabulary::build(c);
  const auto p = init_params<double>(testing::small_config(), {}, v.size(), rng);
  const EncodedSequence s = encode_sequence(std::string_view("abc de"), v, RuleLexicon{}, 600, 9);
  const Matrix<double> z = forward(s, p);
  EXPECT_EQ(z.rows(), 9);
  EXPECT_EQ(z.cols(), 6);
  EXPECT_TRUE(z.allFinite());
  EXPECT_EQ(decode(z, s, p).size(), 6u);
  EXPECT_THROW(forward(EncodedSequence{}, p), ShapeError);
}

TEST(NetworkTest, AttentionRowsAreDistributionsOverRealColumns) {
  std::mt19937_64 rng(5);
  Matrix<double> q = Matrix<double>::Random(5, 3), k = Matrix<double>::Random(5, 3);
  const std::vector<std::uint8_t> mask = {1, 1, 1, 0, 0};
  const Matrix<double> a = layers::attention_weights(q, k, layers::Mask(mask));
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(a.row(i).sum(), 1.0, 1e-12);
    EXPECT_EQ(a(i, 3), 0.0);
    EXPECT_EQ(a(i, 4), 0.0);
  }
}

TEST(CheckpointTest, RoundTripPreservesPredictions) {
  const RuleLexicon lex = testing::demo_lexicon();
  const Corpus c = generate_synthetic(testing::area_spec("nlp"), 20, 3);
  ModelConfig mc = testing::small_config();
  TrainConfig tc;
  tc.max_epochs = 2;
  const TrainResult r = train(c, c, lex, mc, tc);
  std::stringstream buf;
  write_checkpoint(buf, r.tagger, {{"note", "test"}});
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 8), "MDERCKPT");

  std::stringstream in(bytes);
  const Tagger t = read_checkpoint(in, lex);
  EXPECT_EQ(t.vocab.chars(), r.tagger.vocab.chars());
  r.tagger.params.for_each([&](const std::string& name, const Matrix<Real>& m) {
    bool found = false;
    t.params.for_each([&](const std::string& n2, const Matrix<Real>& m2) {
      if (n2 == name) {
        found = true;
        EXPECT_TRUE(m.cwiseEqual(m2).all() || name == "crf.A") << name;
      }
    });
    EXPECT_TRUE(found) << name;
  });
  for (const auto& s : c.sentences) {
    EXPECT_EQ(t.entities(s.text), r.tagger.entities(s.text));
  }

  std::stringstream header_in(bytes);
  const auto header = read_checkpoint_header(header_in).json;
  bool has_gate = false;
  for (const auto& e : header.at("tensors")) has_gate |= e.at("name") == "bilstm.l0.fwd.W_f";
  EXPECT_TRUE(has_gate);
  EXPECT_EQ(header.at("run").at("note"), "test");
}

TEST(CheckpointTest, RejectsWrongLexiconAndCorruption) {
  const RuleLexicon lex = testing::demo_lexicon();
  const Corpus c = generate_synthetic(testing::area_spec("cv"), 10, 3);
  TrainConfig tc;
  tc.max_epochs = 1;
  const TrainResult r = train(c, c, lex, testing::tiny_config(), tc);
  std::stringstream buf;
  write_checkpoint(buf, r.tagger);
  const std::string bytes = buf.str();
  std::stringstream a(bytes);
  EXPECT_THROW(read_checkpoint(a, RuleLexicon({"x"}, {}, {})), CheckpointError);
  std::stringstream b(bytes.substr(0, bytes.size() - 10));
  EXPECT_THROW(read_checkpoint(b, lex), CheckpointError);
  std::stringstream d("NOTACKPTxxxxxxxxxxxxxxxx");
  EXPECT_THROW(read_checkpoint(d, lex), CheckpointError);
}

}  // namespace
}  // namespace mder
