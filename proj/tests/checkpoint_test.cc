#include "ftm/checkpoint.h"

#include <gtest/gtest.h>

#include "ftm/errors.h"
#include "ftm/model_config.h"
#include "test_util.h"

namespace ftm {
namespace {

using testing::random_tensor;

TEST(CheckpointTest, RoundTripPreservesValuesAndBytes) {
  std::mt19937_64 rng(1);
  Checkpoint ck;
  auto a = random_tensor<float>(3, 5, rng);
  auto b = random_tensor<double>(1, 7, rng);
  ck.put("enc.0.attn.wq", a);
  ck.put("phone.b", b);
  auto bytes = ck.serialize();
  EXPECT_EQ(bytes.substr(0, 4), "FTMC");
  auto back = Checkpoint::deserialize(bytes);
  EXPECT_EQ(back.serialize(), bytes);
  auto a2 = back.get<float>("enc.0.attn.wq");
  auto b2 = back.get<double>("phone.b");
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a2[i], a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b2[i], b[i]);
  EXPECT_EQ(back.entry("phone.b").dtype, DType::kF64);
}

TEST(CheckpointTest, PutReplacesAndOrderIsStable) {
  Checkpoint ck;
  ck.put("x", Tensor<float>(1, 1, 1.f));
  ck.put("y", Tensor<float>(1, 1, 2.f));
  ck.put("x", Tensor<float>(1, 1, 3.f));
  ASSERT_EQ(ck.entries().size(), 2u);
  EXPECT_EQ(ck.entries()[0].name, "x");
  EXPECT_EQ(ck.get<float>("x")[0], 3.f);
}

TEST(CheckpointTest, MissingAndCorruptInputs) {
  Checkpoint ck;
  ck.put("x", Tensor<float>(2, 2, 1.f));
  EXPECT_THROW(ck.get<float>("nope"), DataError);
  auto bytes = ck.serialize();
  EXPECT_THROW(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 2)), DataError);
  EXPECT_THROW(Checkpoint::deserialize("FTMX" + bytes.substr(4)), DataError);
}

TEST(ModelConfigTest, DefaultsAndDeskPresetValidate) {
  ModelConfig full;
  EXPECT_NO_THROW(full.validate());
  EXPECT_EQ(full.input_dim, 280);
  EXPECT_EQ(full.n_layers, 6);
  EXPECT_EQ(full.d_model, 256);
  EXPECT_EQ(full.block_size(), 64);
  EXPECT_EQ(full.receptive_field(), 64);
  auto desk = ModelConfig::desk();
  EXPECT_NO_THROW(desk.validate());
  EXPECT_EQ(desk.n_layers, 2);
  EXPECT_EQ(desk.d_model, 64);
}

TEST(ModelConfigTest, RejectsInconsistentGeometry) {
  ModelConfig c;
  c.s2 = 4;  // 4 * 4 != 32
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig();
  c.k1 = 8;  // overlapping first convolution
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig();
  c.k2 = 32;  // receptive field 128 > 64
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig();
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ModelConfigTest, KeyValueRoundTrip) {
  auto desk = ModelConfig::desk();
  desk.summary_kind = SummaryKind::kSave;
  auto back = ModelConfig::from_kv(desk.to_kv(), ModelConfig());
  EXPECT_EQ(back.to_kv(), desk.to_kv());
  EXPECT_THROW(ModelConfig::from_kv({{"d_model", "abc"}}, ModelConfig()), ConfigError);
  EXPECT_THROW(ModelConfig::from_kv({{"bogus", "1"}}, ModelConfig()), ConfigError);
  EXPECT_THROW(parse_summary_kind("gru"), ConfigError);
}

}  // namespace
}  // namespace ftm
