#include <gtest/gtest.h>

#include <fstream>

#include "mpvit/checkpoint.hpp"
#include "mpvit/container.hpp"
#include "mpvit/model.hpp"
#include "test_support.hpp"

using namespace mpvit;
using mpvit::testing::micro_config;
using mpvit::testing::random_sample;
using mpvit::testing::rng_for;
using mpvit::testing::scratch_dir;
using mpvit::testing::slurp;

TEST(Container, RoundTrip) {
  auto dir = scratch_dir("container");
  std::vector<Record> recs{{"a/b", {2, 2}, {1, 2, 3, 4}}, {"c", {1}, {-0.5}}};
  write_records(dir / "x.bin", kCheckpointMagic, recs);
  EXPECT_EQ(read_records(dir / "x.bin", kCheckpointMagic), recs);
  const std::string bytes = slurp(dir / "x.bin");
  EXPECT_EQ(bytes.substr(0, 4), "MPVT");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
}

TEST(Container, WrongMagicRejected) {
  auto dir = scratch_dir("container_magic");
  write_records(dir / "v.bin", kVolumeMagic, {{"FLAIR", {1, 1, 1}, {0.0}}});
  EXPECT_THROW(read_records(dir / "v.bin", kCheckpointMagic), FormatError);
  std::ofstream(dir / "junk.bin") << "nope";
  EXPECT_THROW(read_records(dir / "junk.bin", kCheckpointMagic), FormatError);
}

TEST(Container, TruncationRejected) {
  auto dir = scratch_dir("container_trunc");
  write_records(dir / "x.bin", kCheckpointMagic, {{"w", {4}, {1, 2, 3, 4}}});
  const std::string bytes = slurp(dir / "x.bin");
  for (std::size_t cut : {bytes.size() - 1, bytes.size() - 8, std::size_t{10}}) {
    std::ofstream(dir / "t.bin", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(cut));
    EXPECT_THROW(read_records(dir / "t.bin", kCheckpointMagic), FormatError) << cut;
  }
}

TEST(Container, UnsupportedVersionRejected) {
  auto dir = scratch_dir("container_version");
  write_records(dir / "x.bin", kCheckpointMagic, {});
  std::string bytes = slurp(dir / "x.bin");
  bytes[4] = 9;
  std::ofstream(dir / "x.bin", std::ios::binary) << bytes;
  EXPECT_THROW(read_records(dir / "x.bin", kCheckpointMagic), FormatError);
}

TEST(Checkpoint, RoundTripGivesBitwiseIdenticalForward) {
  auto dir = scratch_dir("ckpt");
  for (bool single_float : {false, true}) {
    ModelConfig c = micro_config();
    c.modality_vector = !single_float;
    auto rng = rng_for(1);
    if (single_float) {
      auto params = init_parameters<float>(c, 2);
      save_checkpoint(dir / "f.mpvt", c, params, {0.75, 3});
      auto ck = load_checkpoint(dir / "f.mpvt");
      EXPECT_EQ(ck.params.cast<float>(), params);
      auto s = random_sample<float>(c, rng);
      EXPECT_EQ(predict(ck.config, ck.params.cast<float>(), s).prob, predict(c, params, s).prob);
      EXPECT_EQ(ck.info.val_auc, 0.75);
      EXPECT_EQ(ck.info.epoch, 3);
    } else {
      auto params = init_parameters<double>(c, 2);
      save_checkpoint(dir / "d.mpvt", c, params);
      auto ck = load_checkpoint(dir / "d.mpvt");
      EXPECT_EQ(ck.params, params);
      EXPECT_EQ(ck.config.embed_dim, c.embed_dim);
      EXPECT_EQ(ck.config.axial_grid, c.axial_grid);
      EXPECT_EQ(ck.config.modality_vector, c.modality_vector);
      auto s = random_sample(c, rng);
      EXPECT_EQ(predict(ck.config, ck.params, s).prob, predict(c, params, s).prob);
      EXPECT_EQ(ck.info.val_auc, -1.0);
    }
  }
}

TEST(Checkpoint, RecordsAreSortedAndDeterministic) {
  auto dir = scratch_dir("ckpt_sorted");
  ModelConfig c = micro_config();
  auto params = init_parameters<double>(c, 0);
  save_checkpoint(dir / "a.mpvt", c, params);
  save_checkpoint(dir / "b.mpvt", c, params);
  EXPECT_EQ(slurp(dir / "a.mpvt"), slurp(dir / "b.mpvt"));
  auto recs = read_records(dir / "a.mpvt", kCheckpointMagic);
  for (std::size_t i = 1; i < recs.size(); ++i) EXPECT_LT(recs[i - 1].path, recs[i].path);
}

TEST(Checkpoint, BadMagicRejected) {
  auto dir = scratch_dir("ckpt_magic");
  write_records(dir / "v.mpvt", kVolumeMagic, {{"FLAIR", {1, 1, 1}, {0.0}}});
  EXPECT_THROW(load_checkpoint(dir / "v.mpvt"), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "missing.mpvt"), Error);
}

TEST(Checkpoint, LayoutMismatchRejected) {
  auto dir = scratch_dir("ckpt_layout");
  ModelConfig c = micro_config();
  save_checkpoint(dir / "c.mpvt", c, init_parameters<double>(c, 0));
  auto recs = read_records(dir / "c.mpvt", kCheckpointMagic);

  auto dropped = recs;
  dropped.erase(std::find_if(dropped.begin(), dropped.end(), [](const Record& r) { return r.path == "axial/cls"; }));
  write_records(dir / "dropped.mpvt", kCheckpointMagic, dropped);
  EXPECT_THROW(load_checkpoint(dir / "dropped.mpvt"), FormatError);

  auto reshaped = recs;
  for (auto& r : reshaped)
    if (r.path == "axial/head/bias") r = Record{r.path, {3}, {0, 0, 0}};
  write_records(dir / "reshaped.mpvt", kCheckpointMagic, reshaped);
  EXPECT_THROW(load_checkpoint(dir / "reshaped.mpvt"), FormatError);

  auto extra = recs;
  extra.push_back({"zzz/unknown", {1}, {0.0}});
  write_records(dir / "extra.mpvt", kCheckpointMagic, extra);
  EXPECT_THROW(load_checkpoint(dir / "extra.mpvt"), FormatError);
}
