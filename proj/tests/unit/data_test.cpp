#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "mpvit/dataset.hpp"
#include "mpvit/manifest.hpp"
#include "mpvit/sampler.hpp"
#include "mpvit/synth.hpp"
#include "mpvit/volume.hpp"
#include "test_support.hpp"

using namespace mpvit;
using mpvit::testing::random_tensor;
using mpvit::testing::rng_for;
using mpvit::testing::scratch_dir;
using mpvit::testing::slurp;

namespace fs = std::filesystem;

TEST(Resample, SameGridIsBitwiseCopy) {
  auto rng = rng_for(1);
  auto v = random_tensor(Shape{5, 3, 4}, rng);
  EXPECT_EQ(resample(v, Grid{5, 3, 4}), v);
}

TEST(Resample, ConstantStaysConstant) {
  Tensor<double> v(Shape{6, 5, 4}, 0.42);
  for (Grid target : {Grid{3, 10, 2}, Grid{7, 7, 7}, Grid{1, 1, 1}}) {
    auto r = resample(v, target);
    for (double x : r.data()) EXPECT_NEAR(x, 0.42, 1e-15);
  }
}

TEST(Resample, RampHalvedAlongXAveragesPairs) {
  Tensor<double> v(Shape{4, 4, 4});
  for (std::size_t x = 0; x < 4; ++x)
    for (std::size_t i = 0; i < 16; ++i) v[x * 16 + i] = static_cast<double>(x);
  auto r = resample(v, Grid{2, 4, 4});
  ASSERT_EQ(r.shape(), (Shape{2, 4, 4}));
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_NEAR(r[i], 0.5, 1e-15);
    EXPECT_NEAR(r[16 + i], 2.5, 1e-15);
  }
}

TEST(Resample, ZeroTargetRejected) {
  EXPECT_THROW(resample(Tensor<double>(Shape{2, 2, 2}), Grid{2, 0, 2}), DimensionError);
}

TEST(ResampleProperty, IdempotentOnSameTarget) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto rng = rng_for(seed);
    std::uniform_int_distribution<std::size_t> dim(1, 9);
    auto v = random_tensor(Shape{dim(rng), dim(rng), dim(rng)}, rng);
    const Grid target{dim(rng), dim(rng), dim(rng)};
    auto once = resample(v, target);
    auto twice = resample(once, target);
    for (std::size_t i = 0; i < once.numel(); ++i) ASSERT_NEAR(once[i], twice[i], 1e-6);
  }
}

TEST(Normalize, Examples) {
  auto a = normalize(Tensor<double>(Shape{3, 1, 1}, std::vector<double>{2, 4, 6}));
  EXPECT_EQ(a, Tensor<double>(Shape{3, 1, 1}, std::vector<double>{0, 0.5, 1}));
  auto b = normalize(Tensor<double>(Shape{2, 2, 1}, 7.0));
  for (double v : b.data()) EXPECT_EQ(v, 0.0);
  Tensor<double> unit(Shape{4, 1, 1}, std::vector<double>{0, 0.25, 1, 0.6});
  EXPECT_EQ(normalize(unit), unit);
}

TEST(BlockAverage, MeansOfBlocks) {
  Tensor<double> v(Shape{2, 2, 2});
  for (std::size_t i = 0; i < 8; ++i) v[i] = static_cast<double>(i);
  auto r = block_average(v, Grid{2, 2, 2});
  EXPECT_EQ(r, Tensor<double>(Shape{1, 1, 1}, std::vector<double>{3.5}));
  EXPECT_THROW(block_average(v, Grid{3, 1, 1}), DimensionError);
}

TEST(VolumeFile, RoundTripAndWrongMagic) {
  auto dir = scratch_dir("volume_file");
  auto rng = rng_for(2);
  auto v = random_tensor(Shape{3, 4, 5}, rng);
  write_volume(dir / "v.mpvv", "FLAIR", v);
  EXPECT_EQ(read_volume(dir / "v.mpvv"), v);
  EXPECT_EQ(slurp(dir / "v.mpvv").substr(0, 4), "MPVV");
  std::ofstream(dir / "bad.mpvv") << "MPVTxxxxxxxx";
  EXPECT_THROW(read_volume(dir / "bad.mpvv"), FormatError);
}

namespace {

ManifestRecord make_record(std::string id, int label, Split split, std::size_t missing_from = kTotalContrasts) {
  ManifestRecord r;
  r.id = std::move(id);
  r.label = label;
  r.split = split;
  for (std::size_t c = 0; c < kTotalContrasts; ++c)
    r.paths[c] = c >= missing_from && c < kTotalContrasts - 1 ? std::string(kMissingPath) : r.id + "_" + std::to_string(c) + ".mpvv";
  return r;
}

}  // namespace

TEST(Manifest, RoundTrip) {
  auto dir = scratch_dir("manifest");
  Manifest m;
  m.records = {make_record("a", 0, Split::train), make_record("b", 1, Split::val, 3), make_record("c", 0, Split::test, 5)};
  write_manifest(dir / "m.tsv", m);
  EXPECT_EQ(read_manifest(dir / "m.tsv"), m);
  EXPECT_EQ(m.split(Split::val).size(), 1u);
  EXPECT_EQ(m.split(Split::val)[0]->id, "b");
}

TEST(Manifest, MalformedLinesRejected) {
  auto dir = scratch_dir("manifest_bad");
  std::ofstream(dir / "short.tsv") << "a\t0\ttrain\tx\n";
  EXPECT_THROW(read_manifest(dir / "short.tsv"), FormatError);
  std::ofstream(dir / "label.tsv") << "a\t2\ttrain\t1\t2\t3\t4\t5\t6\t7\n";
  EXPECT_THROW(read_manifest(dir / "label.tsv"), FormatError);
  std::ofstream(dir / "split.tsv") << "a\t1\tholdout\t1\t2\t3\t4\t5\t6\t7\n";
  EXPECT_THROW(read_manifest(dir / "split.tsv"), FormatError);
  std::ofstream(dir / "dup.tsv") << "a\t1\ttrain\t1\t2\t3\t4\t5\t6\t7\na\t0\ttrain\t1\t2\t3\t4\t5\t6\t7\n";
  EXPECT_THROW(read_manifest(dir / "dup.tsv"), DataError);
  EXPECT_THROW(read_manifest(dir / "absent.tsv"), DataError);
}

TEST(Manifest, ValidationChecksFiles) {
  auto dir = scratch_dir("manifest_files");
  Manifest m;
  m.records = {make_record("a", 0, Split::train)};
  EXPECT_THROW(validate_manifest(m, dir), DataError);
  for (const auto& p : m.records[0].paths) write_volume(dir / p, "x", Tensor<double>(Shape{2, 2, 2}));
  EXPECT_NO_THROW(validate_manifest(m, dir));
  m.records[0].paths[1] = std::string(kMissingPath);  // ADC is required
  EXPECT_THROW(validate_manifest(m, dir), DataError);
}

TEST(Dataset, AssembleZeroFillsMissingChannels) {
  ModelConfig c = mpvit::testing::micro_config();
  auto rng = rng_for(3);
  ChannelVolumes ch;
  for (std::size_t i = 0; i < kTotalContrasts; ++i)
    if (i != 3 && i != 5) ch[i] = random_tensor(Shape{8, 8, 4}, rng, -3, 9);
  auto s = assemble_sample<double>("x", 1, ch, c);
  EXPECT_EQ(s.indicator.axial, (std::vector<int>{1, 1, 1, 0, 1, 0}));
  EXPECT_EQ(s.indicator.sagittal, (std::vector<int>{1}));
  EXPECT_EQ(s.axial.shape(), (Shape{4, 4, 2, 6}));
  EXPECT_EQ(s.sagittal.shape(), (Shape{4, 2, 4, 1}));
  for (std::size_t v = 0; v < 32; ++v) {
    EXPECT_EQ(s.axial[v * 6 + 3], 0.0);
    EXPECT_EQ(s.axial[v * 6 + 5], 0.0);
  }
  EXPECT_NO_THROW(check_sample(s, c));

  auto bad = s;
  bad.axial[3] = 0.5;
  EXPECT_THROW(check_sample(bad, c), DataError);
  bad = s;
  bad.axial[0] = 1.5;
  EXPECT_THROW(check_sample(bad, c), DataError);

  c.axial_channels = 5;
  EXPECT_THROW(assemble_sample<double>("x", 1, ch, c), ConfigError);
}

TEST(Dataset, SingleBranchSkipsSagittal) {
  ModelConfig c = mpvit::testing::micro_config();
  c.multi_plane = false;
  auto rng = rng_for(4);
  ChannelVolumes ch;
  for (std::size_t i = 0; i < 3; ++i) ch[i] = random_tensor(Shape{4, 4, 2}, rng);
  auto s = assemble_sample<double>("x", 0, ch, c);
  EXPECT_FALSE(s.sagittal.defined());
  EXPECT_NO_THROW(check_sample(s, c));
}

namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.ground_truth = 32;
  s.axial_grid = {16, 16, 8};
  s.sagittal_grid = {16, 8, 16};
  s.semi_axis_min = 2;
  s.semi_axis_max = 4;
  return s;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST(Synth, SameSeedGivesIdenticalBytes) {
  auto a = scratch_dir("synth_a"), b = scratch_dir("synth_b"), c = scratch_dir("synth_c");
  const SplitCounts counts{6, 3, 3};
  auto ma = synth_generate(small_spec(), 7, counts, a);
  auto mb = synth_generate(small_spec(), 7, counts, b);
  EXPECT_EQ(ma, mb);
  auto ta = tree_bytes(a);
  EXPECT_EQ(ta, tree_bytes(b));
  EXPECT_GT(ta.size(), 12u);
  synth_generate(small_spec(), 8, counts, c);
  EXPECT_NE(ta, tree_bytes(c));
}

TEST(Synth, ManifestLoadsAndMatchesInMemory) {
  auto dir = scratch_dir("synth_load");
  const SplitCounts counts{4, 2, 2};
  ModelConfig cfg = preset("desk-tiny");
  cfg.axial_grid = {16, 16, 8};
  cfg.sagittal_grid = {16, 8, 16};
  auto m = synth_generate(small_spec(), 3, counts, dir);
  EXPECT_EQ(read_manifest(dir / "manifest.tsv"), m);
  EXPECT_NO_THROW(validate_manifest(m, dir));
  auto loaded = load_split<double>(m, dir, Split::val, cfg);
  auto mem = synth_in_memory<double>(small_spec(), 3, Split::val, 2, cfg);
  ASSERT_EQ(loaded.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(loaded[i].id, mem[i].id);
    EXPECT_EQ(loaded[i].axial, mem[i].axial);
    EXPECT_EQ(loaded[i].sagittal, mem[i].sagittal);
    EXPECT_EQ(loaded[i].indicator, mem[i].indicator);
    EXPECT_NO_THROW(check_sample(loaded[i], cfg));
  }
}

TEST(Synth, RatioFloorCounting) {
  EXPECT_EQ(positive_count(1400, 13), 100u);
  EXPECT_EQ(positive_count(1413, 13), 100u);
  EXPECT_EQ(positive_count(1414, 13), 101u);
  EXPECT_EQ(positive_count(10, 1), 5u);
  for (std::size_t n : {1400u, 128u, 512u, 97u}) {
    auto labels = synth_labels(SynthSpec{}, 5, Split::train, n);
    ASSERT_EQ(labels.size(), n);
    EXPECT_EQ(static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1)), positive_count(n, 13));
  }
}

TEST(Synth, DropZeroKeepsEveryChannel) {
  auto spec = small_spec();
  spec.drop_prob = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    auto s = synth_subject(spec, 1, Split::train, i, static_cast<int>(i % 2));
    for (const auto& ch : s.channels) EXPECT_TRUE(ch.has_value());
  }
}

TEST(Synth, DropOneKeepsOnlyRequired) {
  auto spec = small_spec();
  spec.drop_prob = 1.0;
  auto s = synth_subject(spec, 1, Split::train, 0, 1);
  for (std::size_t c = 0; c < kTotalContrasts; ++c) EXPECT_EQ(s.channels[c].has_value(), c < kRequiredAxialContrasts);
}

TEST(Synth, InvalidSpecRejected) {
  auto bad = [](auto mutate) {
    SynthSpec s;
    mutate(s);
    return s;
  };
  EXPECT_THROW(bad([](SynthSpec& s) { s.drop_prob = 1.5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](SynthSpec& s) { s.ratio = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](SynthSpec& s) { s.semi_axis_min = 9; }).validate(), ConfigError);
  EXPECT_THROW(bad([](SynthSpec& s) { s.axial_grid = {30, 32, 16}; }).validate(), ConfigError);
  EXPECT_THROW(synth_generate(SynthSpec{}, 0, SplitCounts{0, 1, 1}, scratch_dir("synth_zero")), ConfigError);
  EXPECT_THROW(parse_axis("w"), ConfigError);
  EXPECT_EQ(parse_axis("y"), Axis::y);
}

TEST(Synth, StoredGridsAndRange) {
  auto spec = small_spec();
  auto s = synth_subject(spec, 2, Split::test, 0, 1);
  EXPECT_EQ(s.id, "test_00000");
  EXPECT_EQ(s.channels[0]->shape(), (Shape{16, 16, 8}));
  EXPECT_EQ(s.channels[6]->shape(), (Shape{16, 8, 16}));
}

TEST(SynthProperty, PreprocessedSamplesSatisfyInvariants) {
  ModelConfig cfg = mpvit::testing::micro_config();
  auto spec = small_spec();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto data = synth_in_memory<float>(spec, seed, Split::train, 8, cfg);
    for (const auto& s : data) {
      EXPECT_NO_THROW(check_sample(s, cfg));
      for (float v : s.axial.data()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
    }
  }
}

TEST(Sampler, ImbalancedLabelsDrawBalanced) {
  const std::vector<int> labels{0, 0, 0, 1};
  WeightedSampler s(labels, 1);
  const std::size_t n = 100000;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) pos += static_cast<std::size_t>(labels[s.next()]);
  EXPECT_NEAR(static_cast<double>(pos) / n, 0.5, 0.01);
}

TEST(Sampler, BalancedLabelsDrawUniform) {
  const std::vector<int> labels{0, 1, 0, 1, 1, 0, 0, 1};
  WeightedSampler s(labels, 2);
  const std::size_t n = 80000;
  std::vector<std::size_t> counts(labels.size());
  for (auto i : s.draw(n)) ++counts[i];
  const double p = 1.0 / labels.size();
  const double sigma = std::sqrt(n * p * (1 - p));
  for (auto c : counts) EXPECT_NEAR(static_cast<double>(c), n * p, 3 * sigma);
}

TEST(Sampler, FixedSeedGivesSameStream) {
  const std::vector<int> labels{0, 0, 1, 0, 1, 0, 0};
  WeightedSampler a(labels, 9), b(labels, 9), c(labels, 10);
  auto da = a.draw(500);
  EXPECT_EQ(da, b.draw(500));
  EXPECT_NE(da, c.draw(500));
}

TEST(Sampler, RejectsDegenerateLabels) {
  const std::vector<int> one_class{1, 1, 1};
  EXPECT_THROW(WeightedSampler(one_class, 0), DataError);
  const std::vector<int> non_binary{0, 1, 2};
  EXPECT_THROW(WeightedSampler(non_binary, 0), DataError);
  EXPECT_THROW(WeightedSampler(std::vector<int>{}, 0), DataError);
}

TEST(Sampler, WeightsAreInverseClassCounts) {
  const std::vector<int> labels{0, 0, 0, 1};
  WeightedSampler s(labels, 0);
  EXPECT_DOUBLE_EQ(s.weights()[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.weights()[3], 1.0);
}
