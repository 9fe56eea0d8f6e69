#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

#include "cli.hpp"
#include "mpvit/checkpoint.hpp"
#include "mpvit/container.hpp"
#include "mpvit/report.hpp"
#include "test_support.hpp"

using mpvit::testing::scratch_dir;
using mpvit::testing::slurp;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = mpvit::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string value_of(const std::string& text, const std::string& key) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

/// Small balanced synthetic set shared by the train/eval tests.
const fs::path& balanced_set() {
  static const fs::path dir = [] {
    auto d = scratch_dir("cli_balanced");
    auto r = run({"synth", "--seed", "3", "--out", d.string(), "--train", "8", "--val", "8", "--test", "64", "--ratio",
                  "1"});
    EXPECT_EQ(r.code, 0) << r.err;
    return d;
  }();
  return dir;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, mpvit::cli::kExitOk);
  EXPECT_EQ(run({}).code, mpvit::cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, mpvit::cli::kExitUsage);
  EXPECT_EQ(run({"synth", "--bogus"}).code, mpvit::cli::kExitUsage);
}

TEST(Cli, ProcessExitCodes) {
  const std::string bin = MPVIT_CLI_PATH;
  auto status = [&](const std::string& args) {
    const int raw = std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status("synth --ratio 0 --out " + scratch_dir("cli_proc").string()), 2);
  EXPECT_EQ(status("gradcheck --variant enormous"), 2);
}

TEST(CliSynth, DefaultCountsAndRatio) {
  // Counting only: the default split sizes and positives, without writing 768 subjects.
  auto dir = scratch_dir("cli_synth_defaults");
  auto r = run({"synth", "--out", dir.string(), "--train", "28", "--val", "14", "--test", "14"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(value_of(r.out, "records"), "56");
  EXPECT_EQ(value_of(r.out, "positives"), "4");  // 2 + 1 + 1 at 1:13
  auto help = run({"synth", "--help"});
  EXPECT_NE(help.out.find("512"), std::string::npos);
  EXPECT_NE(help.out.find("128"), std::string::npos);
  EXPECT_NE(help.out.find("13"), std::string::npos);
}

TEST(CliSynth, SameSeedGivesIdenticalTrees) {
  auto a = scratch_dir("cli_synth_a"), b = scratch_dir("cli_synth_b");
  for (const auto& d : {a, b}) {
    auto r = run({"synth", "--seed", "7", "--out", d.string(), "--train", "4", "--val", "2", "--test", "2", "--ratio",
                  "1"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(tree_bytes(a), tree_bytes(b));
}

TEST(CliSynth, ConfigErrors) {
  auto dir = scratch_dir("cli_synth_bad");
  EXPECT_EQ(run({"synth", "--ratio", "0", "--out", dir.string()}).code, 2);
  EXPECT_EQ(run({"synth", "--drop-prob", "1.5", "--out", dir.string()}).code, 2);
  EXPECT_EQ(run({"synth", "--lesion-axis", "q", "--out", dir.string()}).code, 2);
  EXPECT_EQ(run({"synth", "--train", "0", "--out", dir.string()}).code, 2);
}

TEST(CliConfig, FileSuppliesDefaultsAndFlagsWin) {
  auto dir = scratch_dir("cli_config");
  mpvit::write_text(dir / "synth.cfg", "# small set\ntrain = 4\nval=2\ntest=2\nratio=1\nseed=5\nsagittal-only=true\n");
  auto r = run({"synth", "--config", (dir / "synth.cfg").string(), "--out", (dir / "a").string(), "--train", "6"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(value_of(r.out, "records"), "10");

  mpvit::write_text(dir / "unknown.cfg", "colour=blue\n");
  EXPECT_EQ(run({"synth", "--config", (dir / "unknown.cfg").string(), "--out", (dir / "b").string()}).code, 2);
  mpvit::write_text(dir / "repeat.cfg", "seed=1\nseed=2\n");
  EXPECT_EQ(run({"synth", "--config", (dir / "repeat.cfg").string(), "--out", (dir / "b").string()}).code, 2);
  mpvit::write_text(dir / "noeq.cfg", "seed 1\n");
  EXPECT_EQ(run({"synth", "--config", (dir / "noeq.cfg").string(), "--out", (dir / "b").string()}).code, 2);
  EXPECT_EQ(run({"synth", "--config", (dir / "absent.cfg").string(), "--out", (dir / "b").string()}).code, 2);
}

TEST(CliTrain, BaseBannerShowsFullSizeDims) {
  auto r = run({"train", "--variant", "base", "--manifest", (balanced_set() / "manifest.tsv").string(), "--out",
                scratch_dir("cli_base").string(), "--dry-run"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("embed_dim=768"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("heads=12"), std::string::npos) << r.out;
}

TEST(CliTrain, UsageErrors) {
  auto out = scratch_dir("cli_train_err").string();
  EXPECT_EQ(run({"train", "--manifest", "/nonexistent/manifest.tsv", "--out", out}).code, 2);
  EXPECT_EQ(run({"train", "--out", out}).code, 2);
  EXPECT_EQ(run({"train", "--variant", "gigantic", "--manifest", (balanced_set() / "manifest.tsv").string(), "--out", out})
                .code,
            2);
  EXPECT_EQ(run({"train", "--lr", "-1", "--manifest", (balanced_set() / "manifest.tsv").string(), "--out", out}).code,
            2);
}

TEST(CliTrain, OneEpochWritesCheckpointAndLog) {
  auto out = scratch_dir("cli_train_one");
  auto r = run({"train", "--manifest", (balanced_set() / "manifest.tsv").string(), "--out", out.string(), "--epochs",
                "1", "--batch-size", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "checkpoint.mpvt"));
  const auto log = slurp(out / "metrics.tsv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);
  EXPECT_EQ(log.rfind("epoch\ttrain_loss\tval_auc\n1\t", 0), 0u) << log;
}

TEST(CliEval, IdenticalInputsGiveIdenticalReports) {
  auto out = scratch_dir("cli_eval_same");
  const auto manifest = (balanced_set() / "manifest.tsv").string();
  ASSERT_EQ(run({"train", "--manifest", manifest, "--out", out.string(), "--epochs", "0"}).code, 0);
  for (const char* name : {"a.txt", "b.txt"}) {
    auto r = run({"eval", "--checkpoint", (out / "checkpoint.mpvt").string(), "--manifest", manifest, "--out",
                  (out / name).string(), "--split", "val"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(out / "a.txt"), slurp(out / "b.txt"));
  EXPECT_EQ(slurp(out / "a.txt").rfind("auc=", 0), 0u);
  EXPECT_NE(slurp(out / "a.txt").find("\nROC\n0\t0\tinf\n"), std::string::npos);
}

TEST(CliEval, UntrainedModelIsNearChanceOnBalancedData) {
  // An untrained model's AUC swings widely with its initialization, so the
  // expectation is checked on the median over initializations.
  const auto manifest = (balanced_set() / "manifest.tsv").string();
  std::vector<double> aucs;
  for (int seed = 0; seed < 21; ++seed) {
    auto out = scratch_dir("cli_eval_untrained");
    ASSERT_EQ(run({"train", "--manifest", manifest, "--out", out.string(), "--epochs", "0", "--seed",
                   std::to_string(seed)})
                  .code,
              0);
    auto r = run({"eval", "--checkpoint", (out / "checkpoint.mpvt").string(), "--manifest", manifest, "--out",
                  (out / "r.txt").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    aucs.push_back(std::stod(value_of(r.out, "auc")));
  }
  std::nth_element(aucs.begin(), aucs.begin() + 10, aucs.end());
  EXPECT_NEAR(aucs[10], 0.5, 0.1);
}

TEST(CliEval, UsageErrors) {
  auto dir = scratch_dir("cli_eval_err");
  const auto manifest = (balanced_set() / "manifest.tsv").string();
  mpvit::write_records(dir / "vol.mpvt", mpvit::kVolumeMagic, {{"FLAIR", {1, 1, 1}, {0.0}}});
  EXPECT_EQ(run({"eval", "--checkpoint", (dir / "vol.mpvt").string(), "--manifest", manifest, "--out",
                 (dir / "r.txt").string()})
                .code,
            2);
  mpvit::write_text(dir / "garbage.mpvt", "not a checkpoint");
  EXPECT_EQ(run({"eval", "--checkpoint", (dir / "garbage.mpvt").string(), "--manifest", manifest, "--out",
                 (dir / "r.txt").string()})
                .code,
            2);
  EXPECT_EQ(run({"eval", "--checkpoint", (dir / "none.mpvt").string(), "--manifest", manifest, "--out",
                 (dir / "r.txt").string()})
                .code,
            2);
  EXPECT_EQ(run({"eval", "--checkpoint", (dir / "vol.mpvt").string(), "--manifest", manifest, "--split", "dev",
                 "--out", (dir / "r.txt").string()})
                .code,
            2);
}

TEST(CliGradcheck, UnknownVariant) { EXPECT_EQ(run({"gradcheck", "--variant", "enormous"}).code, 2); }

TEST(CliGradcheck, TinyToleranceFails) {
  auto r = run({"gradcheck", "--tolerance", "1e-12", "--coords", "0"});
  EXPECT_EQ(r.code, mpvit::cli::kExitFailure) << r.err;
  EXPECT_NE(r.out.find("gradcheck FAIL"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("\tFAIL\n"), std::string::npos);
}

namespace {

void write_pair_fixture(const fs::path& dir, std::size_t b, std::size_t c, std::size_t agree) {
  std::vector<double> a_scores, b_scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < b; ++i) {  // A right, B wrong
    a_scores.push_back(0.9);
    b_scores.push_back(0.1);
    labels.push_back(1);
  }
  for (std::size_t i = 0; i < c; ++i) {  // A wrong, B right
    a_scores.push_back(0.8);
    b_scores.push_back(0.2);
    labels.push_back(0);
  }
  for (std::size_t i = 0; i < agree; ++i) {
    a_scores.push_back(0.7);
    b_scores.push_back(0.6);
    labels.push_back(static_cast<int>(i % 2));
  }
  mpvit::write_scores(dir / "a.txt", a_scores);
  mpvit::write_scores(dir / "b.txt", b_scores);
  mpvit::write_labels(dir / "y.txt", labels);
}

}  // namespace

TEST(CliCompare, FixtureGivesChiSquareResult) {
  auto dir = scratch_dir("cli_compare");
  write_pair_fixture(dir, 5, 15, 30);
  auto r = run({"compare", "--preds-a", (dir / "a.txt").string(), "--preds-b", (dir / "b.txt").string(), "--labels",
                (dir / "y.txt").string(), "--out", (dir / "mcnemar.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(value_of(r.out, "b"), "5");
  EXPECT_EQ(value_of(r.out, "c"), "15");
  EXPECT_NEAR(std::stod(value_of(r.out, "statistic")), 4.05, 1e-12);
  EXPECT_NEAR(std::stod(value_of(r.out, "p_value")), 0.0442, 0.0005);
  EXPECT_EQ(value_of(r.out, "method"), "chi2-cc");
  EXPECT_EQ(slurp(dir / "mcnemar.txt"), r.out);
}

TEST(CliCompare, IdenticalFilesGivePOne) {
  auto dir = scratch_dir("cli_compare_same");
  write_pair_fixture(dir, 3, 4, 5);
  auto r = run({"compare", "--preds-a", (dir / "a.txt").string(), "--preds-b", (dir / "a.txt").string(), "--labels",
                (dir / "y.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(value_of(r.out, "p_value"), "1");
}

TEST(CliCompare, Errors) {
  auto dir = scratch_dir("cli_compare_err");
  write_pair_fixture(dir, 3, 4, 5);
  mpvit::write_labels(dir / "short.txt", {0, 1});
  EXPECT_EQ(run({"compare", "--preds-a", (dir / "a.txt").string(), "--preds-b", (dir / "b.txt").string(), "--labels",
                 (dir / "short.txt").string()})
                .code,
            2);
  EXPECT_EQ(run({"compare", "--preds-a", (dir / "a.txt").string(), "--labels", (dir / "y.txt").string()}).code, 2);
  EXPECT_EQ(run({"compare", "--preds-a", (dir / "a.txt").string(), "--preds-b", (dir / "b.txt").string(), "--labels",
                 (dir / "y.txt").string(), "--method", "fisher"})
                .code,
            2);
}
