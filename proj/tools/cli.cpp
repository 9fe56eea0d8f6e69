#include "cli.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>

#include "mpvit/checkpoint.hpp"
#include "mpvit/dataset.hpp"
#include "mpvit/errors.hpp"
#include "mpvit/gradcheck.hpp"
#include "mpvit/manifest.hpp"
#include "mpvit/metrics.hpp"
#include "mpvit/model.hpp"
#include "mpvit/report.hpp"
#include "mpvit/synth.hpp"
#include "mpvit/train.hpp"

namespace mpvit::cli {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<spdlog::logger> logger() {
  if (auto existing = spdlog::get("mpvit")) return existing;
  auto log = spdlog::stderr_logger_mt("mpvit");
  log->set_pattern("[%l] %v");
  const char* level = std::getenv("MPVIT_LOG_LEVEL");
  log->set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
  return log;
}

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), issp));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), issp).base(), s.end());
  return s;
}

struct SynthArgs {
  std::uint64_t seed = 0;
  std::string out;
  SplitCounts counts;
  double ratio = 13.0;
  double drop_prob = 0.3;
  std::string lesion_axis = "z";
  bool sagittal_only = false;
};

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string variant = "desk-tiny";
  bool no_modality_vector = false;
  bool axial_only = false;
  bool dry_run = false;
  TrainConfig train;
  bool coupled_l2 = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  double threshold = 0.5;
  std::string out;
  std::string preds_out;
  std::string labels_out;
  std::size_t threads = 1;
};

struct GradcheckArgs {
  std::string variant = "desk-tiny";
  GradcheckOptions options;
};

struct CompareArgs {
  std::string preds_a;
  std::string preds_b;
  std::string labels;
  double threshold = 0.5;
  std::string method = "chi2-cc";
  std::string out;
};

std::string describe(const ModelConfig& c) {
  std::string s = "variant=" + c.name + " embed_dim=" + std::to_string(c.embed_dim) +
                  " heads=" + std::to_string(c.num_heads) + " depth=" + std::to_string(c.depth) +
                  " patch=" + std::to_string(c.patch) + " axial=" + grid_string(c.axial_grid);
  if (c.multi_plane) s += " sagittal=" + grid_string(c.sagittal_grid);
  s += std::string(" modality_vector=") + (c.modality_vector ? "on" : "off");
  s += std::string(" planes=") + (c.multi_plane ? "axial+sagittal" : "axial");
  std::size_t n = 0;
  for (const auto& [_, shape] : parameter_layout(c)) n += shape_numel(shape);
  s += " params=" + std::to_string(n);
  return s;
}

fs::path manifest_dir(const fs::path& manifest) {
  return manifest.has_parent_path() ? manifest.parent_path() : fs::path(".");
}

Manifest open_manifest(const std::string& file) {
  if (file.empty()) throw ConfigError("--manifest is required");
  if (!fs::exists(file)) throw DataError("manifest not found: " + file);
  auto m = read_manifest(file);
  validate_manifest(m, manifest_dir(file));
  return m;
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthSpec spec;
  spec.ratio = a.ratio;
  spec.drop_prob = a.drop_prob;
  spec.lesion_axis = parse_axis(a.lesion_axis);
  spec.axial_lesion_visible = !a.sagittal_only;
  spec.validate();
  if (a.out.empty()) throw ConfigError("--out is required");
  logger()->info("generating {}/{}/{} subjects into {}", a.counts.train, a.counts.val, a.counts.test, a.out);
  const auto m = synth_generate(spec, a.seed, a.counts, a.out);
  std::size_t pos = 0;
  for (const auto& r : m.records) pos += static_cast<std::size_t>(r.label);
  out << "manifest=" << (fs::path(a.out) / "manifest.tsv").string() << "\n"
      << "records=" << m.records.size() << "\n"
      << "positives=" << pos << "\n";
  return kExitOk;
}

int cmd_train(TrainArgs a, std::ostream& out) {
  auto config = preset(a.variant);
  config.modality_vector = !a.no_modality_vector;
  config.multi_plane = !a.axial_only;
  config.validate();
  a.train.adam.decoupled = !a.coupled_l2;
  a.train.validate();
  out << "mpvit train: " << describe(config) << "\n";

  if (a.out.empty()) throw ConfigError("--out is required");
  const auto manifest = open_manifest(a.manifest);
  if (manifest.split(Split::train).empty()) throw DataError("manifest has no train records");
  if (manifest.split(Split::val).empty()) throw DataError("manifest has no val records");
  if (a.dry_run) return kExitOk;

  const auto base = manifest_dir(a.manifest);
  logger()->info("loading train/val splits from {}", a.manifest);
  const auto train_set = load_split<float>(manifest, base, Split::train, config);
  const auto val_set = load_split<float>(manifest, base, Split::val, config);

  TrainOutputs outputs{fs::path(a.out) / "checkpoint.mpvt", fs::path(a.out) / "metrics.tsv"};
  const auto result = train(config, a.train, train_set, val_set, outputs, [](const EpochMetrics& m) {
    logger()->info("epoch {} train_loss={} val_auc={}", m.epoch, format_number(m.train_loss), format_number(m.val_auc));
  });
  out << "checkpoint=" << outputs.checkpoint.string() << "\n"
      << "metrics=" << outputs.metrics_log.string() << "\n"
      << "best_epoch=" << result.best.epoch << "\n"
      << "best_val_auc=" << format_number(result.best.val_auc) << "\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  if (a.out.empty()) throw ConfigError("--out is required");
  if (a.threads < 1) throw ConfigError("--threads must be at least 1");
  const Split split = parse_split(a.split);
  if (!fs::exists(a.checkpoint)) throw DataError("checkpoint not found: " + a.checkpoint);
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto manifest = open_manifest(a.manifest);
  if (manifest.split(split).empty()) throw DataError("manifest has no " + std::string(split_name(split)) + " records");

  const auto data = load_split<float>(manifest, manifest_dir(a.manifest), split, ckpt.config);
  const auto params = ckpt.params.cast<float>();
  const auto scores = predict_all(ckpt.config, params, data, a.threads);
  const auto labels = labels_of(data);
  const auto report = evaluate(scores, labels, a.threshold);
  write_report(a.out, report);
  if (!a.preds_out.empty()) write_scores(a.preds_out, scores);
  if (!a.labels_out.empty()) write_labels(a.labels_out, labels);
  out << "report=" << a.out << "\n"
      << "auc=" << format_number(report.auc) << "\n"
      << "sensitivity=" << format_number(report.sensitivity) << "\n"
      << "specificity=" << format_number(report.specificity) << "\n"
      << "n_pos=" << report.n_pos << "\n"
      << "n_neg=" << report.n_neg << "\n";
  return kExitOk;
}

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto config = preset(a.variant);
  out << "mpvit gradcheck: " << describe(config) << "\n";
  const auto report = gradcheck(config, a.options);
  out << "group\ttensors\tcoords\tmax_rel_error\tstatus\n";
  std::size_t failed = 0;
  for (const auto& g : report.groups) {
    out << g.group << "\t" << g.tensors << "\t" << g.coordinates << "\t" << format_number(g.max_rel_error) << "\t"
        << (g.pass ? "PASS" : "FAIL") << "\n";
    failed += g.pass ? 0 : 1;
  }
  out << "gradcheck " << (report.pass ? "PASS" : "FAIL") << ": " << report.groups.size() - failed << "/"
      << report.groups.size() << " groups within tolerance " << format_number(a.options.tolerance) << "\n";
  return report.pass ? kExitOk : kExitFailure;
}

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  const auto method = parse_mcnemar_method(a.method);
  for (const auto* p : {&a.preds_a, &a.preds_b, &a.labels}) {
    if (!fs::exists(*p)) throw DataError("file not found: " + *p);
  }
  const auto sa = read_scores(a.preds_a);
  const auto sb = read_scores(a.preds_b);
  const auto labels = read_labels(a.labels);
  const auto result = mcnemar(sa, sb, labels, a.threshold, method);
  const auto text = format_mcnemar(result);
  out << text;
  if (!a.out.empty()) write_text(a.out, text);
  return kExitOk;
}

/// Turns config-file entries into leading arguments of `sub`, so that flags
/// given on the command line (parsed later, last value wins) override them.
std::vector<std::string> expand_config(CLI::App& sub, const std::vector<std::string>& rest) {
  std::optional<std::string> file;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (rest[i] == "--config" && i + 1 < rest.size()) file = rest[i + 1];
    if (rest[i].rfind("--config=", 0) == 0) file = rest[i].substr(9);
  }
  std::vector<std::string> out;
  if (!file) return out;
  for (const auto& [key, value] : read_config_file(*file)) {
    if (key == "config") throw ConfigError("config files cannot include other config files");
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) throw ConfigError(*file + ": unknown key '" + key + "' for " + sub.get_name());
    if (opt->get_expected_max() == 0) {
      if (value == "true" || value == "1" || value == "yes") {
        out.push_back("--" + key);
      } else if (!(value == "false" || value == "0" || value == "no")) {
        throw ConfigError(*file + ": key '" + key + "' expects true or false");
      }
    } else {
      out.push_back("--" + key);
      out.push_back(value);
    }
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open config file " + file);
  std::vector<std::pair<std::string, std::string>> entries;
  std::map<std::string, int> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(file + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(file + ":" + std::to_string(lineno) + ": empty key");
    if (seen[key]++) throw ConfigError(file + ":" + std::to_string(lineno) + ": repeated key '" + key + "'");
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-plane vision transformer: synthesize data, train, evaluate, check gradients, compare models",
               "mpvit"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::string config_file;

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset and its manifest");
  synth->add_option("--config", config_file, "key=value file of defaults for this command");
  synth->add_option("--seed", sa.seed, "Generator seed")->capture_default_str();
  synth->add_option("--out", sa.out, "Output directory");
  synth->add_option("--train", sa.counts.train, "Training subjects")->capture_default_str();
  synth->add_option("--val", sa.counts.val, "Validation subjects")->capture_default_str();
  synth->add_option("--test", sa.counts.test, "Test subjects")->capture_default_str();
  synth->add_option("--ratio", sa.ratio, "Negatives per positive")->capture_default_str();
  synth->add_option("--drop-prob", sa.drop_prob, "Drop probability of each optional contrast")->capture_default_str();
  synth->add_option("--lesion-axis", sa.lesion_axis, "Orientation of the lesion's long axis (x, y, z)")
      ->capture_default_str();
  synth->add_flag("--sagittal-only", sa.sagittal_only, "Lesion visible in the sagittal stack only");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train a model and keep the best validation checkpoint");
  trn->add_option("--config", config_file, "key=value file of defaults for this command");
  trn->add_option("--manifest", ta.manifest, "Dataset manifest");
  trn->add_option("--out", ta.out, "Output directory for checkpoint.mpvt and metrics.tsv");
  trn->add_option("--variant", ta.variant, "Model preset (tiny, small, base, desk-tiny)")->capture_default_str();
  trn->add_flag("--no-modality-vector", ta.no_modality_vector, "Ablate the modality indication vector");
  trn->add_flag("--axial-only", ta.axial_only, "Single axial branch, no sagittal encoder or fusion");
  trn->add_option("--epochs", ta.train.epochs)->capture_default_str();
  trn->add_option("--batch-size", ta.train.batch_size)->capture_default_str();
  trn->add_option("--lr", ta.train.adam.lr)->capture_default_str();
  trn->add_option("--weight-decay", ta.train.adam.weight_decay)->capture_default_str();
  trn->add_flag("--coupled-l2", ta.coupled_l2, "Add weight decay to the gradient instead of decoupling it");
  trn->add_option("--seed", ta.train.seed)->capture_default_str();
  trn->add_option("--threads", ta.train.threads, "Worker threads; 1 is deterministic")->capture_default_str();
  trn->add_flag("--checked", ta.train.checked, "Fail on the first NaN or Inf");
  trn->add_flag("--dry-run", ta.dry_run, "Validate inputs and print the banner without training");

  EvalArgs ea;
  auto* evl = app.add_subcommand("eval", "Score a split and write an ROC report");
  evl->add_option("--config", config_file, "key=value file of defaults for this command");
  evl->add_option("--checkpoint", ea.checkpoint, "Checkpoint file");
  evl->add_option("--manifest", ea.manifest, "Dataset manifest");
  evl->add_option("--split", ea.split, "train, val or test")->capture_default_str();
  evl->add_option("--threshold", ea.threshold, "Operating point for sensitivity/specificity")->capture_default_str();
  evl->add_option("--out", ea.out, "Report file");
  evl->add_option("--preds-out", ea.preds_out, "Write one score per line");
  evl->add_option("--labels-out", ea.labels_out, "Write one label per line");
  evl->add_option("--threads", ea.threads)->capture_default_str();

  GradcheckArgs ga;
  auto* grc = app.add_subcommand("gradcheck", "Compare backpropagated gradients with finite differences");
  grc->add_option("--config", config_file, "key=value file of defaults for this command");
  grc->add_option("--variant", ga.variant, "Model preset")->capture_default_str();
  grc->add_option("--tolerance", ga.options.tolerance, "Maximum relative error")->capture_default_str();
  grc->add_option("--step", ga.options.step, "Central-difference step")->capture_default_str();
  grc->add_option("--coords", ga.options.coords_per_tensor, "Random coordinates per tensor")->capture_default_str();
  grc->add_option("--seed", ga.options.seed)->capture_default_str();

  CompareArgs ca;
  auto* cmp = app.add_subcommand("compare", "McNemar test between two prediction files");
  cmp->add_option("--config", config_file, "key=value file of defaults for this command");
  cmp->add_option("--preds-a", ca.preds_a)->required();
  cmp->add_option("--preds-b", ca.preds_b)->required();
  cmp->add_option("--labels", ca.labels)->required();
  cmp->add_option("--threshold", ca.threshold)->capture_default_str();
  cmp->add_option("--method", ca.method, "chi2-cc, exact-binomial or auto")->capture_default_str();
  cmp->add_option("--out", ca.out, "Also write the result here");

  try {
    std::vector<std::string> argv = args;
    if (!argv.empty()) {
      if (auto* sub = app.get_subcommand_no_throw(argv.front())) {
        const std::vector<std::string> rest(argv.begin() + 1, argv.end());
        auto injected = expand_config(*sub, rest);
        argv.erase(argv.begin() + 1, argv.end());
        argv.insert(argv.end(), injected.begin(), injected.end());
        argv.insert(argv.end(), rest.begin(), rest.end());
      }
    }
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);

    if (synth->parsed()) return cmd_synth(sa, out);
    if (trn->parsed()) return cmd_train(ta, out);
    if (evl->parsed()) return cmd_eval(ea, out);
    if (grc->parsed()) return cmd_gradcheck(ga, out);
    if (cmp->parsed()) return cmd_compare(ca, out);
    return kExitUsage;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValueError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace mpvit::cli
