#include "mpvit/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mpvit/container.hpp"
#include "mpvit/errors.hpp"

namespace mpvit {

namespace {

constexpr std::string_view kMeta = "meta/";

Record scalar_record(std::string path, double v) { return Record{std::move(path), {1}, {v}}; }

Record grid_record(std::string path, const Grid& g) {
  return Record{std::move(path), {3}, {double(g.h), double(g.w), double(g.d)}};
}

std::vector<Record> meta_records(const ModelConfig& c, const CheckpointInfo& info) {
  std::vector<Record> r;
  std::vector<double> name(c.name.begin(), c.name.end());
  if (name.empty()) name.push_back(0.0);
  r.push_back(Record{"meta/name", {name.size()}, name});
  r.push_back(grid_record("meta/axial_grid", c.axial_grid));
  r.push_back(grid_record("meta/sagittal_grid", c.sagittal_grid));
  r.push_back(scalar_record("meta/patch", double(c.patch)));
  r.push_back(Record{"meta/channels", {2}, {double(c.axial_channels), double(c.sagittal_channels)}});
  r.push_back(scalar_record("meta/embed_dim", double(c.embed_dim)));
  r.push_back(scalar_record("meta/num_heads", double(c.num_heads)));
  r.push_back(scalar_record("meta/depth", double(c.depth)));
  r.push_back(scalar_record("meta/mlp_ratio", c.mlp_ratio));
  r.push_back(scalar_record("meta/num_classes", double(c.num_classes)));
  r.push_back(scalar_record("meta/fusion_heads", double(c.fusion_heads)));
  r.push_back(scalar_record("meta/modality_vector", c.modality_vector ? 1.0 : 0.0));
  r.push_back(scalar_record("meta/multi_plane", c.multi_plane ? 1.0 : 0.0));
  r.push_back(scalar_record("meta/layer_norm_eps", c.layer_norm_eps));
  r.push_back(scalar_record("meta/val_auc", info.val_auc));
  r.push_back(scalar_record("meta/epoch", double(info.epoch)));
  return r;
}

class MetaReader {
 public:
  MetaReader(const std::map<std::string, const Record*>& meta, const std::filesystem::path& file)
      : meta_(meta), file_(file) {}

  const std::vector<double>& values(const std::string& key, std::size_t count) const {
    auto it = meta_.find("meta/" + key);
    if (it == meta_.end()) throw FormatError(file_.string() + ": checkpoint lacks meta/" + key);
    if (count != 0 && it->second->values.size() != count) {
      throw FormatError(file_.string() + ": meta/" + key + " has wrong size");
    }
    return it->second->values;
  }

  double number(const std::string& key) const { return values(key, 1)[0]; }

  std::size_t count(const std::string& key) const {
    const double v = number(key);
    if (!(v >= 0.0) || v != std::floor(v)) throw FormatError(file_.string() + ": meta/" + key + " is not a count");
    return static_cast<std::size_t>(v);
  }

  Grid grid(const std::string& key) const {
    const auto& v = values(key, 3);
    return Grid{static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2])};
  }

 private:
  const std::map<std::string, const Record*>& meta_;
  const std::filesystem::path& file_;
};

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& file, const ModelConfig& config, const ParameterSet<T>& params,
                     const CheckpointInfo& info) {
  std::vector<Record> records = meta_records(config, info);
  for (const auto& [path, t] : params) {
    records.push_back(Record{path, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  }
  std::sort(records.begin(), records.end(), [](const Record& a, const Record& b) { return a.path < b.path; });
  write_records(file, kCheckpointMagic, records);
}

template void save_checkpoint(const std::filesystem::path&, const ModelConfig&, const ParameterSet<float>&,
                              const CheckpointInfo&);
template void save_checkpoint(const std::filesystem::path&, const ModelConfig&, const ParameterSet<double>&,
                              const CheckpointInfo&);

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  const auto records = read_records(file, kCheckpointMagic);
  std::map<std::string, const Record*> meta;
  std::map<std::string, const Record*> tensors;
  for (const auto& r : records) {
    auto& target = r.path.starts_with(kMeta) ? meta : tensors;
    if (!target.emplace(r.path, &r).second) throw FormatError(file.string() + ": duplicate record " + r.path);
  }

  MetaReader m(meta, file);
  Checkpoint ck;
  ModelConfig& c = ck.config;
  const auto& name = m.values("name", 0);
  c.name.clear();
  for (double ch : name) {
    if (ch != 0.0) c.name.push_back(static_cast<char>(ch));
  }
  c.axial_grid = m.grid("axial_grid");
  c.sagittal_grid = m.grid("sagittal_grid");
  c.patch = m.count("patch");
  const auto& channels = m.values("channels", 2);
  c.axial_channels = static_cast<std::size_t>(channels[0]);
  c.sagittal_channels = static_cast<std::size_t>(channels[1]);
  c.embed_dim = m.count("embed_dim");
  c.num_heads = m.count("num_heads");
  c.depth = m.count("depth");
  c.mlp_ratio = m.number("mlp_ratio");
  c.num_classes = m.count("num_classes");
  c.fusion_heads = m.count("fusion_heads");
  c.modality_vector = m.number("modality_vector") != 0.0;
  c.multi_plane = m.number("multi_plane") != 0.0;
  c.layer_norm_eps = m.number("layer_norm_eps");
  ck.info.val_auc = m.number("val_auc");
  ck.info.epoch = static_cast<std::int64_t>(m.number("epoch"));

  std::map<std::string, Shape> layout;
  try {
    layout = parameter_layout(c);
  } catch (const ConfigError& e) {
    throw FormatError(file.string() + ": stored config is invalid: " + e.what());
  }
  if (layout.size() != tensors.size()) {
    throw FormatError(file.string() + ": expected " + std::to_string(layout.size()) + " parameter records, found " +
                      std::to_string(tensors.size()));
  }
  for (const auto& [path, shape] : layout) {
    auto it = tensors.find(path);
    if (it == tensors.end()) throw FormatError(file.string() + ": missing parameter " + path);
    if (it->second->shape != shape) {
      throw FormatError(file.string() + ": parameter " + path + " has shape " + shape_string(it->second->shape) +
                        ", expected " + shape_string(shape));
    }
    ck.params.insert(path, Tensor<double>(shape, it->second->values));
  }
  return ck;
}

}  // namespace mpvit
