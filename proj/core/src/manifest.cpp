#include "mpvit/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mpvit/errors.hpp"

namespace mpvit {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

std::vector<const ManifestRecord*> Manifest::split(Split s) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

void write_manifest(const std::filesystem::path& file, const Manifest& manifest) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  for (const auto& r : manifest.records) {
    os << r.id << '\t' << r.label << '\t' << split_name(r.split);
    for (const auto& p : r.paths) os << '\t' << p;
    os << '\n';
  }
  if (!os) throw Error("failed writing " + file.string());
}

Manifest read_manifest(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cannot open manifest " + file.string());
  Manifest m;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    const auto where = file.string() + ":" + std::to_string(lineno);
    if (fields.size() != 3 + kTotalContrasts) {
      throw FormatError(where + ": expected " + std::to_string(3 + kTotalContrasts) + " fields, got " +
                        std::to_string(fields.size()));
    }
    ManifestRecord r;
    r.id = fields[0];
    if (fields[1] == "0" || fields[1] == "1") {
      r.label = fields[1] == "1" ? 1 : 0;
    } else {
      throw FormatError(where + ": label must be 0 or 1");
    }
    try {
      r.split = parse_split(fields[2]);
    } catch (const ConfigError& e) {
      throw FormatError(where + ": " + e.what());
    }
    for (std::size_t c = 0; c < kTotalContrasts; ++c) r.paths[c] = fields[3 + c];
    if (!ids.insert(r.id).second) throw DataError(where + ": duplicate id " + r.id);
    m.records.push_back(std::move(r));
  }
  return m;
}

void validate_manifest(const Manifest& manifest, const std::filesystem::path& base_dir) {
  std::set<std::string> ids;
  for (const auto& r : manifest.records) {
    if (!ids.insert(r.id).second) throw DataError("duplicate id " + r.id);
    for (std::size_t c = 0; c < kRequiredAxialContrasts; ++c) {
      if (r.paths[c] == kMissingPath) {
        throw DataError("record " + r.id + " lacks required contrast " + std::string(kAxialContrasts[c]));
      }
    }
    for (const auto& p : r.paths) {
      if (p == kMissingPath) continue;
      const auto full = std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base_dir / p;
      if (!std::filesystem::exists(full)) throw DataError("record " + r.id + " references missing file " + full.string());
    }
  }
}

}  // namespace mpvit
