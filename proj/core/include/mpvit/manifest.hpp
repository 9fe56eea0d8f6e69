#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mpvit/config.hpp"

namespace mpvit {

enum class Split { train, val, test };

std::string_view split_name(Split s);
/// Throws ConfigError for anything but "train", "val", "test".
Split parse_split(std::string_view name);

inline constexpr std::string_view kMissingPath = "-";

/// One subject. `paths` follows kAxialContrasts then kSagittalContrasts; a
/// missing contrast is kMissingPath. Relative paths resolve against the
/// manifest's directory.
struct ManifestRecord {
  std::string id;
  int label = 0;
  Split split = Split::train;
  std::array<std::string, kTotalContrasts> paths;

  bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
  std::vector<ManifestRecord> records;

  std::vector<const ManifestRecord*> split(Split s) const;
  bool operator==(const Manifest&) const = default;
};

/// UTF-8 text, one tab-separated line per record:
/// id, label, split, then one path-or-"-" per contrast.
void write_manifest(const std::filesystem::path& file, const Manifest& manifest);

/// Throws FormatError for malformed lines and DataError for duplicate ids.
Manifest read_manifest(const std::filesystem::path& file);

/// Throws DataError unless ids are unique and every referenced file exists.
void validate_manifest(const Manifest& manifest, const std::filesystem::path& base_dir);

}  // namespace mpvit
