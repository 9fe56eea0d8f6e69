#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpvit/tensor.hpp"

namespace mpvit {

/// One named array inside a record container.
struct Record {
  std::string path;
  Shape shape;
  std::vector<double> values;

  bool operator==(const Record&) const = default;
};

using Magic = std::array<char, 4>;

inline constexpr Magic kCheckpointMagic = {'M', 'P', 'V', 'T'};
inline constexpr Magic kVolumeMagic = {'M', 'P', 'V', 'V'};
inline constexpr std::uint32_t kContainerVersion = 1;

/// Binary layout, all integers and floats little-endian:
///
///   magic[4] | version:u32 | record*
///   record  = path_len:u64 | path:utf8[path_len] | rank:u64 | dims:u64[rank] | values:f64[prod(dims)]
///
/// Records run until end of file. The writer emits them in the order given.
void write_records(const std::filesystem::path& file, const Magic& magic, const std::vector<Record>& records);

/// Throws FormatError on a wrong magic, unsupported version or truncated record.
std::vector<Record> read_records(const std::filesystem::path& file, const Magic& magic);

}  // namespace mpvit
