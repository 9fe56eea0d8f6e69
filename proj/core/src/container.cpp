#include "mpvit/container.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "mpvit/errors.hpp"

namespace mpvit {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& file) : bytes_(bytes), file_(file) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint64_t u64() { return take(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }

  std::string str(std::uint64_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw FormatError(file_.string() + ": truncated record");
  }

 private:
  std::uint64_t take(int width) {
    need(static_cast<std::uint64_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += width;
    return v;
  }

  const std::string& bytes_;
  const std::filesystem::path& file_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_records(const std::filesystem::path& file, const Magic& magic, const std::vector<Record>& records) {
  std::string out(magic.begin(), magic.end());
  put_u32(out, kContainerVersion);
  for (const auto& r : records) {
    if (shape_numel(r.shape) != r.values.size()) {
      throw DimensionError("record '" + r.path + "' shape " + shape_string(r.shape) + " does not match " +
                           std::to_string(r.values.size()) + " values");
    }
    put_u64(out, r.path.size());
    out += r.path;
    put_u64(out, r.shape.size());
    for (auto d : r.shape) put_u64(out, d);
    for (double v : r.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw Error("failed writing " + file.string());
}

std::vector<Record> read_records(const std::filesystem::path& file, const Magic& magic) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw FormatError("cannot open " + file.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || !std::equal(magic.begin(), magic.end(), bytes.begin())) {
    throw FormatError(file.string() + ": bad magic (expected '" + std::string(magic.begin(), magic.end()) + "')");
  }
  Reader rd(bytes, file);
  rd.str(4);
  const auto version = rd.u32();
  if (version != kContainerVersion) {
    throw FormatError(file.string() + ": unsupported format version " + std::to_string(version));
  }
  std::vector<Record> records;
  while (!rd.done()) {
    Record r;
    r.path = rd.str(rd.u64());
    const auto rank = rd.u64();
    if (rank == 0 || rank > 8) throw FormatError(file.string() + ": record '" + r.path + "' has invalid rank");
    rd.need(rank * 8);
    for (std::uint64_t i = 0; i < rank; ++i) {
      const auto d = rd.u64();
      if (d == 0 || d > bytes.size()) throw FormatError(file.string() + ": record '" + r.path + "' has an invalid dimension");
      r.shape.push_back(static_cast<std::size_t>(d));
    }
    const auto n = shape_numel(r.shape);
    rd.need(static_cast<std::uint64_t>(n) * 8);
    r.values.resize(n);
    for (auto& v : r.values) v = rd.f64();
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace mpvit
