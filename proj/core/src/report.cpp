#include "mpvit/report.hpp"

#include <charconv>
#include <fstream>
#include <system_error>

#include "mpvit/errors.hpp"

namespace mpvit {

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_report(const EvalReport& r) {
  std::string out;
  out += "auc=" + format_number(r.auc) + "\n";
  out += "sensitivity=" + format_number(r.sensitivity) + "\n";
  out += "specificity=" + format_number(r.specificity) + "\n";
  out += "threshold=" + format_number(r.threshold) + "\n";
  out += "n_pos=" + std::to_string(r.n_pos) + "\n";
  out += "n_neg=" + std::to_string(r.n_neg) + "\n";
  out += "ROC\n";
  for (const auto& p : r.roc) {
    out += format_number(p.fpr) + "\t" + format_number(p.tpr) + "\t" + format_number(p.threshold) + "\n";
  }
  return out;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  os << text;
  if (!os) throw Error("failed writing " + file.string());
}

void write_report(const std::filesystem::path& file, const EvalReport& report) { write_text(file, format_report(report)); }

std::string format_mcnemar(const McNemarResult& r) {
  std::string out;
  out += "b=" + std::to_string(r.b) + "\n";
  out += "c=" + std::to_string(r.c) + "\n";
  out += "statistic=" + format_number(r.statistic) + "\n";
  out += "p_value=" + format_number(r.p_value) + "\n";
  out += "method=" + std::string(mcnemar_method_name(r.method)) + "\n";
  return out;
}

namespace {

template <typename V>
std::vector<V> read_values(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cannot open " + file.string());
  std::vector<V> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    V v{};
    const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
    if (res.ec != std::errc{} || res.ptr != line.data() + line.size()) {
      throw FormatError(file.string() + ":" + std::to_string(lineno) + ": cannot parse '" + line + "'");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

void write_scores(const std::filesystem::path& file, const std::vector<double>& scores) {
  std::string text;
  for (double s : scores) text += format_number(s) + "\n";
  write_text(file, text);
}

std::vector<double> read_scores(const std::filesystem::path& file) { return read_values<double>(file); }

void write_labels(const std::filesystem::path& file, const std::vector<int>& labels) {
  std::string text;
  for (int y : labels) text += std::to_string(y) + "\n";
  write_text(file, text);
}

std::vector<int> read_labels(const std::filesystem::path& file) {
  auto labels = read_values<int>(file);
  for (int y : labels) {
    if (y != 0 && y != 1) throw FormatError(file.string() + ": label " + std::to_string(y) + " is not 0 or 1");
  }
  return labels;
}

}  // namespace mpvit
