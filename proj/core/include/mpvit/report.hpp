#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mpvit/metrics.hpp"

namespace mpvit {

/// Shortest round-trip decimal form ("0.75", "inf", "1e-07").
std::string format_number(double v);

/// Header of key=value lines (auc, sensitivity, specificity, threshold,
/// n_pos, n_neg), a "ROC" line, then one "fpr\ttpr\tthreshold" line per point.
std::string format_report(const EvalReport& report);
void write_report(const std::filesystem::path& file, const EvalReport& report);

/// b, c, statistic, p_value, method as key=value lines.
std::string format_mcnemar(const McNemarResult& result);

/// One value per line. Reading throws FormatError on unparsable lines.
void write_scores(const std::filesystem::path& file, const std::vector<double>& scores);
std::vector<double> read_scores(const std::filesystem::path& file);
void write_labels(const std::filesystem::path& file, const std::vector<int>& labels);
std::vector<int> read_labels(const std::filesystem::path& file);

/// Writes `text` verbatim, creating parent directories.
void write_text(const std::filesystem::path& file, const std::string& text);

}  // namespace mpvit
