#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace mpvit {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  /// Samples scoring >= threshold are called positive; +inf at the origin.
  double threshold = 0.0;

  bool operator==(const RocPoint&) const = default;
};

/// Area under the ROC curve by trapezoids over the tie-aware curve. Ties
/// between a positive and a negative count one half. Computed from integer
/// counts, so it equals pair counting exactly.
/// Throws ValueError on length mismatch, non-binary labels, non-finite scores
/// or when either class is absent.
double auc(std::span<const double> scores, std::span<const int> labels);

/// (0, 0, +inf) followed by one point per distinct score, descending; the
/// last point is (1, 1).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under an ROC polyline.
double roc_area(std::span<const RocPoint> points);

struct SensSpec {
  double sensitivity = 0.0;
  double specificity = 0.0;
};

SensSpec sens_spec(std::span<const double> scores, std::span<const int> labels, double threshold);

enum class McNemarMethod {
  /// Continuity-corrected chi-square with one degree of freedom.
  chi2_cc,
  /// Two-sided exact binomial test on the discordant pairs.
  exact_binomial,
  /// exact_binomial when b + c < 25, chi2_cc otherwise.
  automatic,
};

std::string_view mcnemar_method_name(McNemarMethod m);
/// "chi2-cc", "exact-binomial" or "auto"; ValueError otherwise.
McNemarMethod parse_mcnemar_method(std::string_view name);

struct McNemarResult {
  /// A correct, B wrong.
  std::size_t b = 0;
  /// A wrong, B correct.
  std::size_t c = 0;
  /// (|b − c| − 1)² / (b + c), clamped at 0; 0 when b + c = 0.
  double statistic = 0.0;
  double p_value = 1.0;
  /// The method that produced p_value (never `automatic`).
  McNemarMethod method = McNemarMethod::chi2_cc;
};

/// McNemar result from discordant counts.
McNemarResult mcnemar_counts(std::size_t b, std::size_t c, McNemarMethod method = McNemarMethod::chi2_cc);

/// Binarizes both score vectors at `threshold` (positive iff score >= threshold)
/// and compares correctness against the labels.
McNemarResult mcnemar(std::span<const double> scores_a, std::span<const double> scores_b,
                      std::span<const int> labels, double threshold = 0.5,
                      McNemarMethod method = McNemarMethod::chi2_cc);

/// Upper tail of chi-square with one degree of freedom.
double chi2_1_survival(double x);

struct EvalReport {
  std::vector<RocPoint> roc;
  double auc = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double threshold = 0.5;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

}  // namespace mpvit
