#include "mpvit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "mpvit/errors.hpp"

namespace mpvit {

namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ValueError("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                     std::to_string(labels.size()) + ")");
  }
  ClassCounts n;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++n.pos;
    } else if (labels[i] == 0) {
      ++n.neg;
    } else {
      throw ValueError("label " + std::to_string(labels[i]) + " is not 0 or 1");
    }
    if (!std::isfinite(scores[i])) throw ValueError("non-finite score at index " + std::to_string(i));
  }
  if (n.pos == 0 || n.neg == 0) throw ValueError("both classes must be present");
  return n;
}

/// Cumulative (fp, tp) counts after each group of tied scores, highest first.
struct Step {
  std::size_t fp;
  std::size_t tp;
  double threshold;
};

std::vector<Step> sweep(std::span<const double> scores, std::span<const int> labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<Step> steps;
  std::size_t fp = 0, tp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      if (labels[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
    }
    steps.push_back({fp, tp, s});
  }
  return steps;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  const auto n = check_inputs(scores, labels);
  // Twice the trapezoid area in units of one (positive, negative) pair.
  std::uint64_t twice_area = 0;
  std::size_t fp = 0, tp = 0;
  for (const auto& s : sweep(scores, labels)) {
    twice_area += static_cast<std::uint64_t>(s.fp - fp) * static_cast<std::uint64_t>(tp + s.tp);
    fp = s.fp;
    tp = s.tp;
  }
  return static_cast<double>(twice_area) / (2.0 * static_cast<double>(n.pos) * static_cast<double>(n.neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const auto n = check_inputs(scores, labels);
  std::vector<RocPoint> pts{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  for (const auto& s : sweep(scores, labels)) {
    pts.push_back({static_cast<double>(s.fp) / static_cast<double>(n.neg),
                   static_cast<double>(s.tp) / static_cast<double>(n.pos), s.threshold});
  }
  return pts;
}

double roc_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  }
  return area;
}

SensSpec sens_spec(std::span<const double> scores, std::span<const int> labels, double threshold) {
  const auto n = check_inputs(scores, labels);
  std::size_t tp = 0, tn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool called = scores[i] >= threshold;
    if (labels[i] == 1 && called) ++tp;
    if (labels[i] == 0 && !called) ++tn;
  }
  return {static_cast<double>(tp) / static_cast<double>(n.pos), static_cast<double>(tn) / static_cast<double>(n.neg)};
}

std::string_view mcnemar_method_name(McNemarMethod m) {
  switch (m) {
    case McNemarMethod::chi2_cc:
      return "chi2-cc";
    case McNemarMethod::exact_binomial:
      return "exact-binomial";
    case McNemarMethod::automatic:
      return "auto";
  }
  return "chi2-cc";
}

McNemarMethod parse_mcnemar_method(std::string_view name) {
  if (name == "chi2-cc") return McNemarMethod::chi2_cc;
  if (name == "exact-binomial") return McNemarMethod::exact_binomial;
  if (name == "auto") return McNemarMethod::automatic;
  throw ValueError("unknown McNemar method '" + std::string(name) + "'");
}

double chi2_1_survival(double x) {
  if (!(x > 0.0)) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

McNemarResult mcnemar_counts(std::size_t b, std::size_t c, McNemarMethod method) {
  McNemarResult r;
  r.b = b;
  r.c = c;
  const std::size_t n = b + c;
  if (method == McNemarMethod::automatic) method = n < 25 ? McNemarMethod::exact_binomial : McNemarMethod::chi2_cc;
  r.method = method;
  if (n == 0) return r;

  const double diff = std::max(0.0, std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0);
  r.statistic = diff * diff / static_cast<double>(n);
  if (method == McNemarMethod::chi2_cc) {
    r.p_value = chi2_1_survival(r.statistic);
  } else {
    // Two-sided: twice the lower tail of Binomial(n, 1/2) at min(b, c), in log space.
    const std::size_t k = std::min(b, c);
    const double log_half_n = -static_cast<double>(n) * std::log(2.0);
    double tail = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
      const double log_choose = std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(i) + 1.0) -
                                std::lgamma(static_cast<double>(n - i) + 1.0);
      tail += std::exp(log_choose + log_half_n);
    }
    r.p_value = std::min(1.0, 2.0 * tail);
  }
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  return r;
}

McNemarResult mcnemar(std::span<const double> scores_a, std::span<const double> scores_b,
                      std::span<const int> labels, double threshold, McNemarMethod method) {
  if (scores_a.size() != labels.size() || scores_b.size() != labels.size()) {
    throw ValueError("mcnemar: prediction and label vectors differ in length (" + std::to_string(scores_a.size()) +
                     ", " + std::to_string(scores_b.size()) + ", " + std::to_string(labels.size()) + ")");
  }
  std::size_t b = 0, c = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValueError("label " + std::to_string(labels[i]) + " is not 0 or 1");
    if (!std::isfinite(scores_a[i]) || !std::isfinite(scores_b[i])) {
      throw ValueError("non-finite score at index " + std::to_string(i));
    }
    const bool ok_a = (scores_a[i] >= threshold) == (labels[i] == 1);
    const bool ok_b = (scores_b[i] >= threshold) == (labels[i] == 1);
    if (ok_a && !ok_b) ++b;
    if (!ok_a && ok_b) ++c;
  }
  return mcnemar_counts(b, c, method);
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels, double threshold) {
  EvalReport r;
  r.roc = roc_curve(scores, labels);
  r.auc = auc(scores, labels);
  const auto ss = sens_spec(scores, labels, threshold);
  r.sensitivity = ss.sensitivity;
  r.specificity = ss.specificity;
  r.threshold = threshold;
  for (int y : labels) (y == 1 ? r.n_pos : r.n_neg)++;
  return r;
}

}  // namespace mpvit
