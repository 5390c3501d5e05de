#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqlcd/common.hpp"
#include "seqlcd/matcher.hpp"
#include "seqlcd/model.hpp"

namespace seqlcd {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  // Precision is 1 when nothing is accepted.
  double precision() const { return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
  double tpr() const { return recall(); }
  // No negatives means no false positive is possible: rate 0.
  double fpr() const { return fp + tn == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(fp + tn); }

  bool operator==(const ConfusionCounts&) const = default;
};

struct PrPoint {
  double precision = 1.0;
  double recall = 0.0;
  double threshold = 0.0;
  bool operator==(const PrPoint&) const = default;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
  bool operator==(const RocPoint&) const = default;
};

namespace detail {

inline const std::optional<std::size_t>& gt_for(const GroundTruthAlignment& gt, std::size_t test_index) {
  if (test_index >= gt.pairs.size())
    throw Error("ground truth does not cover test frame " + std::to_string(test_index));
  return gt.pairs[test_index];
}

inline bool within(std::size_t a, std::size_t b, int tol) {
  const std::size_t d = a > b ? a - b : b - a;
  return d <= static_cast<std::size_t>(tol);
}

// Outcome of one evaluated frame, depending on whether it is accepted.
struct Outcome {
  bool has_gt = false;
  bool correct = false;  // candidate lands within d_thresh of the true match
};

inline Outcome outcome(const MatchCandidate& c, const GroundTruthAlignment& gt) {
  const auto& truth = gt_for(gt, c.test_index);
  return {truth.has_value(), truth && within(c.ref_index, *truth, gt.d_thresh)};
}

inline void tally(ConfusionCounts& cc, const Outcome& o, bool accepted) {
  if (accepted) {
    (o.correct ? cc.tp : cc.fp) += 1;
  } else {
    (o.has_gt ? cc.fn : cc.tn) += 1;
  }
}

// Counts at every threshold in [-inf, distinct scores ascending..., +inf],
// with acceptance meaning score < threshold.
inline std::vector<std::pair<double, ConfusionCounts>> sweep(const std::vector<MatchCandidate>& candidates,
                                                             const GroundTruthAlignment& gt) {
  std::vector<std::pair<double, Outcome>> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates) scored.emplace_back(c.score, outcome(c, gt));
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  ConfusionCounts cc;
  for (const auto& [s, o] : scored) tally(cc, o, false);
  std::vector<std::pair<double, ConfusionCounts>> out;
  out.emplace_back(-std::numeric_limits<double>::infinity(), cc);
  std::size_t next = 0;
  auto accept_below = [&](double theta) {
    while (next < scored.size() && scored[next].first < theta) {
      const Outcome& o = scored[next].second;
      (o.has_gt ? cc.fn : cc.tn) -= 1;
      tally(cc, o, true);
      ++next;
    }
  };
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (i > 0 && scored[i].first == scored[i - 1].first) continue;
    accept_below(scored[i].first);
    out.emplace_back(scored[i].first, cc);
  }
  accept_below(std::numeric_limits<double>::infinity());
  out.emplace_back(std::numeric_limits<double>::infinity(), cc);
  return out;
}

}  // namespace detail

/// Classifies every evaluated frame (one per candidate).
///
/// Accepted and within d_thresh of the true match: TP. Accepted otherwise
/// (wrong place, or no true match exists): FP. Rejected with a true match:
/// FN. Rejected without one: TN.
inline ConfusionCounts confusion_counts(const std::map<std::size_t, std::size_t>& accepted,
                                        const std::vector<MatchCandidate>& candidates, const GroundTruthAlignment& gt) {
  ConfusionCounts cc;
  for (const auto& c : candidates) {
    auto it = accepted.find(c.test_index);
    MatchCandidate decided = c;
    if (it != accepted.end()) decided.ref_index = it->second;
    detail::tally(cc, detail::outcome(decided, gt), it != accepted.end());
  }
  return cc;
}

inline std::vector<PrPoint> pr_curve(const std::vector<MatchCandidate>& candidates, const GroundTruthAlignment& gt) {
  if (candidates.empty()) return {};
  std::vector<PrPoint> out;
  for (const auto& [theta, cc] : detail::sweep(candidates, gt)) out.push_back({cc.precision(), cc.recall(), theta});
  return out;
}

struct RocResult {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// Trapezoidal area under (fpr, tpr) points, with (0,0) and (1,1) added.
inline double trapezoid_auc(std::vector<RocPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
  });
  double area = 0.0, px = 0.0, py = 0.0;
  for (const auto& p : pts) {
    area += (p.fpr - px) * (p.tpr + py) / 2.0;
    px = p.fpr;
    py = p.tpr;
  }
  area += (1.0 - px) * (1.0 + py) / 2.0;
  return std::clamp(area, 0.0, 1.0);
}

inline RocResult roc_auc(const std::vector<MatchCandidate>& candidates, const GroundTruthAlignment& gt) {
  bool any_positive = false;
  for (const auto& c : candidates) any_positive |= detail::outcome(c, gt).has_gt;
  if (!any_positive) throw Error("roc_auc: no evaluated frame has a true match (degenerate class)");
  RocResult r;
  for (const auto& [theta, cc] : detail::sweep(candidates, gt)) r.points.push_back({cc.fpr(), cc.tpr(), theta});
  r.auc = trapezoid_auc(r.points);
  return r;
}

/// Highest recall among points with perfect precision; 0 when there is none.
inline double recall_at_full_precision(const std::vector<PrPoint>& pr) {
  double best = 0.0;
  for (const auto& p : pr)
    if (std::abs(p.precision - 1.0) <= 1e-12) best = std::max(best, p.recall);
  return best;
}

struct EvalReport {
  std::vector<PrPoint> pr_points;
  std::vector<RocPoint> roc_points;
  std::optional<double> auc;
  double recall_at_full_precision = 0.0;
  std::size_t evaluated_frames = 0;
  ConfusionCounts operating_counts;  // at params.score_threshold
  nlohmann::json params = nlohmann::json::object();
  std::vector<std::string> warnings;

  bool operator==(const EvalReport&) const = default;
};

/// Runs the full evaluation of a candidate list. An empty list yields an
/// empty report with a warning instead of an error.
inline EvalReport build_report(const std::vector<MatchCandidate>& candidates, const GroundTruthAlignment& gt,
                               double operating_threshold, nlohmann::json params = nlohmann::json::object()) {
  EvalReport r;
  r.params = std::move(params);
  r.evaluated_frames = candidates.size();
  if (candidates.empty()) {
    r.warnings.push_back("no match candidates; curves are empty");
    return r;
  }
  r.pr_points = pr_curve(candidates, gt);
  auto roc = roc_auc(candidates, gt);
  r.roc_points = std::move(roc.points);
  r.auc = roc.auc;
  r.recall_at_full_precision = recall_at_full_precision(r.pr_points);
  r.operating_counts = confusion_counts(apply_threshold(candidates, operating_threshold), candidates, gt);
  return r;
}

namespace detail {

inline nlohmann::json threshold_json(double t) {
  if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
  return t;
}

inline double threshold_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["auc"] = r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr);
  j["recall_at_full_precision"] = r.recall_at_full_precision;
  j["evaluated_frames"] = r.evaluated_frames;
  j["operating_counts"] = {{"tp", r.operating_counts.tp},
                           {"fp", r.operating_counts.fp},
                           {"fn", r.operating_counts.fn},
                           {"tn", r.operating_counts.tn}};
  j["params"] = r.params;
  j["warnings"] = r.warnings;
  auto& pr = j["pr_points"] = nlohmann::json::array();
  for (const auto& p : r.pr_points)
    pr.push_back({{"precision", p.precision}, {"recall", p.recall}, {"threshold", detail::threshold_json(p.threshold)}});
  auto& roc = j["roc_points"] = nlohmann::json::array();
  for (const auto& p : r.roc_points)
    roc.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", detail::threshold_json(p.threshold)}});
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    if (!j.at("auc").is_null()) r.auc = j.at("auc").get<double>();
    r.recall_at_full_precision = j.at("recall_at_full_precision").get<double>();
    r.evaluated_frames = j.at("evaluated_frames").get<std::size_t>();
    const auto& oc = j.at("operating_counts");
    r.operating_counts = {oc.at("tp").get<std::size_t>(), oc.at("fp").get<std::size_t>(),
                          oc.at("fn").get<std::size_t>(), oc.at("tn").get<std::size_t>()};
    r.params = j.at("params");
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& p : j.at("pr_points"))
      r.pr_points.push_back({p.at("precision").get<double>(), p.at("recall").get<double>(),
                             detail::threshold_from_json(p.at("threshold"))});
    for (const auto& p : j.at("roc_points"))
      r.roc_points.push_back(
          {p.at("fpr").get<double>(), p.at("tpr").get<double>(), detail::threshold_from_json(p.at("threshold"))});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("report json: ") + e.what());
  }
}

inline std::string report_to_csv(const EvalReport& r) {
  std::string out = "kind,threshold,x,y\n";
  for (const auto& p : r.pr_points)
    out += "pr," + format_double(p.threshold) + "," + format_double(p.recall) + "," + format_double(p.precision) + "\n";
  for (const auto& p : r.roc_points)
    out += "roc," + format_double(p.threshold) + "," + format_double(p.fpr) + "," + format_double(p.tpr) + "\n";
  return out;
}

enum class ReportFormat { Json, Csv };

inline void emit_report(const EvalReport& r, const std::string& path, ReportFormat format) {
  write_file(path, format == ReportFormat::Json ? report_to_json(r).dump(2) + "\n" : report_to_csv(r));
}

/// Standalone SVG with a precision-recall panel and a ROC panel.
inline std::string report_to_svg(const EvalReport& r) {
  constexpr double kPanel = 320, kMargin = 40, kGap = 60;
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return std::string(buf);
  };
  auto panel = [&](double ox, const std::string& title, const std::string& xl, const std::string& yl,
                   const std::vector<std::pair<double, double>>& pts) {
    std::string s = "<g transform=\"translate(" + num(ox) + "," + num(kMargin) + ")\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + num(kPanel) + "\" height=\"" + num(kPanel) +
         "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 1; k < 4; ++k) {
      const double g = kPanel * k / 4;
      s += "<line x1=\"" + num(g) + "\" y1=\"0\" x2=\"" + num(g) + "\" y2=\"" + num(kPanel) + "\" stroke=\"#ddd\"/>\n";
      s += "<line x1=\"0\" y1=\"" + num(g) + "\" x2=\"" + num(kPanel) + "\" y2=\"" + num(g) + "\" stroke=\"#ddd\"/>\n";
    }
    s += "<text x=\"" + num(kPanel / 2) + "\" y=\"-12\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
    s += "<text x=\"" + num(kPanel / 2) + "\" y=\"" + num(kPanel + 28) + "\" text-anchor=\"middle\" font-size=\"12\">" +
         xl + "</text>\n";
    s += "<text x=\"-28\" y=\"" + num(kPanel / 2) + "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 -28 " +
         num(kPanel / 2) + ")\">" + yl + "</text>\n";
    if (!pts.empty()) {
      s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) s += ' ';
        s += num(pts[i].first * kPanel) + "," + num((1.0 - pts[i].second) * kPanel);
      }
      s += "\"/>\n";
    }
    return s + "</g>\n";
  };
  std::vector<std::pair<double, double>> pr, roc;
  for (const auto& p : r.pr_points) pr.emplace_back(p.recall, p.precision);
  std::vector<RocPoint> sorted = r.roc_points;
  std::sort(sorted.begin(), sorted.end(),
            [](const RocPoint& a, const RocPoint& b) { return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr; });
  if (!sorted.empty()) roc.emplace_back(0.0, 0.0);
  for (const auto& p : sorted) roc.emplace_back(p.fpr, p.tpr);
  if (!sorted.empty()) roc.emplace_back(1.0, 1.0);

  const double width = 2 * kPanel + 2 * kMargin + kGap;
  const double height = kPanel + 2 * kMargin + 20;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
                    "\" font-family=\"sans-serif\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += panel(kMargin, "Precision-Recall", "recall", "precision", pr);
  std::string auc = r.auc ? num(*r.auc) : std::string("n/a");
  svg += panel(kMargin + kPanel + kGap, "ROC (AUC " + auc + ")", "false positive rate", "true positive rate", roc);
  return svg + "</svg>\n";
}

inline void emit_plot(const EvalReport& r, const std::string& path) { write_file(path, report_to_svg(r)); }

}  // namespace seqlcd
