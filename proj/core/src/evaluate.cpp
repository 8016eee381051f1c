#include "mlnet/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace mlnet {

int map_target_label(int class_id, Index num_classes) {
  return class_id < static_cast<int>(num_classes)
             ? class_id
             : static_cast<int>(num_classes);
}

PredictionRecord predict_from_outputs(const Vector& closed_probs_row,
                                      const Vector& open_pos_row,
                                      int true_label, double threshold) {
  if (!(threshold > 0.0) || !(threshold < 1.0))
    throw DomainError("predict: threshold must be in (0,1)");
  PredictionRecord rec;
  rec.closed_probs = closed_probs_row;
  rec.open_pos = open_pos_row;
  rec.true_label = true_label;
  Index best = 0;
  for (Index l = 1; l < closed_probs_row.size(); ++l)
    if (closed_probs_row[l] > closed_probs_row[best]) best = l;
  rec.closed_argmax = static_cast<int>(best);
  rec.selected_score = open_pos_row[best];
  const int unknown = static_cast<int>(closed_probs_row.size());
  rec.predicted =
      rec.selected_score >= threshold ? rec.closed_argmax : unknown;
  return rec;
}

PredictionRecord predict(const NetworkParams& net, const Vector& input,
                         double threshold) {
  Matrix z = extract_features(net, input.transpose());
  Vector closed = closed_probs(net, z).row(0);
  Vector open = open_scores(net, z).row(0);
  return predict_from_outputs(closed, open, -1, threshold);
}

std::vector<PredictionRecord> predict_dataset(const NetworkParams& net,
                                              const Dataset& target,
                                              double threshold) {
  Matrix z = extract_features(net, target.features);
  Matrix closed = closed_probs(net, z);
  Matrix open = open_scores(net, z);
  std::vector<PredictionRecord> out;
  out.reserve(static_cast<std::size_t>(target.size()));
  for (Index r = 0; r < target.size(); ++r) {
    const int mapped = map_target_label(
        target.labels[static_cast<std::size_t>(r)], net.num_classes());
    out.push_back(predict_from_outputs(closed.row(r), open.row(r), mapped,
                                       threshold));
  }
  return out;
}

double accuracy(const std::vector<PredictionRecord>& predictions) {
  if (predictions.empty()) throw DomainError("accuracy: no predictions");
  std::size_t correct = 0;
  for (const auto& p : predictions)
    if (p.predicted == p.true_label) ++correct;
  return static_cast<double>(correct) /
         static_cast<double>(predictions.size());
}

HScore h_score(const std::vector<PredictionRecord>& predictions,
               Index num_classes) {
  const int unknown = static_cast<int>(num_classes);
  std::vector<int> total(static_cast<std::size_t>(num_classes), 0);
  std::vector<int> correct(static_cast<std::size_t>(num_classes), 0);
  int unknown_total = 0, unknown_correct = 0;
  for (const auto& p : predictions) {
    if (p.true_label == unknown) {
      ++unknown_total;
      if (p.predicted == unknown) ++unknown_correct;
    } else {
      ++total[static_cast<std::size_t>(p.true_label)];
      if (p.predicted == p.true_label)
        ++correct[static_cast<std::size_t>(p.true_label)];
    }
  }
  const bool any_known =
      std::any_of(total.begin(), total.end(), [](int t) { return t > 0; });
  if (!any_known || unknown_total == 0)
    throw DomainError(
        "h_score: needs both known- and unknown-class target samples");

  HScore hs;
  // average only over known classes present in the target
  for (Index c = 0; c < num_classes; ++c) {
    if (total[static_cast<std::size_t>(c)] == 0) continue;
    hs.per_class.push_back(
        static_cast<double>(correct[static_cast<std::size_t>(c)]) /
        static_cast<double>(total[static_cast<std::size_t>(c)]));
  }
  hs.known_acc = 0.0;
  for (double a : hs.per_class) hs.known_acc += a;
  hs.known_acc /= static_cast<double>(hs.per_class.size());
  hs.unknown_acc =
      static_cast<double>(unknown_correct) / static_cast<double>(unknown_total);
  const double denom = hs.known_acc + hs.unknown_acc;
  hs.h = denom > 0.0 ? 2.0 * hs.known_acc * hs.unknown_acc / denom : 0.0;
  return hs;
}

CcrFprCurve ccr_fpr_curve(const std::vector<PredictionRecord>& predictions,
                          Index num_classes) {
  const int unknown = static_cast<int>(num_classes);
  std::size_t n_known = 0, n_unknown = 0;
  for (const auto& p : predictions)
    (p.true_label == unknown ? n_unknown : n_known)++;
  if (n_unknown == 0)
    throw DomainError("ccr_fpr_curve: no unknown-class samples");
  if (n_known == 0)
    throw DomainError("ccr_fpr_curve: no known-class samples");

  std::set<double> thresholds{0.0, 1.0};
  for (const auto& p : predictions) thresholds.insert(p.selected_score);

  CcrFprCurve curve;
  curve.points.reserve(thresholds.size());
  for (double th : thresholds) {
    std::size_t ccr_hits = 0, fpr_hits = 0;
    for (const auto& p : predictions) {
      const bool accepted = p.selected_score >= th;
      if (p.true_label == unknown) {
        if (accepted) ++fpr_hits;
      } else if (accepted && p.closed_argmax == p.true_label) {
        ++ccr_hits;
      }
    }
    curve.points.push_back(
        {th, static_cast<double>(ccr_hits) / static_cast<double>(n_known),
         static_cast<double>(fpr_hits) / static_cast<double>(n_unknown)});
  }

  // threshold-ascending means FPR runs 1 -> 0; integrate CCR dFPR
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    const auto& hi = curve.points[i];      // larger FPR
    const auto& lo = curve.points[i + 1];  // smaller FPR
    area += (hi.fpr - lo.fpr) * 0.5 * (hi.ccr + lo.ccr);
  }
  curve.ucr = area;
  return curve;
}

MetricsReport evaluate_predictions(
    const std::vector<PredictionRecord>& predictions, Index num_classes) {
  MetricsReport rep;
  rep.accuracy = accuracy(predictions);

  const int unknown = static_cast<int>(num_classes);
  std::size_t known_total = 0, closed_hits = 0;
  bool any_unknown = false;
  for (const auto& p : predictions) {
    if (p.true_label == unknown) {
      any_unknown = true;
      continue;
    }
    ++known_total;
    if (p.closed_argmax == p.true_label) ++closed_hits;
  }
  rep.closed_accuracy = known_total
                            ? static_cast<double>(closed_hits) /
                                  static_cast<double>(known_total)
                            : 0.0;
  // the open-set block needs both populations; a target of only unknowns
  // (or only knowns) reports plain accuracy and leaves H/UCR undefined
  rep.has_unknown = any_unknown && known_total > 0;
  if (rep.has_unknown) {
    HScore hs = h_score(predictions, num_classes);
    rep.known_acc = hs.known_acc;
    rep.unknown_acc = hs.unknown_acc;
    rep.h_score = hs.h;
    rep.per_class_known_acc = hs.per_class;
    CcrFprCurve curve = ccr_fpr_curve(predictions, num_classes);
    rep.curve = std::move(curve.points);
    rep.ucr = curve.ucr;
  }
  return rep;
}

namespace {

std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::string& setting,
                       std::uint64_t seed, const MetricsReport& report) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write metrics: " + path);
  os << "setting,seed,a_known,a_unknown,h_score,accuracy,ucr\n";
  os << setting << "," << seed << ",";
  if (report.has_unknown) {
    os << fmt(report.known_acc) << "," << fmt(report.unknown_acc) << ","
       << fmt(report.h_score) << "," << fmt(report.accuracy) << ","
       << fmt(report.ucr) << "\n";
  } else {
    // H-score and UCR are undefined without unknown-class samples
    os << fmt(report.closed_accuracy) << ",nan,nan," << fmt(report.accuracy)
       << ",nan\n";
  }
}

void write_curve_csv(const std::string& path,
                     const std::vector<CurvePoint>& curve) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write curve: " + path);
  os << "threshold,ccr,fpr\n";
  for (const auto& pt : curve)
    os << fmt(pt.threshold) << "," << fmt(pt.ccr) << "," << fmt(pt.fpr)
       << "\n";
}

}  // namespace mlnet
