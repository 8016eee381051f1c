#pragma once

#include <string>
#include <vector>

#include "mlnet/model.hpp"
#include "mlnet/scenario.hpp"

namespace mlnet {

// predicted/true_label live in [0, K], where K encodes UNKNOWN.
struct PredictionRecord {
  Vector closed_probs;   // K-simplex
  Vector open_pos;       // K positive scores
  int closed_argmax = 0; // l*, lowest index on exact ties
  double selected_score = 0.0;  // open_pos[l*], retained for the curve
  int predicted = 0;
  int true_label = 0;
};

struct CurvePoint {
  double threshold = 0.0;
  double ccr = 0.0;  // correct-classification rate on known samples
  double fpr = 0.0;  // false-positive rate on unknown samples
};

struct MetricsReport {
  double closed_accuracy = 0.0;       // argmax accuracy over known samples
  std::vector<double> per_class_known_acc;
  double accuracy = 0.0;              // exact-label accuracy, UNKNOWN included
  bool has_unknown = false;
  double known_acc = 0.0;             // mean of per-class accuracies
  double unknown_acc = 0.0;
  double h_score = 0.0;
  std::vector<CurvePoint> curve;
  double ucr = 0.0;
};

// Known iff the true class id is below K (contiguity convention).
int map_target_label(int class_id, Index num_classes);

// l* = argmax closed probs; predicted = l* if open_pos[l*] >= threshold,
// else UNKNOWN. Only the selected head's score is consulted.
PredictionRecord predict(const NetworkParams& net, const Vector& input,
                         double threshold = 0.5);
PredictionRecord predict_from_outputs(const Vector& closed_probs_row,
                                      const Vector& open_pos_row,
                                      int true_label, double threshold);
std::vector<PredictionRecord> predict_dataset(const NetworkParams& net,
                                              const Dataset& target,
                                              double threshold = 0.5);

// Fraction with predicted == true_label; UNKNOWN counts as a label.
double accuracy(const std::vector<PredictionRecord>& predictions);

struct HScore {
  double known_acc = 0.0;
  double unknown_acc = 0.0;
  double h = 0.0;
  std::vector<double> per_class;  // target-present known classes, id order
};

// Harmonic mean of mean per-class known accuracy and unknown accuracy.
// Requires at least one known-class and one unknown-class sample.
HScore h_score(const std::vector<PredictionRecord>& predictions,
               Index num_classes);

struct CcrFprCurve {
  std::vector<CurvePoint> points;  // threshold-ascending
  double ucr = 0.0;                // trapezoidal area over FPR in [0,1]
};

CcrFprCurve ccr_fpr_curve(const std::vector<PredictionRecord>& predictions,
                          Index num_classes);

MetricsReport evaluate_predictions(
    const std::vector<PredictionRecord>& predictions, Index num_classes);

void write_metrics_csv(const std::string& path, const std::string& setting,
                       std::uint64_t seed, const MetricsReport& report);
void write_curve_csv(const std::string& path,
                     const std::vector<CurvePoint>& curve);

}  // namespace mlnet
