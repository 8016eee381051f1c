#include <cmath>

#include "doctest.h"
#include "mlnet/evaluate.hpp"

using namespace mlnet;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

PredictionRecord rec(std::initializer_list<double> closed,
                     std::initializer_list<double> open, int true_label,
                     double threshold = 0.5) {
  return predict_from_outputs(vec(closed), vec(open), true_label, threshold);
}

}  // namespace

TEST_CASE("predict accepts a confident known class") {
  PredictionRecord r = rec({0.7, 0.3}, {0.9, 0.1}, 0);
  CHECK(r.closed_argmax == 0);
  CHECK(r.predicted == 0);
  CHECK(r.selected_score == 0.9);
}

TEST_CASE("predict consults only the selected head's score") {
  // head 1 is confident, but the closed argmax is 0 and its score is low
  PredictionRecord r = rec({0.7, 0.3}, {0.4, 0.9}, 0);
  CHECK(r.predicted == 2);  // UNKNOWN = K
}

TEST_CASE("predict keeps the boundary score as known") {
  PredictionRecord r = rec({0.7, 0.3}, {0.5, 0.1}, 0);
  CHECK(r.predicted == 0);  // >= 0.5 convention
  PredictionRecord below = rec({0.7, 0.3}, {0.4999, 0.1}, 0);
  CHECK(below.predicted == 2);
  CHECK_THROWS_AS(rec({0.7, 0.3}, {0.5, 0.1}, 0, 0.0), DomainError);
}

TEST_CASE("predict breaks exact closed ties toward the lower index") {
  PredictionRecord r = rec({0.4, 0.4, 0.2}, {0.9, 0.9, 0.9}, 0);
  CHECK(r.closed_argmax == 0);
}

TEST_CASE("predict is invariant to monotone closed transforms") {
  // any strictly monotone map of all closed values keeps the argmax;
  // per-head maps that keep each score on its side of 0.5 keep the gate
  Vector closed = vec({0.5, 0.3, 0.2});
  Vector open = vec({0.8, 0.2, 0.3});
  PredictionRecord base = predict_from_outputs(closed, open, 0, 0.5);

  Vector closed2 = closed.unaryExpr([](double p) { return p * p * p + 1.0; });
  Vector open2 = vec({0.97, 0.31, 0.11});  // sides of 0.5 preserved
  PredictionRecord moved = predict_from_outputs(closed2, open2, 0, 0.5);
  CHECK(moved.closed_argmax == base.closed_argmax);
  CHECK(moved.predicted == base.predicted);
}

TEST_CASE("map_target_label folds target-private ids to UNKNOWN") {
  CHECK(map_target_label(3, 5) == 3);
  CHECK(map_target_label(5, 5) == 5);
  CHECK(map_target_label(9, 5) == 5);
}

TEST_CASE("accuracy counts exact label matches") {
  std::vector<PredictionRecord> all = {
      rec({0.9, 0.1}, {0.9, 0.9}, 0),  // predicted 0, true 0
      rec({0.1, 0.9}, {0.9, 0.9}, 1),  // predicted 1, true 1
      rec({0.9, 0.1}, {0.1, 0.9}, 2),  // predicted UNKNOWN, true UNKNOWN
      rec({0.9, 0.1}, {0.9, 0.9}, 1),  // predicted 0, true 1
  };
  CHECK(accuracy(all) == doctest::Approx(0.75));
  CHECK(accuracy({all[0]}) == 1.0);
  CHECK(accuracy({all[3]}) == 0.0);
  CHECK_THROWS_AS(accuracy({}), DomainError);
}

TEST_CASE("h_score worked cases") {
  std::vector<PredictionRecord> perfect = {
      rec({0.9, 0.1}, {0.9, 0.1}, 0),
      rec({0.1, 0.9}, {0.1, 0.9}, 1),
      rec({0.6, 0.4}, {0.2, 0.2}, 2),
  };
  HScore hs = h_score(perfect, 2);
  CHECK(hs.known_acc == 1.0);
  CHECK(hs.unknown_acc == 1.0);
  CHECK(hs.h == 1.0);

  std::vector<PredictionRecord> no_unknown_caught = {
      rec({0.9, 0.1}, {0.9, 0.1}, 0),
      rec({0.6, 0.4}, {0.9, 0.2}, 2),  // unknown accepted as class 0
  };
  CHECK(h_score(no_unknown_caught, 2).h == 0.0);

  // a_k = 0.5 (one of two known classes right), a_u = 1 -> H = 2/3
  std::vector<PredictionRecord> mixed = {
      rec({0.9, 0.1}, {0.9, 0.1}, 0),
      rec({0.9, 0.1}, {0.9, 0.1}, 1),  // wrong class
      rec({0.6, 0.4}, {0.2, 0.2}, 2),
  };
  HScore m = h_score(mixed, 2);
  CHECK(m.known_acc == doctest::Approx(0.5));
  CHECK(m.unknown_acc == 1.0);
  CHECK(m.h == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("h_score requires both populations") {
  std::vector<PredictionRecord> only_known = {rec({0.9, 0.1}, {0.9, 0.1}, 0)};
  CHECK_THROWS_AS(h_score(only_known, 2), DomainError);
  std::vector<PredictionRecord> only_unknown = {rec({0.9, 0.1}, {0.1, 0.1}, 2)};
  CHECK_THROWS_AS(h_score(only_unknown, 2), DomainError);
}

TEST_CASE("h_score per-class average ignores target-absent classes") {
  // class 1 never appears in the target; its head plays no role in a_k
  std::vector<PredictionRecord> preds = {
      rec({0.9, 0.05, 0.05}, {0.9, 0.1, 0.1}, 0),
      rec({0.05, 0.05, 0.9}, {0.1, 0.1, 0.9}, 2),
      rec({0.6, 0.2, 0.2}, {0.2, 0.2, 0.2}, 3),
  };
  HScore hs = h_score(preds, 3);
  CHECK(hs.per_class.size() == 2);
  CHECK(hs.known_acc == 1.0);
}

TEST_CASE("h_score never exceeds twice the smaller accuracy") {
  Rng rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double ak = u(rng), au = u(rng);
    const double h = (ak + au) > 0 ? 2 * ak * au / (ak + au) : 0.0;
    CHECK(h <= 2.0 * std::min(ak, au) + 1e-12);
  }
}

TEST_CASE("ccr_fpr_curve endpoints") {
  std::vector<PredictionRecord> preds = {
      rec({0.9, 0.1}, {0.8, 0.0}, 0),   // known, correct argmax, score .8
      rec({0.1, 0.9}, {0.0, 0.6}, 1),   // known, correct argmax, score .6
      rec({0.1, 0.9}, {0.0, 0.7}, 0),   // known, wrong argmax
      rec({0.9, 0.1}, {0.3, 0.0}, 2),   // unknown, score .3
  };
  CcrFprCurve curve = ccr_fpr_curve(preds, 2);
  const CurvePoint& floor = curve.points.front();
  CHECK(floor.threshold == 0.0);
  CHECK(floor.fpr == 1.0);
  CHECK(floor.ccr == doctest::Approx(2.0 / 3.0));  // argmax accuracy on knowns
  const CurvePoint& ceil = curve.points.back();
  CHECK(ceil.threshold == 1.0);
  CHECK(ceil.fpr == 0.0);
  CHECK(ceil.ccr == 0.0);
}

TEST_CASE("ccr and fpr are non-increasing in the threshold") {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PredictionRecord> preds;
  for (int i = 0; i < 60; ++i) {
    const double s = u(rng);
    preds.push_back(rec({0.5 + u(rng) * 0.5, 0.2}, {s, s}, i % 3));
  }
  CcrFprCurve curve = ccr_fpr_curve(preds, 2);
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    CHECK(curve.points[i + 1].ccr <= curve.points[i].ccr);
    CHECK(curve.points[i + 1].fpr <= curve.points[i].fpr);
  }
  CHECK(curve.ucr >= 0.0);
  CHECK(curve.ucr <= 1.0);
}

TEST_CASE("ideal separation yields UCR of one") {
  std::vector<PredictionRecord> preds;
  // knowns: perfect argmax, scores well above every unknown score
  preds.push_back(rec({0.9, 0.1}, {0.9, 0.0}, 0));
  preds.push_back(rec({0.1, 0.9}, {0.0, 0.95}, 1));
  preds.push_back(rec({0.9, 0.1}, {0.2, 0.0}, 2));
  preds.push_back(rec({0.8, 0.2}, {0.1, 0.0}, 2));
  CcrFprCurve curve = ccr_fpr_curve(preds, 2);
  CHECK(curve.ucr == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ccr_fpr_curve requires unknown samples") {
  std::vector<PredictionRecord> preds = {rec({0.9, 0.1}, {0.9, 0.1}, 0)};
  CHECK_THROWS_AS(ccr_fpr_curve(preds, 2), DomainError);
}

TEST_CASE("evaluate_predictions fills the full report") {
  std::vector<PredictionRecord> preds = {
      rec({0.9, 0.1}, {0.9, 0.1}, 0),
      rec({0.1, 0.9}, {0.1, 0.9}, 1),
      rec({0.6, 0.4}, {0.1, 0.1}, 2),
  };
  MetricsReport rep = evaluate_predictions(preds, 2);
  CHECK(rep.has_unknown);
  CHECK(rep.accuracy == 1.0);
  CHECK(rep.h_score == 1.0);
  CHECK(rep.closed_accuracy == 1.0);
  CHECK(rep.curve.size() >= 2);
  CHECK(rep.ucr == doctest::Approx(1.0));

  std::vector<PredictionRecord> closed_only = {
      rec({0.9, 0.1}, {0.9, 0.1}, 0)};
  MetricsReport plain = evaluate_predictions(closed_only, 2);
  CHECK_FALSE(plain.has_unknown);
  CHECK(plain.accuracy == 1.0);

  // a target of only unknown-class samples leaves H and UCR undefined
  std::vector<PredictionRecord> unknown_only = {
      rec({0.6, 0.4}, {0.1, 0.1}, 2), rec({0.7, 0.3}, {0.9, 0.1}, 2)};
  MetricsReport uo = evaluate_predictions(unknown_only, 2);
  CHECK_FALSE(uo.has_unknown);
  CHECK(uo.accuracy == 0.5);
  CHECK(uo.curve.empty());
}
