#include "mlnet/objectives.hpp"

#include <cmath>

namespace mlnet {

namespace {
constexpr double kLogClamp = 1e-12;

double clamped_log(double x) { return std::log(std::max(x, kLogClamp)); }
}  // namespace

double loss_cls(const Vector& closed_probs_row, int label) {
  if (label < 0 || label >= closed_probs_row.size())
    throw DomainError("loss_cls: label out of range");
  return -clamped_log(closed_probs_row[label]);
}

int hardest_negative(const Vector& open_pos_row, int label) {
  int best = -1;
  for (Index l = 0; l < open_pos_row.size(); ++l) {
    if (static_cast<int>(l) == label) continue;
    if (best < 0 || open_pos_row[l] > open_pos_row[best])
      best = static_cast<int>(l);
  }
  return best;
}

double loss_ova(const Vector& open_pos_row, int label) {
  if (open_pos_row.size() < 2) throw DomainError("loss_ova: need K >= 2");
  if (label < 0 || label >= open_pos_row.size())
    throw DomainError("loss_ova: label out of range");
  const int neg = hardest_negative(open_pos_row, label);
  return -clamped_log(open_pos_row[label]) -
         clamped_log(1.0 - open_pos_row[neg]);
}

double loss_oem(const Vector& open_pos_row) {
  double sum = 0.0;
  for (Index l = 0; l < open_pos_row.size(); ++l) {
    const double p = open_pos_row[l];
    sum += p * clamped_log(p) + (1.0 - p) * clamped_log(1.0 - p);
  }
  return -sum / static_cast<double>(open_pos_row.size());
}

double loss_base(const Matrix& src_closed_probs, const Matrix& src_open_pos,
                 const std::vector<int>& src_labels,
                 const Matrix& tgt_open_pos, double gamma) {
  if (src_closed_probs.rows() == 0 || tgt_open_pos.rows() == 0)
    throw DomainError("loss_base: empty batch");
  double cls = 0.0, ova = 0.0;
  for (Index i = 0; i < src_closed_probs.rows(); ++i) {
    cls += loss_cls(src_closed_probs.row(i), src_labels[i]);
    ova += loss_ova(src_open_pos.row(i), src_labels[i]);
  }
  const double ns = static_cast<double>(src_closed_probs.rows());
  double ent = 0.0;
  for (Index j = 0; j < tgt_open_pos.rows(); ++j)
    ent += loss_oem(tgt_open_pos.row(j));
  const double nt = static_cast<double>(tgt_open_pos.rows());
  return (cls + ova) / ns + gamma * ent / nt;
}

double sample_mix_coeff(Rng& rng, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("sample_mix_coeff: alpha must be > 0");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double a = gamma(rng);
  const double b = gamma(rng);
  const double s = a + b;
  return s > 0.0 ? a / s : 0.5;
}

Vector mix_features(const Vector& z_src, const Vector& z_tgt, double lambda) {
  if (z_src.size() != z_tgt.size())
    throw ShapeError("mix_features: dimension mismatch");
  return lambda * z_src + (1.0 - lambda) * z_tgt;
}

double cmm_from_score(double open_pos_score) {
  return -clamped_log(1.0 - open_pos_score);
}

double loss_cmm(const NetworkParams& net, const Vector& mixed_feature,
                int source_label) {
  if (source_label < 0 || source_label >= net.num_classes())
    throw DomainError("loss_cmm: label out of range");
  Matrix scores = open_scores(net, mixed_feature.transpose());
  return cmm_from_score(scores(0, source_label));
}

double loss_smm(const NetworkParams& net, const Vector& mixed_feature,
                int label_a, int label_b) {
  if (label_a == label_b)
    throw DomainError("loss_smm: same-class pair must be skipped");
  Matrix scores = open_scores(net, mixed_feature.transpose());
  return cmm_from_score(scores(0, label_a)) + cmm_from_score(scores(0, label_b));
}

double loss_cc(const Vector& closed_probs_row, const Vector& open_pos_row) {
  if (closed_probs_row.size() != open_pos_row.size())
    throw ShapeError("loss_cc: row size mismatch");
  const double k = static_cast<double>(closed_probs_row.size());
  return -closed_probs_row.dot(open_pos_row) / k;
}

}  // namespace mlnet
