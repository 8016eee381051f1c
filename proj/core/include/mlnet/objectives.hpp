#pragma once

#include "mlnet/model.hpp"
#include "mlnet/random.hpp"
#include "mlnet/types.hpp"

namespace mlnet {

// Trade-off weights of the full objective. gamma scales open-set entropy
// minimization, beta1 the neighborhood-invariance term, beta2 the mixup
// term, eta the consistency constraint; alpha is the Beta-distribution
// shape for mixup coefficients.
struct LossWeights {
  double gamma = 0.1;
  double beta1 = 0.5;
  double beta2 = 0.1;
  double eta = 0.16;
  double alpha = 2.0;
};

// -log p_c(y|x) over a closed-set probability row.
double loss_cls(const Vector& closed_probs_row, int label);

// One-vs-all loss with hard-negative sampling:
// -log p_o(y|x) - min_{l != y} log(1 - p_o(l|x)).
double loss_ova(const Vector& open_pos_row, int label);
int hardest_negative(const Vector& open_pos_row, int label);

// Mean binary entropy of the open-set positive scores; in [0, ln 2].
double loss_oem(const Vector& open_pos_row);

// E_src[L_cls + L_ova] + gamma * E_tgt[L_ent] from per-sample rows.
double loss_base(const Matrix& src_closed_probs, const Matrix& src_open_pos,
                 const std::vector<int>& src_labels,
                 const Matrix& tgt_open_pos, double gamma);

// lambda ~ Beta(alpha, alpha) via two Gamma draws.
double sample_mix_coeff(Rng& rng, double alpha);

// z^m = lambda * z_src + (1 - lambda) * z_tgt.
Vector mix_features(const Vector& z_src, const Vector& z_tgt, double lambda);

// -log(1 - p_o(y^s | z^m)): pushes the mixup's positive score toward 0.
double loss_cmm(const NetworkParams& net, const Vector& mixed_feature,
                int source_label);
double cmm_from_score(double open_pos_score);

// Source-domain manifold mixup ablation: both constituent labels are
// penalized; pairs with identical labels are skipped by the caller.
double loss_smm(const NetworkParams& net, const Vector& mixed_feature,
                int label_a, int label_b);

// -(1/K) sum_l p_c(l|x) p_o(l|x); in [-1/K, 0].
double loss_cc(const Vector& closed_probs_row, const Vector& open_pos_row);

}  // namespace mlnet
