#pragma once

#include <string>
#include <vector>

#include "mlnet/nn.hpp"

namespace mlnet {

// Feature extractor plus a K-way closed-set head and K one-vs-all open-set
// heads. Each open head is a 2 x D linear map producing a (positive,
// negative) logit pair; its positive softmax component is the open score.
struct NetworkParams {
  Mlp extractor;
  DenseLayer closed_head;             // K x D
  std::vector<DenseLayer> open_heads; // K heads, each 2 x D

  Index num_classes() const { return closed_head.out_dim(); }
  Index feature_dim() const { return extractor.output_dim(); }
  Index input_dim() const { return extractor.input_dim(); }
};

struct NetworkGradients {
  MlpGradients extractor;
  DenseLayerGrad closed_head;
  std::vector<DenseLayerGrad> open_heads;
};

// One batch through extractor and both heads.
struct HeadOutputs {
  Matrix features;      // batch x D, raw (not normalized)
  Matrix closed_logits; // batch x K
  Matrix closed_probs;  // batch x K, rows on the simplex
  Matrix open_logit_gap;// batch x K, positive minus negative logit
  Matrix open_pos;      // batch x K, entries strictly in (0,1)
};

NetworkParams make_network(Index input_dim, const std::vector<Index>& hidden,
                           Index feature_dim, Index num_classes,
                           Activation activation, Rng& rng);

// z = F(x). Raw features; normalization happens only at memory insertion.
Matrix extract_features(const NetworkParams& net, const Matrix& batch);

// Softmax over the K class logits, per row.
Matrix closed_probs(const NetworkParams& net, const Matrix& features);

// Per class l, softmax over that head's (positive, negative) logit pair;
// only the positive component is returned.
Matrix open_scores(const NetworkParams& net, const Matrix& features);

// Full forward pass retaining extractor activations for backprop.
HeadOutputs forward_heads(const NetworkParams& net, const Matrix& batch,
                          MlpActivations* acts_out = nullptr);

// Head evaluation on externally supplied features (used for mixups).
Matrix closed_logits_of(const NetworkParams& net, const Matrix& features);
Matrix open_logit_gaps_of(const NetworkParams& net, const Matrix& features);

// Numerically stable helpers shared across modules.
Matrix softmax_rows(const Matrix& logits);
double stable_sigmoid(double x);
Matrix sigmoid(const Matrix& x);

// Flat parameter order: extractor first, then closed head, then open
// heads. The extractor/head boundary is what the optimizer's learning-rate
// groups key on.
Index network_param_count(const NetworkParams& net);
Index network_extractor_param_count(const NetworkParams& net);
Vector network_flatten(const NetworkParams& net);
void network_unflatten(NetworkParams& net, const Vector& flat);
Vector network_grad_flatten(const NetworkParams& net,
                            const NetworkGradients& grads);
NetworkGradients zero_gradients(const NetworkParams& net);

// Versioned text checkpoint: header (version, seed, dims), then tensors
// at full precision.
void save_checkpoint(const std::string& path, const NetworkParams& net,
                     std::uint64_t seed);
struct Checkpoint {
  NetworkParams net;
  std::uint64_t seed = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mlnet
