#pragma once

#include <string>
#include <vector>

#include "mlnet/errors.hpp"
#include "mlnet/types.hpp"

namespace mlnet {

enum class NeighborMode { Adaptive, Knn };

const char* neighbor_mode_name(NeighborMode m);
NeighborMode neighbor_mode_from_name(const std::string& name);

// Row-L2-normalized store of one feature per target sample, updated in
// place every mini-batch. Stored rows are snapshots: no gradient flows
// through them.
class MemoryBank {
 public:
  MemoryBank(Index num_rows, Index dim, double tau = 10.0,
             double epsilon = 0.875, NeighborMode mode = NeighborMode::Adaptive,
             int knn_k = 5);

  Index size() const { return rows_.rows(); }
  Index dim() const { return rows_.cols(); }
  double tau() const { return tau_; }
  double epsilon() const { return epsilon_; }
  NeighborMode mode() const { return mode_; }
  int knn_k() const { return knn_k_; }
  const Matrix& rows() const { return rows_; }

  bool fully_initialized() const { return written_count_ == size(); }

  // m_j <- z_j / ||z_j||_2 for each (index, feature) pair.
  void update(const std::vector<int>& indices, const Matrix& features);

 private:
  Matrix rows_;
  std::vector<bool> written_;
  Index written_count_ = 0;
  double tau_;
  double epsilon_;
  NeighborMode mode_;
  int knn_k_;
};

// Inner products of row j against every row; s_{j,j} = 1 for unit rows.
Vector similarities(const MemoryBank& bank, Index query_index);

// Softmax over tau-scaled similarities, max-subtracted for stability.
Vector neighbor_probs(const MemoryBank& bank, Index query_index);

// {k != j : s_{j,k} > eps * s*} with the (lowest-index) nearest neighbor
// always included; exact threshold ties excluded. Sorted ascending.
std::vector<int> adaptive_neighborhood(const MemoryBank& bank,
                                       Index query_index);
std::vector<int> adaptive_neighborhood_of(const Vector& sims, Index query_index,
                                          double epsilon);

// Indices of the k largest similarities excluding j, ties broken by lower
// index. Sorted ascending.
std::vector<int> knn_neighborhood(const MemoryBank& bank, Index query_index,
                                  int k);
std::vector<int> knn_neighborhood_of(const Vector& sims, Index query_index,
                                     int k);

// Neighborhood under the bank's configured mode.
std::vector<int> neighborhood(const MemoryBank& bank, Index query_index);

// Neighbor sets for every row, one pass. Recomputed per mini-batch; this
// is what Jaccard confidences are read from.
std::vector<std::vector<int>> all_neighborhoods(const MemoryBank& bank);

// |A ∩ B| / |A ∪ B| over sorted index sets; 0 when both are empty.
double jaccard_confidence(const std::vector<int>& a, const std::vector<int>& b);

struct NilResult {
  double loss = 0.0;
  Vector grad;  // dLoss/d(live feature), pre-normalization
};

// Confidence-guided neighborhood-invariance loss for one query:
//   -(1/|N_j|) sum_{k in N_j} w_jk log p_jk
// where p_jk is the tau-softmax of the live query row against the bank.
// The gradient flows only through `live_feature` (its normalization
// included); bank rows are constants. Callers must have written row j
// from `live_feature` this step. With `use_confidence` off, w_jk = 1.
NilResult loss_nil(const MemoryBank& bank,
                   const std::vector<std::vector<int>>& neighborhoods,
                   Index query_index, const Vector& live_feature,
                   bool use_confidence = true);
NilResult loss_nil(const MemoryBank& bank, Index query_index,
                   const Vector& live_feature, bool use_confidence = true);

// Naive O(N_t * D) re-derivation of a neighbor set from raw (unnormalized)
// feature copies, normalized on the fly. Verification oracle; shares no
// code with the bank fast path.
std::vector<int> brute_force_neighbors(const Matrix& raw_features, Index j,
                                       NeighborMode mode, double epsilon,
                                       int knn_k);

// `index,f0,...,f{D-1}` rows for offline inspection.
void dump_bank_csv(const MemoryBank& bank, const std::string& path);

}  // namespace mlnet
