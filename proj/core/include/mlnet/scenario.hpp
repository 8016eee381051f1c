#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mlnet/errors.hpp"
#include "mlnet/random.hpp"
#include "mlnet/types.hpp"

namespace mlnet {

enum class Domain { Source, Target };
enum class ClassRole { Shared, SourcePrivate, TargetPrivate };

// Category-shift split. Class ids are contiguous with shared classes
// first: [0, shared) shared, then source-private, then target-private.
// The source label set is [0, shared + source_private); anything at or
// above that is unknown at evaluation time.
struct SplitSpec {
  int shared = 6;
  int source_private = 3;
  int target_private = 3;

  int num_source_classes() const { return shared + source_private; }
  int num_target_classes() const { return shared + target_private; }
  int num_classes_total() const {
    return shared + source_private + target_private;
  }
  ClassRole role_of(int class_id) const;
  bool in_source(int class_id) const;
  bool in_target(int class_id) const;
  // cda | pda | oda | opda, derived from the counts
  std::string setting_name() const;
};

// Synthetic Gaussian-cluster domain pair with controllable shift. Per
// class one cluster mean is drawn; source samples come from the cluster,
// target samples from the affinely shifted cluster, re-noised.
struct ScenarioSpec {
  SplitSpec split;
  int dim = 16;
  int samples_per_class_source = 50;
  int samples_per_class_target = 50;
  // optional per-class overrides for imbalance experiments (class-id order)
  std::vector<int> per_class_source_counts;
  std::vector<int> per_class_target_counts;
  double cluster_spacing = 5.0;   // scale of the cluster means
  double noise_sigma_source = 1.0;
  double noise_sigma_target = 1.0;
  // affine target shift: disjoint-plane rotations of this angle, per-dim
  // scaling in [scale_min, scale_max], translation of this magnitude
  double shift_rotation = 0.2;
  double shift_scale_min = 0.8;
  double shift_scale_max = 1.25;
  double shift_translation = 0.5;
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix features;          // N x dim
  std::vector<int> labels;  // class ids
  Domain domain = Domain::Source;
  std::map<int, ClassRole> class_roles;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
};

std::pair<Dataset, Dataset> generate_scenario(const ScenarioSpec& spec);

// CSV schema: header `domain,label,f0,...,f{D-1}`; labels 0-based, domain
// `source` or `target`. Features are written losslessly.
void write_dataset_csv(const std::string& path,
                       const std::vector<const Dataset*>& datasets);

struct LoadReport {
  int dropped_source = 0;  // rows whose class is outside the domain label set
  int dropped_target = 0;
};

// Loads one or more CSVs and assigns roles via the contiguity convention.
std::pair<Dataset, Dataset> load_feature_csv(
    const std::vector<std::string>& paths, const SplitSpec& split,
    LoadReport* report = nullptr);

// One training iteration's worth of indices into each domain.
struct PairedBatch {
  std::vector<int> source_indices;
  std::vector<int> target_indices;
};

// Paired batches for one epoch: both domains reshuffled, the smaller one
// cycled so the larger is covered; floor(max(Ns,Nt)/batch) iterations.
class BatchIterator {
 public:
  BatchIterator(Index num_source, Index num_target, int batch_size, Rng& rng);

  int iterations_per_epoch() const { return iterations_; }
  PairedBatch batch(int iteration) const;

 private:
  std::vector<int> source_order_;
  std::vector<int> target_order_;
  int batch_size_;
  int iterations_;
};

// K_s / (K * K'): probability that a uniformly drawn cross-domain pair
// shares a common known class.
double known_mixup_probability(int num_source_classes, int num_target_classes,
                               int num_shared_classes);

}  // namespace mlnet
