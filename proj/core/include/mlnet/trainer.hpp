#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mlnet/config.hpp"
#include "mlnet/evaluate.hpp"
#include "mlnet/memory_bank.hpp"
#include "mlnet/model.hpp"

namespace mlnet {

// One iteration's inputs. Mixup coefficients and pairings are drawn by
// the caller so the objective itself is a pure function of the network
// parameters (which is what the finite-difference checks differentiate).
struct BatchInputs {
  Matrix source_x;
  std::vector<int> source_labels;
  Matrix target_x;
  std::vector<int> target_indices;  // rows into the memory bank
  std::vector<double> lambdas;      // one per mixup pair
  std::vector<int> smm_partners;    // source-mode partner row; -1 skips
};

struct LossBreakdown {
  double cls = 0.0;
  double ova = 0.0;
  double oem = 0.0;
  double nil = 0.0;
  double cmm = 0.0;
  double cc = 0.0;
  double total = 0.0;
};

// Which terms enter the objective. Terms also drop out when their weight
// is zero; this mask exists so tests can isolate single components.
struct ObjectiveSelect {
  bool cls = true;
  bool ova = true;
  bool oem = true;
  bool nil = true;
  bool cmm = true;
  bool cc = true;
};

struct ObjectiveOptions {
  LossWeights weights;
  MixupMode mixup_mode = MixupMode::Cross;
  bool cc_full_gradient = false;
  bool nil_confidence = true;
  bool mixup_feature_gradients = true;
  ObjectiveSelect select;
};

// Full objective over one paired batch. The memory bank must already hold
// the batch rows (freshly updated); it and the neighborhood table are
// constants of the objective. Pass grads = nullptr to evaluate only.
LossBreakdown compute_objective(
    const NetworkParams& net, const BatchInputs& batch,
    const MemoryBank* bank,
    const std::vector<std::vector<int>>* neighborhoods,
    const ObjectiveOptions& opts, NetworkGradients* grads);

struct TraceRow {
  long iter = 0;
  int epoch = 0;
  LossBreakdown losses;
  double lr = 0.0;  // scheduled extractor learning rate
};

struct RunArtifacts {
  std::string out_dir;
  std::string trace_csv;
  std::string metrics_csv;
  std::string curve_csv;  // empty when the target has no unknown classes
  std::string checkpoint;
  std::string resolved_config;
  std::string data_csv;
  MetricsReport final_metrics;
  std::string setting;
  std::vector<TraceRow> trace;
};

// Full training run: epoch 0 fills the memory bank without gradients,
// then each epoch iterates paired batches through the weighted objective
// with inverse-scheduled Nesterov SGD. Emits trace/metrics/curve CSVs,
// a checkpoint and a resolved-config echo under cfg.out_dir.
RunArtifacts train_run(const RunConfig& cfg);

struct SweepRow {
  double beta2 = 0.0;
  double eta = 0.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string setting;
  MetricsReport metrics;
};

// Grid over (beta2, eta, epsilon, seed); empty grid axes fall back to the
// template's value. One isolated train_run per point; failures are
// recorded and the sweep continues. Collated to <out>/sweep_results.csv.
std::vector<SweepRow> sweep(const RunConfig& base, const std::string& out_dir,
                            int jobs = 1);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

void write_trace_csv(const std::string& path,
                     const std::vector<TraceRow>& trace);

}  // namespace mlnet
