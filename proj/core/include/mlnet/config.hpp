#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mlnet/memory_bank.hpp"
#include "mlnet/nn.hpp"
#include "mlnet/objectives.hpp"
#include "mlnet/scenario.hpp"

namespace mlnet {

enum class MixupMode { Cross, Source, Off };

const char* mixup_mode_name(MixupMode m);
MixupMode mixup_mode_from_name(const std::string& name);

// Everything a run needs. Flat `key = value` text on disk; `[section]`
// headers are allowed for readability and ignored, keys are global.
struct RunConfig {
  // data: CSV paths (comma-separated) or, when empty, a synthetic scenario
  std::vector<std::string> data_csv;
  ScenarioSpec scenario;
  bool scenario_seed_auto = true;  // derive scenario seed from the run seed

  // model
  Index feature_dim = 32;
  std::vector<Index> hidden_dims = {64};
  Activation activation = Activation::Tanh;

  // losses
  LossWeights weights;
  double tau = 10.0;
  double epsilon = 0.875;
  NeighborMode neighbor_mode = NeighborMode::Adaptive;
  int knn_k = 5;
  MixupMode mixup_mode = MixupMode::Cross;
  bool cc_full_gradient = false;       // default: stop-gradient on p_c
  bool nil_confidence = true;          // false = "w/o Conf." ablation
  bool mixup_feature_gradients = true; // false = heads-only mixup updates

  // optimization
  int epochs = 50;
  int batch = 36;
  double lr_extractor = 0.001;
  double lr_heads = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double lr_sched_a = 10.0;
  double lr_sched_b = 0.75;

  // evaluation
  double threshold = 0.5;

  // run
  std::uint64_t seed = 0;
  std::string out_dir = "runs/out";
  bool dump_bank = false;

  // sweep grids; empty lists fall back to the single configured value
  std::vector<double> sweep_beta2;
  std::vector<double> sweep_eta;
  std::vector<double> sweep_epsilon;
  std::vector<std::uint64_t> sweep_seeds;

  // scenario seed actually used (resolved against the run seed)
  std::uint64_t resolved_scenario_seed() const;
};

// Strict parser: unknown keys, bad values and malformed lines all throw
// ParseError with the offending line number.
RunConfig parse_run_config(const std::string& path);
void apply_config_line(RunConfig& cfg, const std::string& key,
                       const std::string& value, const std::string& where);

// Canonical echo. Parsing the emitted file yields a config that echoes
// byte-identically, so a resolved echo pins down the whole run.
std::string render_config(const RunConfig& cfg);
void write_config(const std::string& path, const RunConfig& cfg);

}  // namespace mlnet
