#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mlnet/config.hpp"
#include "mlnet/evaluate.hpp"
#include "mlnet/trainer.hpp"

namespace {

// 0 success, 1 usage, 2 data error, 3 numeric divergence
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

mlnet::RunConfig load_config(const CommonFlags& flags) {
  mlnet::RunConfig cfg = mlnet::parse_run_config(flags.config);
  if (flags.seed) cfg.seed = *flags.seed;  // flags override the config file
  if (!flags.out.empty()) cfg.out_dir = flags.out;
  return cfg;
}

void print_metrics(const mlnet::MetricsReport& rep, const std::string& setting) {
  std::printf("setting=%s accuracy=%.4f", setting.c_str(), rep.accuracy);
  if (rep.has_unknown) {
    std::printf(" a_known=%.4f a_unknown=%.4f h_score=%.4f ucr=%.4f",
                rep.known_acc, rep.unknown_acc, rep.h_score, rep.ucr);
  } else {
    std::printf(" closed_accuracy=%.4f", rep.closed_accuracy);
  }
  std::printf("\n");
}

int cmd_generate(const mlnet::RunConfig& cfg, const CommonFlags& flags) {
  namespace fs = std::filesystem;
  mlnet::ScenarioSpec spec = cfg.scenario;
  spec.seed = cfg.resolved_scenario_seed();
  auto [source, target] = mlnet::generate_scenario(spec);
  const std::string dir = flags.out.empty() ? cfg.out_dir : flags.out;
  fs::create_directories(dir);
  const std::string src_path = (fs::path(dir) / "source.csv").string();
  const std::string tgt_path = (fs::path(dir) / "target.csv").string();
  mlnet::write_dataset_csv(src_path, {&source});
  mlnet::write_dataset_csv(tgt_path, {&target});
  std::printf("wrote %s (%lld rows), %s (%lld rows)\n", src_path.c_str(),
              static_cast<long long>(source.size()), tgt_path.c_str(),
              static_cast<long long>(target.size()));
  return kExitOk;
}

int cmd_train(const mlnet::RunConfig& cfg) {
  mlnet::RunArtifacts art = mlnet::train_run(cfg);
  std::printf("run complete: %ld iterations, artifacts in %s\n",
              static_cast<long>(art.trace.size()), art.out_dir.c_str());
  print_metrics(art.final_metrics, art.setting);
  return kExitOk;
}

int cmd_eval(const mlnet::RunConfig& cfg, const CommonFlags& flags,
             const std::string& checkpoint, const std::string& data) {
  namespace fs = std::filesystem;
  mlnet::Checkpoint ckpt = mlnet::load_checkpoint(checkpoint);

  std::vector<std::string> paths;
  {
    std::string item;
    std::istringstream ss(data);
    while (std::getline(ss, item, ','))
      if (!item.empty()) paths.push_back(item);
  }
  if (cfg.scenario.split.num_source_classes() != ckpt.net.num_classes())
    throw mlnet::DomainError(
        "eval: config split declares " +
        std::to_string(cfg.scenario.split.num_source_classes()) +
        " source classes but the checkpoint has " +
        std::to_string(ckpt.net.num_classes()) + " heads");
  auto [source, target] =
      mlnet::load_feature_csv(paths, cfg.scenario.split, nullptr);
  if (target.size() == 0)
    throw mlnet::DomainError("eval: no target rows in data");

  const auto preds =
      mlnet::predict_dataset(ckpt.net, target, cfg.threshold);
  const mlnet::MetricsReport rep =
      mlnet::evaluate_predictions(preds, ckpt.net.num_classes());
  const std::string setting = cfg.scenario.split.setting_name();

  const std::string dir = flags.out.empty() ? cfg.out_dir : flags.out;
  fs::create_directories(dir);
  mlnet::write_metrics_csv((fs::path(dir) / "metrics.csv").string(), setting,
                           cfg.seed, rep);
  if (rep.has_unknown)
    mlnet::write_curve_csv((fs::path(dir) / "curve.csv").string(), rep.curve);
  print_metrics(rep, setting);
  return kExitOk;
}

int cmd_sweep(const mlnet::RunConfig& cfg, const CommonFlags& flags,
              int jobs) {
  const std::string dir = flags.out.empty() ? cfg.out_dir : flags.out;
  const auto rows = mlnet::sweep(cfg, dir, jobs);
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.failed ? 1 : 0;
  std::printf("sweep complete: %zu runs, %zu failed, results in %s\n",
              rows.size(), failed, dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"universal domain adaptation trainer over synthetic or "
               "precomputed-feature datasets"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string checkpoint, data;
  int jobs = 1;

  auto add_common = [&](CLI::App* cmd, bool config_required) {
    cmd->add_option("--config", flags.config, "run configuration file")
        ->required(config_required);
    cmd->add_option("--seed", flags.seed, "override the config seed");
    cmd->add_option("--out", flags.out, "override the output directory");
  };

  CLI::App* generate =
      app.add_subcommand("generate", "write dataset CSVs from a scenario spec");
  generate->add_option("--spec", flags.config, "scenario spec file")
      ->required();
  generate->add_option("--seed", flags.seed, "override the config seed");
  generate->add_option("--out", flags.out, "output directory");

  CLI::App* train = app.add_subcommand("train", "run a training run");
  add_common(train, true);

  CLI::App* eval =
      app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(eval, true);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--data", data, "dataset CSV (comma-separated list)")
      ->required();

  CLI::App* swp = app.add_subcommand("sweep", "grid over (beta2, eta, epsilon)");
  add_common(swp, true);
  swp->add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  // a config that does not parse is a usage error; anything that goes
  // wrong after that concerns data or numerics
  mlnet::RunConfig cfg;
  try {
    cfg = load_config(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(cfg, flags);
    if (train->parsed()) return cmd_train(cfg);
    if (eval->parsed()) return cmd_eval(cfg, flags, checkpoint, data);
    if (swp->parsed()) return cmd_sweep(cfg, flags, jobs);
  } catch (const mlnet::NumericError& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
