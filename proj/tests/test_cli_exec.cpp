#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#ifndef MLNET_CLI_PATH
#error "MLNET_CLI_PATH must point at the built binary"
#endif

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd =
      std::string(MLNET_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

const fs::path kRoot = "/tmp/mlnet_cli_exec";

std::string write_config(const std::string& name, const std::string& extra) {
  fs::create_directories(kRoot);
  const fs::path path = kRoot / name;
  std::ofstream os(path);
  os << "shared = 2\n"
        "source_private = 1\n"
        "target_private = 1\n"
        "dim = 6\n"
        "samples_per_class_source = 12\n"
        "samples_per_class_target = 12\n"
        "feature_dim = 8\n"
        "hidden_dims = 16\n"
        "epochs = 2\n"
        "batch = 12\n"
        "seed = 3\n";
  os << extra;
  return path.string();
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run("train") == 1);                      // missing --config
  CHECK(run("train --config /nope --frob") == 1);  // unknown flag
  CHECK(run("") == 1);                           // missing subcommand
}

TEST_CASE("malformed config exits with code 1") {
  const std::string cfg = write_config("bad.cfg", "no_such_key = 1\n");
  CHECK(run("train --config " + cfg) == 1);
}

TEST_CASE("generate emits a source and a target CSV") {
  const std::string cfg = write_config("gen.cfg", "");
  const fs::path out = kRoot / "gen_out";
  fs::remove_all(out);
  CHECK(run("generate --spec " + cfg + " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "source.csv"));
  CHECK(fs::exists(out / "target.csv"));
  auto src = read_lines(out / "source.csv");
  CHECK(src.front() == "domain,label,f0,f1,f2,f3,f4,f5");
  CHECK(src.size() == 1 + 3 * 12);  // header + |C_s| * per-class rows
}

TEST_CASE("train, eval and determinism through the binary") {
  const std::string cfg = write_config("train.cfg", "");
  const fs::path out1 = kRoot / "run1";
  const fs::path out2 = kRoot / "run2";
  fs::remove_all(out1);
  fs::remove_all(out2);

  CHECK(run("train --config " + cfg + " --out " + out1.string()) == 0);
  CHECK(run("train --config " + cfg + " --out " + out2.string()) == 0);
  CHECK(fs::exists(out1 / "loss_trace.csv"));
  CHECK(fs::exists(out1 / "metrics.csv"));
  CHECK(fs::exists(out1 / "curve.csv"));
  CHECK(fs::exists(out1 / "checkpoint.txt"));
  CHECK(fs::exists(out1 / "config_resolved.cfg"));
  CHECK(read_lines(out1 / "loss_trace.csv") ==
        read_lines(out2 / "loss_trace.csv"));

  // eval over the emitted checkpoint and data reproduces train's metrics
  const fs::path eval_out = kRoot / "eval1";
  fs::remove_all(eval_out);
  CHECK(run("eval --config " + (out1 / "config_resolved.cfg").string() +
            " --checkpoint " + (out1 / "checkpoint.txt").string() +
            " --data " + (out1 / "data.csv").string() + " --out " +
            eval_out.string()) == 0);
  CHECK(read_lines(eval_out / "metrics.csv") ==
        read_lines(out1 / "metrics.csv"));
}

TEST_CASE("flag overrides beat the config file") {
  const std::string cfg = write_config("seed.cfg", "");
  const fs::path out1 = kRoot / "seed5";
  const fs::path out2 = kRoot / "seed5b";
  fs::remove_all(out1);
  fs::remove_all(out2);
  CHECK(run("train --config " + cfg + " --seed 5 --out " + out1.string()) == 0);
  CHECK(run("train --config " + cfg + " --seed 5 --out " + out2.string()) == 0);
  CHECK(read_lines(out1 / "loss_trace.csv") ==
        read_lines(out2 / "loss_trace.csv"));

  auto resolved = read_lines(out1 / "config_resolved.cfg");
  bool seed_line = false;
  for (const auto& l : resolved)
    if (l == "seed = 5") seed_line = true;
  CHECK(seed_line);
}

TEST_CASE("data errors exit with code 2") {
  const fs::path bad = kRoot / "ragged.csv";
  {
    fs::create_directories(kRoot);
    std::ofstream os(bad);
    os << "domain,label,f0,f1\n";
    os << "source,0,1.0\n";
  }
  const std::string cfg =
      write_config("data.cfg", "data_csv = " + bad.string() + "\n");
  CHECK(run("train --config " + cfg) == 2);

  const std::string missing =
      write_config("missing.cfg", "data_csv = /tmp/definitely_not_there.csv\n");
  CHECK(run("train --config " + missing) == 2);
}

TEST_CASE("numeric divergence exits with code 3") {
  const fs::path data = kRoot / "inf.csv";
  {
    fs::create_directories(kRoot);
    std::ofstream os(data);
    os << "domain,label,f0,f1\n";
    for (int i = 0; i < 4; ++i) os << "source,0,1.0,2.0\n";
    for (int i = 0; i < 4; ++i) os << "source,1,-1.0,0.5\n";
    os << "target,0,inf,2.0\n";
    for (int i = 0; i < 7; ++i) os << "target,1,-1.1,0.4\n";
  }
  const std::string cfg = write_config(
      "diverge.cfg", "data_csv = " + data.string() +
                         "\nshared = 2\nsource_private = 0\n"
                         "target_private = 0\nbatch = 8\nfeature_dim = 4\n");
  const fs::path out = kRoot / "diverge_out";
  fs::remove_all(out);
  CHECK(run("train --config " + cfg + " --out " + out.string()) == 3);
  CHECK(fs::exists(out / "divergence.txt"));
}

TEST_CASE("sweep command collates results") {
  const std::string cfg = write_config(
      "sweep.cfg", "sweep_beta2 = 0.05,0.2\nsweep_eta = 0.16\n");
  const fs::path out = kRoot / "sweep_out";
  fs::remove_all(out);
  CHECK(run("sweep --config " + cfg + " --out " + out.string() +
            " --jobs 2") == 0);
  auto lines = read_lines(out / "sweep_results.csv");
  CHECK(lines.size() == 3);  // header + 2 grid points
  CHECK(lines.front() ==
        "beta2,eta,epsilon,seed,setting,a_known,a_unknown,h_score,accuracy,"
        "ucr,status");
}
