#include "mlnet/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mlnet {

const char* mixup_mode_name(MixupMode m) {
  switch (m) {
    case MixupMode::Cross: return "cross";
    case MixupMode::Source: return "source";
    case MixupMode::Off: return "off";
  }
  return "?";
}

MixupMode mixup_mode_from_name(const std::string& name) {
  if (name == "cross") return MixupMode::Cross;
  if (name == "source") return MixupMode::Source;
  if (name == "off") return MixupMode::Off;
  throw ParseError("unknown mixup mode: " + name);
}

std::uint64_t RunConfig::resolved_scenario_seed() const {
  return scenario_seed_auto ? split_seed(seed, 101) : scenario.seed;
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trail");
    return x;
  } catch (const std::exception&) {
    throw ParseError(where + ": expected a number, got '" + v + "'");
  }
}

long long parse_int(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trail");
    return x;
  } catch (const std::exception&) {
    throw ParseError(where + ": expected an integer, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trail");
    return x;
  } catch (const std::exception&) {
    throw ParseError(where + ": expected an unsigned integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError(where + ": expected true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v, const std::string& where) {
  std::vector<int> out;
  for (const auto& item : split_list(v))
    out.push_back(static_cast<int>(parse_int(item, where)));
  return out;
}

std::string fmt_g17(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += f(xs[i]);
  }
  return out;
}

}  // namespace

void apply_config_line(RunConfig& cfg, const std::string& key,
                       const std::string& value, const std::string& where) {
  // data
  if (key == "data_csv") cfg.data_csv = split_list(value);
  else if (key == "shared")
    cfg.scenario.split.shared = static_cast<int>(parse_int(value, where));
  else if (key == "source_private")
    cfg.scenario.split.source_private = static_cast<int>(parse_int(value, where));
  else if (key == "target_private")
    cfg.scenario.split.target_private = static_cast<int>(parse_int(value, where));
  else if (key == "dim")
    cfg.scenario.dim = static_cast<int>(parse_int(value, where));
  else if (key == "samples_per_class_source")
    cfg.scenario.samples_per_class_source =
        static_cast<int>(parse_int(value, where));
  else if (key == "samples_per_class_target")
    cfg.scenario.samples_per_class_target =
        static_cast<int>(parse_int(value, where));
  else if (key == "per_class_source_counts")
    cfg.scenario.per_class_source_counts = parse_int_list(value, where);
  else if (key == "per_class_target_counts")
    cfg.scenario.per_class_target_counts = parse_int_list(value, where);
  else if (key == "cluster_spacing")
    cfg.scenario.cluster_spacing = parse_double(value, where);
  else if (key == "noise_sigma_source")
    cfg.scenario.noise_sigma_source = parse_double(value, where);
  else if (key == "noise_sigma_target")
    cfg.scenario.noise_sigma_target = parse_double(value, where);
  else if (key == "shift_rotation")
    cfg.scenario.shift_rotation = parse_double(value, where);
  else if (key == "shift_scale_min")
    cfg.scenario.shift_scale_min = parse_double(value, where);
  else if (key == "shift_scale_max")
    cfg.scenario.shift_scale_max = parse_double(value, where);
  else if (key == "shift_translation")
    cfg.scenario.shift_translation = parse_double(value, where);
  else if (key == "scenario_seed") {
    if (value == "auto") {
      cfg.scenario_seed_auto = true;
    } else {
      cfg.scenario_seed_auto = false;
      cfg.scenario.seed = parse_u64(value, where);
    }
  }
  // model
  else if (key == "feature_dim")
    cfg.feature_dim = static_cast<Index>(parse_int(value, where));
  else if (key == "hidden_dims") {
    cfg.hidden_dims.clear();
    for (int d : parse_int_list(value, where))
      cfg.hidden_dims.push_back(static_cast<Index>(d));
  } else if (key == "activation") {
    try {
      cfg.activation = activation_from_name(value);
    } catch (const ParseError&) {
      throw ParseError(where + ": unknown activation '" + value + "'");
    }
  }
  // losses
  else if (key == "gamma") cfg.weights.gamma = parse_double(value, where);
  else if (key == "beta1") cfg.weights.beta1 = parse_double(value, where);
  else if (key == "beta2") cfg.weights.beta2 = parse_double(value, where);
  else if (key == "eta") cfg.weights.eta = parse_double(value, where);
  else if (key == "alpha") cfg.weights.alpha = parse_double(value, where);
  else if (key == "tau") cfg.tau = parse_double(value, where);
  else if (key == "epsilon") cfg.epsilon = parse_double(value, where);
  else if (key == "neighbor_mode") {
    try {
      cfg.neighbor_mode = neighbor_mode_from_name(value);
    } catch (const ParseError&) {
      throw ParseError(where + ": unknown neighbor mode '" + value + "'");
    }
  } else if (key == "knn_k")
    cfg.knn_k = static_cast<int>(parse_int(value, where));
  else if (key == "mixup_mode") {
    try {
      cfg.mixup_mode = mixup_mode_from_name(value);
    } catch (const ParseError&) {
      throw ParseError(where + ": unknown mixup mode '" + value + "'");
    }
  } else if (key == "cc_full_gradient")
    cfg.cc_full_gradient = parse_bool(value, where);
  else if (key == "nil_confidence")
    cfg.nil_confidence = parse_bool(value, where);
  else if (key == "mixup_feature_gradients")
    cfg.mixup_feature_gradients = parse_bool(value, where);
  // optimization
  else if (key == "epochs")
    cfg.epochs = static_cast<int>(parse_int(value, where));
  else if (key == "batch")
    cfg.batch = static_cast<int>(parse_int(value, where));
  else if (key == "lr_extractor") cfg.lr_extractor = parse_double(value, where);
  else if (key == "lr_heads") cfg.lr_heads = parse_double(value, where);
  else if (key == "momentum") cfg.momentum = parse_double(value, where);
  else if (key == "weight_decay") cfg.weight_decay = parse_double(value, where);
  else if (key == "lr_sched_a") cfg.lr_sched_a = parse_double(value, where);
  else if (key == "lr_sched_b") cfg.lr_sched_b = parse_double(value, where);
  // evaluation
  else if (key == "threshold") cfg.threshold = parse_double(value, where);
  // run
  else if (key == "seed") cfg.seed = parse_u64(value, where);
  else if (key == "out") cfg.out_dir = value;
  else if (key == "dump_bank") cfg.dump_bank = parse_bool(value, where);
  // sweep
  else if (key == "sweep_beta2") {
    cfg.sweep_beta2.clear();
    for (const auto& s : split_list(value))
      cfg.sweep_beta2.push_back(parse_double(s, where));
  } else if (key == "sweep_eta") {
    cfg.sweep_eta.clear();
    for (const auto& s : split_list(value))
      cfg.sweep_eta.push_back(parse_double(s, where));
  } else if (key == "sweep_epsilon") {
    cfg.sweep_epsilon.clear();
    for (const auto& s : split_list(value))
      cfg.sweep_epsilon.push_back(parse_double(s, where));
  } else if (key == "sweep_seeds") {
    cfg.sweep_seeds.clear();
    for (const auto& s : split_list(value))
      cfg.sweep_seeds.push_back(parse_u64(s, where));
  } else {
    throw ParseError(where + ": unknown key '" + key + "'");
  }
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config: " + path);
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[' && s.back() == ']') continue;  // section header
    const auto eq = s.find('=');
    const std::string where = path + ":" + std::to_string(line_no);
    if (eq == std::string::npos)
      throw ParseError(where + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key");
    apply_config_line(cfg, key, value, where);
  }
  return cfg;
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[data]\n";
  os << "data_csv = " << join(cfg.data_csv, [](const std::string& s) { return s; })
     << "\n";
  os << "shared = " << cfg.scenario.split.shared << "\n";
  os << "source_private = " << cfg.scenario.split.source_private << "\n";
  os << "target_private = " << cfg.scenario.split.target_private << "\n";
  os << "dim = " << cfg.scenario.dim << "\n";
  os << "samples_per_class_source = " << cfg.scenario.samples_per_class_source
     << "\n";
  os << "samples_per_class_target = " << cfg.scenario.samples_per_class_target
     << "\n";
  os << "per_class_source_counts = "
     << join(cfg.scenario.per_class_source_counts,
             [](int x) { return std::to_string(x); })
     << "\n";
  os << "per_class_target_counts = "
     << join(cfg.scenario.per_class_target_counts,
             [](int x) { return std::to_string(x); })
     << "\n";
  os << "cluster_spacing = " << fmt_g17(cfg.scenario.cluster_spacing) << "\n";
  os << "noise_sigma_source = " << fmt_g17(cfg.scenario.noise_sigma_source)
     << "\n";
  os << "noise_sigma_target = " << fmt_g17(cfg.scenario.noise_sigma_target)
     << "\n";
  os << "shift_rotation = " << fmt_g17(cfg.scenario.shift_rotation) << "\n";
  os << "shift_scale_min = " << fmt_g17(cfg.scenario.shift_scale_min) << "\n";
  os << "shift_scale_max = " << fmt_g17(cfg.scenario.shift_scale_max) << "\n";
  os << "shift_translation = " << fmt_g17(cfg.scenario.shift_translation)
     << "\n";
  os << "scenario_seed = " << cfg.resolved_scenario_seed() << "\n";
  os << "\n[model]\n";
  os << "feature_dim = " << cfg.feature_dim << "\n";
  os << "hidden_dims = "
     << join(cfg.hidden_dims, [](Index x) { return std::to_string(x); }) << "\n";
  os << "activation = " << activation_name(cfg.activation) << "\n";
  os << "\n[loss]\n";
  os << "gamma = " << fmt_g17(cfg.weights.gamma) << "\n";
  os << "beta1 = " << fmt_g17(cfg.weights.beta1) << "\n";
  os << "beta2 = " << fmt_g17(cfg.weights.beta2) << "\n";
  os << "eta = " << fmt_g17(cfg.weights.eta) << "\n";
  os << "alpha = " << fmt_g17(cfg.weights.alpha) << "\n";
  os << "tau = " << fmt_g17(cfg.tau) << "\n";
  os << "epsilon = " << fmt_g17(cfg.epsilon) << "\n";
  os << "neighbor_mode = " << neighbor_mode_name(cfg.neighbor_mode) << "\n";
  os << "knn_k = " << cfg.knn_k << "\n";
  os << "mixup_mode = " << mixup_mode_name(cfg.mixup_mode) << "\n";
  os << "cc_full_gradient = " << (cfg.cc_full_gradient ? "true" : "false")
     << "\n";
  os << "nil_confidence = " << (cfg.nil_confidence ? "true" : "false") << "\n";
  os << "mixup_feature_gradients = "
     << (cfg.mixup_feature_gradients ? "true" : "false") << "\n";
  os << "\n[optim]\n";
  os << "epochs = " << cfg.epochs << "\n";
  os << "batch = " << cfg.batch << "\n";
  os << "lr_extractor = " << fmt_g17(cfg.lr_extractor) << "\n";
  os << "lr_heads = " << fmt_g17(cfg.lr_heads) << "\n";
  os << "momentum = " << fmt_g17(cfg.momentum) << "\n";
  os << "weight_decay = " << fmt_g17(cfg.weight_decay) << "\n";
  os << "lr_sched_a = " << fmt_g17(cfg.lr_sched_a) << "\n";
  os << "lr_sched_b = " << fmt_g17(cfg.lr_sched_b) << "\n";
  os << "\n[eval]\n";
  os << "threshold = " << fmt_g17(cfg.threshold) << "\n";
  os << "\n[run]\n";
  os << "seed = " << cfg.seed << "\n";
  os << "out = " << cfg.out_dir << "\n";
  os << "dump_bank = " << (cfg.dump_bank ? "true" : "false") << "\n";
  os << "\n[sweep]\n";
  os << "sweep_beta2 = "
     << join(cfg.sweep_beta2, [](double x) { return fmt_g17(x); }) << "\n";
  os << "sweep_eta = "
     << join(cfg.sweep_eta, [](double x) { return fmt_g17(x); }) << "\n";
  os << "sweep_epsilon = "
     << join(cfg.sweep_epsilon, [](double x) { return fmt_g17(x); }) << "\n";
  os << "sweep_seeds = "
     << join(cfg.sweep_seeds,
             [](std::uint64_t x) { return std::to_string(x); })
     << "\n";
  return os.str();
}

void write_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write config: " + path);
  os << render_config(cfg);
}

}  // namespace mlnet
