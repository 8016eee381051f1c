#include "mlnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "mlnet/objectives.hpp"

namespace mlnet {

namespace {

constexpr double kLogClamp = 1e-12;

double clamped_log(double x) { return std::log(std::max(x, kLogClamp)); }

Matrix gather_rows(const Matrix& m, const std::vector<int>& indices) {
  Matrix out(static_cast<Index>(indices.size()), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i)
    out.row(static_cast<Index>(i)) = m.row(indices[i]);
  return out;
}

// Head-weight difference rows: wd_l = w_pos - w_neg, one row per class.
Matrix open_weight_diffs(const NetworkParams& net) {
  Matrix wd(net.num_classes(), net.feature_dim());
  for (Index l = 0; l < net.num_classes(); ++l)
    wd.row(l) = net.open_heads[static_cast<std::size_t>(l)].weight.row(0) -
                net.open_heads[static_cast<std::size_t>(l)].weight.row(1);
  return wd;
}

}  // namespace

LossBreakdown compute_objective(
    const NetworkParams& net, const BatchInputs& batch, const MemoryBank* bank,
    const std::vector<std::vector<int>>* neighborhoods,
    const ObjectiveOptions& opts, NetworkGradients* grads) {
  const Index k = net.num_classes();
  const Index d = net.feature_dim();
  const Index bs = batch.source_x.rows();
  const Index bt = batch.target_x.rows();
  if (bs == 0 || bt == 0) throw DomainError("compute_objective: empty batch");
  if (static_cast<Index>(batch.source_labels.size()) != bs)
    throw ShapeError("compute_objective: source label count mismatch");

  MlpActivations acts_src, acts_tgt;
  const HeadOutputs src = forward_heads(net, batch.source_x, &acts_src);
  const HeadOutputs tgt = forward_heads(net, batch.target_x, &acts_tgt);

  const LossWeights& w = opts.weights;
  const bool want_cls = opts.select.cls;
  const bool want_ova = opts.select.ova;
  const bool want_oem = opts.select.oem && w.gamma != 0.0;
  const bool want_nil = opts.select.nil && w.beta1 != 0.0 && bank != nullptr &&
                        neighborhoods != nullptr;
  const bool want_cmm = opts.select.cmm && w.beta2 != 0.0 &&
                        opts.mixup_mode != MixupMode::Off;
  const bool want_cc = opts.select.cc && w.eta != 0.0;

  LossBreakdown out;

  Matrix d_closed_src, d_gap_src, d_closed_tgt, d_gap_tgt, dz_src, dz_tgt;
  Matrix d_wd_mix;  // mixup contributions to the open-head weight diffs
  Vector d_bd_mix;
  if (grads) {
    d_closed_src = Matrix::Zero(bs, k);
    d_gap_src = Matrix::Zero(bs, k);
    d_closed_tgt = Matrix::Zero(bt, k);
    d_gap_tgt = Matrix::Zero(bt, k);
    dz_src = Matrix::Zero(bs, d);
    dz_tgt = Matrix::Zero(bt, d);
    d_wd_mix = Matrix::Zero(k, d);
    d_bd_mix = Vector::Zero(k);
  }

  if (want_cls) {
    double sum = 0.0;
    for (Index i = 0; i < bs; ++i)
      sum += loss_cls(src.closed_probs.row(i), batch.source_labels[i]);
    out.cls = sum / static_cast<double>(bs);
    if (grads) {
      Matrix g = src.closed_probs;
      for (Index i = 0; i < bs; ++i) g(i, batch.source_labels[i]) -= 1.0;
      d_closed_src += g / static_cast<double>(bs);
    }
  }

  if (want_ova) {
    double sum = 0.0;
    const double scale = 1.0 / static_cast<double>(bs);
    for (Index i = 0; i < bs; ++i) {
      const int y = batch.source_labels[i];
      const int neg = hardest_negative(src.open_pos.row(i), y);
      const double py = src.open_pos(i, y);
      const double pn = src.open_pos(i, neg);
      sum += -clamped_log(py) - clamped_log(1.0 - pn);
      if (grads) {
        d_gap_src(i, y) += (py - 1.0) * scale;
        d_gap_src(i, neg) += pn * scale;
      }
    }
    out.ova = sum * scale;
  }

  if (want_oem) {
    double sum = 0.0;
    for (Index j = 0; j < bt; ++j) sum += loss_oem(tgt.open_pos.row(j));
    out.oem = sum / static_cast<double>(bt);
    if (grads) {
      // d/du of the binary entropy at p = sigmoid(u) is -u p (1-p)
      const double scale = w.gamma / (static_cast<double>(bt) *
                                      static_cast<double>(k));
      d_gap_tgt -= scale * (tgt.open_logit_gap.array() * tgt.open_pos.array() *
                            (1.0 - tgt.open_pos.array()))
                               .matrix();
    }
  }

  if (want_cc) {
    double sum = 0.0;
    for (Index j = 0; j < bt; ++j)
      sum += loss_cc(tgt.closed_probs.row(j), tgt.open_pos.row(j));
    out.cc = sum / static_cast<double>(bt);
    if (grads) {
      const double scale = w.eta / (static_cast<double>(bt) *
                                    static_cast<double>(k));
      d_gap_tgt -= scale * (tgt.closed_probs.array() * tgt.open_pos.array() *
                            (1.0 - tgt.open_pos.array()))
                               .matrix();
      if (opts.cc_full_gradient) {
        for (Index j = 0; j < bt; ++j) {
          Vector v = -tgt.open_pos.row(j).transpose() /
                     static_cast<double>(k);
          const Vector p = tgt.closed_probs.row(j).transpose();
          const double dot = v.dot(p);
          d_closed_tgt.row(j) += (w.eta / static_cast<double>(bt)) *
                                 (p.array() * (v.array() - dot)).matrix()
                                     .transpose();
        }
      }
    }
  }

  if (want_nil) {
    double sum = 0.0;
    const double scale = w.beta1 / static_cast<double>(bt);
    for (Index b = 0; b < bt; ++b) {
      const Index j = batch.target_indices[static_cast<std::size_t>(b)];
      Vector live = tgt.features.row(b).transpose();
      NilResult r =
          loss_nil(*bank, *neighborhoods, j, live, opts.nil_confidence);
      sum += r.loss;
      if (grads) dz_tgt.row(b) += scale * r.grad.transpose();
    }
    out.nil = sum / static_cast<double>(bt);
  }

  if (want_cmm) {
    const Matrix wd = open_weight_diffs(net);
    if (opts.mixup_mode == MixupMode::Cross) {
      if (static_cast<Index>(batch.lambdas.size()) != bs || bs != bt)
        throw ShapeError("compute_objective: mixup needs paired batches");
      double sum = 0.0;
      const double scale = w.beta2 / static_cast<double>(bs);
      for (Index b = 0; b < bs; ++b) {
        const double lam = batch.lambdas[static_cast<std::size_t>(b)];
        const int y = batch.source_labels[b];
        const Vector zm = lam * src.features.row(b).transpose() +
                          (1.0 - lam) * tgt.features.row(b).transpose();
        const double u = wd.row(y).dot(zm) +
                         net.open_heads[static_cast<std::size_t>(y)].bias[0] -
                         net.open_heads[static_cast<std::size_t>(y)].bias[1];
        const double p = stable_sigmoid(u);
        sum += cmm_from_score(p);
        if (grads) {
          const double du = scale * p;  // d(-log(1-p))/du = p
          d_wd_mix.row(y) += du * zm.transpose();
          d_bd_mix[y] += du;
          if (opts.mixup_feature_gradients) {
            const Vector dzm = du * wd.row(y).transpose();
            dz_src.row(b) += lam * dzm.transpose();
            dz_tgt.row(b) += (1.0 - lam) * dzm.transpose();
          }
        }
      }
      out.cmm = sum / static_cast<double>(bs);
    } else {  // source-domain manifold mixup (SMM ablation)
      if (static_cast<Index>(batch.lambdas.size()) != bs ||
          static_cast<Index>(batch.smm_partners.size()) != bs)
        throw ShapeError("compute_objective: smm needs per-row partners");
      // same-class pairs are not unknown simulations; count active pairs
      Index active = 0;
      for (Index b = 0; b < bs; ++b) {
        const int c = batch.smm_partners[static_cast<std::size_t>(b)];
        if (c >= 0 && batch.source_labels[b] !=
                          batch.source_labels[static_cast<std::size_t>(c)])
          ++active;
      }
      double sum = 0.0;
      const double scale =
          active > 0 ? w.beta2 / static_cast<double>(active) : 0.0;
      for (Index b = 0; b < bs; ++b) {
        const int c = batch.smm_partners[static_cast<std::size_t>(b)];
        if (c < 0) continue;
        const int ya = batch.source_labels[b];
        const int yb = batch.source_labels[static_cast<std::size_t>(c)];
        if (ya == yb) continue;
        const double lam = batch.lambdas[static_cast<std::size_t>(b)];
        const Vector zm = lam * src.features.row(b).transpose() +
                          (1.0 - lam) * src.features.row(c).transpose();
        for (const int y : {ya, yb}) {
          const double u =
              wd.row(y).dot(zm) +
              net.open_heads[static_cast<std::size_t>(y)].bias[0] -
              net.open_heads[static_cast<std::size_t>(y)].bias[1];
          const double p = stable_sigmoid(u);
          sum += cmm_from_score(p);
          if (grads) {
            const double du = scale * p;
            d_wd_mix.row(y) += du * zm.transpose();
            d_bd_mix[y] += du;
            if (opts.mixup_feature_gradients) {
              const Vector dzm = du * wd.row(y).transpose();
              dz_src.row(b) += lam * dzm.transpose();
              dz_src.row(c) += (1.0 - lam) * dzm.transpose();
            }
          }
        }
      }
      out.cmm = active > 0 ? sum / static_cast<double>(active) : 0.0;
    }
  }

  out.total = out.cls + out.ova + w.gamma * out.oem + w.beta1 * out.nil +
              w.beta2 * out.cmm + w.eta * out.cc;

  if (grads) {
    *grads = zero_gradients(net);
    // closed head
    grads->closed_head.weight = d_closed_src.transpose() * src.features +
                                d_closed_tgt.transpose() * tgt.features;
    grads->closed_head.bias =
        d_closed_src.colwise().sum().transpose() +
        d_closed_tgt.colwise().sum().transpose();
    dz_src += d_closed_src * net.closed_head.weight;
    dz_tgt += d_closed_tgt * net.closed_head.weight;
    // open heads; gradients live on the (pos - neg) logit gap
    const Matrix wd = open_weight_diffs(net);
    Matrix d_wd = d_gap_src.transpose() * src.features +
                  d_gap_tgt.transpose() * tgt.features + d_wd_mix;
    Vector d_bd = d_gap_src.colwise().sum().transpose() +
                  d_gap_tgt.colwise().sum().transpose() + d_bd_mix;
    for (Index l = 0; l < k; ++l) {
      auto& head = grads->open_heads[static_cast<std::size_t>(l)];
      head.weight.row(0) = d_wd.row(l);
      head.weight.row(1) = -d_wd.row(l);
      head.bias[0] = d_bd[l];
      head.bias[1] = -d_bd[l];
    }
    dz_src += d_gap_src * wd;
    dz_tgt += d_gap_tgt * wd;
    // extractor
    MlpGradients gs = mlp_backprop(net.extractor, acts_src, dz_src);
    MlpGradients gt = mlp_backprop(net.extractor, acts_tgt, dz_tgt);
    for (std::size_t i = 0; i < gs.layers.size(); ++i) {
      grads->extractor.layers[i].weight =
          gs.layers[i].weight + gt.layers[i].weight;
      grads->extractor.layers[i].bias = gs.layers[i].bias + gt.layers[i].bias;
    }
  }
  return out;
}

namespace {

std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

}  // namespace

void write_trace_csv(const std::string& path,
                     const std::vector<TraceRow>& trace) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write trace: " + path);
  os << "iter,epoch,l_cls,l_ova,l_oem,l_nil,l_cmm,l_cc,l_total,lr\n";
  for (const TraceRow& r : trace) {
    os << r.iter << "," << r.epoch << "," << fmt(r.losses.cls) << ","
       << fmt(r.losses.ova) << "," << fmt(r.losses.oem) << ","
       << fmt(r.losses.nil) << "," << fmt(r.losses.cmm) << ","
       << fmt(r.losses.cc) << "," << fmt(r.losses.total) << "," << fmt(r.lr)
       << "\n";
  }
}

namespace {

void dump_divergence(const std::string& path, int epoch, long iter,
                     const LossBreakdown& losses, const BatchInputs& batch) {
  std::ofstream os(path);
  os << "non-finite loss at epoch " << epoch << " iter " << iter << "\n";
  os << "l_cls " << losses.cls << "\nl_ova " << losses.ova << "\nl_oem "
     << losses.oem << "\nl_nil " << losses.nil << "\nl_cmm " << losses.cmm
     << "\nl_cc " << losses.cc << "\nl_total " << losses.total << "\n";
  os << "source_rows";
  for (Index i = 0; i < batch.source_x.rows(); ++i)
    os << " " << batch.source_labels[i];
  os << "\ntarget_indices";
  for (int j : batch.target_indices) os << " " << j;
  os << "\n";
}

}  // namespace

RunArtifacts train_run(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.epochs < 1) throw DomainError("train_run: epochs must be >= 1");

  RunArtifacts art;
  art.out_dir = cfg.out_dir;
  fs::create_directories(cfg.out_dir);

  // data
  Dataset source, target;
  if (!cfg.data_csv.empty()) {
    std::tie(source, target) = load_feature_csv(cfg.data_csv,
                                                cfg.scenario.split, nullptr);
  } else {
    ScenarioSpec spec = cfg.scenario;
    spec.seed = cfg.resolved_scenario_seed();
    std::tie(source, target) = generate_scenario(spec);
  }
  if (source.size() == 0 || target.size() == 0)
    throw DomainError("train_run: empty domain after loading");
  art.setting = cfg.scenario.split.setting_name();

  art.data_csv = (fs::path(cfg.out_dir) / "data.csv").string();
  write_dataset_csv(art.data_csv, {&source, &target});

  // model
  Rng init_rng = make_rng(cfg.seed, 202);
  NetworkParams net = make_network(
      source.dim(), cfg.hidden_dims, cfg.feature_dim,
      cfg.scenario.split.num_source_classes(), cfg.activation, init_rng);

  MemoryBank bank(target.size(), cfg.feature_dim, cfg.tau, cfg.epsilon,
                  cfg.neighbor_mode, cfg.knn_k);

  // epoch 0: no-gradient pass over the full target set fills every row
  {
    Matrix z = extract_features(net, target.features);
    std::vector<int> all(static_cast<std::size_t>(target.size()));
    std::iota(all.begin(), all.end(), 0);
    bank.update(all, z);
  }

  Rng batch_rng = make_rng(cfg.seed, 303);
  Rng mix_rng = make_rng(cfg.seed, 404);

  Vector theta = network_flatten(net);
  OptimizerState opt;
  opt.base_lr_extractor = cfg.lr_extractor;
  opt.base_lr_heads = cfg.lr_heads;
  opt.momentum = cfg.momentum;
  opt.weight_decay = cfg.weight_decay;
  opt.sched_a = cfg.lr_sched_a;
  opt.sched_b = cfg.lr_sched_b;
  const Index extractor_count = network_extractor_param_count(net);

  ObjectiveOptions opts;
  opts.weights = cfg.weights;
  opts.mixup_mode = cfg.mixup_mode;
  opts.cc_full_gradient = cfg.cc_full_gradient;
  opts.nil_confidence = cfg.nil_confidence;
  opts.mixup_feature_gradients = cfg.mixup_feature_gradients;

  const bool mixup_on =
      cfg.mixup_mode != MixupMode::Off && cfg.weights.beta2 != 0.0;

  long global_step = 0;
  long total_steps = 0;
  {
    const Index iters =
        std::max(source.size(), target.size()) / cfg.batch;
    if (iters < 1)
      throw DomainError("train_run: batch larger than both domains");
    total_steps = static_cast<long>(iters) * cfg.epochs;
  }

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    BatchIterator iter(source.size(), target.size(), cfg.batch, batch_rng);
    // L_nil is disabled in the first epoch
    opts.select.nil = epoch >= 2;
    for (int it = 0; it < iter.iterations_per_epoch(); ++it) {
      const PairedBatch pb = iter.batch(it);
      BatchInputs batch;
      batch.source_x = gather_rows(source.features, pb.source_indices);
      batch.source_labels.reserve(pb.source_indices.size());
      for (int i : pb.source_indices)
        batch.source_labels.push_back(source.labels[static_cast<std::size_t>(i)]);
      batch.target_x = gather_rows(target.features, pb.target_indices);
      batch.target_indices = pb.target_indices;
      if (mixup_on) {
        for (int i = 0; i < cfg.batch; ++i)
          batch.lambdas.push_back(sample_mix_coeff(mix_rng, cfg.weights.alpha));
        if (cfg.mixup_mode == MixupMode::Source) {
          std::vector<int> partners(static_cast<std::size_t>(cfg.batch));
          std::iota(partners.begin(), partners.end(), 0);
          std::shuffle(partners.begin(), partners.end(), mix_rng);
          batch.smm_partners = partners;
        }
      }

      // update the bank before the objective; stored rows are snapshots
      Matrix z_tgt = extract_features(net, batch.target_x);
      bank.update(batch.target_indices, z_tgt);

      std::vector<std::vector<int>> nbrs;
      const bool nil_active = opts.select.nil && cfg.weights.beta1 != 0.0;
      if (nil_active) nbrs = all_neighborhoods(bank);

      NetworkGradients grads;
      const LossBreakdown losses =
          compute_objective(net, batch, nil_active ? &bank : nullptr,
                            nil_active ? &nbrs : nullptr, opts, &grads);

      Vector grad_flat = network_grad_flatten(net, grads);
      if (!std::isfinite(losses.total) || !grad_flat.allFinite()) {
        dump_divergence(
            (fs::path(cfg.out_dir) / "divergence.txt").string(), epoch,
            global_step + 1, losses, batch);
        throw NumericError("train_run: non-finite loss or gradient");
      }

      opt.progress = static_cast<double>(global_step) /
                     static_cast<double>(total_steps);
      sgd_nesterov_step(theta, grad_flat, opt, extractor_count);
      network_unflatten(net, theta);

      TraceRow row;
      row.iter = ++global_step;
      row.epoch = epoch;
      row.losses = losses;
      row.lr = inverse_schedule(cfg.lr_extractor, opt.progress, cfg.lr_sched_a,
                                cfg.lr_sched_b);
      art.trace.push_back(row);
    }
  }

  // artifacts
  art.trace_csv = (fs::path(cfg.out_dir) / "loss_trace.csv").string();
  write_trace_csv(art.trace_csv, art.trace);

  const std::vector<PredictionRecord> preds =
      predict_dataset(net, target, cfg.threshold);
  art.final_metrics = evaluate_predictions(preds, net.num_classes());

  art.metrics_csv = (fs::path(cfg.out_dir) / "metrics.csv").string();
  write_metrics_csv(art.metrics_csv, art.setting, cfg.seed, art.final_metrics);
  if (art.final_metrics.has_unknown) {
    art.curve_csv = (fs::path(cfg.out_dir) / "curve.csv").string();
    write_curve_csv(art.curve_csv, art.final_metrics.curve);
  }

  art.checkpoint = (fs::path(cfg.out_dir) / "checkpoint.txt").string();
  save_checkpoint(art.checkpoint, net, cfg.seed);

  art.resolved_config = (fs::path(cfg.out_dir) / "config_resolved.cfg").string();
  write_config(art.resolved_config, cfg);

  if (cfg.dump_bank)
    dump_bank_csv(bank, (fs::path(cfg.out_dir) / "bank.csv").string());

  return art;
}

std::vector<SweepRow> sweep(const RunConfig& base, const std::string& out_dir,
                            int jobs) {
  namespace fs = std::filesystem;
  const std::vector<double> betas =
      base.sweep_beta2.empty() ? std::vector<double>{base.weights.beta2}
                               : base.sweep_beta2;
  const std::vector<double> etas =
      base.sweep_eta.empty() ? std::vector<double>{base.weights.eta}
                             : base.sweep_eta;
  const std::vector<double> epsilons =
      base.sweep_epsilon.empty() ? std::vector<double>{base.epsilon}
                                 : base.sweep_epsilon;
  const std::vector<std::uint64_t> seeds =
      base.sweep_seeds.empty() ? std::vector<std::uint64_t>{base.seed}
                               : base.sweep_seeds;

  struct Point {
    double beta2, eta, epsilon;
    std::uint64_t seed;
  };
  std::vector<Point> points;
  for (double b : betas)
    for (double e : etas)
      for (double eps : epsilons)
        for (std::uint64_t s : seeds) points.push_back({b, e, eps, s});

  std::vector<SweepRow> rows(points.size());
  fs::create_directories(out_dir);

  auto run_point = [&](std::size_t idx) {
    const Point& pt = points[idx];
    RunConfig cfg = base;
    cfg.weights.beta2 = pt.beta2;
    cfg.weights.eta = pt.eta;
    cfg.epsilon = pt.epsilon;
    cfg.seed = pt.seed;
    char name[128];
    std::snprintf(name, sizeof(name), "b2_%g_eta_%g_eps_%g_seed_%llu",
                  pt.beta2, pt.eta, pt.epsilon,
                  static_cast<unsigned long long>(pt.seed));
    cfg.out_dir = (fs::path(out_dir) / name).string();
    SweepRow row;
    row.beta2 = pt.beta2;
    row.eta = pt.eta;
    row.epsilon = pt.epsilon;
    row.seed = pt.seed;
    try {
      RunArtifacts art = train_run(cfg);
      row.setting = art.setting;
      row.metrics = art.final_metrics;
    } catch (const std::exception&) {
      row.failed = true;
    }
    rows[idx] = std::move(row);
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
      for (;;) {
        std::size_t idx;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= points.size()) return;
          idx = next++;
        }
        run_point(idx);
      }
    };
    std::vector<std::thread> pool;
    const int n = std::min<int>(jobs, static_cast<int>(points.size()));
    pool.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  write_sweep_csv((fs::path(out_dir) / "sweep_results.csv").string(), rows);
  return rows;
}

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write sweep results: " + path);
  os << "beta2,eta,epsilon,seed,setting,a_known,a_unknown,h_score,accuracy,"
        "ucr,status\n";
  for (const SweepRow& r : rows) {
    os << fmt(r.beta2) << "," << fmt(r.eta) << "," << fmt(r.epsilon) << ","
       << r.seed << ",";
    if (r.failed) {
      os << "?,nan,nan,nan,nan,nan,failed\n";
      continue;
    }
    os << r.setting << ",";
    if (r.metrics.has_unknown) {
      os << fmt(r.metrics.known_acc) << "," << fmt(r.metrics.unknown_acc)
         << "," << fmt(r.metrics.h_score) << "," << fmt(r.metrics.accuracy)
         << "," << fmt(r.metrics.ucr);
    } else {
      os << fmt(r.metrics.closed_accuracy) << ",nan,nan,"
         << fmt(r.metrics.accuracy) << ",nan";
    }
    os << ",ok\n";
  }
}

}  // namespace mlnet
