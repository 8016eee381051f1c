#include "mlnet/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mlnet {

ClassRole SplitSpec::role_of(int class_id) const {
  if (class_id < 0 || class_id >= num_classes_total())
    throw DomainError("SplitSpec::role_of: class id out of range");
  if (class_id < shared) return ClassRole::Shared;
  if (class_id < shared + source_private) return ClassRole::SourcePrivate;
  return ClassRole::TargetPrivate;
}

bool SplitSpec::in_source(int class_id) const {
  return class_id >= 0 && class_id < num_source_classes();
}

bool SplitSpec::in_target(int class_id) const {
  if (class_id < 0 || class_id >= num_classes_total()) return false;
  return role_of(class_id) != ClassRole::SourcePrivate;
}

std::string SplitSpec::setting_name() const {
  if (source_private == 0 && target_private == 0) return "cda";
  if (target_private == 0) return "pda";
  if (source_private == 0) return "oda";
  return "opda";
}

namespace {

void validate_spec(const ScenarioSpec& spec) {
  if (spec.split.shared < 1)
    throw DomainError("scenario: need at least one shared class");
  if (spec.split.source_private < 0 || spec.split.target_private < 0)
    throw DomainError("scenario: negative private-class count");
  if (spec.dim < 2) throw DomainError("scenario: dim must be >= 2");
  if (spec.samples_per_class_source < 1 || spec.samples_per_class_target < 1)
    throw DomainError("scenario: samples per class must be >= 1");
}

int class_count(const std::vector<int>& per_class, int class_id, int fallback) {
  if (per_class.empty()) return fallback;
  if (class_id >= static_cast<int>(per_class.size()))
    throw DomainError("scenario: per-class count list too short");
  return per_class[static_cast<std::size_t>(class_id)];
}

struct AffineShift {
  std::vector<std::pair<Index, Index>> planes;  // disjoint rotation planes
  double angle = 0.0;
  Vector scale;
  Vector translation;

  Vector apply(const Vector& x) const {
    Vector y = x;
    const double c = std::cos(angle), s = std::sin(angle);
    for (auto [i, j] : planes) {
      const double xi = y[i], xj = y[j];
      y[i] = c * xi - s * xj;
      y[j] = s * xi + c * xj;
    }
    y = y.cwiseProduct(scale);
    return y + translation;
  }
};

AffineShift make_shift(const ScenarioSpec& spec, Rng& rng) {
  AffineShift shift;
  shift.angle = spec.shift_rotation;
  for (Index i = 0; i + 1 < spec.dim; i += 2) shift.planes.emplace_back(i, i + 1);
  shift.scale = Vector::Ones(spec.dim);
  std::uniform_real_distribution<double> scale_dist(spec.shift_scale_min,
                                                    spec.shift_scale_max);
  for (Index i = 0; i < spec.dim; ++i) shift.scale[i] = scale_dist(rng);
  shift.translation = Vector::Zero(spec.dim);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (Index i = 0; i < spec.dim; ++i)
    shift.translation[i] = spec.shift_translation * unit(rng);
  return shift;
}

}  // namespace

std::pair<Dataset, Dataset> generate_scenario(const ScenarioSpec& spec) {
  validate_spec(spec);
  const int total_classes = spec.split.num_classes_total();

  Rng rng_means = make_rng(spec.seed, 11);
  Rng rng_shift = make_rng(spec.seed, 12);
  Rng rng_source = make_rng(spec.seed, 13);
  Rng rng_target = make_rng(spec.seed, 14);

  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> means;
  means.reserve(static_cast<std::size_t>(total_classes));
  for (int c = 0; c < total_classes; ++c) {
    Vector mu(spec.dim);
    for (Index i = 0; i < spec.dim; ++i)
      mu[i] = spec.cluster_spacing * unit(rng_means);
    means.push_back(std::move(mu));
  }
  const AffineShift shift = make_shift(spec, rng_shift);

  auto sample_rows = [&](const Vector& center, double sigma, int count,
                         Rng& rng, std::vector<Vector>& out) {
    for (int i = 0; i < count; ++i) {
      Vector x = center;
      for (Index d = 0; d < spec.dim; ++d) x[d] += sigma * unit(rng);
      out.push_back(std::move(x));
    }
  };

  std::vector<Vector> src_rows, tgt_rows;
  std::vector<int> src_labels, tgt_labels;
  for (int c = 0; c < total_classes; ++c) {
    const ClassRole role = spec.split.role_of(c);
    if (role != ClassRole::TargetPrivate) {
      const int n = class_count(spec.per_class_source_counts, c,
                                spec.samples_per_class_source);
      sample_rows(means[static_cast<std::size_t>(c)], spec.noise_sigma_source,
                  n, rng_source, src_rows);
      src_labels.insert(src_labels.end(), static_cast<std::size_t>(n), c);
    }
    if (role != ClassRole::SourcePrivate) {
      const int n = class_count(spec.per_class_target_counts, c,
                                spec.samples_per_class_target);
      const Vector shifted = shift.apply(means[static_cast<std::size_t>(c)]);
      sample_rows(shifted, spec.noise_sigma_target, n, rng_target, tgt_rows);
      tgt_labels.insert(tgt_labels.end(), static_cast<std::size_t>(n), c);
    }
  }

  auto pack = [&](std::vector<Vector>& rows, std::vector<int>& labels,
                  Domain domain) {
    Dataset ds;
    ds.domain = domain;
    ds.features.resize(static_cast<Index>(rows.size()), spec.dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
      ds.features.row(static_cast<Index>(i)) = rows[i].transpose();
    ds.labels = std::move(labels);
    for (int c = 0; c < total_classes; ++c)
      ds.class_roles[c] = spec.split.role_of(c);
    return ds;
  };

  return {pack(src_rows, src_labels, Domain::Source),
          pack(tgt_rows, tgt_labels, Domain::Target)};
}

void write_dataset_csv(const std::string& path,
                       const std::vector<const Dataset*>& datasets) {
  if (datasets.empty()) throw DomainError("write_dataset_csv: nothing to write");
  const Index dim = datasets.front()->dim();
  std::ofstream os(path);
  if (!os) throw IoError("cannot write dataset: " + path);
  os << "domain,label";
  for (Index c = 0; c < dim; ++c) os << ",f" << c;
  os << "\n";
  char buf[64];
  for (const Dataset* ds : datasets) {
    if (ds->dim() != dim)
      throw ShapeError("write_dataset_csv: mixed feature dims");
    const char* tag = ds->domain == Domain::Source ? "source" : "target";
    for (Index r = 0; r < ds->size(); ++r) {
      os << tag << "," << ds->labels[static_cast<std::size_t>(r)];
      for (Index c = 0; c < dim; ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", ds->features(r, c));
        os << "," << buf;
      }
      os << "\n";
    }
  }
  if (!os) throw IoError("dataset write failed: " + path);
}

namespace {

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

std::pair<Dataset, Dataset> load_feature_csv(
    const std::vector<std::string>& paths, const SplitSpec& split,
    LoadReport* report) {
  if (paths.empty()) throw DomainError("load_feature_csv: no paths");

  std::vector<Vector> src_rows, tgt_rows;
  std::vector<int> src_labels, tgt_labels;
  Index dim = -1;
  LoadReport local;

  for (const std::string& path : paths) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read dataset: " + path);
    std::string line;
    int line_no = 0;
    if (!std::getline(is, line))
      throw ParseError(path + ": empty file");
    ++line_no;
    auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "domain" || header[1] != "label")
      throw ParseError(path + ":1: expected header domain,label,f0,...");
    const Index file_dim = static_cast<Index>(header.size()) - 2;
    if (dim < 0) dim = file_dim;
    if (file_dim != dim)
      throw ParseError(path + ":1: feature dim differs across files");

    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto fields = split_csv_line(line);
      const std::string where = path + ":" + std::to_string(line_no);
      if (static_cast<Index>(fields.size()) != dim + 2)
        throw ParseError(where + ": ragged row");
      bool is_source;
      if (fields[0] == "source") is_source = true;
      else if (fields[0] == "target") is_source = false;
      else throw ParseError(where + ": unknown domain tag '" + fields[0] + "'");

      int label = 0;
      try {
        std::size_t pos = 0;
        label = std::stoi(fields[1], &pos);
        if (pos != fields[1].size()) throw std::invalid_argument("trail");
      } catch (const std::exception&) {
        throw ParseError(where + ": bad label '" + fields[1] + "'");
      }

      Vector x(dim);
      for (Index c = 0; c < dim; ++c) {
        try {
          std::size_t pos = 0;
          x[c] = std::stod(fields[static_cast<std::size_t>(c) + 2], &pos);
          if (pos != fields[static_cast<std::size_t>(c) + 2].size())
            throw std::invalid_argument("trail");
        } catch (const std::exception&) {
          throw ParseError(where + ": non-numeric feature in column f" +
                           std::to_string(c));
        }
      }

      if (is_source) {
        if (!split.in_source(label)) {
          ++local.dropped_source;
          continue;
        }
        src_rows.push_back(std::move(x));
        src_labels.push_back(label);
      } else {
        if (!split.in_target(label)) {
          ++local.dropped_target;
          continue;
        }
        tgt_rows.push_back(std::move(x));
        tgt_labels.push_back(label);
      }
    }
  }

  auto pack = [&](std::vector<Vector>& rows, std::vector<int>& labels,
                  Domain domain) {
    Dataset ds;
    ds.domain = domain;
    ds.features.resize(static_cast<Index>(rows.size()), dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
      ds.features.row(static_cast<Index>(i)) = rows[i].transpose();
    ds.labels = std::move(labels);
    for (int c = 0; c < split.num_classes_total(); ++c)
      ds.class_roles[c] = split.role_of(c);
    return ds;
  };

  if (report) *report = local;
  return {pack(src_rows, src_labels, Domain::Source),
          pack(tgt_rows, tgt_labels, Domain::Target)};
}

BatchIterator::BatchIterator(Index num_source, Index num_target,
                             int batch_size, Rng& rng)
    : batch_size_(batch_size) {
  if (num_source < 1 || num_target < 1)
    throw DomainError("BatchIterator: empty dataset");
  if (batch_size < 1 ||
      batch_size > static_cast<int>(std::min(num_source, num_target)))
    throw DomainError("BatchIterator: batch must be in [1, min(N_s, N_t)]");
  source_order_.resize(static_cast<std::size_t>(num_source));
  target_order_.resize(static_cast<std::size_t>(num_target));
  std::iota(source_order_.begin(), source_order_.end(), 0);
  std::iota(target_order_.begin(), target_order_.end(), 0);
  std::shuffle(source_order_.begin(), source_order_.end(), rng);
  std::shuffle(target_order_.begin(), target_order_.end(), rng);
  iterations_ =
      static_cast<int>(std::max(num_source, num_target)) / batch_size;
}

PairedBatch BatchIterator::batch(int iteration) const {
  if (iteration < 0 || iteration >= iterations_)
    throw IndexError("BatchIterator::batch: iteration out of range");
  PairedBatch b;
  b.source_indices.reserve(static_cast<std::size_t>(batch_size_));
  b.target_indices.reserve(static_cast<std::size_t>(batch_size_));
  // the smaller domain wraps around cyclically in its shuffled order
  for (int i = 0; i < batch_size_; ++i) {
    const std::size_t pos = static_cast<std::size_t>(iteration) *
                                static_cast<std::size_t>(batch_size_) +
                            static_cast<std::size_t>(i);
    b.source_indices.push_back(source_order_[pos % source_order_.size()]);
    b.target_indices.push_back(target_order_[pos % target_order_.size()]);
  }
  return b;
}

double known_mixup_probability(int num_source_classes, int num_target_classes,
                               int num_shared_classes) {
  if (num_source_classes < 1 || num_target_classes < 1)
    throw DomainError("known_mixup_probability: class counts must be >= 1");
  if (num_shared_classes < 0 ||
      num_shared_classes > std::min(num_source_classes, num_target_classes))
    throw DomainError("known_mixup_probability: K_s exceeds min(K, K')");
  return static_cast<double>(num_shared_classes) /
         (static_cast<double>(num_source_classes) *
          static_cast<double>(num_target_classes));
}

}  // namespace mlnet
