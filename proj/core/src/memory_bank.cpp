#include "mlnet/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace mlnet {

namespace {
constexpr double kLogClamp = 1e-12;
}

const char* neighbor_mode_name(NeighborMode m) {
  return m == NeighborMode::Adaptive ? "adaptive" : "knn";
}

NeighborMode neighbor_mode_from_name(const std::string& name) {
  if (name == "adaptive") return NeighborMode::Adaptive;
  if (name == "knn") return NeighborMode::Knn;
  throw ParseError("unknown neighbor mode: " + name);
}

MemoryBank::MemoryBank(Index num_rows, Index dim, double tau, double epsilon,
                       NeighborMode mode, int knn_k)
    : rows_(Matrix::Zero(num_rows, dim)),
      written_(static_cast<std::size_t>(num_rows), false),
      tau_(tau),
      epsilon_(epsilon),
      mode_(mode),
      knn_k_(knn_k) {
  if (num_rows < 1 || dim < 1) throw DomainError("MemoryBank: empty shape");
  if (!(tau > 0.0)) throw DomainError("MemoryBank: tau must be > 0");
  if (!(epsilon > 0.0) || epsilon > 1.0)
    throw DomainError("MemoryBank: epsilon must be in (0,1]");
}

void MemoryBank::update(const std::vector<int>& indices,
                        const Matrix& features) {
  if (features.rows() != static_cast<Index>(indices.size()))
    throw ShapeError("MemoryBank::update: index/feature count mismatch");
  if (features.cols() != dim())
    throw ShapeError("MemoryBank::update: feature dim mismatch");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int j = indices[i];
    if (j < 0 || j >= size())
      throw IndexError("MemoryBank::update: index out of range");
    const double norm = features.row(i).norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw NumericError("MemoryBank::update: zero-norm or non-finite feature");
    rows_.row(j) = features.row(i) / norm;
    if (!written_[static_cast<std::size_t>(j)]) {
      written_[static_cast<std::size_t>(j)] = true;
      ++written_count_;
    }
  }
}

Vector similarities(const MemoryBank& bank, Index query_index) {
  if (query_index < 0 || query_index >= bank.size())
    throw IndexError("similarities: query out of range");
  if (!bank.fully_initialized())
    throw DomainError("similarities: bank has unwritten rows");
  return bank.rows() * bank.rows().row(query_index).transpose();
}

namespace {

Vector softmax_scaled(const Vector& sims, double tau) {
  const double m = sims.maxCoeff();
  Eigen::ArrayXd e = ((sims.array() - m) * tau).exp();
  return (e / e.sum()).matrix();
}

}  // namespace

Vector neighbor_probs(const MemoryBank& bank, Index query_index) {
  return softmax_scaled(similarities(bank, query_index), bank.tau());
}

std::vector<int> adaptive_neighborhood_of(const Vector& sims, Index query_index,
                                          double epsilon) {
  const Index n = sims.size();
  if (n < 2) throw DomainError("adaptive_neighborhood: need N_t >= 2");
  Index best = query_index == 0 ? 1 : 0;
  for (Index k = 0; k < n; ++k) {
    if (k == query_index) continue;
    if (sims[k] > sims[best]) best = k;  // ties keep the lowest index
  }
  const double threshold = epsilon * sims[best];
  std::vector<int> out;
  for (Index k = 0; k < n; ++k) {
    if (k == query_index) continue;
    if (k == best || sims[k] > threshold) out.push_back(static_cast<int>(k));
  }
  return out;
}

std::vector<int> adaptive_neighborhood(const MemoryBank& bank,
                                       Index query_index) {
  return adaptive_neighborhood_of(similarities(bank, query_index), query_index,
                                  bank.epsilon());
}

std::vector<int> knn_neighborhood_of(const Vector& sims, Index query_index,
                                     int k) {
  const Index n = sims.size();
  if (k < 1 || k > n - 1)
    throw DomainError("knn_neighborhood: k out of [1, N_t-1]");
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n - 1));
  for (Index i = 0; i < n; ++i)
    if (i != query_index) order.push_back(static_cast<int>(i));
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](int a, int b) {
                      if (sims[a] != sims[b]) return sims[a] > sims[b];
                      return a < b;
                    });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<int> knn_neighborhood(const MemoryBank& bank, Index query_index,
                                  int k) {
  return knn_neighborhood_of(similarities(bank, query_index), query_index, k);
}

std::vector<int> neighborhood(const MemoryBank& bank, Index query_index) {
  if (bank.mode() == NeighborMode::Adaptive)
    return adaptive_neighborhood(bank, query_index);
  return knn_neighborhood(bank, query_index, bank.knn_k());
}

std::vector<std::vector<int>> all_neighborhoods(const MemoryBank& bank) {
  if (!bank.fully_initialized())
    throw DomainError("all_neighborhoods: bank has unwritten rows");
  const Index n = bank.size();
  std::vector<std::vector<int>> sets(static_cast<std::size_t>(n));
  // one Gram matrix, then per-row selection
  Matrix gram = bank.rows() * bank.rows().transpose();
  for (Index j = 0; j < n; ++j) {
    Vector sims = gram.col(j);
    sets[static_cast<std::size_t>(j)] =
        bank.mode() == NeighborMode::Adaptive
            ? adaptive_neighborhood_of(sims, j, bank.epsilon())
            : knn_neighborhood_of(sims, j, bank.knn_k());
  }
  return sets;
}

double jaccard_confidence(const std::vector<int>& a,
                          const std::vector<int>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

NilResult loss_nil(const MemoryBank& bank,
                   const std::vector<std::vector<int>>& neighborhoods,
                   Index query_index, const Vector& live_feature,
                   bool use_confidence) {
  if (query_index < 0 || query_index >= bank.size())
    throw IndexError("loss_nil: query out of range");
  if (live_feature.size() != bank.dim())
    throw ShapeError("loss_nil: feature dim mismatch");

  NilResult res;
  res.grad = Vector::Zero(bank.dim());

  const auto& nbrs = neighborhoods[static_cast<std::size_t>(query_index)];
  if (nbrs.empty()) return res;  // skip sample, contributes 0

  const double norm = live_feature.norm();
  if (!(norm > 0.0)) throw NumericError("loss_nil: zero-norm live feature");
  Vector m = live_feature / norm;

  Vector sims = bank.rows() * m;
  Vector probs = softmax_scaled(sims, bank.tau());

  const double inv_n = 1.0 / static_cast<double>(nbrs.size());
  double weight_sum = 0.0;
  Vector weights = Vector::Zero(bank.size());
  for (int k : nbrs) {
    const double w =
        use_confidence
            ? jaccard_confidence(nbrs,
                                 neighborhoods[static_cast<std::size_t>(k)])
            : 1.0;
    weights[k] = w;
    weight_sum += w;
    res.loss -= w * std::log(std::max(probs[k], kLogClamp));
  }
  res.loss *= inv_n;

  // dL/ds_n = -(tau/|N|) (w_n [n in N] - p_n * sum_k w_k)
  Vector dL_ds =
      (-bank.tau() * inv_n) * (weights - probs * weight_sum);
  // dL/dm, then project through the normalization m = z/||z||
  Vector dL_dm = bank.rows().transpose() * dL_ds;
  res.grad = (dL_dm - m * m.dot(dL_dm)) / norm;
  return res;
}

NilResult loss_nil(const MemoryBank& bank, Index query_index,
                   const Vector& live_feature, bool use_confidence) {
  return loss_nil(bank, all_neighborhoods(bank), query_index, live_feature,
                  use_confidence);
}

std::vector<int> brute_force_neighbors(const Matrix& raw_features, Index j,
                                       NeighborMode mode, double epsilon,
                                       int knn_k) {
  const Index n = raw_features.rows();
  const Index d = raw_features.cols();
  if (j < 0 || j >= n) throw IndexError("brute_force_neighbors: bad query");

  auto unit_dot = [&](Index a, Index b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (Index c = 0; c < d; ++c) {
      dot += raw_features(a, c) * raw_features(b, c);
      na += raw_features(a, c) * raw_features(a, c);
      nb += raw_features(b, c) * raw_features(b, c);
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };

  std::vector<double> sims(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) sims[static_cast<std::size_t>(k)] = unit_dot(j, k);

  std::vector<int> out;
  if (mode == NeighborMode::Adaptive) {
    Index best = -1;
    for (Index k = 0; k < n; ++k) {
      if (k == j) continue;
      if (best < 0 || sims[static_cast<std::size_t>(k)] >
                          sims[static_cast<std::size_t>(best)])
        best = k;
    }
    const double threshold = epsilon * sims[static_cast<std::size_t>(best)];
    for (Index k = 0; k < n; ++k) {
      if (k == j) continue;
      if (k == best || sims[static_cast<std::size_t>(k)] > threshold)
        out.push_back(static_cast<int>(k));
    }
  } else {
    std::vector<int> order;
    for (Index k = 0; k < n; ++k)
      if (k != j) order.push_back(static_cast<int>(k));
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return sims[static_cast<std::size_t>(a)] >
             sims[static_cast<std::size_t>(b)];
    });
    order.resize(static_cast<std::size_t>(knn_k));
    std::sort(order.begin(), order.end());
    out = order;
  }
  return out;
}

void dump_bank_csv(const MemoryBank& bank, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write bank dump: " + path);
  os << "index";
  for (Index c = 0; c < bank.dim(); ++c) os << ",f" << c;
  os << "\n";
  char buf[64];
  for (Index r = 0; r < bank.size(); ++r) {
    os << r;
    for (Index c = 0; c < bank.dim(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", bank.rows()(r, c));
      os << "," << buf;
    }
    os << "\n";
  }
}

}  // namespace mlnet
