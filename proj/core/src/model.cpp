#include "mlnet/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mlnet {

NetworkParams make_network(Index input_dim, const std::vector<Index>& hidden,
                           Index feature_dim, Index num_classes,
                           Activation activation, Rng& rng) {
  if (num_classes < 2) throw DomainError("make_network: need K >= 2");
  if (feature_dim < 1) throw DomainError("make_network: need D >= 1");
  NetworkParams net;
  net.extractor = make_mlp(input_dim, hidden, feature_dim, activation, rng);
  net.closed_head = make_dense_layer(num_classes, feature_dim, rng);
  net.open_heads.reserve(num_classes);
  for (Index l = 0; l < num_classes; ++l)
    net.open_heads.push_back(make_dense_layer(2, feature_dim, rng));
  return net;
}

Matrix extract_features(const NetworkParams& net, const Matrix& batch) {
  if (batch.rows() == 0) throw DomainError("extract_features: empty batch");
  return mlp_forward(net.extractor, batch).output();
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    Eigen::ArrayXd e = (logits.row(r).array() - m).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) { return stable_sigmoid(v); });
}

Matrix closed_logits_of(const NetworkParams& net, const Matrix& features) {
  if (features.cols() != net.feature_dim())
    throw ShapeError("closed head: feature dim mismatch");
  Matrix logits = features * net.closed_head.weight.transpose();
  logits.rowwise() += net.closed_head.bias.transpose();
  return logits;
}

Matrix closed_probs(const NetworkParams& net, const Matrix& features) {
  return softmax_rows(closed_logits_of(net, features));
}

Matrix open_logit_gaps_of(const NetworkParams& net, const Matrix& features) {
  if (features.cols() != net.feature_dim())
    throw ShapeError("open heads: feature dim mismatch");
  const Index k = net.num_classes();
  Matrix gaps(features.rows(), k);
  for (Index l = 0; l < k; ++l) {
    const DenseLayer& head = net.open_heads[l];
    // softmax over a (pos, neg) pair depends only on the logit difference
    Vector wd = head.weight.row(0) - head.weight.row(1);
    const double bd = head.bias[0] - head.bias[1];
    gaps.col(l) = (features * wd).array() + bd;
  }
  return gaps;
}

Matrix open_scores(const NetworkParams& net, const Matrix& features) {
  return sigmoid(open_logit_gaps_of(net, features));
}

HeadOutputs forward_heads(const NetworkParams& net, const Matrix& batch,
                          MlpActivations* acts_out) {
  HeadOutputs out;
  MlpActivations acts = mlp_forward(net.extractor, batch);
  out.features = acts.output();
  out.closed_logits = closed_logits_of(net, out.features);
  out.closed_probs = softmax_rows(out.closed_logits);
  out.open_logit_gap = open_logit_gaps_of(net, out.features);
  out.open_pos = sigmoid(out.open_logit_gap);
  if (acts_out) *acts_out = std::move(acts);
  return out;
}

Index network_extractor_param_count(const NetworkParams& net) {
  return mlp_param_count(net.extractor);
}

Index network_param_count(const NetworkParams& net) {
  Index n = network_extractor_param_count(net);
  n += net.closed_head.weight.size() + net.closed_head.bias.size();
  for (const DenseLayer& h : net.open_heads)
    n += h.weight.size() + h.bias.size();
  return n;
}

namespace {

void flatten_layer(const Matrix& w, const Vector& b, Vector& out,
                   Index& offset) {
  for (Index r = 0; r < w.rows(); ++r)
    for (Index c = 0; c < w.cols(); ++c) out[offset++] = w(r, c);
  for (Index r = 0; r < b.size(); ++r) out[offset++] = b[r];
}

void unflatten_layer(Matrix& w, Vector& b, const Vector& flat, Index& offset) {
  for (Index r = 0; r < w.rows(); ++r)
    for (Index c = 0; c < w.cols(); ++c) w(r, c) = flat[offset++];
  for (Index r = 0; r < b.size(); ++r) b[r] = flat[offset++];
}

}  // namespace

Vector network_flatten(const NetworkParams& net) {
  Vector out(network_param_count(net));
  mlp_flatten(net.extractor, out, 0);
  Index offset = network_extractor_param_count(net);
  flatten_layer(net.closed_head.weight, net.closed_head.bias, out, offset);
  for (const DenseLayer& h : net.open_heads)
    flatten_layer(h.weight, h.bias, out, offset);
  return out;
}

void network_unflatten(NetworkParams& net, const Vector& flat) {
  if (flat.size() != network_param_count(net))
    throw ShapeError("network_unflatten: size mismatch");
  mlp_unflatten(net.extractor, flat, 0);
  Index offset = network_extractor_param_count(net);
  unflatten_layer(net.closed_head.weight, net.closed_head.bias, flat, offset);
  for (DenseLayer& h : net.open_heads)
    unflatten_layer(h.weight, h.bias, flat, offset);
}

Vector network_grad_flatten(const NetworkParams& net,
                            const NetworkGradients& grads) {
  Vector out(network_param_count(net));
  mlp_grad_flatten(grads.extractor, out, 0);
  Index offset = network_extractor_param_count(net);
  flatten_layer(grads.closed_head.weight, grads.closed_head.bias, out, offset);
  for (const DenseLayerGrad& g : grads.open_heads)
    flatten_layer(g.weight, g.bias, out, offset);
  return out;
}

NetworkGradients zero_gradients(const NetworkParams& net) {
  NetworkGradients g;
  g.extractor.layers.resize(net.extractor.layers.size());
  for (std::size_t i = 0; i < net.extractor.layers.size(); ++i) {
    const DenseLayer& l = net.extractor.layers[i];
    g.extractor.layers[i].weight = Matrix::Zero(l.out_dim(), l.in_dim());
    g.extractor.layers[i].bias = Vector::Zero(l.out_dim());
  }
  g.closed_head.weight =
      Matrix::Zero(net.closed_head.out_dim(), net.closed_head.in_dim());
  g.closed_head.bias = Vector::Zero(net.closed_head.out_dim());
  g.open_heads.resize(net.open_heads.size());
  for (std::size_t l = 0; l < net.open_heads.size(); ++l) {
    g.open_heads[l].weight = Matrix::Zero(2, net.feature_dim());
    g.open_heads[l].bias = Vector::Zero(2);
  }
  return g;
}

namespace {

constexpr const char* kCheckpointMagic = "mlnet-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_matrix(std::ostream& os, const Matrix& m) {
  char buf[64];
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      os << (c ? " " : "") << buf;
    }
    os << "\n";
  }
}

void write_vector(std::ostream& os, const Vector& v) {
  char buf[64];
  for (Index r = 0; r < v.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%.17g", v[r]);
    os << (r ? " " : "") << buf;
  }
  os << "\n";
}

Matrix read_matrix(std::istream& is, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      if (!(is >> m(r, c))) throw ParseError("checkpoint: truncated tensor");
  return m;
}

Vector read_vector(std::istream& is, Index n) {
  Vector v(n);
  for (Index r = 0; r < n; ++r)
    if (!(is >> v[r])) throw ParseError("checkpoint: truncated tensor");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& net,
                     std::uint64_t seed) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write checkpoint: " + path);
  os << kCheckpointMagic << " v" << kCheckpointVersion << "\n";
  os << "seed " << seed << "\n";
  os << "num_classes " << net.num_classes() << "\n";
  os << "feature_dim " << net.feature_dim() << "\n";
  os << "activation " << activation_name(net.extractor.activation) << "\n";
  os << "extractor_layers " << net.extractor.layers.size() << "\n";
  for (const DenseLayer& l : net.extractor.layers) {
    os << "layer " << l.out_dim() << " " << l.in_dim() << "\n";
    write_matrix(os, l.weight);
    write_vector(os, l.bias);
  }
  os << "closed_head " << net.closed_head.out_dim() << " "
     << net.closed_head.in_dim() << "\n";
  write_matrix(os, net.closed_head.weight);
  write_vector(os, net.closed_head.bias);
  for (std::size_t l = 0; l < net.open_heads.size(); ++l) {
    os << "open_head " << l << "\n";
    write_matrix(os, net.open_heads[l].weight);
    write_vector(os, net.open_heads[l].bias);
  }
  if (!os) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read checkpoint: " + path);
  std::string magic, version;
  if (!(is >> magic >> version) || magic != kCheckpointMagic)
    throw ParseError("not a checkpoint file: " + path);
  if (version != "v1")
    throw ParseError("unsupported checkpoint version: " + version);

  Checkpoint ckpt;
  std::string key;
  Index num_classes = 0, feature_dim = 0;
  std::size_t n_layers = 0;
  std::string act_name;
  is >> key >> ckpt.seed;
  if (key != "seed") throw ParseError("checkpoint: expected seed");
  is >> key >> num_classes;
  if (key != "num_classes") throw ParseError("checkpoint: expected num_classes");
  is >> key >> feature_dim;
  if (key != "feature_dim") throw ParseError("checkpoint: expected feature_dim");
  is >> key >> act_name;
  if (key != "activation") throw ParseError("checkpoint: expected activation");
  is >> key >> n_layers;
  if (key != "extractor_layers")
    throw ParseError("checkpoint: expected extractor_layers");

  ckpt.net.extractor.activation = activation_from_name(act_name);
  for (std::size_t i = 0; i < n_layers; ++i) {
    Index out = 0, in = 0;
    is >> key >> out >> in;
    if (key != "layer") throw ParseError("checkpoint: expected layer header");
    DenseLayer l;
    l.weight = read_matrix(is, out, in);
    l.bias = read_vector(is, out);
    ckpt.net.extractor.layers.push_back(std::move(l));
  }
  Index k = 0, d = 0;
  is >> key >> k >> d;
  if (key != "closed_head") throw ParseError("checkpoint: expected closed_head");
  if (k != num_classes || d != feature_dim)
    throw ParseError("checkpoint: inconsistent head dims");
  ckpt.net.closed_head.weight = read_matrix(is, k, d);
  ckpt.net.closed_head.bias = read_vector(is, k);
  for (Index l = 0; l < num_classes; ++l) {
    std::size_t idx = 0;
    is >> key >> idx;
    if (key != "open_head" || idx != static_cast<std::size_t>(l))
      throw ParseError("checkpoint: expected open_head");
    DenseLayer head;
    head.weight = read_matrix(is, 2, feature_dim);
    head.bias = read_vector(is, 2);
    ckpt.net.open_heads.push_back(std::move(head));
  }
  if (ckpt.net.feature_dim() != feature_dim)
    throw ParseError("checkpoint: extractor/head dim mismatch");
  return ckpt;
}

}  // namespace mlnet
