#include "feddiv/classifier.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace feddiv {

std::size_t ModelParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

Vector ModelParams::flatten() const {
  Vector flat(num_parameters());
  Eigen::Index pos = 0;
  for (const auto& l : layers) {
    flat.segment(pos, l.weight.size()) = l.weight.reshaped();
    pos += l.weight.size();
    flat.segment(pos, l.bias.size()) = l.bias;
    pos += l.bias.size();
  }
  return flat;
}

void ModelParams::assign_flat(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_parameters())
    throw std::invalid_argument("assign_flat: size mismatch");
  Eigen::Index pos = 0;
  for (auto& l : layers) {
    l.weight.reshaped() = flat.segment(pos, l.weight.size());
    pos += l.weight.size();
    l.bias = flat.segment(pos, l.bias.size());
    pos += l.bias.size();
  }
}

bool ModelParams::same_shape(const ModelParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
        layers[i].weight.cols() != other.layers[i].weight.cols() ||
        layers[i].bias.size() != other.layers[i].bias.size())
      return false;
  }
  return true;
}

bool ModelParams::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

ModelParams ModelParams::zeros_like(const ModelParams& shape) {
  ModelParams out;
  for (const auto& l : shape.layers)
    out.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                          Vector::Zero(l.bias.size())});
  return out;
}

ModelParams init_params(int input_dim, const std::vector<int>& hidden_sizes, int num_classes,
                        RngStream& rng) {
  if (input_dim < 1 || num_classes < 1) throw std::invalid_argument("init_params: bad dimensions");
  ModelParams p;
  int in = input_dim;
  std::vector<int> sizes = hidden_sizes;
  sizes.push_back(num_classes);
  for (int out : sizes) {
    const double limit = std::sqrt(6.0 / (in + out));
    Layer l{Matrix(out, in), Vector::Zero(out)};
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = rng.uniform(-limit, limit);
    p.layers.push_back(std::move(l));
    in = out;
  }
  return p;
}

namespace {

void check_input(const ModelParams& params, const Vector& x) {
  if (params.layers.empty()) throw std::invalid_argument("model has no layers");
  if (x.size() != params.input_dim())
    throw std::invalid_argument("feature dimension " + std::to_string(x.size()) +
                                " does not match model input " +
                                std::to_string(params.input_dim()));
}

// Activations a_0 = x, a_1..a_{L-1} hidden (post-tanh), and the output logits.
struct Trace {
  std::vector<Vector> activations;
  Vector logits;
};

Trace forward_trace(const ModelParams& params, const Vector& x) {
  Trace t;
  t.activations.reserve(params.layers.size());
  t.activations.push_back(x);
  for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    t.activations.push_back(
        (layer.weight * t.activations.back() + layer.bias).array().tanh().matrix());
  }
  const auto& out = params.layers.back();
  t.logits = out.weight * t.activations.back() + out.bias;
  return t;
}

void backward(const ModelParams& params, const Trace& t, Vector g, ModelParams& grad) {
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Vector& a = t.activations[l];
    grad.layers[l].weight.noalias() += g * a.transpose();
    grad.layers[l].bias += g;
    if (l > 0) {
      Vector back = params.layers[l].weight.transpose() * g;
      g = back.array() * (1.0 - a.array().square());
    }
  }
}

}  // namespace

Vector forward_logits(const ModelParams& params, const Vector& x) {
  check_input(params, x);
  return forward_trace(params, x).logits;
}

Vector softmax(const Vector& logits) {
  Vector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Vector log_softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

Vector predict_proba(const ModelParams& params, const Vector& x) {
  return softmax(forward_logits(params, x));
}

double cross_entropy(const ModelParams& params, const Vector& x, int y) {
  if (y < 0 || y >= params.num_classes())
    throw std::invalid_argument("cross_entropy: label out of range");
  return -log_softmax(forward_logits(params, x))[y];
}

int argmax(const Vector& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

MixedSample mixup_pair(const Vector& xi, int yi, const Vector& xj, int yj, double lambda,
                       int num_classes) {
  if (xi.size() != xj.size()) throw std::invalid_argument("mixup_pair: dimension mismatch");
  if (yi < 0 || yi >= num_classes || yj < 0 || yj >= num_classes)
    throw std::invalid_argument("mixup_pair: label out of range");
  MixedSample s;
  s.x = lambda * xi + (1.0 - lambda) * xj;
  s.y = Vector::Zero(num_classes);
  s.y[yi] += lambda;
  s.y[yj] += 1.0 - lambda;
  return s;
}

LossAndGrad batch_loss(const ModelParams& params, const std::vector<MixedSample>& batch,
                       double eta) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  const int C = params.num_classes();
  const double B = static_cast<double>(batch.size());

  std::vector<Trace> traces;
  std::vector<Vector> probs;
  traces.reserve(batch.size());
  probs.reserve(batch.size());
  LossAndGrad out{0.0, ModelParams::zeros_like(params)};
  Vector q = Vector::Zero(C);
  for (const auto& s : batch) {
    check_input(params, s.x);
    traces.push_back(forward_trace(params, s.x));
    const Vector logp = log_softmax(traces.back().logits);
    out.loss -= s.y.dot(logp);
    probs.push_back(logp.array().exp());
    q += probs.back();
  }
  q /= B;

  // d/dz_b of the regularizer: (1/B) p_b * (sum_c p_bc / (C q_c) - 1 / (C q_j)).
  Vector inv_cq = Vector::Zero(C);
  if (eta != 0.0) {
    inv_cq = (static_cast<double>(C) * q.array()).inverse();
    const double uniform = 1.0 / C;
    out.loss += eta * (uniform * (std::log(uniform) - q.array().log())).sum();
  }
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Vector g = probs[b] * batch[b].y.sum() - batch[b].y;
    if (eta != 0.0) {
      const double s = probs[b].dot(inv_cq);
      g += eta / B * (probs[b].array() * (s - inv_cq.array())).matrix();
    }
    backward(params, traces[b], std::move(g), out.grad);
  }
  return out;
}

LocalTrainer::LocalTrainer(ModelParams params, const TrainOptions& options)
    : params_(std::move(params)), velocity_(ModelParams::zeros_like(params_)), options_(options) {}

double LocalTrainer::train_epoch(const std::vector<TrainingPair>& data, RngStream& rng) {
  if (data.empty()) throw std::invalid_argument("train_epoch: empty training set");
  const int C = params_.num_classes();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  double epoch_loss = 0.0;
  const std::size_t B = static_cast<std::size_t>(options_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += B) {
    const std::size_t end = std::min(order.size(), start + B);
    std::vector<std::size_t> members(order.begin() + start, order.begin() + end);
    std::vector<std::size_t> partners = members;
    rng.shuffle(partners);
    const double lambda = rng.beta(options_.mixup_alpha, options_.mixup_alpha);

    std::vector<MixedSample> batch;
    batch.reserve(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
      const auto& a = data[members[i]];
      const auto& b = data[partners[i]];
      batch.push_back(mixup_pair(a.x, a.y, b.x, b.y, lambda, C));
    }
    LossAndGrad lg = batch_loss(params_, batch, options_.reg_weight);
    epoch_loss += lg.loss;
    for (std::size_t l = 0; l < params_.layers.size(); ++l) {
      auto& v = velocity_.layers[l];
      const auto& g = lg.grad.layers[l];
      v.weight = options_.momentum * v.weight + g.weight;
      v.bias = options_.momentum * v.bias + g.bias;
      params_.layers[l].weight -= options_.learning_rate * v.weight;
      params_.layers[l].bias -= options_.learning_rate * v.bias;
    }
  }
  return epoch_loss;
}

ModelParams local_train(const ModelParams& params, const std::vector<TrainingPair>& data,
                        const TrainOptions& options, RngStream& rng) {
  if (data.empty()) throw std::invalid_argument("local_train: empty training set");
  LocalTrainer trainer(params, options);
  for (int e = 0; e < options.epochs; ++e) trainer.train_epoch(data, rng);
  return std::move(trainer).release();
}

std::vector<TrainingPair> training_pairs(const LabeledDataset& data) {
  std::vector<TrainingPair> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back({data.features[i], data.given_labels[i]});
  return out;
}

std::vector<double> per_sample_losses(const ModelParams& params, const LabeledDataset& data) {
  if (data.empty()) throw std::invalid_argument("per_sample_losses: empty dataset");
  std::vector<double> losses;
  losses.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    losses.push_back(cross_entropy(params, data.features[i], data.given_labels[i]));
  return losses;
}

}  // namespace feddiv
