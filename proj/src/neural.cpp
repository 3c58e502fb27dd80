#include "riskfleet/neural.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace riskfleet {

double TrainConfig::epsilon_at(int episode) const {
  const double decay_span = epsilon_decay_fraction * static_cast<double>(episodes);
  if (decay_span <= 0) return epsilon_end;
  const double t = std::min(1.0, static_cast<double>(episode) / decay_span);
  return epsilon_start + (epsilon_end - epsilon_start) * t;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (!(discount >= 0) || !(discount < 1)) throw ConfigError("discount must be in [0, 1)");
  if (epsilon_start < 0 || epsilon_start > 1 || epsilon_end < 0 || epsilon_end > 1)
    throw ConfigError("epsilon bounds must be in [0, 1]");
  if (epsilon_decay_fraction < 0 || epsilon_decay_fraction > 1)
    throw ConfigError("epsilon_decay_fraction must be in [0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (episodes < 0) throw ConfigError("episodes must be >= 0");
  if (target_sync_interval < 1) throw ConfigError("target_sync_interval must be >= 1");
  if (replay_capacity < 1) throw ConfigError("replay_capacity must be >= 1");
  if (hidden_sizes.empty()) throw ConfigError("at least one hidden layer is required");
  for (int h : hidden_sizes)
    if (h < 1) throw ConfigError("hidden layer sizes must be >= 1");
  if (updates_per_episode < 0) throw ConfigError("updates_per_episode must be >= 0");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  expect(capacity >= 1, "replay capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
  if (store_.size() < capacity_) {
    store_.push_back(std::move(t));
  } else {
    store_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
}

const Transition& ReplayBuffer::at(std::size_t logical) const {
  expect(logical < store_.size(), "replay index out of range");
  if (store_.size() < capacity_) return store_[logical];
  return store_[(head_ + logical) % capacity_];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  expect(!store_.empty(), "sampling from an empty replay buffer");
  std::vector<const Transition*> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(&store_[rng.uniform_index(store_.size())]);
  return out;
}

void ReplayBuffer::clear() {
  store_.clear();
  head_ = 0;
}

QNetwork::QNetwork(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  expect(sizes_.size() >= 2, "a network needs at least input and output layers");
  for (int s : sizes_) expect(s >= 1, "layer sizes must be >= 1");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    weights_.emplace_back(sizes_[l + 1], sizes_[l]);
    biases_.emplace_back(Vec::Zero(sizes_[l + 1]));
  }
}

QNetwork::QNetwork(std::vector<int> layer_sizes, Rng& init_rng)
    : QNetwork(std::move(layer_sizes)) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(sizes_[l] + sizes_[l + 1]));
    Mat& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = init_rng.uniform(-limit, limit);
  }
}

Vec QNetwork::forward(const Vec& state) const {
  expect(state.size() == input_dim(), "forward: state dimension mismatch");
  Vec a = state;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Vec z = weights_[l] * a + biases_[l];
    a = (l + 1 < weights_.size()) ? z.cwiseMax(0.0) : std::move(z);
  }
  return a;
}

Mat QNetwork::forward_batch(const Mat& states) const {
  expect(states.rows() == input_dim(), "forward_batch: state dimension mismatch");
  Mat a = states;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Mat z = (weights_[l] * a).colwise() + biases_[l];
    a = (l + 1 < weights_.size()) ? z.cwiseMax(0.0) : std::move(z);
  }
  return a;
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

// Checkpoint layout: uint32 count of layer sizes, the sizes as uint32, then per
// layer the weight matrix row-major and the bias vector, all little-endian f64.
void QNetwork::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(sizes_.size()));
  for (int s : sizes_) write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Mat& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) write_raw<double>(out, w(r, c));
    for (Eigen::Index i = 0; i < biases_[l].size(); ++i) write_raw<double>(out, biases_[l](i));
  }
  if (!out) throw ConfigError("short write on checkpoint: " + path);
}

QNetwork QNetwork::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint: " + path);
  const auto count = read_raw<std::uint32_t>(in);
  if (!in || count < 2 || count > 64) throw ConfigError("malformed checkpoint header: " + path);
  std::vector<int> sizes(count);
  for (auto& s : sizes) {
    s = static_cast<int>(read_raw<std::uint32_t>(in));
    if (!in || s < 1) throw ConfigError("malformed checkpoint sizes: " + path);
  }
  QNetwork net(std::move(sizes));
  for (std::size_t l = 0; l < net.weights_.size(); ++l) {
    Mat& w = net.weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = read_raw<double>(in);
    for (Eigen::Index i = 0; i < net.biases_[l].size(); ++i)
      net.biases_[l](i) = read_raw<double>(in);
  }
  if (!in) throw ConfigError("truncated checkpoint: " + path);
  return net;
}

namespace {

struct ForwardCache {
  std::vector<Mat> pre_activations;   // z per layer
  std::vector<Mat> activations;       // input plus post-activation per layer
};

ForwardCache forward_with_cache(const QNetwork& net, const Mat& states) {
  ForwardCache cache;
  cache.activations.push_back(states);
  Mat a = states;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Mat z = (net.weights(l) * a).colwise() + net.biases(l);
    cache.pre_activations.push_back(z);
    a = (l + 1 < net.num_layers()) ? Mat(z.cwiseMax(0.0)) : z;
    cache.activations.push_back(a);
  }
  return cache;
}

}  // namespace

double td_loss(const QNetwork& net, const Mat& states, std::span<const int> actions,
               const Vec& targets) {
  expect(states.cols() == static_cast<Eigen::Index>(actions.size()), "td_loss: batch size mismatch");
  expect(targets.size() == static_cast<Eigen::Index>(actions.size()), "td_loss: target size mismatch");
  const Mat q = net.forward_batch(states);
  double sum = 0;
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    const double err = q(actions[static_cast<std::size_t>(i)], i) - targets(i);
    sum += err * err;
  }
  return sum / static_cast<double>(q.cols());
}

Gradients td_gradients(const QNetwork& net, const Mat& states, std::span<const int> actions,
                       const Vec& targets) {
  const Eigen::Index batch = states.cols();
  expect(batch == static_cast<Eigen::Index>(actions.size()), "td_gradients: batch size mismatch");
  const ForwardCache cache = forward_with_cache(net, states);
  const std::size_t layers = net.num_layers();

  // dL/dQ: only the taken action's output carries error.
  Mat delta = Mat::Zero(net.output_dim(), batch);
  const Mat& q = cache.activations.back();
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    expect(a >= 0 && a < net.output_dim(), "td_gradients: action index out of range");
    delta(a, i) = 2.0 * (q(a, i) - targets(i)) / static_cast<double>(batch);
  }

  Gradients grads;
  grads.weight_grads.resize(layers);
  grads.bias_grads.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    grads.weight_grads[l] = delta * cache.activations[l].transpose();
    grads.bias_grads[l] = delta.rowwise().sum();
    if (l > 0) {
      Mat upstream = net.weights(l).transpose() * delta;
      delta = upstream.cwiseProduct(
          (cache.pre_activations[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return grads;
}

void apply_sgd(QNetwork& net, const Gradients& grads, double learning_rate) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    net.weights(l) -= learning_rate * grads.weight_grads[l];
    net.biases(l) -= learning_rate * grads.bias_grads[l];
  }
}

double td_update(QNetwork& net, const QNetwork& target_net,
                 std::span<const Transition* const> batch, const TrainConfig& cfg) {
  expect(!batch.empty(), "td_update: empty batch");
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  Mat states(net.input_dim(), n);
  Mat next_states(net.input_dim(), n);
  std::vector<int> actions(batch.size());
  Vec rewards(n);
  std::vector<bool> terminal(batch.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = *batch[static_cast<std::size_t>(i)];
    states.col(i) = t.state;
    next_states.col(i) = t.terminal ? Vec::Zero(net.input_dim()) : t.next_state;
    actions[static_cast<std::size_t>(i)] = t.action;
    rewards(i) = t.reward;
    terminal[static_cast<std::size_t>(i)] = t.terminal;
  }

  const Mat next_q = target_net.forward_batch(next_states);
  Vec targets(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double target = rewards(i);
    if (!terminal[static_cast<std::size_t>(i)]) target += cfg.discount * next_q.col(i).maxCoeff();
    targets(i) = target;
  }

  const double loss = td_loss(net, states, actions, targets);
  if (!std::isfinite(loss)) throw NumericError("td_update produced a non-finite loss");
  const Gradients grads = td_gradients(net, states, actions, targets);
  apply_sgd(net, grads, cfg.learning_rate);
  return loss;
}

int greedy_action(const Vec& q_values, const std::vector<bool>& feasible) {
  expect(q_values.size() == static_cast<Eigen::Index>(feasible.size()),
         "greedy_action: mask size mismatch");
  int best = -1;
  double best_q = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < q_values.size(); ++i) {
    if (!feasible[static_cast<std::size_t>(i)]) continue;
    if (q_values(i) > best_q) {
      best_q = q_values(i);
      best = static_cast<int>(i);
    }
  }
  expect(best >= 0, "greedy_action: no feasible action");
  return best;
}

int select_action(const QNetwork& net, const Vec& state, double epsilon, Rng& rng,
                  const std::vector<bool>& feasible) {
  std::vector<int> open;
  for (std::size_t i = 0; i < feasible.size(); ++i)
    if (feasible[i]) open.push_back(static_cast<int>(i));
  expect(!open.empty(), "select_action: no feasible action");

  if (rng.uniform01() < epsilon) return open[rng.uniform_index(open.size())];
  return greedy_action(net.forward(state), feasible);
}

}  // namespace riskfleet
