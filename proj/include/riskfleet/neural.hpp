#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "riskfleet/errors.hpp"
#include "riskfleet/rng.hpp"

namespace riskfleet {

using Scalar = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct TrainConfig {
  double learning_rate = 0.05;
  double discount = 0.85;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.8;  // fraction of the episode budget spent decaying
  int batch_size = 32;
  int episodes = 10000;
  int target_sync_interval = 500;       // gradient steps between target copies
  std::size_t replay_capacity = 100000;
  std::vector<int> hidden_sizes{64, 64};
  int updates_per_episode = 4;          // SGD batches per agent per episode

  double epsilon_at(int episode) const;
  void validate() const;
};

struct Transition {
  Vec state;
  int action = 0;
  double reward = 0;
  Vec next_state;
  bool terminal = false;
};

// Fixed-capacity ring with strictly FIFO eviction; sampling is uniform with
// replacement from a caller-supplied stream.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return store_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t logical) const;  // 0 = oldest
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;
  void clear();

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next write slot once full
  std::vector<Transition> store_;
};

// Fully-connected feedforward value approximator: rectified-linear hidden
// layers, identity output. One Q-value per action.
class QNetwork {
 public:
  QNetwork(std::vector<int> layer_sizes, Rng& init_rng);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return weights_.size(); }

  Mat& weights(std::size_t layer) { return weights_[layer]; }
  const Mat& weights(std::size_t layer) const { return weights_[layer]; }
  Vec& biases(std::size_t layer) { return biases_[layer]; }
  const Vec& biases(std::size_t layer) const { return biases_[layer]; }

  Vec forward(const Vec& state) const;
  // Columns are samples.
  Mat forward_batch(const Mat& states) const;

  void save(const std::string& path) const;
  static QNetwork load(const std::string& path);

  bool same_shape(const QNetwork& other) const { return sizes_ == other.sizes_; }

 private:
  explicit QNetwork(std::vector<int> layer_sizes);  // uninitialised weights
  std::vector<int> sizes_;
  std::vector<Mat> weights_;  // layer l: sizes_[l+1] x sizes_[l]
  std::vector<Vec> biases_;
};

struct Gradients {
  std::vector<Mat> weight_grads;
  std::vector<Vec> bias_grads;
};

// Mean-squared error between Q(s_i, a_i) and target_i over the batch.
double td_loss(const QNetwork& net, const Mat& states, std::span<const int> actions,
               const Vec& targets);

// Analytic gradient of td_loss with respect to every weight and bias.
Gradients td_gradients(const QNetwork& net, const Mat& states, std::span<const int> actions,
                       const Vec& targets);

void apply_sgd(QNetwork& net, const Gradients& grads, double learning_rate);

// One plain-SGD step on a replay batch. Targets are r + discount * max_a'
// targetQ(s', a'), or r alone on terminal transitions. Returns the batch loss;
// throws NumericError if it is not finite.
double td_update(QNetwork& net, const QNetwork& target_net,
                 std::span<const Transition* const> batch, const TrainConfig& cfg);

// Epsilon-greedy over the feasible actions; greedy ties go to the lowest index.
int select_action(const QNetwork& net, const Vec& state, double epsilon, Rng& rng,
                  const std::vector<bool>& feasible);

int greedy_action(const Vec& q_values, const std::vector<bool>& feasible);

}  // namespace riskfleet
