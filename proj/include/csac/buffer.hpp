#pragma once

#include <cstddef>
#include <vector>

#include "csac/matrix.hpp"
#include "csac/rng.hpp"

namespace csac {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;   // true end of the task: bootstraps zero
  bool truncated = false;  // time limit: bootstrapped like any other step

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Mini-batch in feature-major layout (one column per transition).
struct TransitionBatch {
  Matrix states;       // obs_dim x M
  Matrix actions;      // act_dim x M
  std::vector<double> rewards;
  Matrix next_states;  // obs_dim x M
  std::vector<unsigned char> terminal;

  std::size_t size() const { return rewards.size(); }
  static TransitionBatch from(const std::vector<Transition>& transitions);
};

/// Fixed-capacity FIFO replay memory with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  /// Dimensions are fixed by the first transition; later mismatches throw
  /// DimensionError. Beyond capacity the oldest entry is overwritten.
  void push(const Transition& t);

  /// Throws ValidationError when size() < batch_size.
  TransitionBatch sample(std::size_t batch_size, Rng& rng) const;
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;

  /// i-th oldest stored transition.
  Transition at(std::size_t i) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }

 private:
  std::size_t slot(std::size_t i) const { return (head_ + i) % capacity_; }

  std::size_t capacity_;
  std::size_t obs_dim_ = 0;
  std::size_t act_dim_ = 0;
  std::size_t head_ = 0;  // oldest entry
  std::size_t size_ = 0;
  std::vector<double> states_, actions_, rewards_, next_states_;
  std::vector<unsigned char> terminal_, truncated_;
};

}  // namespace csac
