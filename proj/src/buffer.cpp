#include "csac/buffer.hpp"

#include <algorithm>
#include <string>

#include "csac/errors.hpp"

namespace csac {

TransitionBatch TransitionBatch::from(const std::vector<Transition>& transitions) {
  TransitionBatch batch;
  if (transitions.empty()) return batch;
  const std::size_t n = transitions.size();
  const std::size_t obs = transitions.front().state.size();
  const std::size_t act = transitions.front().action.size();
  batch.states = Matrix(obs, n);
  batch.actions = Matrix(act, n);
  batch.next_states = Matrix(obs, n);
  batch.rewards.resize(n);
  batch.terminal.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    const auto& t = transitions[b];
    if (t.state.size() != obs || t.next_state.size() != obs || t.action.size() != act) {
      throw DimensionError("TransitionBatch::from: inconsistent transition dimensions");
    }
    batch.states.set_column(b, t.state);
    batch.actions.set_column(b, t.action);
    batch.next_states.set_column(b, t.next_state);
    batch.rewards[b] = t.reward;
    batch.terminal[b] = t.terminal ? 1 : 0;
  }
  return batch;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ValidationError("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (states_.empty()) {
    if (t.state.empty() || t.action.empty()) {
      throw DimensionError("ReplayBuffer::push: empty state or action");
    }
    obs_dim_ = t.state.size();
    act_dim_ = t.action.size();
    states_.resize(capacity_ * obs_dim_);
    next_states_.resize(capacity_ * obs_dim_);
    actions_.resize(capacity_ * act_dim_);
    rewards_.resize(capacity_);
    terminal_.resize(capacity_);
    truncated_.resize(capacity_);
  }
  if (t.state.size() != obs_dim_ || t.next_state.size() != obs_dim_ || t.action.size() != act_dim_) {
    throw DimensionError("ReplayBuffer::push: transition dimensions (" +
                         std::to_string(t.state.size()) + ", " + std::to_string(t.action.size()) +
                         ") differ from buffer (" + std::to_string(obs_dim_) + ", " +
                         std::to_string(act_dim_) + ")");
  }
  std::size_t s;
  if (size_ < capacity_) {
    s = slot(size_);
    ++size_;
  } else {
    s = head_;
    head_ = (head_ + 1) % capacity_;
  }
  std::copy(t.state.begin(), t.state.end(), states_.begin() + static_cast<std::ptrdiff_t>(s * obs_dim_));
  std::copy(t.next_state.begin(), t.next_state.end(),
            next_states_.begin() + static_cast<std::ptrdiff_t>(s * obs_dim_));
  std::copy(t.action.begin(), t.action.end(), actions_.begin() + static_cast<std::ptrdiff_t>(s * act_dim_));
  rewards_[s] = t.reward;
  terminal_[s] = t.terminal ? 1 : 0;
  truncated_[s] = t.truncated ? 1 : 0;
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw ValidationError("ReplayBuffer::at: index out of range");
  const std::size_t s = slot(i);
  Transition t;
  t.state.assign(states_.begin() + static_cast<std::ptrdiff_t>(s * obs_dim_),
                 states_.begin() + static_cast<std::ptrdiff_t>((s + 1) * obs_dim_));
  t.next_state.assign(next_states_.begin() + static_cast<std::ptrdiff_t>(s * obs_dim_),
                      next_states_.begin() + static_cast<std::ptrdiff_t>((s + 1) * obs_dim_));
  t.action.assign(actions_.begin() + static_cast<std::ptrdiff_t>(s * act_dim_),
                  actions_.begin() + static_cast<std::ptrdiff_t>((s + 1) * act_dim_));
  t.reward = rewards_[s];
  t.terminal = terminal_[s] != 0;
  t.truncated = truncated_[s] != 0;
  return t;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0) throw ValidationError("ReplayBuffer::sample: batch size must be positive");
  if (size_ < batch_size) {
    throw ValidationError("ReplayBuffer::sample: buffer holds " + std::to_string(size_) +
                          " transitions, batch needs " + std::to_string(batch_size));
  }
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = rng.index(size_);
  return idx;
}

TransitionBatch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  const auto idx = sample_indices(batch_size, rng);
  TransitionBatch batch;
  batch.states = Matrix(obs_dim_, batch_size);
  batch.next_states = Matrix(obs_dim_, batch_size);
  batch.actions = Matrix(act_dim_, batch_size);
  batch.rewards.resize(batch_size);
  batch.terminal.resize(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::size_t s = slot(idx[b]);
    for (std::size_t k = 0; k < obs_dim_; ++k) {
      batch.states(k, b) = states_[s * obs_dim_ + k];
      batch.next_states(k, b) = next_states_[s * obs_dim_ + k];
    }
    for (std::size_t k = 0; k < act_dim_; ++k) batch.actions(k, b) = actions_[s * act_dim_ + k];
    batch.rewards[b] = rewards_[s];
    batch.terminal[b] = terminal_[s];
  }
  return batch;
}

}  // namespace csac
