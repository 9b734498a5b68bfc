#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "csar/grid.hpp"
#include "csar/qfunction.hpp"

namespace csar {

struct Transition {
  Heightmaps state;
  Action action;
  double reward = 0.0;
  Heightmaps next_state;
  bool done = false;
  int agent = 0;
};

// Fixed-capacity FIFO ring. Slot order is insertion order modulo capacity.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
    slots_.reserve(capacity);
  }

  void push(Transition t) {
    if (slots_.size() < capacity_) {
      slots_.push_back(std::move(t));
    } else {
      slots_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
    ++pushed_;
  }

  std::size_t size() const { return slots_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_pushed() const { return pushed_; }
  bool empty() const { return slots_.empty(); }

  const Transition& operator[](std::size_t slot) const { return slots_.at(slot); }

 private:
  std::size_t capacity_;
  std::vector<Transition> slots_;
  std::size_t next_ = 0;
  std::size_t pushed_ = 0;
};

}  // namespace csar
