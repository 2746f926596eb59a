#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "h2df/rng.hpp"
#include "h2df/tensor.hpp"

namespace h2df {

struct Transition {
  Vec o;
  std::array<double, 4> a;
  double r;
  Vec o2;
  bool done;
};

// Fixed-capacity ring buffer with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    data_.reserve(capacity);
  }

  void add(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    std::vector<std::size_t> idx(n);
    for (auto& i : idx)
      i = std::size_t(rng.integer(0, std::int64_t(data_.size()) - 1));
    return idx;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

}  // namespace h2df
