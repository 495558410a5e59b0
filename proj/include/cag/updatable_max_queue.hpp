#pragma once

// Indexed binary max-heap over dense integer keys with in-place priority
// increase. Ties on priority go to the key that TieLess orders first, so pop
// order is fully deterministic.

#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cag {

template <class Priority = double, class TieLess = std::less<std::size_t>>
class updatable_max_queue {
 public:
  using key_type = std::size_t;

  explicit updatable_max_queue(TieLess tie_less = TieLess{}) : tie_less_(std::move(tie_less)) {}

  bool empty() const noexcept { return heap_.empty(); }
  std::size_t size() const noexcept { return heap_.size(); }

  bool contains(key_type key) const noexcept {
    return key < position_.size() && position_[key] != npos;
  }

  Priority priority(key_type key) const {
    if (!contains(key)) throw std::out_of_range("key " + std::to_string(key) + " not queued");
    return priority_[key];
  }

  void insert(key_type key, Priority p) {
    if (contains(key)) throw std::invalid_argument("key " + std::to_string(key) + " already queued");
    if (key >= position_.size()) {
      position_.resize(key + 1, npos);
      priority_.resize(key + 1);
    }
    priority_[key] = p;
    position_[key] = heap_.size();
    heap_.push_back(key);
    sift_up(heap_.size() - 1);
  }

  /// Raises `key` to `p`. Lowering is rejected.
  void increase_priority(key_type key, Priority p) {
    if (!contains(key)) throw std::out_of_range("key " + std::to_string(key) + " not queued");
    if (p < priority_[key]) throw std::invalid_argument("increase_priority would lower the priority");
    priority_[key] = p;
    sift_up(position_[key]);
  }

  std::pair<key_type, Priority> top() const {
    if (heap_.empty()) throw std::out_of_range("queue is empty");
    return {heap_.front(), priority_[heap_.front()]};
  }

  std::pair<key_type, Priority> pop_max() {
    auto result = top();
    swap_at(0, heap_.size() - 1);
    heap_.pop_back();
    position_[result.first] = npos;
    if (!heap_.empty()) sift_down(0);
    return result;
  }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  // True if the key at heap slot a should sit above slot b.
  bool above(std::size_t a, std::size_t b) const {
    const key_type ka = heap_[a], kb = heap_[b];
    if (priority_[ka] != priority_[kb]) return priority_[kb] < priority_[ka];
    return tie_less_(ka, kb);
  }

  void swap_at(std::size_t a, std::size_t b) {
    std::swap(heap_[a], heap_[b]);
    position_[heap_[a]] = a;
    position_[heap_[b]] = b;
  }

  void sift_up(std::size_t i) {
    while (i > 0) {
      const std::size_t parent = (i - 1) / 2;
      if (!above(i, parent)) break;
      swap_at(i, parent);
      i = parent;
    }
  }

  void sift_down(std::size_t i) {
    while (true) {
      const std::size_t l = 2 * i + 1, r = l + 1;
      std::size_t best = i;
      if (l < heap_.size() && above(l, best)) best = l;
      if (r < heap_.size() && above(r, best)) best = r;
      if (best == i) return;
      swap_at(i, best);
      i = best;
    }
  }

  TieLess tie_less_;
  std::vector<key_type> heap_;
  std::vector<std::size_t> position_;
  std::vector<Priority> priority_;
};

}  // namespace cag
