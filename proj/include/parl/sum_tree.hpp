#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <vector>

namespace parl {

inline constexpr std::size_t kCachelineBytes = 64;
inline constexpr std::size_t kValuesPerCacheline = kCachelineBytes / sizeof(double);

// Allocator that places the first element on a cacheline boundary.
template <class T>
struct CachelineAllocator {
  using value_type = T;

  CachelineAllocator() noexcept = default;
  template <class U>
  CachelineAllocator(const CachelineAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kCachelineBytes}));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t{kCachelineBytes});
  }

  template <class U>
  bool operator==(const CachelineAllocator<U>&) const noexcept {
    return true;
  }
};

// Optional instrumentation for a single tree operation.
struct TreeProbe {
  std::vector<std::size_t> path;  // node ids visited, root first
  std::size_t reads = 0;          // array slots read
  std::size_t writes = 0;         // array slots written
};

struct PrefixSumHit {
  std::size_t index;  // data index of the selected leaf
  double value;       // its priority, always > 0
};

/// Implicit-array K-ary sum tree.
///
/// Nodes are numbered in level order with the root as node 0. The root lives
/// at array position 0 followed by K-1 zero padding slots; node i >= 1 lives at
/// position i + K - 1. With that shift every sibling group starts at a multiple
/// of K, so a group of K doubles with K a multiple of 8 occupies whole cachelines.
///
/// Leaves beyond the requested capacity (rounding up to a power of K) stay at 0
/// and are never returned by get_prefix_sum_idx.
///
/// Not internally synchronized.
class SumTree {
 public:
  static constexpr std::size_t kDefaultFanout = 64;
  // Lower clamp applied to prefix-sum queries.
  static constexpr double kPrefixEpsilon = 1e-12;

  explicit SumTree(std::size_t capacity, std::size_t fanout = kDefaultFanout);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t fanout() const noexcept { return fanout_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t leaf_count() const noexcept { return leaf_count_; }
  // Tree nodes, excluding the root padding.
  std::size_t node_count() const noexcept { return internal_count_ + leaf_count_; }
  // True when sibling groups fill whole cachelines (K % C == 0).
  bool cache_aligned_fanout() const noexcept { return fanout_ % kValuesPerCacheline == 0; }

  // The backing array including the padding after the root.
  std::span<const double> values() const noexcept { return values_; }

  void update_value(std::size_t data_index, double value, TreeProbe* probe = nullptr);
  double get_value(std::size_t data_index) const;
  double total() const noexcept;

  // Minimum data index whose cumulative priority reaches prefix_sum.
  // Throws EmptyError when total() == 0, ParameterError when prefix_sum is not
  // in (0, total()].
  PrefixSumHit get_prefix_sum_idx(double prefix_sum, TreeProbe* probe = nullptr) const;

  // update_value split in two so callers can guard the leaf write and the
  // ancestor propagation with different locks. set_leaf returns the delta that
  // propagate must apply.
  double set_leaf(std::size_t data_index, double value, TreeProbe* probe = nullptr);
  void propagate(std::size_t data_index, double delta, TreeProbe* probe = nullptr) noexcept;

  std::size_t position(std::size_t node) const noexcept {
    return node == 0 ? 0 : node + fanout_ - 1;
  }
  std::size_t parent(std::size_t node) const noexcept { return (node - 1) / fanout_; }
  std::size_t first_child(std::size_t node) const noexcept { return fanout_ * node + 1; }
  std::size_t leaf_node(std::size_t data_index) const noexcept {
    return internal_count_ + data_index;
  }
  double node_value(std::size_t node) const noexcept { return values_[position(node)]; }

 private:
  void check_index(std::size_t data_index) const;
  PrefixSumHit nearest_positive_leaf(std::size_t node, std::size_t level) const;

  std::size_t capacity_;
  std::size_t fanout_;
  std::size_t height_;
  std::size_t leaf_count_;
  std::size_t internal_count_;
  std::vector<double, CachelineAllocator<double>> values_;
};

}  // namespace parl
