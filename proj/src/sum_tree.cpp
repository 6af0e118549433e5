#include "parl/sum_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "parl/error.hpp"

namespace parl {

SumTree::SumTree(std::size_t capacity, std::size_t fanout)
    : capacity_(capacity), fanout_(fanout), height_(1), leaf_count_(1), internal_count_(0) {
  if (fanout < 2) {
    throw ParameterError("sum tree fanout must be >= 2, got " + std::to_string(fanout));
  }
  if (capacity < 1) {
    throw ParameterError("sum tree capacity must be >= 1");
  }
  while (leaf_count_ < capacity_) {
    if (leaf_count_ > std::numeric_limits<std::size_t>::max() / fanout_) {
      throw ParameterError("sum tree too large");
    }
    internal_count_ += leaf_count_;
    leaf_count_ *= fanout_;
    ++height_;
  }
  values_.assign(fanout_ - 1 + internal_count_ + leaf_count_, 0.0);
}

void SumTree::check_index(std::size_t data_index) const {
  if (data_index >= capacity_) {
    throw IndexError("data index " + std::to_string(data_index) + " out of range [0, " +
                     std::to_string(capacity_) + ")");
  }
}

double SumTree::set_leaf(std::size_t data_index, double value, TreeProbe* probe) {
  check_index(data_index);
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw ParameterError("priority must be finite and non-negative");
  }
  const std::size_t node = leaf_node(data_index);
  double& slot = values_[position(node)];
  const double delta = value - slot;
  slot = value;
  if (probe) {
    probe->path.push_back(node);
    ++probe->writes;
  }
  return delta;
}

void SumTree::propagate(std::size_t data_index, double delta, TreeProbe* probe) noexcept {
  std::size_t node = leaf_node(data_index);
  while (node != 0) {
    node = parent(node);
    values_[position(node)] += delta;
    if (probe) {
      probe->path.push_back(node);
      ++probe->writes;
    }
  }
}

void SumTree::update_value(std::size_t data_index, double value, TreeProbe* probe) {
  const double delta = set_leaf(data_index, value, probe);
  propagate(data_index, delta, probe);
}

double SumTree::get_value(std::size_t data_index) const {
  check_index(data_index);
  return values_[position(leaf_node(data_index))];
}

double SumTree::total() const noexcept { return std::max(values_[0], 0.0); }

PrefixSumHit SumTree::get_prefix_sum_idx(double prefix_sum, TreeProbe* probe) const {
  const double mass = total();
  if (!(mass > 0.0)) {
    throw EmptyError("sum tree holds no priority mass");
  }
  if (!(prefix_sum > 0.0) || prefix_sum > mass * (1.0 + kPrefixEpsilon)) {
    throw ParameterError("prefix sum " + std::to_string(prefix_sum) + " outside (0, " +
                         std::to_string(mass) + "]");
  }
  double remaining = std::min(std::max(prefix_sum, kPrefixEpsilon), mass);

  const double* data = values_.data();
  std::size_t node = 0;
  if (probe) {
    probe->path.push_back(node);
    ++probe->reads;
  }
  for (std::size_t level = 1; level < height_; ++level) {
    const std::size_t first = first_child(node);
    // position(first) == K * (node + 1), a multiple of K.
    const double* group = data + fanout_ * (node + 1);
    double partial = 0.0;
    std::size_t chosen = fanout_;
    std::size_t last_positive = fanout_;
    std::size_t j = 0;
    for (; j < fanout_; ++j) {
      // Internal nodes may carry tiny negative rounding residue.
      const double v = std::max(group[j], 0.0);
      if (v > 0.0) last_positive = j;
      const double sum = partial + v;
      if (v > 0.0 && sum >= remaining) {
        chosen = j;
        break;
      }
      partial = sum;
    }
    if (probe) probe->reads += std::min(j + 1, fanout_);

    if (chosen == fanout_) {
      // Accumulated drift left the target past the last sibling with mass.
      if (last_positive == fanout_) {
        return nearest_positive_leaf(node, level);
      }
      chosen = last_positive;
      remaining = std::max(group[chosen], 0.0);
    } else {
      remaining -= partial;
    }
    node = first + chosen;
    if (probe) probe->path.push_back(node);
  }
  return {node - internal_count_, data[position(node)]};
}

// Fallback when a subtree's parent carries only rounding residue and none of
// its children hold mass: pick the positive leaf closest to that subtree.
PrefixSumHit SumTree::nearest_positive_leaf(std::size_t node, std::size_t level) const {
  std::size_t first = node;
  for (std::size_t l = level; l < height_; ++l) first = first_child(first);
  const std::size_t anchor = first - internal_count_;

  std::size_t best = capacity_;
  std::size_t best_distance = std::numeric_limits<std::size_t>::max();
  for (std::size_t d = 0; d < capacity_; ++d) {
    if (!(values_[position(leaf_node(d))] > 0.0)) continue;
    const std::size_t distance = d > anchor ? d - anchor : anchor - d;
    if (distance < best_distance) {
      best = d;
      best_distance = distance;
    }
  }
  if (best == capacity_) {
    throw EmptyError("sum tree holds no positive leaf");
  }
  return {best, values_[position(leaf_node(best))]};
}

}  // namespace parl
