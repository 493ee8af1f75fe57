#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace smolu {

/// Geometric grid x_i = x_min * r^i.
class Grid {
 public:
  /// `nodes_per_doubling` nodes per factor 2, so that x_i / 2 = x_{i-k}.
  static Grid geometric(double x_min, int nodes_per_doubling, std::size_t count);
  /// Validates constant ratio to 1e-12.
  static Grid from_nodes(std::vector<double> nodes);
  /// 526 nodes from 1e-6 at 20 per doubling (x_max ~ 80).
  static Grid standard();

  std::size_t size() const { return nodes_.size(); }
  double operator[](std::size_t i) const { return nodes_[i]; }
  const std::vector<double>& nodes() const { return nodes_; }
  double x_min() const { return nodes_.front(); }
  double x_max() const { return nodes_.back(); }
  /// log of the node ratio
  double log_step() const { return h_; }
  /// Nodes per doubling when the ratio is 2^{1/k} for an integer k.
  std::optional<int> nodes_per_doubling() const { return per_doubling_; }
  /// Fractional index log(x / x_min) / h.
  double position(double x) const;

 private:
  Grid(std::vector<double> nodes, double h);
  std::vector<double> nodes_;
  double h_;
  std::optional<int> per_doubling_;
};

}  // namespace smolu
