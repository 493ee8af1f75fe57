#include "smolu/grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace smolu {

Grid::Grid(std::vector<double> nodes, double h) : nodes_(std::move(nodes)), h_(h) {
  const double k = std::numbers::ln2 / h_;
  const double kr = std::round(k);
  if (kr >= 1.0 && std::fabs(k - kr) < 1e-9 * kr) per_doubling_ = static_cast<int>(kr);
}

Grid Grid::geometric(double x_min, int nodes_per_doubling, std::size_t count) {
  if (!(x_min > 0.0)) throw std::invalid_argument("grid: x_min must be > 0");
  if (nodes_per_doubling < 1) throw std::invalid_argument("grid: nodes per doubling must be >= 1");
  if (count < 8) throw std::invalid_argument("grid: need at least 8 nodes");
  const double h = std::numbers::ln2 / nodes_per_doubling;
  std::vector<double> x(count);
  for (std::size_t i = 0; i < count; ++i) x[i] = x_min * std::exp(h * static_cast<double>(i));
  return Grid(std::move(x), h);
}

Grid Grid::standard() { return geometric(1e-6, 20, 526); }

Grid Grid::from_nodes(std::vector<double> nodes) {
  if (nodes.size() < 8) throw std::invalid_argument("grid: need at least 8 nodes");
  if (!(nodes.front() > 0.0)) throw std::invalid_argument("grid: nodes must be positive");
  const double h = std::log(nodes.back() / nodes.front()) / static_cast<double>(nodes.size() - 1);
  if (!(h > 0.0)) throw std::invalid_argument("grid: nodes must be increasing");
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double step = std::log(nodes[i + 1] / nodes[i]);
    if (!(nodes[i + 1] > nodes[i]) || std::fabs(step - h) > 1e-12 * std::max(1.0, std::fabs(std::log(nodes[i]))) + 1e-12)
      throw std::invalid_argument("grid: nodes are not geometric");
  }
  return Grid(std::move(nodes), h);
}

double Grid::position(double x) const { return std::log(x / nodes_.front()) / h_; }

}  // namespace smolu
