#pragma once

#include <cstddef>
#include <vector>

#include "cpsde/tensor.hpp"

namespace cpsde {

/// Uniform grid t0 + k*dt, k = 0..n_steps-1.
struct TimeGrid {
  double t0 = 0.0;
  double dt = 1.0;
  std::size_t n_steps = 2;

  TimeGrid() = default;
  TimeGrid(double t0, double dt, std::size_t n_steps);

  double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
  double horizon() const { return time(n_steps - 1); }
  /// Time mapped to [0, 1] over the whole grid.
  double unit_time(std::size_t k) const {
    return static_cast<double>(k) / static_cast<double>(n_steps - 1);
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// One sample path: values (n_steps, channels).
struct Path {
  TimeGrid grid;
  Tensor values;

  std::size_t channels() const { return values.cols(); }
};

/// N paths on a shared grid: values (N, n_steps, channels).
class PathBatch {
 public:
  PathBatch() = default;
  PathBatch(TimeGrid grid, Tensor values);

  const TimeGrid& grid() const noexcept { return grid_; }
  const Tensor& values() const noexcept { return values_; }
  Tensor& mutable_values() noexcept { return values_; }

  std::size_t size() const { return values_.dim(0); }
  std::size_t n_steps() const { return values_.dim(1); }
  std::size_t channels() const { return values_.dim(2); }

  double at(std::size_t path, std::size_t step, std::size_t channel) const {
    return values_[(path * n_steps() + step) * channels() + channel];
  }
  double& at(std::size_t path, std::size_t step, std::size_t channel) {
    return values_[(path * n_steps() + step) * channels() + channel];
  }

  Path path(std::size_t i) const;
  /// All paths at one step: (N, channels).
  Tensor step_values(std::size_t step) const;
  /// Sub-paths covering steps [start, start + count), keeping absolute grid times.
  PathBatch steps(std::size_t start, std::size_t count) const;
  PathBatch select(const std::vector<std::size_t>& indices) const;

  static PathBatch from_paths(const std::vector<Path>& paths);
  /// Stacks `a` then `b` along the sample axis.
  static PathBatch concat(const PathBatch& a, const PathBatch& b);

 private:
  TimeGrid grid_;
  Tensor values_;
};

}  // namespace cpsde
