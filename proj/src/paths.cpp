#include "cpsde/paths.hpp"

#include <algorithm>
#include <cmath>

#include "cpsde/errors.hpp"

namespace cpsde {

TimeGrid::TimeGrid(double t0_, double dt_, std::size_t n_steps_) : t0(t0_), dt(dt_), n_steps(n_steps_) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw SpecError("time grid needs dt > 0");
  if (n_steps < 2) throw SpecError("time grid needs at least 2 steps");
}

PathBatch::PathBatch(TimeGrid grid, Tensor values) : grid_(grid), values_(std::move(values)) {
  if (values_.rank() != 3) throw DimensionError("path batch values must be (N, n_steps, channels)");
  if (values_.dim(0) < 1) throw DimensionError("path batch needs at least one path");
  if (values_.dim(1) != grid_.n_steps)
    throw DimensionError("path batch has " + std::to_string(values_.dim(1)) + " steps but grid has " +
                         std::to_string(grid_.n_steps));
}

Path PathBatch::path(std::size_t i) const {
  const std::size_t len = n_steps() * channels();
  const auto first = values_.data().begin() + static_cast<std::ptrdiff_t>(i * len);
  return Path{grid_, Tensor({n_steps(), channels()}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(len)))};
}

Tensor PathBatch::step_values(std::size_t step) const {
  Tensor out({size(), channels()});
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t c = 0; c < channels(); ++c) out.at(i, c) = at(i, step, c);
  return out;
}

PathBatch PathBatch::steps(std::size_t start, std::size_t count) const {
  if (count < 2 || start + count > n_steps())
    throw WindowError("sub-path [" + std::to_string(start) + ", " + std::to_string(start + count) +
                      ") invalid for " + std::to_string(n_steps()) + " steps");
  Tensor out({size(), count, channels()});
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t k = 0; k < count; ++k)
      for (std::size_t c = 0; c < channels(); ++c) out[(i * count + k) * channels() + c] = at(i, start + k, c);
  return PathBatch(TimeGrid(grid_.time(start), grid_.dt, count), std::move(out));
}

PathBatch PathBatch::select(const std::vector<std::size_t>& indices) const {
  if (indices.empty()) throw ContractError("select needs at least one index");
  const std::size_t len = n_steps() * channels();
  std::vector<double> data;
  data.reserve(indices.size() * len);
  for (std::size_t idx : indices) {
    if (idx >= size()) throw ContractError("path index out of range");
    const auto first = values_.data().begin() + static_cast<std::ptrdiff_t>(idx * len);
    data.insert(data.end(), first, first + static_cast<std::ptrdiff_t>(len));
  }
  return PathBatch(grid_, Tensor({indices.size(), n_steps(), channels()}, std::move(data)));
}

PathBatch PathBatch::from_paths(const std::vector<Path>& paths) {
  if (paths.empty()) throw ContractError("from_paths needs at least one path");
  const TimeGrid grid = paths.front().grid;
  const std::size_t ch = paths.front().channels();
  std::vector<double> data;
  for (const Path& p : paths) {
    if (!(p.grid == grid) || p.channels() != ch) throw DimensionError("paths do not share grid and channels");
    data.insert(data.end(), p.values.data().begin(), p.values.data().end());
  }
  return PathBatch(grid, Tensor({paths.size(), grid.n_steps, ch}, std::move(data)));
}

PathBatch PathBatch::concat(const PathBatch& a, const PathBatch& b) {
  if (!(a.grid() == b.grid()) || a.channels() != b.channels())
    throw DimensionError("cannot concatenate batches on different grids");
  std::vector<double> data(a.values().data().begin(), a.values().data().end());
  data.insert(data.end(), b.values().data().begin(), b.values().data().end());
  return PathBatch(a.grid(), Tensor({a.size() + b.size(), a.n_steps(), a.channels()}, std::move(data)));
}

}  // namespace cpsde
