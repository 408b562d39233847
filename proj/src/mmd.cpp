#include "cpsde/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cpsde/errors.hpp"

namespace cpsde {
namespace {

double squared_distance(const double* u, const double* v, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return s;
}

void require_compatible(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
    throw DimensionError("MMD samples must be 2-D with equal column counts");
}

double kernel_sum(const Tensor& a, const Tensor& b, double bandwidth, bool skip_diagonal) {
  const std::size_t dim = a.cols();
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      if (skip_diagonal && i == j) continue;
      s += gaussian_kernel(a.raw() + i * dim, b.raw() + j * dim, dim, bandwidth);
    }
  return s;
}

}  // namespace

double median_bandwidth(const Tensor& a, const Tensor& b) {
  require_compatible(a, b);
  const std::size_t dim = a.cols();
  std::vector<const double*> rows;
  for (std::size_t i = 0; i < a.rows(); ++i) rows.push_back(a.raw() + i * dim);
  for (std::size_t i = 0; i < b.rows(); ++i) rows.push_back(b.raw() + i * dim);
  std::vector<double> d;
  d.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) d.push_back(std::sqrt(squared_distance(rows[i], rows[j], dim)));
  if (d.empty()) return 1.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double median = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return median > 0.0 ? median : 1.0;
}

double gaussian_kernel(const double* u, const double* v, std::size_t dim, double bandwidth) {
  return std::exp(-squared_distance(u, v, dim) / (2.0 * bandwidth * bandwidth));
}

double mmd2_biased(const Tensor& a, const Tensor& b, double bandwidth) {
  require_compatible(a, b);
  const double m = static_cast<double>(a.rows());
  const double n = static_cast<double>(b.rows());
  return kernel_sum(a, a, bandwidth, false) / (m * m) + kernel_sum(b, b, bandwidth, false) / (n * n) -
         2.0 * kernel_sum(a, b, bandwidth, false) / (m * n);
}

double mmd2_unbiased(const Tensor& a, const Tensor& b, double bandwidth) {
  require_compatible(a, b);
  const double m = static_cast<double>(a.rows());
  const double n = static_cast<double>(b.rows());
  if (a.rows() < 2 || b.rows() < 2) throw MetricError("unbiased MMD needs at least 2 samples per batch");
  return kernel_sum(a, a, bandwidth, true) / (m * (m - 1.0)) + kernel_sum(b, b, bandwidth, true) / (n * (n - 1.0)) -
         2.0 * kernel_sum(a, b, bandwidth, false) / (m * n);
}

}  // namespace cpsde
