#include "cpsde/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpsde/errors.hpp"
#include "cpsde/mmd.hpp"

namespace cpsde {
namespace {

std::size_t argmax_from_one(std::span<const double> v) {
  std::size_t best = 1;
  for (std::size_t t = 2; t < v.size(); ++t)
    if (v[t] > v[best]) best = t;
  return best;
}

void require_window(const PathBatch& batch, std::size_t window) {
  if (window < 2 || window > batch.n_steps())
    throw WindowError("window " + std::to_string(window) + " outside [2, " + std::to_string(batch.n_steps()) + "]");
}

}  // namespace

bool ChangePointEstimate::valid_for(std::size_t n_steps) const {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] == 0 || indices[i] >= n_steps) return false;
    if (i > 0 && indices[i] <= indices[i - 1] + spacing) return false;
  }
  return true;
}

std::size_t detect_offline(std::span<const double> s) {
  if (s.size() < 2) throw DetectionError("score sequence needs at least 2 entries");
  std::vector<double> diff(s.size(), 0.0);
  for (std::size_t t = 1; t < s.size(); ++t) diff[t] = s[t] - s[t - 1];
  return argmax_from_one(diff);
}

std::optional<std::size_t> OnlineDetector::push(double score) {
  if (!detected_ && seen_ > 0 && score - last_ > gamma_) detected_ = seen_;
  last_ = score;
  ++seen_;
  return detected_;
}

std::optional<std::size_t> detect_online(std::span<const double> s, double gamma) {
  OnlineDetector det(gamma);
  for (double v : s)
    if (auto hit = det.push(v)) return hit;
  return std::nullopt;
}

ChangePointEstimate select_spaced(std::span<const double> gain, std::size_t window, std::size_t k) {
  if (k < 1) throw DetectionError("change point selection needs k >= 1");
  if (gain.size() < 2) throw DetectionError("score sequence needs at least 2 entries");
  std::vector<std::size_t> order(gain.size() - 1);
  std::iota(order.begin(), order.end(), std::size_t{1});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gain[a] > gain[b]; });

  ChangePointEstimate out;
  out.spacing = window;
  for (std::size_t t : order) {
    const bool spaced = std::all_of(out.indices.begin(), out.indices.end(), [&](std::size_t kept) {
      return (t > kept ? t - kept : kept - t) > window;
    });
    if (!spaced) continue;
    out.indices.push_back(t);
    if (out.indices.size() == k) break;
  }
  out.complete = out.indices.size() == k;
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

ChangePointEstimate detect_multi(std::span<const double> s, std::size_t window, std::size_t k) {
  if (s.size() < 2) throw DetectionError("score sequence needs at least 2 entries");
  std::vector<double> diff(s.size(), 0.0);
  for (std::size_t t = 1; t < s.size(); ++t) diff[t] = s[t] - s[t - 1];
  return select_spaced(diff, window, k);
}

std::vector<double> window_means(const PathBatch& batch, std::size_t window) {
  require_window(batch, window);
  const std::size_t count = batch.n_steps() - window + 1;
  const double denom = static_cast<double>(batch.size() * window * batch.channels());
  std::vector<double> mu(count, 0.0);
  for (std::size_t t = 0; t < count; ++t) {
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i)
      for (std::size_t k = t; k < t + window; ++k)
        for (std::size_t c = 0; c < batch.channels(); ++c) total += batch.at(i, k, c);
    mu[t] = total / denom;
  }
  return mu;
}

std::size_t baseline_mean(const PathBatch& batch, std::size_t window) {
  return detect_offline(window_means(batch, window));
}

std::vector<double> window_mmd(const PathBatch& batch, std::size_t window) {
  require_window(batch, window);
  const std::size_t count = batch.n_steps() - window + 1;
  const std::size_t ch = batch.channels();
  std::vector<double> eta(count, 0.0);
  Tensor prev({window, ch});
  Tensor cur({window, ch});
  for (std::size_t t = 1; t < count; ++t) {
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      for (std::size_t k = 0; k < window; ++k)
        for (std::size_t c = 0; c < ch; ++c) {
          prev.at(k, c) = batch.at(i, t - 1 + k, c);
          cur.at(k, c) = batch.at(i, t + k, c);
        }
      total += mmd2_biased(prev, cur, median_bandwidth(prev, cur));
    }
    eta[t] = total / static_cast<double>(batch.size());
  }
  return eta;
}

std::size_t baseline_mmd(const PathBatch& batch, std::size_t window) {
  const std::vector<double> eta = window_mmd(batch, window);
  if (eta.size() < 2) throw DetectionError("MMD baseline needs at least 2 windows");
  return argmax_from_one(eta);
}

}  // namespace cpsde
