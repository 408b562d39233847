#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cpsde/paths.hpp"

namespace cpsde {

/// Batch-averaged discriminator scores of sliding windows; scores[t] is the
/// window starting at step t, t = 0..n_steps-window.
struct ScoreSequence {
  std::vector<double> scores;
  std::size_t window = 0;
};

/// Sorted change steps. `complete` is false when fewer were found than requested.
struct ChangePointEstimate {
  std::vector<std::size_t> indices;
  std::size_t spacing = 0;
  bool complete = true;

  std::size_t count() const noexcept { return indices.size(); }
  /// Strictly increasing, pairwise gaps > spacing, all inside (0, n_steps).
  bool valid_for(std::size_t n_steps) const;
  friend bool operator==(const ChangePointEstimate& a, const ChangePointEstimate& b) {
    return a.indices == b.indices;
  }
};

/// argmax_t (s[t] - s[t-1]) over t >= 1; ties resolve to the smallest t.
std::size_t detect_offline(std::span<const double> s);
inline std::size_t detect_offline(const ScoreSequence& s) { return detect_offline(s.scores); }

/// Sequential threshold rule: reports the first t with s[t] - s[t-1] > gamma.
class OnlineDetector {
 public:
  explicit OnlineDetector(double gamma) : gamma_(gamma) {}

  /// Feeds the next score; returns the change index once it is declared.
  std::optional<std::size_t> push(double score);
  std::optional<std::size_t> detected() const noexcept { return detected_; }

 private:
  double gamma_;
  std::size_t seen_ = 0;
  double last_ = 0.0;
  std::optional<std::size_t> detected_;
};

std::optional<std::size_t> detect_online(std::span<const double> s, double gamma);

/// Ranks t >= 1 by gain[t] in descending order (stable); a candidate is kept when
/// it lies more than `window` steps from every candidate kept before it.
ChangePointEstimate select_spaced(std::span<const double> gain, std::size_t window, std::size_t k);

/// select_spaced over the consecutive differences s[t] - s[t-1].
ChangePointEstimate detect_multi(std::span<const double> s, std::size_t window, std::size_t k);
inline ChangePointEstimate detect_multi(const ScoreSequence& s, std::size_t window, std::size_t k) {
  return detect_multi(s.scores, window, k);
}

/// Batch-averaged window means mu_t; returns argmax_t (mu_t - mu_{t-1}).
std::vector<double> window_means(const PathBatch& batch, std::size_t window);
std::size_t baseline_mean(const PathBatch& batch, std::size_t window);

/// eta[t] = batch average of MMD^2 between the windows starting at t-1 and t,
/// each treated as `window` observations; eta[0] is 0 (undefined).
std::vector<double> window_mmd(const PathBatch& batch, std::size_t window);
std::size_t baseline_mmd(const PathBatch& batch, std::size_t window);

}  // namespace cpsde
