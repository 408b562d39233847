#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpsde/param_store.hpp"
#include "cpsde/paths.hpp"
#include "cpsde/rng.hpp"
#include "cpsde/tape.hpp"

namespace cpsde {

/// Gated recurrent cell. Parameters under `prefix`:
///   wx (in, 3h)  input weights for [update | reset | candidate]
///   wh (h, 2h)   recurrent weights for [update | reset]
///   wn (h, h)    recurrent weight of the candidate, applied to r * h
///   b  (1, 3h)
struct GruCell {
  std::string prefix;
  std::size_t in = 0;
  std::size_t hidden = 0;

  static GruCell create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng);
  Var step(ParamStore& store, Var x, Var h) const;
};

/// Two stacked GRU cells followed by a linear head on the top hidden state.
struct RecurrentPredictor {
  GruCell lower;
  GruCell upper;
  std::string head_w;  // (hidden, out)
  std::string head_b;  // (1, out)
  std::size_t out = 0;

  static RecurrentPredictor create(ParamStore& store, const std::string& prefix, std::size_t in,
                                   std::size_t hidden, std::size_t out, Rng& rng);

  /// Runs the cells over `inputs` (each batch x in) and returns the head output after every step.
  std::vector<Var> unroll(ParamStore& store, const std::vector<Var>& inputs) const;
};

struct MetricTraining {
  std::size_t hidden = 16;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 1e-2;
};

/// Unbiased squared MMD between whole flattened paths, Gaussian kernel,
/// median bandwidth over the pooled batches. May be slightly negative.
double mmd_metric(const PathBatch& a, const PathBatch& b);

/// Mean squared error of predicting x_{k+1} by x_k, over all paths and steps.
double last_value_error(const PathBatch& batch);

/// Fits a RecurrentPredictor for one-step-ahead prediction on `train` and
/// returns its mean squared one-step error on `test`, in data units.
/// The head predicts the increment, so an all-zero head is the last-value predictor.
double tstr_prediction(const PathBatch& train, const PathBatch& test, const MetricTraining& opts, std::uint64_t seed);

/// Trains a recurrent real-vs-synthetic classifier on a seeded 70/30 split of the
/// pooled batches and returns the held-out binary cross-entropy (nats).
double classification_score(const PathBatch& real, const PathBatch& synth, const MetricTraining& opts,
                            std::uint64_t seed);

}  // namespace cpsde
