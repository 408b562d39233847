#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cpsde/changepoint.hpp"
#include "cpsde/mlp.hpp"
#include "cpsde/sde.hpp"

namespace cpsde {

struct DiscriminatorDims {
  std::size_t y = 1;  // path channels
  std::size_t h = 32;  // CDE hidden state
  std::size_t hidden = 32;
  std::size_t depth = 2;
};

/// Neural CDE critic:  H0 = xi(Y0),  dH = f(t,H) dt + g(t,H) o dY,  D = H_T . m.
/// Time runs over [0, 1] across whatever path (or window) is scored.
struct DiscriminatorParams {
  DiscriminatorDims dims;
  Mlp xi;
  Mlp f;
  Mlp g;
  std::string m;  // (h, 1)

  static DiscriminatorParams create(ParamStore& store, const DiscriminatorDims& dims, Rng& rng);
  static DiscriminatorParams bind(const ParamStore& store, const DiscriminatorDims& dims);
};

/// Scores each row of the batch whose per-step observations are `ys` (B, y).
/// Returns (B, 1). Throws SimulationDiverged if the hidden state blows up.
Var score_paths(const DiscriminatorParams& phi, ParamStore& store, const std::vector<Var>& ys);

/// Per-step constants for an observed batch.
std::vector<Var> batch_steps(Tape& tape, const PathBatch& batch);

double cde_score(const DiscriminatorParams& phi, ParamStore& store, const Path& path);
/// Scores of every path in the batch, in order.
std::vector<double> score_batch(const DiscriminatorParams& phi, ParamStore& store, const PathBatch& batch);

/// s[t] = mean over paths of D(X_{t:t+window}), t = 0..n_steps-window.
ScoreSequence window_scores(const DiscriminatorParams& phi, ParamStore& store, const PathBatch& batch,
                            std::size_t window);

/// Columns t_index, s_bar.
void write_scores_csv(const std::filesystem::path& file, const ScoreSequence& s);

}  // namespace cpsde
