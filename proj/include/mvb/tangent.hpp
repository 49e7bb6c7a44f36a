#pragma once

// Variational (tangent) flows along stored particle paths.
//
// Frozen:    dV = grad_x b(X, mu_s) V dt + sum_j (d_j sigma)(X) V_j dW
// Mean-field: the frozen drift plus the Lions coupling
//            Psi_s(i) = (1/N) sum_j D^L b1(X_i, mu_s)(X_j) V_j,
//            evaluated in O(N n) through the cylindrical structure.
//
// Both are integrated in untransformed coordinates, which is exact when the
// singular drift b0 is absent. With b0 present they run in a flagged
// heuristic mode that differentiates the regularized b0 numerically.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mvb/model.hpp"
#include "mvb/simulate.hpp"

namespace mvb {

enum class TangentKind { Frozen, MeanField };

struct TangentOptions {
  int threads = 1;
  // Required to integrate a model with a singular drift.
  bool allow_heuristic = false;
  double heuristic_fd_step = 1e-6;
};

struct TangentPaths {
  TangentKind kind = TangentKind::Frozen;
  std::size_t N = 0;
  std::size_t d = 0;
  TimeGrid grid;
  std::vector<double> values;  // (n_steps+1) x N x d
  bool heuristic = false;
  std::vector<std::string> notes;

  std::span<const double> value(std::size_t s, std::size_t i) const {
    return {values.data() + (s * N + i) * d, d};
  }
};

// v0 is N x d row-major.
TangentPaths frozen_tangent(const ParticlePaths& paths, const ModelSpec& model,
                            std::span<const double> v0, const TangentOptions& opts = {});

// V[0, i] = phi(X[0, i]).
TangentPaths meanfield_tangent(const ParticlePaths& paths, const ModelSpec& model,
                               const PerturbationField& phi, const TangentOptions& opts = {});

// Psi_s(i) for every particle at step s, written to out (N x d).
void lions_contraction(const ParticlePaths& paths, const TangentPaths& tangent,
                       const ModelSpec& model, std::size_t s, std::span<double> out,
                       int threads = 1);

// Initial directions phi(X[0, i]) as an N x d buffer.
std::vector<double> initial_directions(const ParticlePaths& paths,
                                       const PerturbationField& phi);

// (mean_i sup_s |V[s,i]|^k)^{1/k}
double tangent_sup_norm(const TangentPaths& tangent, double k);

}  // namespace mvb
