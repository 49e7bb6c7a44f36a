#include "mvb/tangent.hpp"

#include <algorithm>
#include <cmath>

#include "mvb/error.hpp"
#include "mvb/parallel.hpp"

namespace mvb {

namespace {

void check_inputs(const ParticlePaths& paths, const ModelSpec& model,
                  const TangentOptions& opts) {
  if (paths.d != model.d || paths.m != model.m || paths.n_moments != model.meanfield_drift.n)
    fail(ErrorCode::GridMismatch, "particle paths were not produced by this model");
  if (model.singular_drift && !opts.allow_heuristic)
    fail(ErrorCode::InvalidArgument,
         "tangent flows with a singular drift need the heuristic flag");
  if (!model.diffusion.state_independent && !model.diffusion.grad_sigma)
    fail(ErrorCode::MissingGradSigma, "state-dependent diffusion needs grad_sigma");
}

// c_l = (1/N) sum_j grad h_l(X[s,j]) . V[s,j], then
// out_i = sum_l dF/dz_l(t_s, X[s,i], mu_s) c_l.
void contraction(const ParticlePaths& paths, std::span<const double> values,
                 const ModelSpec& model, std::size_t s, std::span<double> out, int threads) {
  const auto& drift = model.meanfield_drift;
  const std::size_t N = paths.N, d = paths.d, n = drift.n;
  std::fill(out.begin(), out.end(), 0.0);
  if (n == 0) return;
  std::vector<double> coeff(n);
  std::vector<double> scratch(N);
  for (std::size_t l = 0; l < n; ++l) {
    parallel_for(N, threads, [&](std::size_t j) {
      double g[kMaxDim];
      drift.grad_h[l](paths.state(s, j), MutSpan(g, d));
      scratch[j] = dot(ConstSpan(g, d), values.subspan((s * N + j) * d, d));
    });
    coeff[l] = pairwise_sum(scratch) / static_cast<double>(N);
  }
  const double t = paths.grid.time(s);
  const ConstSpan z = paths.moments(s);
  parallel_for(N, threads, [&](std::size_t i) {
    double gz[kMaxDim * kMaxDim];
    std::vector<double> heap;
    double* gzp = gz;
    if (d * n > static_cast<std::size_t>(kMaxDim * kMaxDim)) {
      heap.resize(d * n);
      gzp = heap.data();
    }
    drift.grad_z_F(t, paths.state(s, i), z, MutSpan(gzp, d * n));
    for (std::size_t a = 0; a < d; ++a) {
      double acc = 0.0;
      for (std::size_t l = 0; l < n; ++l) acc += gzp[a * n + l] * coeff[l];
      out[i * d + a] = acc;
    }
  });
}

TangentPaths integrate(const ParticlePaths& paths, const ModelSpec& model,
                       std::span<const double> v0, TangentKind kind,
                       const TangentOptions& opts) {
  check_inputs(paths, model, opts);
  const std::size_t N = paths.N, d = paths.d, m = paths.m;
  if (v0.size() != N * d)
    fail(ErrorCode::InvalidArgument, "initial tangent directions must be N x d");

  TangentPaths tang;
  tang.kind = kind;
  tang.N = N;
  tang.d = d;
  tang.grid = paths.grid;
  tang.values.resize((paths.grid.n_steps + 1) * N * d);
  std::copy(v0.begin(), v0.end(), tang.values.begin());
  if (model.singular_drift) {
    tang.heuristic = true;
    tang.notes.emplace_back(
        "heuristic regime: singular drift present; its Jacobian is taken by central "
        "differences of the regularized drift (step " +
        format_double(opts.heuristic_fd_step) + ")");
  }

  const bool const_sigma = model.diffusion.state_independent;
  const auto& drift = model.meanfield_drift;
  const double dt = paths.grid.dt();
  std::vector<double> psi(kind == TangentKind::MeanField ? N * d : 0);

  for (std::size_t s = 0; s < paths.grid.n_steps; ++s) {
    const double t = paths.grid.time(s);
    const ConstSpan z = paths.moments(s);
    if (kind == TangentKind::MeanField) contraction(paths, tang.values, model, s, psi, opts.threads);

    parallel_for(N, opts.threads, [&](std::size_t i) {
      const ConstSpan x = paths.state(s, i);
      const ConstSpan v(tang.values.data() + (s * N + i) * d, d);
      const ConstSpan dw = paths.increment(s, i);
      double jac[kMaxDim * kMaxDim];
      drift.grad_x_F(t, x, z, MutSpan(jac, d * d));
      if (model.singular_drift) {
        const auto& b0 = model.singular_drift->eval;
        const auto fd = central_jacobian([&](ConstSpan y, MutSpan o) { b0(t, y, o); }, x, d,
                                         opts.heuristic_fd_step);
        for (std::size_t q = 0; q < d * d; ++q) jac[q] += fd[q];
      }
      double gsig[kMaxDim * kMaxDim * kMaxDim];
      if (!const_sigma) model.diffusion.grad_sigma(t, x, MutSpan(gsig, d * d * m));

      double* out = tang.values.data() + ((s + 1) * N + i) * d;
      for (std::size_t r = 0; r < d; ++r) {
        double lin = 0.0;
        for (std::size_t q = 0; q < d; ++q) lin += jac[r * d + q] * v[q];
        if (kind == TangentKind::MeanField) lin += psi[i * d + r];
        double noise = 0.0;
        if (!const_sigma) {
          for (std::size_t j = 0; j < d; ++j)
            for (std::size_t c = 0; c < m; ++c)
              noise += gsig[(j * d + r) * m + c] * v[j] * dw[c];
        }
        out[r] = v[r] + lin * dt + noise;
      }
    });
  }
  for (double x : tang.values)
    if (!std::isfinite(x)) fail(ErrorCode::NonFinite, "tangent flow is not finite");
  return tang;
}

}  // namespace

std::vector<double> initial_directions(const ParticlePaths& paths, const PerturbationField& phi) {
  std::vector<double> v0(paths.N * paths.d);
  for (std::size_t i = 0; i < paths.N; ++i)
    phi(paths.state(0, i), MutSpan(v0.data() + i * paths.d, paths.d));
  return v0;
}

TangentPaths frozen_tangent(const ParticlePaths& paths, const ModelSpec& model,
                            std::span<const double> v0, const TangentOptions& opts) {
  return integrate(paths, model, v0, TangentKind::Frozen, opts);
}

TangentPaths meanfield_tangent(const ParticlePaths& paths, const ModelSpec& model,
                               const PerturbationField& phi, const TangentOptions& opts) {
  const std::vector<double> v0 = initial_directions(paths, phi);
  return integrate(paths, model, v0, TangentKind::MeanField, opts);
}

void lions_contraction(const ParticlePaths& paths, const TangentPaths& tangent,
                       const ModelSpec& model, std::size_t s, std::span<double> out,
                       int threads) {
  if (tangent.N != paths.N || tangent.d != paths.d || !(tangent.grid == paths.grid))
    fail(ErrorCode::GridMismatch, "tangent paths do not belong to these particle paths");
  if (out.size() != paths.N * paths.d)
    fail(ErrorCode::InvalidArgument, "contraction output must be N x d");
  contraction(paths, tangent.values, model, s, out, threads);
}

double tangent_sup_norm(const TangentPaths& tangent, double k) {
  std::vector<double> sups(tangent.N, 0.0);
  for (std::size_t i = 0; i < tangent.N; ++i)
    for (std::size_t s = 0; s <= tangent.grid.n_steps; ++s)
      sups[i] = std::max(sups[i], std::sqrt(norm2(tangent.value(s, i))));
  for (double& v : sups) v = std::pow(v, k);
  return std::pow(pairwise_sum(sups) / static_cast<double>(tangent.N), 1.0 / k);
}

}  // namespace mvb
