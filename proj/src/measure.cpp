#include "mvb/measure.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mvb/error.hpp"
#include "mvb/parallel.hpp"
#include "mvb/rng.hpp"

namespace mvb {

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> points)
    : dim_(dim), points_(std::move(points)) {
  if (dim_ == 0) fail(ErrorCode::InvalidArgument, "empirical measure needs dim >= 1");
  if (points_.empty() || points_.size() % dim_ != 0)
    fail(ErrorCode::InvalidArgument, "empirical measure needs N >= 1 complete rows");
  for (double v : points_)
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "empirical measure has non-finite point");
}

EmpiricalMeasure EmpiricalMeasure::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) fail(ErrorCode::InvalidArgument, "empirical measure needs N >= 1");
  const std::size_t d = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.size() != d) fail(ErrorCode::InvalidArgument, "ragged point rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return {d, std::move(flat)};
}

namespace {

double pair_cost(ConstSpan x, ConstSpan y, double k) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    s += diff * diff;
  }
  const double r = std::sqrt(s);
  if (k == 1.0) return r;
  if (k == 2.0) return s;
  return std::pow(r, k);
}

void check_pair(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double k) {
  if (a.size() != b.size())
    fail(ErrorCode::UnequalSupport, "wasserstein needs equal-size measures (" +
                                        std::to_string(a.size()) + " vs " +
                                        std::to_string(b.size()) + ")");
  if (a.dim() != b.dim()) fail(ErrorCode::InvalidArgument, "measures differ in dimension");
  if (!(k >= 1.0)) fail(ErrorCode::InvalidArgument, "wasserstein exponent must be >= 1");
}

WassersteinResult finish(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double k,
                         std::vector<std::size_t> pairing) {
  std::vector<double> costs(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) costs[i] = pair_cost(a.point(i), b.point(pairing[i]), k);
  WassersteinResult out;
  out.plan.cost = pairwise_sum(costs) / static_cast<double>(a.size());
  out.plan.pairing = std::move(pairing);
  out.distance = std::pow(out.plan.cost, 1.0 / k);
  return out;
}

}  // namespace

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  // Shortest augmenting path with dual potentials (Hungarian method, O(n^3)).
  // Arrays are 1-based; column 0 is the virtual source.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      const double* row = cost.data() + (i0 - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

WassersteinResult wasserstein_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                         double k, std::size_t cap) {
  check_pair(a, b, k);
  const std::size_t n = a.size();
  if (n > cap)
    fail(ErrorCode::SizeCap, "assignment solver cap exceeded (N=" + std::to_string(n) +
                                 ", cap=" + std::to_string(cap) + ")");
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = pair_cost(a.point(i), b.point(j), k);
  return finish(a, b, k, solve_assignment(cost, n));
}

WassersteinResult wasserstein_sorted(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                     double k) {
  check_pair(a, b, k);
  if (a.dim() != 1) fail(ErrorCode::InvalidArgument, "sorted pairing requires d = 1");
  const std::size_t n = a.size();
  std::vector<std::size_t> ia(n), ib(n);
  std::iota(ia.begin(), ia.end(), 0);
  std::iota(ib.begin(), ib.end(), 0);
  auto by = [](const EmpiricalMeasure& m) {
    return [&m](std::size_t x, std::size_t y) {
      return m.point(x)[0] < m.point(y)[0] || (m.point(x)[0] == m.point(y)[0] && x < y);
    };
  };
  std::sort(ia.begin(), ia.end(), by(a));
  std::sort(ib.begin(), ib.end(), by(b));
  std::vector<std::size_t> pairing(n);
  for (std::size_t r = 0; r < n; ++r) pairing[ia[r]] = ib[r];
  return finish(a, b, k, std::move(pairing));
}

WassersteinResult wasserstein(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double k,
                              std::size_t cap) {
  check_pair(a, b, k);
  if (a.dim() == 1) return wasserstein_sorted(a, b, k);
  return wasserstein_assignment(a, b, k, cap);
}

EmpiricalMeasure pushforward(const EmpiricalMeasure& mu, const PerturbationField& phi,
                             double eps) {
  const std::size_t d = mu.dim();
  std::vector<double> out(mu.data().begin(), mu.data().end());
  if (eps == 0.0) return {d, std::move(out)};
  std::vector<double> v(d);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    phi(mu.point(i), v);
    for (std::size_t c = 0; c < d; ++c) {
      out[i * d + c] += eps * v[c];
      if (!std::isfinite(out[i * d + c]))
        fail(ErrorCode::NonFinite, "pushforward produced a non-finite point");
    }
  }
  return {d, std::move(out)};
}

double lk_norm(const PerturbationField& phi, const EmpiricalMeasure& mu, Exponent k) {
  const std::size_t d = mu.dim();
  std::vector<double> v(d);
  std::vector<double> terms(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    phi(mu.point(i), v);
    const double r = std::sqrt(norm2(v));
    terms[i] = k.sup ? r : std::pow(r, k.value);
  }
  if (k.sup) return *std::max_element(terms.begin(), terms.end());
  return std::pow(pairwise_sum(terms) / static_cast<double>(mu.size()), 1.0 / k.value);
}

std::vector<double> moments(const EmpiricalMeasure& mu,
                            std::span<const std::function<double(ConstSpan)>> h) {
  std::vector<double> out(h.size());
  std::vector<double> vals(mu.size());
  for (std::size_t l = 0; l < h.size(); ++l) {
    for (std::size_t j = 0; j < mu.size(); ++j) vals[j] = h[l](mu.point(j));
    out[l] = pairwise_sum(vals) / static_cast<double>(mu.size());
  }
  return out;
}

double absolute_moment(const EmpiricalMeasure& mu, double k) {
  std::vector<double> vals(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const double r2 = norm2(mu.point(j));
    vals[j] = k == 2.0 ? r2 : std::pow(std::sqrt(r2), k);
  }
  return pairwise_sum(vals) / static_cast<double>(mu.size());
}

std::size_t law_dimension(const InitialLaw& law) {
  struct Visitor {
    std::size_t operator()(const PointMass& p) const { return p.x0.size(); }
    std::size_t operator()(const Gaussian& g) const { return g.mean.size(); }
    std::size_t operator()(const UniformBox& b) const { return b.lower.size(); }
    std::size_t operator()(const PointList& l) const {
      return l.points.empty() ? 0 : l.points.front().size();
    }
    std::size_t operator()(const std::shared_ptr<const Mixture>& m) const {
      return m && !m->components.empty() ? law_dimension(m->components.front()) : 0;
    }
  };
  return std::visit(Visitor{}, law);
}

namespace {

constexpr std::uint32_t kInitialStream = 0x5EED;

// Writes sample `index` of `law` into out. `depth` keeps mixtures of
// mixtures on distinct streams.
void draw(const InitialLaw& law, std::uint64_t seed, std::uint64_t index, std::uint32_t depth,
          MutSpan out) {
  const std::uint32_t stream = kInitialStream + depth;
  if (const auto* p = std::get_if<PointMass>(&law)) {
    std::copy(p->x0.begin(), p->x0.end(), out.begin());
  } else if (const auto* g = std::get_if<Gaussian>(&law)) {
    for (std::size_t c = 0; c < out.size(); c += 2) {
      const auto z = rng::normal_pair(seed, stream, index, 0, static_cast<std::uint32_t>(c / 2));
      out[c] = g->mean[c] + g->stddev[c] * z[0];
      if (c + 1 < out.size()) out[c + 1] = g->mean[c + 1] + g->stddev[c + 1] * z[1];
    }
  } else if (const auto* b = std::get_if<UniformBox>(&law)) {
    for (std::size_t c = 0; c < out.size(); ++c) {
      const double u = rng::uniform(seed, stream, index, static_cast<std::uint32_t>(c));
      out[c] = b->lower[c] + (b->upper[c] - b->lower[c]) * u;
    }
  } else if (const auto* l = std::get_if<PointList>(&law)) {
    const auto& row = l->points[index % l->points.size()];
    std::copy(row.begin(), row.end(), out.begin());
  } else {
    const auto& mix = *std::get<std::shared_ptr<const Mixture>>(law);
    const double total = std::accumulate(mix.weights.begin(), mix.weights.end(), 0.0);
    const double u = rng::uniform(seed, stream, index, 0x4D49u) * total;
    std::size_t pick = 0;
    double acc = 0.0;
    for (; pick + 1 < mix.weights.size(); ++pick) {
      acc += mix.weights[pick];
      if (u < acc) break;
    }
    draw(mix.components[pick], seed, index, depth + 1, out);
  }
}

void check_law(const InitialLaw& law) {
  const std::size_t d = law_dimension(law);
  if (d == 0) fail(ErrorCode::InvalidArgument, "initial law has zero dimension");
  if (const auto* g = std::get_if<Gaussian>(&law)) {
    if (g->stddev.size() != d) fail(ErrorCode::InvalidArgument, "gaussian stddev size mismatch");
    for (double s : g->stddev)
      if (!(s >= 0.0)) fail(ErrorCode::InvalidArgument, "gaussian stddev must be >= 0");
  } else if (const auto* b = std::get_if<UniformBox>(&law)) {
    if (b->upper.size() != d) fail(ErrorCode::InvalidArgument, "uniform box bounds mismatch");
  } else if (const auto* l = std::get_if<PointList>(&law)) {
    for (const auto& r : l->points)
      if (r.size() != d) fail(ErrorCode::InvalidArgument, "ragged point list");
  } else if (const auto* m = std::get_if<std::shared_ptr<const Mixture>>(&law)) {
    if (!*m || (*m)->components.empty() || (*m)->weights.size() != (*m)->components.size())
      fail(ErrorCode::InvalidArgument, "mixture needs matching weights and components");
    for (const auto& c : (*m)->components) {
      if (law_dimension(c) != d) fail(ErrorCode::InvalidArgument, "mixture dimension mismatch");
      check_law(c);
    }
  }
}

}  // namespace

EmpiricalMeasure sample_initial(const InitialLaw& law, std::size_t N, std::uint64_t seed) {
  if (N < 1) fail(ErrorCode::InvalidArgument, "sample_initial needs N >= 1");
  check_law(law);
  const std::size_t d = law_dimension(law);
  std::vector<double> pts(N * d);
  for (std::size_t i = 0; i < N; ++i) draw(law, seed, i, 0, MutSpan(pts.data() + i * d, d));
  return {d, std::move(pts)};
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string points_to_csv(const EmpiricalMeasure& mu) {
  std::string out;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto p = mu.point(i);
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (c) out += ',';
      out += format_double(p[c]);
    }
    out += '\n';
  }
  return out;
}

EmpiricalMeasure points_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t end = std::min(line.find(',', pos), line.size());
      double v = 0.0;
      const char* first = line.data() + pos;
      while (first < line.data() + end && *first == ' ') ++first;
      const auto res = std::from_chars(first, line.data() + end, v);
      if (res.ec != std::errc{})
        fail(ErrorCode::Io, "malformed CSV value in line: " + line);
      row.push_back(v);
      pos = end + 1;
    }
    rows.push_back(std::move(row));
  }
  return EmpiricalMeasure::from_rows(rows);
}

void write_points_csv(const std::filesystem::path& path, const EmpiricalMeasure& mu) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << points_to_csv(mu);
}

EmpiricalMeasure read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return points_from_csv(buf.str());
}

}  // namespace mvb
