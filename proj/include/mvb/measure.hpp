#pragma once

// Uniform-weight empirical measures and exact Wasserstein distances between
// equal-size clouds.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mvb/model.hpp"

namespace mvb {

class EmpiricalMeasure {
 public:
  // `points` is row-major N x dim. Throws InvalidArgument on N = 0, a ragged
  // buffer, or non-finite coordinates.
  EmpiricalMeasure(std::size_t dim, std::vector<double> points);

  static EmpiricalMeasure from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return points_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> point(std::size_t i) const {
    return {points_.data() + i * dim_, dim_};
  }
  std::span<const double> data() const { return points_; }

  friend bool operator==(const EmpiricalMeasure&, const EmpiricalMeasure&) = default;

 private:
  std::size_t dim_;
  std::vector<double> points_;
};

struct TransportPlan {
  // Source index i is matched with target index pairing[i].
  std::vector<std::size_t> pairing;
  // (1/N) sum_i |x_i - y_pairing(i)|^k
  double cost = 0.0;
};

struct WassersteinResult {
  double distance = 0.0;
  TransportPlan plan;
};

inline constexpr std::size_t kDefaultAssignmentCap = 4096;

// Exact W_k. d = 1 uses the sorted pairing; d > 1 solves the assignment
// problem on the |x - y|^k cost matrix (N <= cap, otherwise SizeCap).
WassersteinResult wasserstein(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                              double k, std::size_t cap = kDefaultAssignmentCap);

// Forces the assignment route regardless of dimension.
WassersteinResult wasserstein_assignment(const EmpiricalMeasure& a,
                                         const EmpiricalMeasure& b, double k,
                                         std::size_t cap = kDefaultAssignmentCap);

// d = 1 only.
WassersteinResult wasserstein_sorted(const EmpiricalMeasure& a,
                                     const EmpiricalMeasure& b, double k);

// Minimum-cost perfect matching on a dense n x n row-major cost matrix.
// Returns column assigned to each row.
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

// x_i -> x_i + eps * phi(x_i).
EmpiricalMeasure pushforward(const EmpiricalMeasure& mu, const PerturbationField& phi,
                             double eps);

double lk_norm(const PerturbationField& phi, const EmpiricalMeasure& mu, Exponent k);

// Component i is (1/N) sum_j h_i(x_j), reduced in fixed pairwise order.
std::vector<double> moments(const EmpiricalMeasure& mu,
                            std::span<const std::function<double(ConstSpan)>> h);

// (1/N) sum_j |x_j|^k
double absolute_moment(const EmpiricalMeasure& mu, double k);

struct PointMass {
  std::vector<double> x0;
};
struct Gaussian {
  std::vector<double> mean;
  std::vector<double> stddev;  // per coordinate, independent coordinates
};
struct UniformBox {
  std::vector<double> lower;
  std::vector<double> upper;
};
struct PointList {
  std::vector<std::vector<double>> points;  // cycled when N exceeds the list
};
struct Mixture;
using InitialLaw = std::variant<PointMass, Gaussian, UniformBox, PointList,
                                std::shared_ptr<const Mixture>>;
struct Mixture {
  std::vector<double> weights;
  std::vector<InitialLaw> components;
};

std::size_t law_dimension(const InitialLaw& law);

// Deterministic in (law, N, seed): sample i depends only on (seed, i).
EmpiricalMeasure sample_initial(const InitialLaw& law, std::size_t N, std::uint64_t seed);

// Headerless CSV, one row per sample. Values are written in shortest
// round-trip form, so read(write(mu)) == mu bit for bit.
void write_points_csv(const std::filesystem::path& path, const EmpiricalMeasure& mu);
EmpiricalMeasure read_points_csv(const std::filesystem::path& path);
std::string points_to_csv(const EmpiricalMeasure& mu);
EmpiricalMeasure points_from_csv(const std::string& text);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace mvb
