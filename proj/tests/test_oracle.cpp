#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "mvb/error.hpp"
#include "mvb/oracle.hpp"

using namespace mvb;
using testing_helpers::linear_model;
using testing_helpers::meanfield_ou;
using testing_helpers::normal_pdf;
using testing_helpers::simpson;
using testing_helpers::zero_noise;

TEST_CASE("gauss-hermite moments") {
  for (std::size_t n : {8u, 24u, 48u}) {
    const QuadratureRule q = gauss_hermite(n);
    double m0 = 0, m2 = 0, m4 = 0, m6 = 0, m1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = q.nodes[i], w = q.weights[i];
      m0 += w;
      m1 += w * x;
      m2 += w * x * x;
      m4 += w * std::pow(x, 4);
      m6 += w * std::pow(x, 6);
    }
    CHECK(m0 == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(m1) < 1e-13);
    CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(m6 == doctest::Approx(15.0).epsilon(1e-11));
  }
}

TEST_CASE("quadrature reference") {
  const PerturbationField one = make_perturbation("const:1", 1);
  SUBCASE("brownian sine at a point") {
    const double r = gaussian_quadrature_reference({1, 0.0, 0.0, 1.0}, {{0.0}, {0.0}}, make_observable("sin", 1), 1.0, one);
    CHECK(r == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  }
  SUBCASE("OU identity at a point") {
    const double r = gaussian_quadrature_reference({1, 1.0, 0.0, 1.0}, {{0.3}, {0.0}}, make_observable("linear", 1), 1.0, one);
    CHECK(r == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  }
  SUBCASE("mean-field OU, square observable, phi = id") {
    // E X_t^2 = alpha^2 s^2 (1+eps)^2 + e^{-2at} m^2 (1+eps)^2 + v_t
    const double a = 0.7, kappa = 1.3, m = 0.5, s = 0.8, t = 1.2;
    const double alpha = std::exp(-(a + kappa) * t);
    const double expected = 2.0 * alpha * alpha * s * s + 2.0 * std::exp(-2.0 * a * t) * m * m;
    const double r = gaussian_quadrature_reference({1, a, kappa, 1.0}, {{m}, {s}}, make_observable("square", 1), t,
                                                   make_perturbation("id", 1));
    CHECK(r == doctest::Approx(expected).epsilon(1e-10));
  }
  SUBCASE("OU sine with a nonlinear direction against Simpson") {
    const double a = 1.0, m = 0.2, s = 0.9, t = 0.8;
    const double v = (1.0 - std::exp(-2.0 * a * t)) / (2.0 * a);
    const double decay = std::exp(-a * t);
    const double expected = decay * std::exp(-v / 2.0) *
                            simpson([&](double x) { return std::cos(decay * x) * std::sin(x) * normal_pdf(x, m, s); },
                                    m - 12.0 * s, m + 12.0 * s);
    const double r = gaussian_quadrature_reference({1, a, 0.0, 1.0}, {{m}, {s}}, make_observable("sin", 1), t,
                                                   make_perturbation("sin", 1));
    CHECK(r == doctest::Approx(expected).epsilon(1e-9));
  }
  SUBCASE("two dimensions factorize") {
    // f = sin(x0 + x1), brownian from a point, v = (1, 1): 2 cos(0) e^{-t}.
    const double r = gaussian_quadrature_reference({2, 0.0, 0.0, 1.0}, {{0.0, 0.0}, {0.0, 0.0}}, make_observable("sin", 2),
                                                   0.5, make_perturbation("const:1", 2));
    CHECK(r == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-11));
  }
  SUBCASE("unsupported settings") {
    CHECK_THROWS_AS(gaussian_quadrature_reference({1, 0.0, 0.0, 0.0}, {{0.0}, {0.0}}, make_observable("sin", 1), 1.0, one), Error);
    CHECK_THROWS_AS(gaussian_quadrature_reference({3, 0.0, 0.0, 1.0}, {{0, 0, 0}, {0, 0, 0}}, make_observable("sin", 3), 1.0,
                                                  make_perturbation("const:1", 3)),
                    Error);
  }
}

TEST_CASE("finite differences") {
  const TimeGrid grid{1.0, 100};
  const auto mu = sample_initial(Gaussian{{0.5}, {1.0}}, 500, 1);
  SUBCASE("constant observable is exactly zero") {
    const Estimate e = finite_difference_intrinsic(meanfield_ou(1, 1.0, 1.0), mu, make_perturbation("sin", 1),
                                                   make_observable("const:3", 1), grid, 0.1, 2);
    CHECK(e.value == 0.0);
    CHECK(e.std_error == 0.0);
  }
  SUBCASE("affine flow makes the difference quotient independent of eps") {
    const ModelSpec model = meanfield_ou(1, 1.0, 1.0);
    const auto phi = make_perturbation("const:1", 1);
    const auto f = make_observable("linear", 1);
    const double a = finite_difference_intrinsic(model, mu, phi, f, grid, 0.1, 2).value;
    const double b = finite_difference_intrinsic(model, mu, phi, f, grid, 0.01, 2).value;
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
    CHECK(a == doctest::Approx(std::pow(1.0 - 0.01, 100)).epsilon(1e-9));
  }
  SUBCASE("richardson removes the linear bias") {
    // The Euler second moment is quadratic in eps, so the extrapolation is exact.
    SimulationOptions det;
    det.check_ellipticity = false;
    const ModelSpec model = zero_noise(meanfield_ou(1, 1.0, 1.0));
    const auto phi = make_perturbation("id", 1);
    const auto f = make_observable("square", 1);
    const double tiny = finite_difference_intrinsic(model, mu, phi, f, grid, 1e-6, 2, det).value;
    const double coarse = finite_difference_intrinsic(model, mu, phi, f, grid, 0.2, 2, det).value;
    const double rich = richardson_intrinsic(model, mu, phi, f, grid, 0.2, 2, det).value;
    CHECK(std::abs(rich - tiny) < 1e-6);
    CHECK(std::abs(coarse - tiny) > 1e-3);
  }
}

TEST_CASE("brownian total variation helpers") {
  CHECK(brownian_sign_expectation(0.3, 0.3, 1.0, 1.0) == 0.0);
  CHECK(brownian_sign_expectation(50.0, 0.0, 1.0, 1.0) == doctest::Approx(1.0));
  const double x = 0.4, th = -0.1, sigma = 1.5, t = 0.6;
  const double sd = sigma * std::sqrt(t);
  const double direct = simpson([&](double z) { return (z > th ? 1.0 : -1.0) * normal_pdf(z, x, sd); }, x - 12 * sd,
                                x + 12 * sd, 200000);
  CHECK(brownian_sign_expectation(x, th, sigma, t) == doctest::Approx(direct).epsilon(1e-4));

  CHECK(brownian_point_pair_tv(1.0, 1.0, 1.0, 1.0) == 0.0);
  const double tv = simpson([&](double z) { return std::abs(normal_pdf(z, 0.0, sd) - normal_pdf(z, 0.2, sd)); },
                            -12 * sd, 12 * sd, 200000);
  CHECK(brownian_point_pair_tv(0.0, 0.2, sigma, t) == doctest::Approx(tv).epsilon(1e-6));
}

TEST_CASE("log-log slope") {
  const std::vector<double> x = {0.05, 0.1, 0.2, 0.4};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -0.5));
  CHECK(fit_loglog_slope(x, y) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("stability report") {
  const TimeGrid grid{1.0, 100};
  const ModelSpec model = meanfield_ou(1, 1.0, 1.0);
  const auto mu = sample_initial(Gaussian{{0.0}, {1.0}}, 200, 1);
  SUBCASE("identical laws are degenerate") {
    const StabilityRow r = stability_report(model, mu, mu, grid, 3);
    CHECK(r.degenerate);
    CHECK(r.sup_ratio == 0.0);
  }
  SUBCASE("a rigid shift contracts under a synchronous coupling") {
    const auto nu = pushforward(mu, make_perturbation("const:1", 1), 0.1);
    const StabilityRow r = stability_report(model, mu, nu, grid, 3);
    CHECK_FALSE(r.degenerate);
    CHECK(r.initial_distance == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.sup_ratio == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.wasserstein_ratio == doctest::Approx(std::pow(0.99, 100)).epsilon(1e-9));
  }
  SUBCASE("brownian translation keeps both ratios at one") {
    const auto nu = pushforward(mu, make_perturbation("const:1", 1), 0.7);
    const StabilityRow r = stability_report(make_scenario("brownian", 1, {}), mu, nu, grid, 3);
    CHECK(r.sup_ratio == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.wasserstein_ratio == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("moment report") {
  SimulationOptions det;
  det.check_ellipticity = false;
  const ModelSpec model = zero_noise(linear_model(1, 1.0, 1.0));
  std::vector<EmpiricalMeasure> ladder;
  for (double m : {0.1, 1.0, 10.0}) ladder.push_back(sample_initial(PointMass{{m}}, 10, 1));
  const MomentReport rep = moment_report(model, ladder, {1.0, 50}, 1, 1.0, det);
  CHECK(rep.rows.size() == 3);
  CHECK(rep.passed);
  CHECK(rep.max_ratio < 1.0);
  for (const auto& r : rep.rows) CHECK(r.sup_moment == r.initial_moment);
  const MomentReport strict = moment_report(model, ladder, {1.0, 50}, 1, 0.5, det);
  CHECK_FALSE(strict.passed);
}

TEST_CASE("total-variation scaling") {
  const ModelSpec model = make_scenario("brownian", 1, {});
  const auto mu = sample_initial(PointMass{{0.0}}, 500, 1);
  const std::vector<double> ts = {0.1, 0.2};
  SUBCASE("equal initial laws") {
    const TvReport r = tv_gradient_scaling(model, mu, mu, ts, 0.01, {make_observable("sign", 1)}, 4);
    for (const auto& row : r.rows) CHECK(row.lower_bound == 0.0);
  }
  SUBCASE("constants cannot separate laws") {
    const auto nu = sample_initial(PointMass{{0.5}}, 500, 1);
    const TvReport r = tv_gradient_scaling(model, mu, nu, ts, 0.01,
                                           {make_observable("const:1", 1), make_observable("const:-1", 1)}, 4);
    for (const auto& row : r.rows) CHECK(row.lower_bound == 0.0);
  }
  SUBCASE("midpoint sign against the closed form") {
    const double c = 0.3;
    const auto nu = sample_initial(PointMass{{c}}, 4000, 1);
    const auto mu4 = sample_initial(PointMass{{0.0}}, 4000, 1);
    const TvReport r = tv_gradient_scaling(model, mu4, nu, {0.1, 0.4}, 0.01, {make_observable("sign:0.15", 1)}, 4);
    for (const auto& row : r.rows) {
      const double exact = 2.0 * std::erf(c / (2.0 * std::sqrt(2.0 * row.t)));
      CHECK(std::abs(row.lower_bound - exact) <= 3.0 * row.std_error + 1e-12);
      CHECK(row.lower_bound <= 2.0);
    }
  }
  SUBCASE("enlarging the dictionary never lowers the bound") {
    const auto nu = sample_initial(PointMass{{0.5}}, 500, 1);
    const TvReport small = tv_gradient_scaling(model, mu, nu, ts, 0.01, {make_observable("tanh", 1)}, 4);
    const TvReport large = tv_gradient_scaling(model, mu, nu, ts, 0.01,
                                               {make_observable("tanh", 1), make_observable("sign:0.25", 1)}, 4);
    for (std::size_t q = 0; q < ts.size(); ++q) {
      CHECK(large.rows[q].lower_bound >= small.rows[q].lower_bound);
      CHECK(large.rows[q].lower_bound <= 2.0);
    }
  }
  SUBCASE("unbounded observables are rejected") {
    CHECK_THROWS_AS(tv_gradient_scaling(model, mu, mu, ts, 0.01, {make_observable("linear", 1)}, 4), Error);
  }
}

TEST_CASE("tangent finite-difference consistency") {
  const TimeGrid grid{1.0, 100};
  const auto mu = sample_initial(Gaussian{{0.0}, {1.0}}, 300, 1);
  SUBCASE("linear model has no discretization error") {
    const auto r = tangent_fd_consistency(meanfield_ou(1, 1.0, 1.0), mu, make_perturbation("sin", 1), grid, 2,
                                          {0.1, 0.05}, TangentKind::MeanField);
    for (const auto& row : r.rows) CHECK(row.error < 1e-10);
  }
  SUBCASE("nonlinear model converges at first order") {
    for (TangentKind kind : {TangentKind::Frozen, TangentKind::MeanField}) {
      const auto r = tangent_fd_consistency(make_scenario("meanfield_trig", 1, {}), mu, make_perturbation("sin", 1), grid,
                                            2, {0.1, 0.05, 0.025}, kind);
      CHECK(r.monotone);
      CHECK(r.observed_order > 0.8);
      CHECK(r.observed_order < 1.3);
      CHECK(to_json(r).contains("observed_order"));
    }
  }
}
