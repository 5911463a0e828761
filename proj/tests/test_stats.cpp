#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ilab/rng.hpp"
#include "ilab/stats.hpp"

using namespace ilab;

TEST_CASE("gaussian_pdf reference values") {
  CHECK(gaussian_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-14));
  CHECK(gaussian_pdf(1.0) == doctest::Approx(0.24197072451914337).epsilon(1e-14));
  CHECK(gaussian_pdf(10.0) == doctest::Approx(7.694598626706419e-23).epsilon(1e-13));
  CHECK(gaussian_pdf(-1.0) == gaussian_pdf(1.0));
  // no underflow to zero through the deep tail
  CHECK(gaussian_pdf(38.0) > 0.0);
  CHECK(std::isfinite(gaussian_pdf(38.0)));
}

TEST_CASE("gaussian_q reference values and symmetry") {
  CHECK(gaussian_q(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(gaussian_q(0.6744897501960817) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(gaussian_q(6.0) == doctest::Approx(9.865876450376981e-10).epsilon(1e-12));
  CHECK(gaussian_q(2.0) == doctest::Approx(0.022750131948179207).epsilon(1e-13));
  for (double x = -8.0; x <= 8.0; x += 0.25) {
    CHECK(gaussian_q(x) + gaussian_q(-x) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // tail stays accurate far beyond the 1-CDF cancellation point
  CHECK(gaussian_q(20.0) > 0.0);
  CHECK(gaussian_q(20.0) < 1e-80);
}

TEST_CASE("gaussian_q_inverse") {
  CHECK(gaussian_q_inverse(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(gaussian_q_inverse(0.25) == doctest::Approx(0.6744897501960817).epsilon(1e-12));
  CHECK(gaussian_q_inverse(1.0 / 60.0) == doctest::Approx(2.1280452341849847).epsilon(1e-12));

  SUBCASE("residual contract |Q(x) - p| <= 1e-12 p") {
    for (double p : {0.49, 0.3, 0.1, 1e-2, 1e-4, 1e-8, 1e-12, 0.75, 0.999}) {
      const double x = gaussian_q_inverse(p);
      CHECK(std::abs(gaussian_q(x) - p) <= 1e-12 * p);
    }
  }
  SUBCASE("round trip on [-6, 6]") {
    for (double x = -6.0; x <= 6.0; x += 0.1) {
      // For x <= -5 the double rounding of Q(x) = 1 - eps already costs
      // ~ulp(1)/phi(x) of recoverable precision, so the bound widens there.
      const double tol = x <= -5.0 ? 2e-8 : 1e-9;
      CHECK(std::abs(gaussian_q_inverse(gaussian_q(x)) - x) <= tol);
    }
  }
  SUBCASE("monotone decreasing in p") {
    double prev = gaussian_q_inverse(1e-6);
    for (double p = 1e-5; p < 1.0; p *= 3.0) {
      const double x = gaussian_q_inverse(p);
      CHECK(x < prev);
      prev = x;
    }
  }
  SUBCASE("domain errors") {
    CHECK_THROWS_AS(gaussian_q_inverse(0.0), std::domain_error);
    CHECK_THROWS_AS(gaussian_q_inverse(1.0), std::domain_error);
    CHECK_THROWS_AS(gaussian_q_inverse(-0.1), std::domain_error);
  }
}

TEST_CASE("soft_threshold") {
  CHECK(soft_threshold(2.5, 1.0) == doctest::Approx(1.5));
  CHECK(soft_threshold(-0.3, 1.0) == 0.0);
  CHECK(soft_threshold(-2.5, 1.0) == doctest::Approx(-1.5));
  for (double x : {-3.0, -0.5, 0.0, 0.7, 42.0}) {
    CHECK(soft_threshold(x, 0.0) == x);
  }
  CHECK_THROWS_AS(soft_threshold(1.0, -1e-9), std::domain_error);

  SUBCASE("odd and non-expansive on random triples") {
    Rng rng(RngStream{12345, 7});
    for (int i = 0; i < 100000; ++i) {
      const double a = 10.0 * rng.normal();
      const double b = 10.0 * rng.normal();
      const double k = std::abs(3.0 * rng.normal());
      CHECK(soft_threshold(-a, k) == -soft_threshold(a, k));
      // one-ulp slack: the real-arithmetic property holds exactly
      CHECK(std::abs(soft_threshold(a, k) - soft_threshold(b, k)) <=
            std::abs(a - b) * (1.0 + 1e-12) + 1e-15);
    }
  }
}

TEST_CASE("mills_bounds") {
  SUBCASE("kappa = 2 brackets Q(2)") {
    const auto [lo, hi] = mills_bounds(2.0);
    CHECK(lo == doctest::Approx(0.018981199164792674).epsilon(1e-13));
    CHECK(hi == doctest::Approx(0.025308265553056899).epsilon(1e-13));
    const double q = gaussian_q(2.0);
    CHECK(lo <= q);
    CHECK(q <= hi);
  }
  SUBCASE("kappa = 5 bracket width") {
    const auto [lo, hi] = mills_bounds(5.0);
    const double q = gaussian_q(5.0);
    CHECK(lo <= q);
    CHECK(q <= hi);
    CHECK(hi - lo <= 1e-3 * q);
  }
  SUBCASE("sandwich on the grid [2, 10]") {
    for (double k = 2.0; k <= 10.0 + 1e-9; k += 0.01) {
      const auto [lo, hi] = mills_bounds(k);
      const double q = gaussian_q(k);
      CHECK(lo <= q);
      CHECK(q <= hi);
    }
  }
  SUBCASE("small kappa returns bounds without a bracketing guarantee") {
    const auto [lo, hi] = mills_bounds(0.5);
    CHECK(lo < hi);  // asymptotic-regime values, still ordered
  }
  CHECK_THROWS_AS(mills_bounds(0.0), std::domain_error);
  CHECK_THROWS_AS(mills_bounds(-2.0), std::domain_error);
}

TEST_CASE("simple_ols") {
  SUBCASE("exact line") {
    const std::vector<double> xs{1, 2, 3}, ys{2, 4, 6};
    const auto fit = simple_ols(xs, ys);
    CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(fit.intercept == doctest::Approx(0.0).scale(1.0).epsilon(1e-13));
    CHECK(fit.r_squared >= 1.0 - 1e-12);
    CHECK_FALSE(fit.constant_response);
  }
  SUBCASE("constant response") {
    const std::vector<double> xs{1, 2, 3}, ys{1, 1, 1};
    const auto fit = simple_ols(xs, ys);
    CHECK(fit.slope == 0.0);
    CHECK(fit.r_squared == 1.0);
    CHECK(fit.constant_response);
  }
  SUBCASE("hand-computed normal equations") {
    const std::vector<double> xs{0, 1, 2, 3}, ys{0.1, 0.9, 2.2, 2.8};
    const auto fit = simple_ols(xs, ys);
    CHECK(fit.slope == doctest::Approx(0.94).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(0.09).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(0.9817777777777778).epsilon(1e-12));
  }
  SUBCASE("affine data gives R^2 ~ 1") {
    std::vector<double> xs, ys;
    for (int i = 0; i < 25; ++i) {
      xs.push_back(0.3 * i - 2.0);
      ys.push_back(1.7 - 0.41 * xs.back());
    }
    CHECK(simple_ols(xs, ys).r_squared >= 1.0 - 1e-12);
  }
  SUBCASE("degenerate inputs") {
    const std::vector<double> c{2, 2, 2}, ys{1, 2, 3}, two{1, 2};
    CHECK_THROWS_AS(simple_ols(c, ys), std::invalid_argument);
    CHECK_THROWS_AS(simple_ols(two, two), std::invalid_argument);
  }
}
