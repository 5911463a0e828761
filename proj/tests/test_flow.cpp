#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ilab/errors.hpp"
#include "ilab/flow.hpp"
#include "ilab/interpolants.hpp"

using namespace ilab;

namespace {

Dataset noise_instance(std::size_t n, std::size_t p, std::uint64_t seed, double sigma2 = 1.0) {
  const auto cov = build_covariance(CovKind::Isotropic, p, 0, 0.0, 1.0);
  return generate_dataset(cov, SignalSpec{}, n, sigma2, Ensemble::Gaussian, RngStream{seed, 3});
}

Dataset sparse_instance(std::size_t n, std::size_t p, std::size_t s, double mag,
                        std::uint64_t seed, double sigma2 = 1.0) {
  const auto cov = build_covariance(CovKind::Isotropic, p, 0, 0.0, 1.0);
  return generate_dataset(cov, SignalSpec{s, mag}, n, sigma2, Ensemble::Gaussian,
                          RngStream{seed, 3});
}

}  // namespace

TEST_CASE("negative_gradient") {
  const auto ds = noise_instance(10, 25, 1);
  SUBCASE("beta = 0 gives correlations with Y") {
    const Eigen::VectorXd g = negative_gradient(ds, Eigen::VectorXd::Zero(25));
    const Eigen::VectorXd expected = ds.phi.transpose() * ds.y / 10.0;
    CHECK((g - expected).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("interpolating beta zeroes the gradient") {
    const auto sol = min_l2_interpolant(ds);
    CHECK(negative_gradient(ds, sol.beta).cwiseAbs().maxCoeff() <= 1e-9);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(negative_gradient(ds, Eigen::VectorXd::Zero(24)), std::invalid_argument);
  }
}

TEST_CASE("run_flow basics") {
  SUBCASE("single-column design: one step moves rho by eps * (1/n)||z||^2") {
    Eigen::MatrixXd phi(3, 1);
    phi << 1.0, -2.0, 0.5;
    Dataset ds;
    ds.phi = phi;
    ds.y = phi.col(0);  // beta* = 1
    ds.beta_star = Eigen::VectorXd::Ones(1);
    ds.sigma2 = 0.0;
    ds.cov = build_covariance(CovKind::Isotropic, 1, 0, 0.0, 1.0);

    const double ghat = phi.col(0).squaredNorm() / 3.0;
    FlowConfig cfg;
    cfg.step_eps = 0.01;
    cfg.record_stride = 1;
    cfg.max_steps = 1;
    const auto traj = run_flow(ds, cfg);
    REQUIRE(traj.rho.size() == 2);
    CHECK(traj.rho[0] == doctest::Approx(ghat).epsilon(1e-12));
    CHECK(traj.rho[0] - traj.rho[1] == doctest::Approx(0.01 * ghat).epsilon(1e-10));
    CHECK(traj.l1_norm[1] == doctest::Approx(0.01));
  }
  SUBCASE("zero response terminates immediately") {
    auto ds = noise_instance(6, 12, 2);
    ds.y.setZero();
    const auto traj = run_flow(ds, FlowConfig{});
    CHECK(traj.rho0 == 0.0);
    CHECK(traj.beta_final.isZero());
    CHECK(traj.steps.size() == 1);
  }
  SUBCASE("incremental gradient has bounded drift") {
    const auto ds = noise_instance(30, 90, 4);
    FlowConfig cfg;
    cfg.max_steps = 12000;
    cfg.record_stride = 64;
    const auto traj = run_flow(ds, cfg);
    const Eigen::VectorXd g = negative_gradient(ds, traj.beta_final);
    CHECK(std::abs(traj.rho.back() - g.cwiseAbs().maxCoeff()) <= 1e-10);
  }
}

TEST_CASE("trajectory invariants") {
  const auto raw = sparse_instance(80, 160, 3, 3.0, 7);
  const auto ds = column_normalize(raw);
  const auto rule = oracle_threshold(1.0, 160, 80, 1.1);

  SUBCASE("recorded rho is non-increasing and l1 grows by at most eps per step") {
    FlowConfig cfg;
    cfg.record_stride = 32;
    cfg.max_steps = 40000;
    cfg.run_past_stop = true;
    const auto traj = run_flow(ds, cfg, rule);
    CHECK(traj.max_recorded_rho_increase <= 1e-9);
    for (std::size_t k = 1; k < traj.l1_norm.size(); ++k) {
      const double dstep = static_cast<double>(traj.steps[k] - traj.steps[k - 1]);
      CHECK(traj.l1_norm[k] - traj.l1_norm[k - 1] <= dstep * traj.step_eps + 1e-12);
      CHECK(traj.l1_norm[k] - traj.l1_norm[k - 1] >= -dstep * traj.step_eps - 1e-12);
      CHECK(traj.l1_norm[k] <=
            static_cast<double>(traj.steps[k]) * traj.step_eps + 1e-9);
    }
  }
  SUBCASE("per-event l1 growth equals eps before any sign flips") {
    FlowConfig cfg;
    cfg.record_stride = 1;
    cfg.max_steps = 100;
    const auto traj = run_flow(ds, cfg, rule);
    for (std::size_t k = 1; k < std::min<std::size_t>(traj.l1_norm.size(), 100); ++k) {
      CHECK(traj.l1_norm[k] - traj.l1_norm[k - 1] ==
            doctest::Approx(traj.step_eps).epsilon(1e-9));
    }
  }
  SUBCASE("stopping-time uniqueness on the recorded path") {
    FlowConfig cfg;
    cfg.record_stride = 16;
    cfg.max_steps = 40000;
    cfg.run_past_stop = true;
    const auto traj = run_flow(ds, cfg, rule);
    REQUIRE(traj.crossed);
    REQUIRE(traj.t_star_index.has_value());
    const std::size_t idx = *traj.t_star_index;
    REQUIRE(idx >= 1);
    CHECK(traj.rho[idx] <= rule.threshold);
    CHECK(traj.rho[idx - 1] > rule.threshold);
    for (std::size_t k = 0; k < idx; ++k) CHECK(traj.rho[k] > rule.threshold);
    CHECK(traj.stopped_flag[idx] == 1);
    CHECK(traj.stopped_flag[idx - 1] == 0);
  }
  SUBCASE("run_past_stop false halts at the crossing") {
    FlowConfig cfg;
    cfg.record_stride = 16;
    cfg.max_steps = 40000;
    cfg.run_past_stop = false;
    const auto traj = run_flow(ds, cfg, rule);
    REQUIRE(traj.crossed);
    CHECK(traj.steps.back() == traj.t_star_step);
    CHECK((traj.beta_final - traj.beta_at_stop).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("flow converges to the basis pursuit interpolant") {
  const auto ds = noise_instance(12, 36, 9);
  const auto bp = basis_pursuit(ds, 1e-10);

  FlowConfig cfg;
  cfg.step_eps = 0.0005 * (ds.phi.transpose() * ds.y / 12.0).cwiseAbs().maxCoeff();
  cfg.max_steps = 2000000;
  cfg.record_stride = 256;
  const auto traj = run_flow(ds, cfg);
  CHECK(traj.rho.back() <= 1e-3 * traj.rho0);
  CHECK(traj.l1_norm.back() == doctest::Approx(bp.objective).epsilon(0.02));
}

TEST_CASE("oracle_threshold") {
  const auto rule = oracle_threshold(1.0, 1600, 800, 1.1);
  CHECK(rule.lambda_n == doctest::Approx(0.1424388886422056).epsilon(1e-12));
  CHECK(rule.threshold == doctest::Approx(2.0 * rule.lambda_n));
  CHECK(oracle_threshold(2.0, 1600, 800, 1.1).lambda_n ==
        doctest::Approx(2.0 * rule.lambda_n).epsilon(1e-12));
  CHECK_THROWS_AS(oracle_threshold(0.0, 1600, 800, 1.1), std::domain_error);
  CHECK_THROWS_AS(oracle_threshold(1.0, 1600, 800, 1.0), std::domain_error);
}

TEST_CASE("started below threshold is flagged, not an error") {
  auto ds = noise_instance(50, 100, 31, 1e-6);  // tiny noise: rho(0) far below 2 lambda_n
  const auto rule = oracle_threshold(1.0, 100, 50, 1.1);
  const auto traj = run_flow(ds, FlowConfig{}, rule);
  CHECK(traj.crossed);
  CHECK(traj.started_below_threshold);
  CHECK(traj.t_star_index == 0);
}

TEST_CASE("rcv_variance_estimate") {
  const RngStream stream{5150, 2};
  SUBCASE("pure noise at moderate scale") {
    int in_band = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto ds = noise_instance(800, 1600, 6000 + s);
      const auto est = rcv_variance_estimate(ds, stream);
      if (est.sigma2_hat >= 0.85 && est.sigma2_hat <= 1.15) ++in_band;
    }
    CHECK(in_band >= 18);
  }
  SUBCASE("noiseless sparse data") {
    const auto ds = sparse_instance(400, 800, 5, 3.0, 77, 0.0);
    const auto est = rcv_variance_estimate(ds, stream);
    const double mean_y = ds.y.mean();
    const double var_y = (ds.y.array() - mean_y).square().sum() / (ds.n() - 1);
    CHECK(est.sigma2_hat <= 1e-3 * var_y);
  }
  SUBCASE("deterministic") {
    const auto ds = noise_instance(100, 150, 91);
    const auto a = rcv_variance_estimate(ds, stream);
    const auto b = rcv_variance_estimate(ds, stream);
    CHECK(a.sigma2_hat == b.sigma2_hat);
  }
  CHECK_THROWS_AS(rcv_variance_estimate(noise_instance(30, 60, 1), stream),
                  std::invalid_argument);
}

TEST_CASE("adaptive_threshold") {
  const RngStream stream{31337, 8};
  SUBCASE("plug-in identity") {
    const auto ds = noise_instance(200, 400, 41);
    const auto est = rcv_variance_estimate(ds, stream);
    const auto adaptive = adaptive_threshold(ds, stream, 1.1);
    const auto oracle_same =
        oracle_threshold(std::sqrt(est.sigma2_hat), 400, 200, 1.1);
    CHECK(adaptive.lambda_n == doctest::Approx(oracle_same.lambda_n).epsilon(1e-12));
    CHECK(adaptive.kind == StoppingKind::Adaptive);
  }
  SUBCASE("degenerate zero-variance estimate is rejected") {
    auto ds = sparse_instance(100, 150, 0, 0.0, 78, 1.0);
    ds.y.setZero();  // both refits give RSS = 0 exactly
    CHECK_THROWS_AS(adaptive_threshold(ds, stream, 1.1), SolverError);
  }
}
