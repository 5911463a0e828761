#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <string>

#include "ilab/design.hpp"
#include "ilab/errors.hpp"

using namespace ilab;

TEST_CASE("build_covariance") {
  SUBCASE("isotropic") {
    const auto cov = build_covariance(CovKind::Isotropic, 100, 0, 0.0, 1.0);
    CHECK(cov.r2 == 100.0);
    CHECK(cov.r1 == 100.0);
    CHECK(cov.trace == 100.0);
    CHECK(cov.eigenvalue(0) == 1.0);
    CHECK(cov.eigenvalue(99) == 1.0);
  }
  SUBCASE("spiked setup-3 parameters") {
    const auto cov = build_covariance(CovKind::SpikedIsotropic, 1605, 5, 100.0, 1.0);
    CHECK(cov.r2 == 1600.0);
    CHECK(cov.trace == 2100.0);
    CHECK(cov.eigenvalue(0) == 100.0);
    CHECK(cov.eigenvalue(4) == 100.0);
    CHECK(cov.eigenvalue(5) == 1.0);
  }
  SUBCASE("violations are listed") {
    CHECK_THROWS_AS(build_covariance(CovKind::SpikedIsotropic, 5, 5, 100.0, 1.0),
                    InvalidSpecError);
    try {
      build_covariance(CovKind::SpikedIsotropic, 5, 5, 0.5, 1.0);
      FAIL("expected InvalidSpecError");
    } catch (const InvalidSpecError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("k_star < p") != std::string::npos);
      CHECK(msg.find("lambda_head") != std::string::npos);
    }
    CHECK_THROWS_AS(build_covariance(CovKind::Isotropic, 10, 3, 1.0, 1.0), InvalidSpecError);
    CHECK_THROWS_AS(build_covariance(CovKind::Isotropic, 10, 0, 1.0, 0.0), InvalidSpecError);
  }
}

TEST_CASE("generate_dataset basics") {
  const RngStream stream{2024, 5};

  SUBCASE("pure noise response variance") {
    const auto cov = build_covariance(CovKind::Isotropic, 4, 0, 0.0, 1.0);
    const auto ds = generate_dataset(cov, SignalSpec{}, 10000, 1.0, Ensemble::Gaussian, stream);
    const double var = ds.y.squaredNorm() / ds.n();
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
    CHECK(ds.beta_star.isZero());
  }
  SUBCASE("signal variance matches ||beta*||_Sigma^2 + sigma2") {
    const auto cov = build_covariance(CovKind::Isotropic, 12, 0, 0.0, 1.0);
    const auto ds =
        generate_dataset(cov, SignalSpec{5, 3.0}, 10000, 1.0, Ensemble::Gaussian, stream);
    const double mean = ds.y.mean();
    const double var = (ds.y.array() - mean).square().sum() / (ds.n() - 1);
    CHECK(var == doctest::Approx(46.0).epsilon(0.05));
  }
  SUBCASE("bit determinism") {
    const auto cov = build_covariance(CovKind::Isotropic, 30, 0, 0.0, 1.0);
    const auto a = generate_dataset(cov, SignalSpec{2, 1.5}, 40, 0.5, Ensemble::StudentT4, stream);
    const auto b = generate_dataset(cov, SignalSpec{2, 1.5}, 40, 0.5, Ensemble::StudentT4, stream);
    CHECK(a.phi == b.phi);
    CHECK(a.y == b.y);
  }
  SUBCASE("spiked support confined to the head") {
    const auto cov = build_covariance(CovKind::SpikedIsotropic, 50, 5, 10.0, 1.0);
    CHECK_THROWS_AS(
        generate_dataset(cov, SignalSpec{6, 1.0}, 10, 1.0, Ensemble::Gaussian, stream),
        InvalidSpecError);
    const auto ok = generate_dataset(cov, SignalSpec{5, 2.0}, 10, 1.0, Ensemble::Gaussian, stream);
    for (Eigen::Index j = 5; j < ok.p(); ++j) CHECK(ok.beta_star(j) == 0.0);
  }
  SUBCASE("empirical column variance tracks the spectrum across seeds") {
    const auto cov = build_covariance(CovKind::SpikedIsotropic, 8, 2, 25.0, 1.0);
    int seeds_ok = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto ds = generate_dataset(cov, SignalSpec{}, 10000, 1.0, Ensemble::Gaussian,
                                       RngStream{900 + seed, 0});
      bool all_ok = true;
      for (Eigen::Index j = 0; j < ds.p(); ++j) {
        const double lam = cov.eigenvalue(static_cast<std::size_t>(j));
        const double emp = ds.phi.col(j).squaredNorm() / ds.n();
        all_ok &= std::abs(emp - lam) <= 0.05 * lam;
      }
      seeds_ok += all_ok;
    }
    CHECK(seeds_ok >= 19);
  }
}

TEST_CASE("excess_risk closed form") {
  const auto iso = build_covariance(CovKind::Isotropic, 6, 0, 0.0, 1.0);
  const auto ds = generate_dataset(iso, SignalSpec{}, 5, 1.0, Ensemble::Gaussian, RngStream{4, 4});

  CHECK(excess_risk(ds.beta_star, ds) == 0.0);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(6);
  e1(0) = 1.0;
  CHECK(excess_risk(e1, ds) == doctest::Approx(1.0));

  const auto spiked = build_covariance(CovKind::SpikedIsotropic, 6, 5, 100.0, 1.0);
  auto ds2 = ds;
  ds2.cov = spiked;
  CHECK(excess_risk(e1, ds2) == doctest::Approx(100.0));

  Eigen::VectorXd wrong = Eigen::VectorXd::Zero(7);
  CHECK_THROWS_AS(excess_risk(wrong, ds), std::invalid_argument);
}

TEST_CASE("column_normalize") {
  const auto cov = build_covariance(CovKind::Isotropic, 5, 0, 0.0, 1.0);
  auto ds = generate_dataset(cov, SignalSpec{2, 3.0}, 50, 1.0, Ensemble::Gaussian, RngStream{8, 1});
  ds.phi.col(1) *= 2.0;          // (1/n)||phi_1||^2 becomes ~4x
  ds.y = ds.phi * ds.beta_star;  // keep consistency after the manual edit

  const auto norm = column_normalize(ds);
  for (Eigen::Index j = 0; j < norm.p(); ++j) {
    CHECK(norm.phi.col(j).squaredNorm() / norm.n() == doctest::Approx(1.0).epsilon(1e-12));
  }
  // explicit factor check on a hand-scaled column
  {
    auto simple = ds;
    simple.col_scales.resize(0);
    simple.phi.setZero();
    simple.phi.col(0).setConstant(2.0);  // (1/n)||.||^2 = 4 -> scale 2
    for (Eigen::Index j = 1; j < simple.p(); ++j) simple.phi.col(j).setConstant(1.0);
    const auto nn = column_normalize(simple);
    CHECK(nn.col_scales(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(nn.col_scales(1) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("round trip") {
    const auto back = denormalize(norm);
    CHECK((back.phi - ds.phi).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((back.beta_star - ds.beta_star).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("risk is coordinate-system invariant") {
    Eigen::VectorXd beta_orig = Eigen::VectorXd::Random(ds.p());
    Eigen::VectorXd beta_norm = beta_orig.cwiseProduct(norm.col_scales);
    CHECK(excess_risk(beta_orig, ds) == doctest::Approx(excess_risk(beta_norm, norm)).epsilon(1e-12));
    CHECK((beta_to_original(norm, beta_norm) - beta_orig).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("zero column rejected") {
    auto bad = ds;
    bad.phi.col(3).setZero();
    CHECK_THROWS_AS(column_normalize(bad), std::invalid_argument);
  }
  SUBCASE("double normalization rejected") { CHECK_THROWS_AS(column_normalize(norm), std::invalid_argument); }
}

TEST_CASE("dataset dump round-trips bit-exactly") {
  const auto cov = build_covariance(CovKind::SpikedIsotropic, 17, 3, 9.0, 0.5);
  const auto ds =
      generate_dataset(cov, SignalSpec{3, 1.25}, 23, 0.7, Ensemble::Rademacher, RngStream{77, 6});
  const std::string path = "test_dataset_dump.bin";
  write_dataset(ds, path);
  const auto back = read_dataset(path);
  std::remove(path.c_str());

  CHECK(back.phi == ds.phi);
  CHECK(back.y == ds.y);
  CHECK(back.beta_star == ds.beta_star);
  CHECK(back.sigma2 == ds.sigma2);
  CHECK(back.cov.k_star == ds.cov.k_star);
  CHECK(back.cov.r2 == ds.cov.r2);
  CHECK(back.ensemble == ds.ensemble);
  CHECK(back.base_seed == ds.base_seed);
  CHECK(back.stream_id == ds.stream_id);
}
