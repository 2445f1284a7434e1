#include <doctest.h>

#include <cmath>
#include <random>

#include "slipform/material.hpp"

using namespace slipform;

namespace {

Eigen::Matrix3d random_spd_near_identity(std::mt19937& rng, double spread) {
  std::uniform_real_distribution<double> unif(-spread, spread);
  Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) f(r, c) += unif(rng);
  }
  return f.transpose() * f;
}

// Independent re-implementation of the elastic energy used as an oracle.
double psi_elastic_oracle(const Eigen::Matrix3d& Ce, const MaterialParams& p) {
  const double je = std::sqrt(Ce.determinant());
  const Eigen::Matrix3d cbar = std::pow(je, -2.0 / 3.0) * Ce;
  return 0.5 * p.kappa * std::pow(std::log(je), 2) + 0.5 * p.mu * (cbar.trace() - 3.0);
}

}  // namespace

TEST_CASE("psi_elastic") {
  MaterialParams p;
  SUBCASE("stress-free reference") {
    CHECK(psi_elastic(Eigen::Matrix3d::Identity(), p) == 0.0);
  }

  SUBCASE("pure dilatation leaves only the volumetric branch") {
    const double lambda = 1.07;
    const double psi = psi_elastic(lambda * lambda * Eigen::Matrix3d::Identity(), p);
    const double expected = 0.5 * p.kappa * std::pow(3.0 * std::log(lambda), 2);
    CHECK(psi == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("random states match the duplicate-formula oracle") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::Matrix3d ce = random_spd_near_identity(rng, 0.15);
      CHECK(psi_elastic(ce, p) == doctest::Approx(psi_elastic_oracle(ce, p)).epsilon(1e-12));
    }
  }

  SUBCASE("non-SPD input is rejected") {
    Eigen::Matrix3d bad = -Eigen::Matrix3d::Identity();
    CHECK_THROWS_AS(psi_elastic(bad, p), InvalidConfigurationError);
  }
}

TEST_CASE("mandel_stress") {
  MaterialParams p;
  SUBCASE("stress-free reference") {
    CHECK(mandel_stress(Eigen::Matrix3d::Identity(), p).norm() == 0.0);
  }

  SUBCASE("pure dilatation gives the volumetric closed form") {
    const double lambda = 1.04;
    const Eigen::Matrix3d sigma =
        mandel_stress(lambda * lambda * Eigen::Matrix3d::Identity(), p);
    const Eigen::Matrix3d expected =
        3.0 * p.kappa * std::log(lambda) * Eigen::Matrix3d::Identity();
    CHECK((sigma - expected).norm() <= 1e-12 * expected.norm());
  }

  SUBCASE("matches 2 Ce d(psi)/dCe by central finite differences") {
    std::mt19937 rng(12);
    for (int trial = 0; trial < 40; ++trial) {
      const Eigen::Matrix3d ce = random_spd_near_identity(rng, 0.1);
      const Eigen::Matrix3d sigma = mandel_stress(ce, p);
      // dpsi/dCe by symmetric perturbations.
      Eigen::Matrix3d dpsi;
      const double h = 1e-6;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          Eigen::Matrix3d cp = ce, cm = ce;
          cp(r, c) += h;
          cp(c, r) = cp(r, c);
          cm(r, c) -= h;
          cm(c, r) = cm(r, c);
          const double slope = (psi_elastic(cp, p) - psi_elastic(cm, p)) / (2 * h);
          dpsi(r, c) = r == c ? slope : 0.5 * slope;  // symmetric pair perturbed jointly
        }
      }
      const Eigen::Matrix3d sigma_fd = 2.0 * ce * dpsi;
      CHECK((sigma - sigma_fd).norm() <= 1e-6 * std::max(1.0, sigma_fd.norm()));
    }
  }
}

TEST_CASE("first_piola") {
  MaterialParams p;
  SUBCASE("stress-free reference") {
    CHECK(first_piola(Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity(), p).norm() ==
          0.0);
  }

  SUBCASE("small-strain shear limit recovers the shear modulus") {
    const double eps = 1e-8;
    Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
    f(0, 1) += eps;
    const Eigen::Matrix3d pk1 = first_piola(f, Eigen::Matrix3d::Identity(), p);
    CHECK(pk1(0, 1) / eps == doctest::Approx(p.mu).epsilon(1e-6));
  }

  SUBCASE("matches finite differences of the elastic energy in F") {
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> unif(-0.08, 0.08);
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) f(r, c) += unif(rng);
      }
      const Eigen::Matrix3d fp = rotation_from_euler(unif(rng), unif(rng), unif(rng)).rotation;
      const Eigen::Matrix3d pk1 = first_piola(f, fp, p);

      const double h = 1e-6;
      Eigen::Matrix3d fd;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          Eigen::Matrix3d fpp = f, fm = f;
          fpp(r, c) += h;
          fm(r, c) -= h;
          fd(r, c) = (psi_elastic(elastic_measures(fpp, fp).Ce, p) -
                      psi_elastic(elastic_measures(fm, fp).Ce, p)) /
                     (2 * h);
        }
      }
      CHECK((pk1 - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
    }
  }

  SUBCASE("frame indifference through Ce") {
    std::mt19937 rng(14);
    std::uniform_real_distribution<double> unif(-0.05, 0.05);
    for (int trial = 0; trial < 30; ++trial) {
      Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) f(r, c) += unif(rng);
      }
      const Eigen::Matrix3d q = rotation_from_euler(unif(rng) * 10, unif(rng) * 10, 0).rotation;
      const double psi0 = psi_elastic(elastic_measures(f, Eigen::Matrix3d::Identity()).Ce, p);
      const double psi1 =
          psi_elastic(elastic_measures(q * f, Eigen::Matrix3d::Identity()).Ce, p);
      CHECK(psi0 == doctest::Approx(psi1).epsilon(1e-12));
    }
  }
}

TEST_CASE("kirchhoff_stress") {
  CHECK(kirchhoff_stress(Eigen::Matrix3d::Zero(), Eigen::Matrix3d::Identity()).norm() == 0.0);
  Eigen::Matrix3d p;
  p << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  CHECK((kirchhoff_stress(p, Eigen::Matrix3d::Identity()) - p).norm() == 0.0);
}

TEST_CASE("hardening_stress and psi_hardening") {
  MaterialParams p;
  p.Qinf = 0.09;
  p.H = 0.4;

  SUBCASE("virgin state and saturation") {
    CHECK(hardening_stress(0.0, p) == 0.0);
    CHECK(hardening_stress(1e3, p) == doctest::Approx(p.Qinf - p.Q0).epsilon(1e-12));
  }

  SUBCASE("perfect plasticity has no hardening") {
    MaterialParams perfect;
    perfect.Qinf = perfect.Q0;
    for (double A : {0.0, 0.3, 2.0}) {
      CHECK(hardening_stress(A, perfect) == 0.0);
    }
  }

  SUBCASE("derivative consistency with the stored energy") {
    for (double A : {0.01, 0.2, 1.0, 3.0}) {
      const double h = 1e-7;
      const double fd = (psi_hardening(A + h, p) - psi_hardening(A - h, p)) / (2 * h);
      CHECK(hardening_stress(A, p) == doctest::Approx(fd).epsilon(1e-7));
    }
  }

  SUBCASE("monotone and bounded") {
    double prev = -1.0;
    for (double A = 0.0; A <= 5.0; A += 0.1) {
      const double q = hardening_stress(A, p);
      CHECK(q >= prev);
      CHECK(q <= p.Qinf - p.Q0);
      prev = q;
    }
  }

  SUBCASE("negative accumulated slip is rejected") {
    CHECK_THROWS_AS(hardening_stress(-0.1, p), std::invalid_argument);
    CHECK_THROWS_AS(psi_hardening(-0.1, p), std::invalid_argument);
  }
}

TEST_CASE("yield_function") {
  MaterialParams p;  // Q0 = 0.06
  CHECK(yield_function(0.06, 0.0, p) == 0.0);
  CHECK(yield_function(0.0, 0.0, p) == doctest::Approx(-0.06));
  CHECK(yield_function(0.08, 0.01, p) == doctest::Approx(0.01));

  SUBCASE("affine in tau") {
    for (double tau : {-0.3, 0.0, 0.5}) {
      const double delta = 0.0123;
      CHECK(yield_function(tau + delta, 0.02, p) - yield_function(tau, 0.02, p) ==
            doctest::Approx(delta).epsilon(1e-15));
    }
  }
}

TEST_CASE("psi_micromorphic") {
  const SlipCatalogue cat = planar2_catalogue();
  MaterialParams p;
  p.c1 = 0.1;
  p.c2 = 2.0;

  SUBCASE("vanishes when slack tracks alpha with no gradients") {
    Eigen::VectorXd alpha(2);
    alpha << 0.1, 0.3;
    MicromorphicPoint point;
    point.s = alpha;
    point.grad_s = Eigen::Matrix3Xd::Zero(3, 2);
    const auto [pen, nonl] = psi_micromorphic(alpha, point, cat, p);
    CHECK(pen == 0.0);
    CHECK(nonl == 0.0);
  }

  SUBCASE("c2 = 0 removes the gradient term") {
    MaterialParams local = p;
    local.c2 = 0.0;
    MicromorphicPoint point = MicromorphicPoint::zero(2);
    point.grad_s.setRandom();
    const auto [pen, nonl] =
        psi_micromorphic(Eigen::VectorXd::Zero(2), point, cat, local);
    CHECK(nonl == 0.0);
    CHECK(pen == 0.0);
  }

  SUBCASE("gradients orthogonal to the slip direction carry no energy") {
    MicromorphicPoint point = MicromorphicPoint::zero(2);
    // planar2 directions are +-e1; a gradient along e2 is orthogonal.
    point.grad_s.row(1).setConstant(3.0);
    const auto [pen, nonl] =
        psi_micromorphic(Eigen::VectorXd::Zero(2), point, cat, p);
    CHECK(nonl == 0.0);
  }

  SUBCASE("penalty quadratic in the gap") {
    Eigen::VectorXd alpha(2);
    alpha << 0.2, 0.0;
    MicromorphicPoint point = MicromorphicPoint::zero(2);
    const auto [pen, nonl] = psi_micromorphic(alpha, point, cat, p);
    CHECK(pen == doctest::Approx(0.5 * p.c1 * 0.04).epsilon(1e-14));
    CHECK(nonl == 0.0);
  }

  SUBCASE("dimension mismatch is an error") {
    MicromorphicPoint point = MicromorphicPoint::zero(3);
    CHECK_THROWS_AS(psi_micromorphic(Eigen::VectorXd::Zero(2), point, cat, p),
                    std::invalid_argument);
  }
}

TEST_CASE("material parameter validation") {
  MaterialParams p;
  CHECK_NOTHROW(p.validate());
  p.Qinf = 0.01;  // below Q0
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
