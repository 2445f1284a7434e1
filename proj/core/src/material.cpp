#include "slipform/material.hpp"

#include <cmath>
#include <stdexcept>

namespace slipform {

namespace {

void require_spd(const Eigen::Matrix3d& Ce, const char* who) {
  if ((Ce - Ce.transpose()).norm() > 1e-10 * Ce.norm()) {
    throw InvalidConfigurationError(std::string(who) + ": Ce is not symmetric");
  }
  if (Ce.determinant() <= 0.0 || Ce.trace() <= 0.0) {
    throw InvalidConfigurationError(std::string(who) + ": Ce is not positive definite");
  }
}

}  // namespace

void MaterialParams::validate() const {
  if (kappa <= 0.0 || mu <= 0.0) {
    throw std::invalid_argument("MaterialParams: kappa and mu must be positive");
  }
  if (Q0 <= 0.0) {
    throw std::invalid_argument("MaterialParams: Q0 must be positive");
  }
  if (Qinf < Q0) {
    throw std::invalid_argument("MaterialParams: Qinf must be >= Q0");
  }
  if (H <= 0.0) {
    throw std::invalid_argument("MaterialParams: H must be positive");
  }
  if (c1 < 0.0 || c2 < 0.0) {
    throw std::invalid_argument("MaterialParams: c1 and c2 must be nonnegative");
  }
}

MicromorphicPoint MicromorphicPoint::zero(int n_sys) {
  MicromorphicPoint point;
  point.s = Eigen::VectorXd::Zero(n_sys);
  point.grad_s = Eigen::Matrix3Xd::Zero(3, n_sys);
  return point;
}

double psi_elastic(const Eigen::Matrix3d& Ce, const MaterialParams& p) {
  require_spd(Ce, "psi_elastic");
  const double detCe = Ce.determinant();
  const double logJe = 0.5 * std::log(detCe);
  const double trCbar = std::exp(-2.0 / 3.0 * logJe) * Ce.trace();
  return 0.5 * p.kappa * logJe * logJe + 0.5 * p.mu * (trCbar - 3.0);
}

Eigen::Matrix3d mandel_stress(const Eigen::Matrix3d& Ce, const MaterialParams& p) {
  require_spd(Ce, "mandel_stress");
  const double detCe = Ce.determinant();
  const double logJe = 0.5 * std::log(detCe);
  const Eigen::Matrix3d cbar = std::exp(-2.0 / 3.0 * logJe) * Ce;
  Eigen::Matrix3d dev = cbar;
  dev.diagonal().array() -= cbar.trace() / 3.0;
  return p.kappa * logJe * Eigen::Matrix3d::Identity() + p.mu * dev;
}

Eigen::Matrix3d first_piola(const DeformationState& state, const MaterialParams& p) {
  // 2 dpsi/dCe = Ce^-1 Sigma, so P = Fe Ce^-1 Sigma Fp^-T.
  const Eigen::Matrix3d sigma = mandel_stress(state.Ce, p);
  return state.Fe * state.Ce.inverse() * sigma * state.Fp.inverse().transpose();
}

Eigen::Matrix3d first_piola(const Eigen::Matrix3d& F, const Eigen::Matrix3d& Fp,
                            const MaterialParams& p) {
  return first_piola(elastic_measures(F, Fp), p);
}

double psi_hardening(double A, const MaterialParams& p) {
  if (A < 0.0) {
    throw std::invalid_argument("psi_hardening: accumulated slip must be >= 0");
  }
  return (p.Qinf - p.Q0) * (A + p.H * std::exp(-A / p.H) - p.H);
}

double hardening_stress(double A, const MaterialParams& p) {
  if (A < 0.0) {
    throw std::invalid_argument("hardening_stress: accumulated slip must be >= 0");
  }
  return (p.Qinf - p.Q0) * (1.0 - std::exp(-A / p.H));
}

std::pair<double, double> psi_micromorphic(const Eigen::VectorXd& alpha,
                                           const MicromorphicPoint& point,
                                           const SlipCatalogue& catalogue,
                                           const MaterialParams& p) {
  const int n = catalogue.size();
  if (alpha.size() != n || point.s.size() != n || point.grad_s.cols() != n) {
    throw std::invalid_argument("psi_micromorphic: dimension mismatch");
  }
  double pen = 0.0;
  double nonl = 0.0;
  for (int i = 0; i < n; ++i) {
    const double gap = alpha(i) - point.s(i);
    pen += gap * gap;
    const double proj = point.grad_s.col(i).dot(catalogue[i].direction);
    nonl += proj * proj;
  }
  return {0.5 * p.c1 * pen, 0.5 * p.c2 * nonl};
}

}  // namespace slipform
