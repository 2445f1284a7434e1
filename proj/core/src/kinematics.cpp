#include "slipform/kinematics.hpp"

#include <cmath>
#include <string>

namespace slipform {

namespace {

// Scaling and squaring with a 13-term Taylor kernel. With the induced 1-norm
// scaled below 1/4 the truncation error is ~1e-20, far below roundoff.
template <int N>
Eigen::Matrix<double, N, N> expm_taylor(Eigen::Matrix<double, N, N> a) {
  using M = Eigen::Matrix<double, N, N>;
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.25) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.25)));
    a *= std::ldexp(1.0, -squarings);
  }
  M result = M::Identity();
  M term = M::Identity();
  for (int k = 1; k <= 13; ++k) {
    term = M(term * a) / static_cast<double>(k);
    result += term;
  }
  for (int i = 0; i < squarings; ++i) {
    result = M(result * result);
  }
  return result;
}

}  // namespace

Eigen::Matrix3d expm(const Eigen::Matrix3d& A) { return expm_taylor<3>(A); }

Eigen::Matrix3d plastic_flow_increment(const Eigen::VectorXd& dlambda,
                                       const SlipCatalogue& catalogue) {
  if (dlambda.size() != catalogue.size()) {
    throw std::invalid_argument("plastic_flow_increment: dlambda size " +
                                std::to_string(dlambda.size()) +
                                " does not match catalogue size " +
                                std::to_string(catalogue.size()));
  }
  Eigen::Matrix3d dLp = Eigen::Matrix3d::Zero();
  for (int i = 0; i < catalogue.size(); ++i) {
    dLp.noalias() += dlambda(i) * catalogue[i].dyad();
  }
  return dLp;
}

Eigen::Matrix3d update_fp_expmap(const Eigen::Matrix3d& dLp,
                                 const Eigen::Matrix3d& fp_prev) {
  return expm(dLp) * fp_prev;
}

Eigen::Matrix3d update_fp_backward_euler(const Eigen::Matrix3d& dLp,
                                         const Eigen::Matrix3d& fp_prev) {
  const Eigen::Matrix3d a = Eigen::Matrix3d::Identity() - dLp;
  const double det = a.determinant();
  if (std::abs(det) < 1e-12) {
    throw StepTooLargeError("backward Euler update: (I - dLp) is singular");
  }
  return a.inverse() * fp_prev;
}

Eigen::Matrix3d update_fp(Integrator integrator, const Eigen::Matrix3d& dLp,
                          const Eigen::Matrix3d& fp_prev) {
  return integrator == Integrator::ExpMap ? update_fp_expmap(dLp, fp_prev)
                                          : update_fp_backward_euler(dLp, fp_prev);
}

void check_step_size(const Eigen::VectorXd& dlambda) {
  for (int i = 0; i < dlambda.size(); ++i) {
    if (std::abs(dlambda(i)) > 1.0) {
      throw StepTooLargeError("plastic increment exceeds 1 on system " +
                              std::to_string(i + 1));
    }
  }
}

DeformationState elastic_measures(const Eigen::Matrix3d& F,
                                  const Eigen::Matrix3d& Fp) {
  if (F.determinant() <= 0.0) {
    throw InvalidConfigurationError("elastic_measures: det F <= 0");
  }
  const double detFp = Fp.determinant();
  if (detFp <= 0.0) {
    throw InvalidConfigurationError("elastic_measures: det Fp <= 0");
  }
  DeformationState state;
  state.F = F;
  state.Fp = Fp;
  state.Fe = F * Fp.inverse();
  state.Ce = state.Fe.transpose() * state.Fe;
  state.Je = state.Fe.determinant();
  if (state.Je <= 0.0) {
    throw InvalidConfigurationError("elastic_measures: det Fe <= 0");
  }
  return state;
}

Eigen::Matrix3d expm_frechet(const Eigen::Matrix3d& A, const Eigen::Matrix3d& E) {
  // The derivative is linear in E; normalizing E keeps the augmented norm
  // (and with it the number of squarings) governed by A alone.
  const double escale = E.cwiseAbs().colwise().sum().maxCoeff();
  if (escale == 0.0) return Eigen::Matrix3d::Zero();
  Eigen::Matrix<double, 6, 6> aug = Eigen::Matrix<double, 6, 6>::Zero();
  aug.topLeftCorner<3, 3>() = A;
  aug.topRightCorner<3, 3>() = E / escale;
  aug.bottomRightCorner<3, 3>() = A;
  const Eigen::Matrix<double, 6, 6> e = expm_taylor<6>(aug);
  return escale * e.topRightCorner<3, 3>();
}

Eigen::Matrix3d dFp_ddlambda(int i, const Eigen::Matrix3d& dLp,
                             const Eigen::Matrix3d& fp_prev,
                             Integrator integrator,
                             const SlipCatalogue& catalogue) {
  if (i < 0 || i >= catalogue.size()) {
    throw std::invalid_argument("dFp_ddlambda: system index out of range");
  }
  const Eigen::Matrix3d dyad = catalogue[i].dyad();
  if (integrator == Integrator::ExpMap) {
    return expm_frechet(dLp, dyad) * fp_prev;
  }
  const Eigen::Matrix3d a = Eigen::Matrix3d::Identity() - dLp;
  const double det = a.determinant();
  if (std::abs(det) < 1e-12) {
    throw StepTooLargeError("dFp_ddlambda: (I - dLp) is singular");
  }
  const Eigen::Matrix3d ainv = a.inverse();
  return ainv * dyad * ainv * fp_prev;
}

}  // namespace slipform
