#ifndef SLIPFORM_KINEMATICS_HPP
#define SLIPFORM_KINEMATICS_HPP

#include <Eigen/Dense>

#include <stdexcept>

#include "slipform/slip_geometry.hpp"

namespace slipform {

/// Time integrator for Fp_dot = Lp * Fp over one increment.
enum class Integrator {
  ExpMap,         // Fp = exp(dLp) * Fp_prev, unimodular for traceless dLp
  BackwardEuler,  // Fp = (I - dLp)^-1 * Fp_prev, no isochoric projection
};

/// Thrown when a plastic increment is outside the integrators' accuracy
/// regime or renders (I - dLp) singular.
class StepTooLargeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown on non-positive determinants of F, Fp or Fe.
class InvalidConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Multiplicative kinematic state derived from F and Fp.
struct DeformationState {
  Eigen::Matrix3d F;
  Eigen::Matrix3d Fp;
  Eigen::Matrix3d Fe;    // F * Fp^-1
  Eigen::Matrix3d Ce;    // Fe^T * Fe
  double Je = 1.0;       // det Fe
};

/// dLp = sum_i dlambda_i M_i (x) N_i. Entries are expected nonnegative;
/// the result is traceless because M_i . N_i = 0.
Eigen::Matrix3d plastic_flow_increment(const Eigen::VectorXd& dlambda,
                                       const SlipCatalogue& catalogue);

Eigen::Matrix3d update_fp_expmap(const Eigen::Matrix3d& dLp,
                                 const Eigen::Matrix3d& fp_prev);

Eigen::Matrix3d update_fp_backward_euler(const Eigen::Matrix3d& dLp,
                                         const Eigen::Matrix3d& fp_prev);

Eigen::Matrix3d update_fp(Integrator integrator, const Eigen::Matrix3d& dLp,
                          const Eigen::Matrix3d& fp_prev);

/// Guard shared by both integrators: per-system increments above one are
/// rejected before they silently destroy accuracy.
void check_step_size(const Eigen::VectorXd& dlambda);

DeformationState elastic_measures(const Eigen::Matrix3d& F,
                                  const Eigen::Matrix3d& Fp);

/// Exact integrator-consistent derivative dFp/ddlambda_i.
/// ExpMap uses the Frechet derivative of the matrix exponential (computed
/// from the 6x6 block-triangular augmented matrix); BackwardEuler is closed
/// form: (I-dLp)^-1 * (M_i (x) N_i) * (I-dLp)^-1 * Fp_prev.
Eigen::Matrix3d dFp_ddlambda(int i, const Eigen::Matrix3d& dLp,
                             const Eigen::Matrix3d& fp_prev,
                             Integrator integrator,
                             const SlipCatalogue& catalogue);

/// Matrix exponential by scaling and squaring with a fixed-order (13-term)
/// Taylor kernel, exact to machine precision for the step sizes the
/// integrators accept.
Eigen::Matrix3d expm(const Eigen::Matrix3d& A);

/// Frechet derivative of the matrix exponential at A in direction E,
/// read off the top-right block of exp([[A,E],[0,A]]).
Eigen::Matrix3d expm_frechet(const Eigen::Matrix3d& A, const Eigen::Matrix3d& E);

}  // namespace slipform

#endif  // SLIPFORM_KINEMATICS_HPP
