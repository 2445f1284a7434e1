#ifndef SLIPFORM_POTENTIAL_HPP
#define SLIPFORM_POTENTIAL_HPP

#include <Eigen/Dense>

#include "slipform/material.hpp"

namespace slipform {

/// Converged per-point history carried from step to step.
struct CrystalState {
  Eigen::Matrix3d Fp = Eigen::Matrix3d::Identity();
  Eigen::VectorXd alpha;          // accumulated slips, >= 0
  Eigen::VectorXd dlambda_prev;   // previous converged increments (AL restart)

  static CrystalState virgin(int n_sys, const Eigen::Matrix3d& fp_init =
                                            Eigen::Matrix3d::Identity());
};

/// Frozen inputs of one local incremental problem. The catalogue is owned by
/// the caller and must outlive the context.
struct StepContext {
  Eigen::Matrix3d F = Eigen::Matrix3d::Identity();
  CrystalState prev;
  MicromorphicPoint micromorphic;
  MaterialParams material;
  Integrator integrator = Integrator::ExpMap;
  const SlipCatalogue* catalogue = nullptr;
  double psi_prev = 0.0;  // energy of the previous state; makes i_inc(0) = 0
                          // for a frozen deformation gradient

  int n_sys() const { return catalogue->size(); }
};

/// Kinematic/stress quantities at a trial increment.
struct LocalState {
  Eigen::Matrix3d dLp;
  Eigen::Matrix3d Fp;
  Eigen::Matrix3d Fe;
  Eigen::Matrix3d Ce;
  Eigen::Matrix3d sigma;   // Mandel stress
  Eigen::VectorXd tau;     // Schmid stresses
  Eigen::VectorXd alpha;   // alpha_prev + dlambda
  double A = 0.0;
  double Q = 0.0;
};

LocalState evaluate_local_state(const StepContext& ctx, const Eigen::VectorXd& dlambda);

/// Helmholtz energy of a full state (elastic + hardening + micromorphic).
double total_energy(const Eigen::Matrix3d& F, const Eigen::Matrix3d& Fp,
                    const Eigen::VectorXd& alpha, const MicromorphicPoint& micromorphic,
                    const MaterialParams& material, const SlipCatalogue& catalogue);

/// Volume-specific incremental energy
///   i_inc = Psi(F, Fp(dl), alpha(dl), s, grad s) - Psi_prev + sum_i Q0 dl_i.
/// Defined and smooth for any finite dlambda; the admissible set dl >= 0 is
/// enforced by the solvers, not here.
double i_inc(const StepContext& ctx, const Eigen::VectorXd& dlambda);

/// Exact gradient of i_inc, obtained by direct differentiation of the
/// implemented energy:
///   d i_inc/d dl_i = -Sigma : [dFp/ddl_i Fp^-1] + Q0 + Q(A) + c1 (alpha_i - s_i).
/// The elastic term is evaluated through the adjoint of the integrator's
/// derivative, so one Frechet evaluation serves all systems.
Eigen::VectorXd d_i_inc(const StepContext& ctx, const Eigen::VectorXd& dlambda);
void d_i_inc(const StepContext& ctx, const Eigen::VectorXd& dlambda,
             Eigen::VectorXd& grad);

/// Symmetrized Hessian of i_inc from one-sided finite differences of the
/// analytic gradient, step 1e-7 * max(1, |dl_i|).
Eigen::MatrixXd d2_i_inc(const StepContext& ctx, const Eigen::VectorXd& dlambda);

/// Pointwise non-local yield functions
///   phi_i = tau_i - (Q0 + Q(A) + c1 (alpha_i - s_i))
/// evaluated at the trial increment. For catalogues whose active systems are
/// mutually orthogonal this equals -d i_inc/d dl exactly; in general the two
/// agree to first order in the step size.
Eigen::VectorXd phi_nonlocal(const StepContext& ctx, const Eigen::VectorXd& dlambda);
Eigen::VectorXd phi_nonlocal(const StepContext& ctx, const LocalState& state);

}  // namespace slipform

#endif  // SLIPFORM_POTENTIAL_HPP
