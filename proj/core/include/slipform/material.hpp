#ifndef SLIPFORM_MATERIAL_HPP
#define SLIPFORM_MATERIAL_HPP

#include <Eigen/Dense>

#include <utility>

#include "slipform/kinematics.hpp"
#include "slipform/slip_geometry.hpp"

namespace slipform {

/// Material constants. Stresses in GPa, lengths in micrometres; c2 is stored
/// in GPa*um^2 (the config loader converts from the MPa*m input unit).
struct MaterialParams {
  double kappa = 49.98;  // bulk modulus, GPa
  double mu = 21.1;      // shear modulus, GPa
  double Q0 = 0.06;      // initial yield limit, GPa
  double Qinf = 0.06;    // saturation yield stress, GPa (== Q0: no hardening)
  double H = 1.0;        // hardening saturation parameter
  double c1 = 0.0;       // micromorphic penalty modulus, GPa
  double c2 = 0.0;       // gradient-hardening modulus, GPa*um^2

  void validate() const;
};

/// Per-system accumulated slip magnitudes; alpha_i >= 0 and non-decreasing
/// across accepted steps.
struct InternalState {
  Eigen::VectorXd alpha;

  double accumulated() const { return alpha.sum(); }  // A = sum_i alpha_i
};

/// Micromorphic slack values and their spatial gradients at one material
/// point. grad_s columns are per-system 3-vectors (1/um).
struct MicromorphicPoint {
  Eigen::VectorXd s;
  Eigen::Matrix3Xd grad_s;

  static MicromorphicPoint zero(int n_sys);
};

/// Neo-Hooke-like isotropic energy
/// psi_e = 0.5*kappa*(ln Je)^2 + 0.5*mu*(tr Cbar - 3), Cbar = Je^(-2/3) Ce.
double psi_elastic(const Eigen::Matrix3d& Ce, const MaterialParams& p);

/// Mandel stress Sigma = 2 Ce dpsi_e/dCe = kappa ln(Je) I + mu dev(Cbar).
Eigen::Matrix3d mandel_stress(const Eigen::Matrix3d& Ce, const MaterialParams& p);

/// First Piola-Kirchhoff stress P = 2 Fe dpsi_e/dCe Fp^-T.
Eigen::Matrix3d first_piola(const Eigen::Matrix3d& F, const Eigen::Matrix3d& Fp,
                            const MaterialParams& p);
Eigen::Matrix3d first_piola(const DeformationState& state, const MaterialParams& p);

/// Kirchhoff stress tau = P F^T.
inline Eigen::Matrix3d kirchhoff_stress(const Eigen::Matrix3d& P,
                                        const Eigen::Matrix3d& F) {
  return P * F.transpose();
}

/// Hardening energy psi_p(A) = (Qinf-Q0) [A + H exp(-A/H) - H].
double psi_hardening(double A, const MaterialParams& p);

/// Q(A) = dpsi_p/dA = (Qinf-Q0)(1 - exp(-A/H)), in [0, Qinf-Q0).
double hardening_stress(double A, const MaterialParams& p);

/// One-sided yield function phi = tau - (Q0 + Q).
inline double yield_function(double tau, double Q, const MaterialParams& p) {
  return tau - (p.Q0 + Q);
}

/// (psi_pen, psi_nonl) = (0.5 c1 sum (alpha_i - s_i)^2,
///                        0.5 c2 sum (grad s_i . M_i)^2).
std::pair<double, double> psi_micromorphic(const Eigen::VectorXd& alpha,
                                           const MicromorphicPoint& point,
                                           const SlipCatalogue& catalogue,
                                           const MaterialParams& p);

}  // namespace slipform

#endif  // SLIPFORM_MATERIAL_HPP
