#ifndef SLIPFORM_SOLVERS_HPP
#define SLIPFORM_SOLVERS_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "slipform/potential.hpp"

namespace slipform {

enum class Algorithm {
  FbVariational,      // scaled regularized Fischer-Burmeister on d i_inc
  MinNcpVariational,  // Min-NCP / per-iteration active set on d i_inc
  AuglagVariational,  // augmented Lagrangian (multiplier-penalty) on d i_inc
  FbReturnMapping,    // same FB machinery on -phi_nonlocal (classic scheme)
};

std::string to_string(Algorithm alg);
Algorithm algorithm_from_string(const std::string& name);

struct SolverParams {
  Algorithm algorithm = Algorithm::FbVariational;
  double w = 21.1;              // FB scaling, GPa; default is the shear modulus
  double delta = 1e-10;         // FB regularization (dimensionless^2)
  double penalty_hat = 1.0;     // AL penalty start; rho = penalty_hat / mu
  double penalty_growth = 10.0;
  double penalty_cap = 1e6;
  double newton_tol = 21.1e-10; // GPa, on ||G||_inf; default 1e-10 * mu
  int max_newton = 50;
  int max_outer_al = 30;
  double outer_tol = 1e-8;      // AL stagnation tolerance on ||dl change||_inf
  double mu = 21.1;             // stress scale used for unit-free tolerances
  bool record_iterates = false; // keep per-iteration dlambda transcripts
  bool record_conditions = true;// SVD condition number per Newton matrix

  static SolverParams defaults_for(const MaterialParams& material);
  void validate() const;
};

struct SolveDiagnostics {
  int newton_iterations = 0;
  int outer_iterations = 0;                // AL only
  std::vector<double> condition_numbers;   // one entry per assembled Newton matrix
  double kkt_residual = 0.0;               // worst KKT violation at the root
  std::vector<int> active_set;             // indices with dlambda > 1e-8
  bool converged = false;
  int clamp_events = 0;                    // overshoot fallbacks taken
  bool fallback_used = false;              // globalized/continuation phases engaged
  std::vector<Eigen::VectorXd> iterates;   // filled iff record_iterates
};

/// Non-convergence or conditioning failure; carries the diagnostics
/// collected up to the failure.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, SolveDiagnostics diag)
      : std::runtime_error(what), diagnostics(std::move(diag)) {}
  SolveDiagnostics diagnostics;
};

struct SolveResult {
  Eigen::VectorXd dlambda;
  SolveDiagnostics diagnostics;
};

/// Scaled regularized Fischer-Burmeister residual
///   G_i = sqrt((w dl_i)^2 + a_i^2 + 2 delta) - w dl_i - a_i
/// for a given complementarity partner a (stress-like).
Eigen::VectorXd fb_residual_from(const Eigen::VectorXd& a, const Eigen::VectorXd& dlambda,
                                 const SolverParams& params);

/// Exact FB Jacobian given H = da/ddlambda; generally unsymmetric.
Eigen::MatrixXd fb_jacobian_from(const Eigen::VectorXd& a, const Eigen::MatrixXd& H,
                                 const Eigen::VectorXd& dlambda, const SolverParams& params);

/// FB residual of the variational update, a = d i_inc / d dlambda.
Eigen::VectorXd residual_fb(const StepContext& ctx, const Eigen::VectorXd& dlambda,
                            const SolverParams& params);

/// FB Jacobian of the variational update, using d2_i_inc.
Eigen::MatrixXd jacobian_fb(const StepContext& ctx, const Eigen::VectorXd& dlambda,
                            const SolverParams& params);

/// 2-norm condition number by dense SVD; +inf for singular input.
double condition_estimate(const Eigen::MatrixXd& J);

/// Each solver starts its Newton iteration at dlambda = 0 unless a warm
/// start is supplied (the FE assembly passes the previous global iteration's
/// root for branch continuity at non-unique states).
SolveResult solve_fb(const StepContext& ctx, const SolverParams& params,
                     const Eigen::VectorXd* warm_start = nullptr);
SolveResult solve_min_ncp(const StepContext& ctx, const SolverParams& params,
                          const Eigen::VectorXd* warm_start = nullptr);
SolveResult solve_auglag(const StepContext& ctx, const SolverParams& params,
                         const Eigen::VectorXd* warm_start = nullptr);
SolveResult solve_return_mapping_fb(const StepContext& ctx, const SolverParams& params,
                                    const Eigen::VectorXd* warm_start = nullptr);

/// Dispatch on params.algorithm.
SolveResult solve_local(const StepContext& ctx, const SolverParams& params,
                        const Eigen::VectorXd* warm_start = nullptr);

/// Worst violation of dl >= 0, a >= 0 and |dl_i a_i| <= delta/w, where a is
/// the algorithm's own driving force (d i_inc for the variational updates,
/// -phi_nonlocal for the return-mapping scheme).
double kkt_violation(const StepContext& ctx, const Eigen::VectorXd& dlambda,
                     const SolverParams& params);

/// Converged increment plus the updated state and stresses.
struct IncrementResult {
  Eigen::VectorXd dlambda;
  CrystalState state;
  Eigen::Matrix3d mandel;
  Eigen::Matrix3d first_piola;
  Eigen::Matrix3d kirchhoff;
  double psi = 0.0;  // energy of the updated state (next step's psi_prev)
  SolveDiagnostics diagnostics;
};

IncrementResult solve_increment(const StepContext& ctx, const SolverParams& params);

}  // namespace slipform

#endif  // SLIPFORM_SOLVERS_HPP
