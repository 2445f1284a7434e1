#include "slipform/potential.hpp"

#include <cmath>
#include <stdexcept>

namespace slipform {

namespace {

// Smooth extensions of the hardening formulas; solver iterates may probe
// slightly outside alpha >= 0 and the energy must stay differentiable there.
double psi_hardening_raw(double A, const MaterialParams& p) {
  return (p.Qinf - p.Q0) * (A + p.H * std::exp(-A / p.H) - p.H);
}

double hardening_stress_raw(double A, const MaterialParams& p) {
  return (p.Qinf - p.Q0) * (1.0 - std::exp(-A / p.H));
}

double psi_elastic_raw(const Eigen::Matrix3d& Ce, const MaterialParams& p) {
  const double detCe = Ce.determinant();
  if (!(detCe > 0.0)) {
    throw InvalidConfigurationError("i_inc: det Ce <= 0 at trial increment");
  }
  const double logJe = 0.5 * std::log(detCe);
  const double trCbar = std::exp(-2.0 / 3.0 * logJe) * Ce.trace();
  return 0.5 * p.kappa * logJe * logJe + 0.5 * p.mu * (trCbar - 3.0);
}

Eigen::Matrix3d mandel_raw(const Eigen::Matrix3d& Ce, const MaterialParams& p) {
  const double detCe = Ce.determinant();
  if (!(detCe > 0.0)) {
    throw InvalidConfigurationError("i_inc: det Ce <= 0 at trial increment");
  }
  const double logJe = 0.5 * std::log(detCe);
  const Eigen::Matrix3d cbar = std::exp(-2.0 / 3.0 * logJe) * Ce;
  Eigen::Matrix3d sigma = p.mu * cbar;
  sigma.diagonal().array() += p.kappa * logJe - p.mu * cbar.trace() / 3.0;
  return sigma;
}

}  // namespace

CrystalState CrystalState::virgin(int n_sys, const Eigen::Matrix3d& fp_init) {
  CrystalState state;
  state.Fp = fp_init;
  state.alpha = Eigen::VectorXd::Zero(n_sys);
  state.dlambda_prev = Eigen::VectorXd::Zero(n_sys);
  return state;
}

LocalState evaluate_local_state(const StepContext& ctx, const Eigen::VectorXd& dlambda) {
  const SlipCatalogue& cat = *ctx.catalogue;
  LocalState st;
  st.dLp = plastic_flow_increment(dlambda, cat);
  st.Fp = update_fp(ctx.integrator, st.dLp, ctx.prev.Fp);
  st.Fe = ctx.F * st.Fp.inverse();
  st.Ce = st.Fe.transpose() * st.Fe;
  st.sigma = mandel_raw(st.Ce, ctx.material);
  st.tau.resize(cat.size());
  for (int i = 0; i < cat.size(); ++i) {
    st.tau(i) = schmid_stress(st.sigma, cat[i]);
  }
  st.alpha = ctx.prev.alpha + dlambda;
  st.A = st.alpha.sum();
  st.Q = hardening_stress_raw(st.A, ctx.material);
  return st;
}

double total_energy(const Eigen::Matrix3d& F, const Eigen::Matrix3d& Fp,
                    const Eigen::VectorXd& alpha, const MicromorphicPoint& micromorphic,
                    const MaterialParams& material, const SlipCatalogue& catalogue) {
  const Eigen::Matrix3d Fe = F * Fp.inverse();
  const Eigen::Matrix3d Ce = Fe.transpose() * Fe;
  double psi = psi_elastic_raw(Ce, material) + psi_hardening_raw(alpha.sum(), material);
  if (material.c1 > 0.0 || material.c2 > 0.0) {
    const auto [pen, nonl] = psi_micromorphic(alpha, micromorphic, catalogue, material);
    psi += pen + nonl;
  }
  return psi;
}

double i_inc(const StepContext& ctx, const Eigen::VectorXd& dlambda) {
  const SlipCatalogue& cat = *ctx.catalogue;
  const Eigen::Matrix3d dLp = plastic_flow_increment(dlambda, cat);
  const Eigen::Matrix3d Fp = update_fp(ctx.integrator, dLp, ctx.prev.Fp);
  const Eigen::VectorXd alpha = ctx.prev.alpha + dlambda;
  const double psi =
      total_energy(ctx.F, Fp, alpha, ctx.micromorphic, ctx.material, cat);
  return psi - ctx.psi_prev + ctx.material.Q0 * dlambda.sum();
}

void d_i_inc(const StepContext& ctx, const Eigen::VectorXd& dlambda,
             Eigen::VectorXd& grad) {
  const SlipCatalogue& cat = *ctx.catalogue;
  const int n = cat.size();
  const MaterialParams& mat = ctx.material;

  const Eigen::Matrix3d dLp = plastic_flow_increment(dlambda, cat);
  const Eigen::Matrix3d Fp = update_fp(ctx.integrator, dLp, ctx.prev.Fp);
  const Eigen::Matrix3d Fe = ctx.F * Fp.inverse();
  const Eigen::Matrix3d Ce = Fe.transpose() * Fe;
  const Eigen::Matrix3d sigma = mandel_raw(Ce, mat);

  // The elastic part is -Sigma : [dFp/ddl_i Fp^-1]. Instead of one Frechet
  // derivative per system, move the integrator derivative onto Sigma with
  // the adjoint identity <L(A,P), W> = <P, L(A^T,W)> and take 24 dot
  // products with the Schmid dyads.
  Eigen::Matrix3d T;
  if (ctx.integrator == Integrator::BackwardEuler) {
    // dFp/ddl_i Fp^-1 = (I - dLp)^-1 P_i, so T = (I - dLp)^-T Sigma.
    const Eigen::Matrix3d a = Eigen::Matrix3d::Identity() - dLp;
    if (std::abs(a.determinant()) < 1e-12) {
      throw StepTooLargeError("d_i_inc: (I - dLp) is singular");
    }
    T = a.transpose().partialPivLu().solve(sigma);
  } else {
    // dFp/ddl_i Fp^-1 = L_exp(dLp, P_i) exp(-dLp).
    const Eigen::Matrix3d w = sigma * expm(-dLp.transpose());
    T = expm_frechet(dLp.transpose(), w);
  }

  const double A = ctx.prev.alpha.sum() + dlambda.sum();
  const double q = hardening_stress_raw(A, mat);

  grad.resize(n);
  for (int i = 0; i < n; ++i) {
    grad(i) = -T.cwiseProduct(cat[i].dyad()).sum() + mat.Q0 + q;
    if (mat.c1 > 0.0) {
      grad(i) += mat.c1 * (ctx.prev.alpha(i) + dlambda(i) - ctx.micromorphic.s(i));
    }
  }
}

Eigen::VectorXd d_i_inc(const StepContext& ctx, const Eigen::VectorXd& dlambda) {
  Eigen::VectorXd grad;
  d_i_inc(ctx, dlambda, grad);
  return grad;
}

Eigen::MatrixXd d2_i_inc(const StepContext& ctx, const Eigen::VectorXd& dlambda) {
  const int n = ctx.n_sys();
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd g0, g1;
  d_i_inc(ctx, dlambda, g0);
  Eigen::VectorXd probe = dlambda;
  for (int j = 0; j < n; ++j) {
    const double h = 1e-7 * std::max(1.0, std::abs(dlambda(j)));
    probe(j) += h;
    d_i_inc(ctx, probe, g1);
    probe(j) = dlambda(j);
    hess.col(j) = (g1 - g0) / h;
  }
  // The exact Hessian is symmetric; symmetrizing removes the leading
  // one-sided finite-difference error.
  return 0.5 * (hess + hess.transpose());
}

Eigen::VectorXd phi_nonlocal(const StepContext& ctx, const LocalState& state) {
  const int n = ctx.n_sys();
  Eigen::VectorXd phi(n);
  for (int i = 0; i < n; ++i) {
    phi(i) = state.tau(i) - (ctx.material.Q0 + state.Q);
    if (ctx.material.c1 > 0.0) {
      phi(i) -= ctx.material.c1 * (state.alpha(i) - ctx.micromorphic.s(i));
    }
  }
  return phi;
}

Eigen::VectorXd phi_nonlocal(const StepContext& ctx, const Eigen::VectorXd& dlambda) {
  return phi_nonlocal(ctx, evaluate_local_state(ctx, dlambda));
}

}  // namespace slipform
