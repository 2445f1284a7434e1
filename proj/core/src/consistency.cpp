#include "slipform/consistency.hpp"

#include <cmath>

namespace slipform {

ConsistencyResult consistency_limit_check(const MaterialParams& material,
                                          const SlipCatalogue& catalogue,
                                          const Orientation& orientation,
                                          Integrator integrator,
                                          const SolverParams& solver,
                                          double f12_target, double base_increment,
                                          int n_halvings) {
  ConsistencyResult result;

  double increment = base_increment;
  for (int run = 0; run <= n_halvings; ++run, increment *= 0.5) {
    const int n_steps = static_cast<int>(std::llround(f12_target / increment));

    StepContext ctx;
    ctx.prev = CrystalState::virgin(catalogue.size(), orientation.rotation);
    ctx.micromorphic = MicromorphicPoint::zero(catalogue.size());
    ctx.material = material;
    ctx.integrator = integrator;
    ctx.catalogue = &catalogue;

    for (int step = 1; step < n_steps; ++step) {
      ctx.F = Eigen::Matrix3d::Identity();
      ctx.F(0, 1) = increment * step;
      IncrementResult inc = solve_increment(ctx, solver);
      ctx.psi_prev = inc.psi;
      ctx.prev = inc.state;
    }

    // Mismatch between the variational driving force and the pointwise yield
    // functions at the last converged step.
    ctx.F = Eigen::Matrix3d::Identity();
    ctx.F(0, 1) = f12_target;
    const SolveResult last = solve_local(ctx, solver);
    const Eigen::VectorXd grad = d_i_inc(ctx, last.dlambda);
    const Eigen::VectorXd phi = phi_nonlocal(ctx, last.dlambda);
    result.increments.push_back(increment);
    result.residuals.push_back((grad + phi).lpNorm<Eigen::Infinity>());
  }

  // Least-squares slope of log(residual) against log(increment).
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < result.increments.size(); ++k) {
    if (result.residuals[k] <= 0.0) continue;
    const double x = std::log(result.increments[k]);
    const double y = std::log(result.residuals[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count >= 2) {
    result.observed_order = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  }
  return result;
}

}  // namespace slipform
