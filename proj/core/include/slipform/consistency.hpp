#ifndef SLIPFORM_CONSISTENCY_HPP
#define SLIPFORM_CONSISTENCY_HPP

#include <vector>

#include "slipform/solvers.hpp"

namespace slipform {

/// Result of the time-discretization consistency study: the rate at which
/// max_i |d i_inc/d dl_i + phi_i| at converged steps vanishes as the load
/// increment is halved. All schemes are first-order accurate, so the fitted
/// order should be >= 1 up to measurement noise.
struct ConsistencyResult {
  std::vector<double> increments;  // load increment per run
  std::vector<double> residuals;   // max_i |grad_i + phi_i| at the final step
  double observed_order = 0.0;     // least-squares slope of log r vs log dF
};

/// Drives simple shear F = I + F12 e1 (x) e2 to f12_target with the FB
/// solver, halving the increment n_halvings times starting from
/// base_increment.
ConsistencyResult consistency_limit_check(const MaterialParams& material,
                                          const SlipCatalogue& catalogue,
                                          const Orientation& orientation,
                                          Integrator integrator,
                                          const SolverParams& solver,
                                          double f12_target, double base_increment,
                                          int n_halvings);

}  // namespace slipform

#endif  // SLIPFORM_CONSISTENCY_HPP
