#ifndef SLIPFORM_DRIVERS_HPP
#define SLIPFORM_DRIVERS_HPP

#include <string>
#include <vector>

#include "slipform/config.hpp"
#include "slipform/solvers.hpp"

namespace slipform {

/// One converged load step of a strain-driven material-point run.
struct ShearStepRecord {
  double load = 0.0;        // driven F component (F12 for simple shear)
  double tau12 = 0.0;       // Kirchhoff stress, GPa
  int n_active = 0;
  int newton_iters = 0;
  int outer_iters = 0;
  double cond_first = 0.0;  // first assembled Newton matrix
  double cond_last = 0.0;   // Jacobian at the converged root
  double dlambda_sum = 0.0;
  double kkt_residual = 0.0;
  double det_fp = 1.0;
};

struct ShearRunResult {
  std::vector<ShearStepRecord> steps;
  CrystalState final_state;
};

/// Strain-driven path F = I + load * e_row (x) e_col in equidistant steps.
/// Solver failures abort with the failing step index in the message.
ShearRunResult run_strain_path(const MaterialParams& material, const SolverParams& solver,
                               const SlipCatalogue& catalogue, const Orientation& orientation,
                               Integrator integrator, double range, double increment,
                               int row = 0, int col = 1);

/// Config-driven simple-shear experiment (loading.component fixed to F12).
ShearRunResult run_simple_shear(const RunConfig& cfg);

/// custom_path: same machinery, any off-diagonal or diagonal F entry.
ShearRunResult run_custom_path(const RunConfig& cfg);

void write_shear_csv(const ShearRunResult& run, const std::string& path);

/// Condition-number instrumentation of the scaled FB solver at snapshot
/// steps, one run per scaling value.
struct WSweepRecord {
  double w_scale = 0.0;
  double load = 0.0;        // snapshot F12
  int iteration = 0;        // Newton iteration index (1-based)
  double condition = 0.0;
};

struct WSweepSummary {
  double w_scale = 0.0;
  double load = 0.0;
  bool converged = false;
  int newton_iters = 0;
  double final_condition = 0.0;  // condition at the converged root
};

struct WSweepResult {
  std::vector<WSweepRecord> iterations;
  std::vector<WSweepSummary> summaries;
};

/// Runs the shear path once per scaling value and records per-iteration
/// condition numbers at the snapshot steps. Non-convergence is recorded in
/// the summary, not fatal. Unless the config sets them explicitly, the
/// orientation defaults to (pi/6, pi/4, 0), the integrator to backward Euler
/// and the increment to 2e-2.
WSweepResult run_w_sweep(const RunConfig& cfg, const std::vector<double>& w_scales);
WSweepResult run_w_sweep(const RunConfig& cfg);

void write_w_sweep_csv(const WSweepResult& sweep, const std::string& iter_path,
                       const std::string& summary_path);

/// Entry point behind `slipform run`: dispatches on cfg.experiment, writes
/// CSV/VTK outputs and the manifest into cfg.output.dir.
void run_experiment(const RunConfig& cfg);

}  // namespace slipform

#endif  // SLIPFORM_DRIVERS_HPP
