#include "slipform/drivers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "slipform/fem.hpp"

namespace slipform {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ShearRunResult run_strain_path(const MaterialParams& material, const SolverParams& solver,
                               const SlipCatalogue& catalogue, const Orientation& orientation,
                               Integrator integrator, double range, double increment,
                               int row, int col) {
  const int n_steps = static_cast<int>(std::llround(range / increment));
  ShearRunResult run;
  run.steps.reserve(n_steps);

  StepContext ctx;
  ctx.prev = CrystalState::virgin(catalogue.size(), orientation.rotation);
  ctx.micromorphic = MicromorphicPoint::zero(catalogue.size());
  ctx.material = material;
  ctx.integrator = integrator;
  ctx.catalogue = &catalogue;
  ctx.psi_prev = total_energy(Eigen::Matrix3d::Identity(), ctx.prev.Fp, ctx.prev.alpha,
                              ctx.micromorphic, material, catalogue);

  for (int step = 1; step <= n_steps; ++step) {
    ctx.F = Eigen::Matrix3d::Identity();
    ctx.F(row, col) += increment * step;
    IncrementResult inc;
    try {
      inc = solve_increment(ctx, solver);
    } catch (const SolverError& err) {
      throw std::runtime_error("load step " + std::to_string(step) +
                               " (load = " + fmt17(increment * step) +
                               "): " + err.what());
    } catch (const StepTooLargeError& err) {
      throw std::runtime_error("load step " + std::to_string(step) +
                               " (load = " + fmt17(increment * step) +
                               "): " + err.what());
    }

    ShearStepRecord rec;
    rec.load = increment * step;
    rec.tau12 = inc.kirchhoff(0, 1);
    rec.n_active = static_cast<int>(inc.diagnostics.active_set.size());
    rec.newton_iters = inc.diagnostics.newton_iterations;
    rec.outer_iters = inc.diagnostics.outer_iterations;
    if (!inc.diagnostics.condition_numbers.empty()) {
      rec.cond_first = inc.diagnostics.condition_numbers.front();
      rec.cond_last = inc.diagnostics.condition_numbers.back();
    }
    rec.dlambda_sum = inc.dlambda.cwiseMax(0.0).sum();
    rec.kkt_residual = inc.diagnostics.kkt_residual;
    rec.det_fp = inc.state.Fp.determinant();
    run.steps.push_back(rec);

    ctx.prev = inc.state;
    ctx.psi_prev = inc.psi;
  }
  run.final_state = ctx.prev;
  return run;
}

ShearRunResult run_simple_shear(const RunConfig& cfg) {
  const SlipCatalogue catalogue = catalogue_by_name(cfg.catalogue_name);
  return run_strain_path(cfg.material, cfg.solver, catalogue, cfg.orientation,
                         cfg.integrator, cfg.loading.range, cfg.loading.increment, 0, 1);
}

ShearRunResult run_custom_path(const RunConfig& cfg) {
  const SlipCatalogue catalogue = catalogue_by_name(cfg.catalogue_name);
  return run_strain_path(cfg.material, cfg.solver, catalogue, cfg.orientation,
                         cfg.integrator, cfg.loading.range, cfg.loading.increment,
                         cfg.loading.row(), cfg.loading.col());
}

void write_shear_csv(const ShearRunResult& run, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV file '" + path + "'");
  out << "step,F12,tau12_gpa,n_active,newton_iters,outer_iters,cond_first,cond_last,"
         "dlambda_sum,kkt_residual,det_fp\n";
  int step = 1;
  for (const auto& rec : run.steps) {
    out << step++ << ',' << fmt17(rec.load) << ',' << fmt17(rec.tau12) << ','
        << rec.n_active << ',' << rec.newton_iters << ',' << rec.outer_iters << ','
        << fmt17(rec.cond_first) << ',' << fmt17(rec.cond_last) << ','
        << fmt17(rec.dlambda_sum) << ',' << fmt17(rec.kkt_residual) << ','
        << fmt17(rec.det_fp) << '\n';
  }
}

WSweepResult run_w_sweep(const RunConfig& cfg) { return run_w_sweep(cfg, cfg.sweep.w_scales); }

WSweepResult run_w_sweep(const RunConfig& cfg, const std::vector<double>& w_scales) {
  // Unless overridden, use the instrumented setup: backward Euler, coarse
  // increments and the tilted orientation that activates many systems.
  Orientation orientation = cfg.orientation;
  if (!cfg.is_set("orientation.a") && !cfg.is_set("orientation.b") &&
      !cfg.is_set("orientation.c")) {
    orientation = rotation_from_euler(std::numbers::pi / 6.0, std::numbers::pi / 4.0, 0.0);
  }
  Integrator integrator =
      cfg.is_set("time_integration") ? cfg.integrator : Integrator::BackwardEuler;
  const double increment = cfg.is_set("loading.increment") ? cfg.loading.increment : 2e-2;

  const SlipCatalogue catalogue = catalogue_by_name(cfg.catalogue_name);
  const int n = catalogue.size();

  double max_snapshot = 0.0;
  for (double s : cfg.sweep.snapshots) max_snapshot = std::max(max_snapshot, s);
  const int n_steps = static_cast<int>(std::llround(max_snapshot / increment));

  WSweepResult result;
  for (double scale : w_scales) {
    SolverParams solver = cfg.solver;
    solver.w = scale * cfg.material.mu;
    solver.record_conditions = true;

    StepContext ctx;
    ctx.prev = CrystalState::virgin(n, orientation.rotation);
    ctx.micromorphic = MicromorphicPoint::zero(n);
    ctx.material = cfg.material;
    ctx.integrator = integrator;
    ctx.catalogue = &catalogue;

    bool aborted = false;
    for (int step = 1; step <= n_steps && !aborted; ++step) {
      const double load = increment * step;
      ctx.F = Eigen::Matrix3d::Identity();
      ctx.F(0, 1) = load;

      const bool snapshot =
          std::any_of(cfg.sweep.snapshots.begin(), cfg.sweep.snapshots.end(),
                      [&](double s) { return std::abs(s - load) < 1e-12; });
      try {
        IncrementResult inc = solve_increment(ctx, solver);
        if (snapshot) {
          const auto& conds = inc.diagnostics.condition_numbers;
          for (std::size_t k = 0; k < conds.size(); ++k) {
            result.iterations.push_back(
                {scale, load, static_cast<int>(k + 1), conds[k]});
          }
          result.summaries.push_back({scale, load, true,
                                      inc.diagnostics.newton_iterations,
                                      conds.empty() ? 0.0 : conds.back()});
        }
        ctx.prev = inc.state;
        ctx.psi_prev = inc.psi;
      } catch (const SolverError& err) {
        // Recorded, not fatal: the remaining snapshots of this run cannot be
        // reached without a converged state.
        const auto& conds = err.diagnostics.condition_numbers;
        for (std::size_t k = 0; k < conds.size(); ++k) {
          result.iterations.push_back({scale, load, static_cast<int>(k + 1), conds[k]});
        }
        for (double s : cfg.sweep.snapshots) {
          if (s >= load - 1e-12) {
            result.summaries.push_back(
                {scale, s, false, err.diagnostics.newton_iterations,
                 conds.empty() ? std::numeric_limits<double>::infinity() : conds.back()});
          }
        }
        aborted = true;
      }
    }
  }
  return result;
}

void write_w_sweep_csv(const WSweepResult& sweep, const std::string& iter_path,
                       const std::string& summary_path) {
  {
    std::ofstream out(iter_path);
    if (!out) throw std::runtime_error("cannot write CSV file '" + iter_path + "'");
    out << "w_scale,F12,newton_iteration,condition_number\n";
    for (const auto& rec : sweep.iterations) {
      out << fmt17(rec.w_scale) << ',' << fmt17(rec.load) << ',' << rec.iteration << ','
          << fmt17(rec.condition) << '\n';
    }
  }
  {
    std::ofstream out(summary_path);
    if (!out) throw std::runtime_error("cannot write CSV file '" + summary_path + "'");
    out << "w_scale,F12,converged,newton_iters,final_condition\n";
    for (const auto& rec : sweep.summaries) {
      out << fmt17(rec.w_scale) << ',' << fmt17(rec.load) << ','
          << (rec.converged ? 1 : 0) << ',' << rec.newton_iters << ','
          << fmt17(rec.final_condition) << '\n';
    }
  }
}

void run_experiment(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output.dir);
  {
    std::ofstream manifest(fs::path(cfg.output.dir) / "manifest.txt");
    manifest << cfg.manifest();
  }

  if (cfg.experiment == "simple_shear" || cfg.experiment == "custom_path") {
    const ShearRunResult run = cfg.experiment == "simple_shear" ? run_simple_shear(cfg)
                                                                : run_custom_path(cfg);
    if (cfg.output.csv) {
      write_shear_csv(run, (fs::path(cfg.output.dir) / "stress_strain.csv").string());
    }
    return;
  }
  if (cfg.experiment == "tensile") {
    run_tensile(cfg);
    return;
  }
  throw ConfigError("unknown experiment '" + cfg.experiment + "'");
}

}  // namespace slipform
