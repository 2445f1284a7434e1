#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "slipform/consistency.hpp"
#include "slipform/drivers.hpp"
#include "slipform/fem.hpp"

namespace {

using namespace slipform;

int run_command(const std::string& config_path) {
  const RunConfig cfg = load_config(config_path);
  std::cout << cfg.manifest();
  run_experiment(cfg);
  std::cout << "outputs written to " << cfg.output.dir << "\n";
  return 0;
}

int sweep_command(const std::string& config_path) {
  const RunConfig cfg = load_config(config_path);
  std::cout << cfg.manifest();
  const WSweepResult sweep = run_w_sweep(cfg);
  std::filesystem::create_directories(cfg.output.dir);
  const auto dir = std::filesystem::path(cfg.output.dir);
  write_w_sweep_csv(sweep, (dir / "w_sweep_iterations.csv").string(),
                    (dir / "w_sweep_summary.csv").string());
  {
    std::ofstream manifest(dir / "manifest.txt");
    manifest << cfg.manifest();
  }
  for (const auto& s : sweep.summaries) {
    std::printf("w = %-8g F12 = %-6g %s  iters = %-3d final cond = %g\n", s.w_scale,
                s.load, s.converged ? "converged    " : "NO CONVERGENCE", s.newton_iters,
                s.final_condition);
  }
  std::cout << "outputs written to " << cfg.output.dir << "\n";
  return 0;
}

bool report(const char* name, bool ok) {
  std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name);
  return ok;
}

// Deterministic subset of the property suite; used as a quick install check.
int verify_command() {
  bool all = true;

  const SlipCatalogue fcc = fcc_catalogue();
  {
    bool ok = fcc.size() == 24;
    for (int i = 0; i < fcc.size() && ok; ++i) {
      ok = std::abs(fcc[i].direction.norm() - 1.0) < 1e-14 &&
           std::abs(fcc[i].normal.norm() - 1.0) < 1e-14 &&
           std::abs(fcc[i].direction.dot(fcc[i].normal)) < 1e-14;
    }
    for (int i = 0; i < 12 && ok; ++i) {
      ok = (fcc[i + 12].direction + fcc[i].direction).norm() < 1e-15 &&
           (fcc[i + 12].normal - fcc[i].normal).norm() < 1e-15;
    }
    all &= report("fcc24 catalogue normalization and +- pairing", ok);
  }

  all &= report("geometry Gram matrix has rank 5",
                numerical_rank(geometry_gram_matrix(fcc)) == 5);

  {
    const Orientation o = rotation_from_euler(0.31, -1.1, 2.4);
    const Eigen::Matrix3d r = o.rotation;
    const bool ok =
        (r * r.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12 &&
        std::abs(r.determinant() - 1.0) < 1e-12;
    all &= report("Euler rotation is proper orthogonal", ok);
  }

  {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 0.03);
    bool ok = true;
    for (int trial = 0; trial < 5 && ok; ++trial) {
      Eigen::VectorXd dl(24);
      for (int i = 0; i < 24; ++i) dl(i) = unif(rng);
      const Eigen::Matrix3d dLp = plastic_flow_increment(dl, fcc);
      ok = std::abs(expm(dLp).determinant() - 1.0) < 1e-12;
    }
    all &= report("exp of traceless flow is unimodular", ok);
  }

  {
    MaterialParams mat;
    StepContext ctx;
    ctx.F = Eigen::Matrix3d::Identity();
    ctx.F(0, 1) = 0.05;
    ctx.prev = CrystalState::virgin(24, rotation_from_euler(0.4, 0.3, 0.1).rotation);
    ctx.micromorphic = MicromorphicPoint::zero(24);
    ctx.material = mat;
    ctx.catalogue = &fcc;

    bool ok = true;
    for (Integrator integ : {Integrator::ExpMap, Integrator::BackwardEuler}) {
      ctx.integrator = integ;
      Eigen::VectorXd dl = Eigen::VectorXd::Constant(24, 0.01);
      const Eigen::VectorXd grad = d_i_inc(ctx, dl);
      for (int i = 0; i < 24 && ok; ++i) {
        const double h = 1e-7;
        Eigen::VectorXd p = dl, m = dl;
        p(i) += h;
        m(i) -= h;
        const double fd = (i_inc(ctx, p) - i_inc(ctx, m)) / (2 * h);
        ok = std::abs(grad(i) - fd) <= 1e-5 * std::max(1.0, std::abs(fd));
      }
    }
    all &= report("gradient of i_inc matches finite differences", ok);
  }

  {
    const SlipCatalogue single("single", {fcc[0]});
    MaterialParams mat;
    StepContext ctx;
    ctx.F = Eigen::Matrix3d::Identity();
    ctx.F(0, 1) = 0.02;
    ctx.prev = CrystalState::virgin(1);
    ctx.micromorphic = MicromorphicPoint::zero(1);
    ctx.material = mat;
    ctx.catalogue = &single;
    ctx.integrator = Integrator::ExpMap;

    Eigen::VectorXd dl = Eigen::VectorXd::Constant(1, 0.013);
    const double mismatch =
        (d_i_inc(ctx, dl) + phi_nonlocal(ctx, dl)).lpNorm<Eigen::Infinity>();
    all &= report("single-slip driving force equals -phi exactly", mismatch < 1e-12);

    SolverParams sp = SolverParams::defaults_for(mat);
    ctx.F(0, 1) = 0.2;
    const Eigen::VectorXd root_fb = solve_fb(ctx, sp).dlambda;
    const Eigen::VectorXd root_rm = solve_return_mapping_fb(ctx, sp).dlambda;
    const Eigen::VectorXd root_min = solve_min_ncp(ctx, sp).dlambda;
    const Eigen::VectorXd root_al = solve_auglag(ctx, sp).dlambda;
    const bool ok = (root_fb - root_rm).lpNorm<Eigen::Infinity>() < 1e-8 &&
                    (root_fb - root_min).lpNorm<Eigen::Infinity>() < 1e-7 &&
                    (root_fb - root_al).lpNorm<Eigen::Infinity>() < 1e-6;
    all &= report("single-slip roots agree across all four algorithms", ok);
  }

  std::printf("%s\n", all ? "verify: all checks passed" : "verify: FAILURES");
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slipform: rate-independent gradient crystal plasticity solvers"};
  app.require_subcommand(1);

  std::string run_config;
  std::string sweep_config;
  CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", run_config, "config file path")->required();
  CLI::App* sweep =
      app.add_subcommand("sweep-w", "condition-number sweep over the FB scaling w");
  sweep->add_option("config", sweep_config, "config file path")->required();
  CLI::App* verify =
      app.add_subcommand("verify", "run the deterministic property subset");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(run_config);
    if (sweep->parsed()) return sweep_command(sweep_config);
    if (verify->parsed()) return verify_command();
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
