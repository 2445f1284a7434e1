#include "slipform/fem.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include "slipform/vtk.hpp"

namespace slipform {

namespace {

constexpr double kPlasticThreshold = 1e-4;  // sum-alpha marking the plastic zone
constexpr double kFdStep = 1e-7;            // per generalized strain component

void gauss_1d(int order, std::vector<double>& pts, std::vector<double>& wts) {
  if (order == 2) {
    const double p = 1.0 / std::sqrt(3.0);
    pts = {-p, p};
    wts = {1.0, 1.0};
  } else {
    const double p = std::sqrt(3.0 / 5.0);
    pts = {-p, 0.0, p};
    wts = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  }
}

Eigen::Matrix3d embed_plane_strain(const Eigen::Matrix2d& f2d) {
  Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
  f.topLeftCorner<2, 2>() = f2d;
  return f;
}

}  // namespace

FemModel::FemModel(Mesh mesh, SlipCatalogue catalogue, MaterialParams material,
                   SolverParams solver, Integrator integrator, int quad_order)
    : mesh_(std::move(mesh)),
      catalogue_(std::move(catalogue)),
      material_(material),
      solver_(solver),
      integrator_(integrator),
      quad_(quad_order) {
  if (quad_ != 2 && quad_ != 3) {
    throw std::invalid_argument("FemModel: quadrature order must be 2 or 3");
  }
  material_.validate();
  n_s_ = (material_.c1 > 0.0 || material_.c2 > 0.0) ? catalogue_.size() : 0;
  solver_.record_conditions = false;
  solver_.record_iterates = false;

  gauss_1d(quad_, gauss_points_, gauss_weights_);
  check_mesh(mesh_, quad_);

  const int ngp = n_gauss();
  history_.resize(static_cast<std::size_t>(mesh_.n_elements()) * ngp);
  for (auto& h : history_) {
    h.state = CrystalState::virgin(catalogue_.size());
    h.psi_prev = 0.0;
    h.dlambda = Eigen::VectorXd::Zero(catalogue_.size());
  }
  cache_.resize(history_.size());
  warm_.resize(history_.size());

  shapes_.resize(history_.size());
  for (int e = 0; e < mesh_.n_elements(); ++e) {
    const auto& conn = mesh_.elements[e];
    int gp = 0;
    for (int b = 0; b < quad_; ++b) {
      for (int a = 0; a < quad_; ++a, ++gp) {
        auto& sh = shapes_[e * ngp + gp];
        Eigen::Matrix<double, 8, 2> dN;
        shape_serendipity8(gauss_points_[a], gauss_points_[b], sh.N, dN);
        Eigen::Matrix2d jac = Eigen::Matrix2d::Zero();
        for (int k = 0; k < 8; ++k) {
          jac += mesh_.nodes[conn[k]] * dN.row(k);
        }
        const double detJ = jac.determinant();
        sh.dNX = dN * jac.inverse();
        sh.wdetJ = gauss_weights_[a] * gauss_weights_[b] * detJ;
      }
    }
  }
}

double FemModel::global_tolerance() const {
  return 1e-8 * material_.mu * mesh_.area() / mesh_.n_elements();
}

StepContext FemModel::make_context(const QuadraturePointState& hist,
                                   const Eigen::Matrix3d& F, const Eigen::VectorXd& s,
                                   const Eigen::Matrix3Xd& grad_s) const {
  StepContext ctx;
  ctx.F = F;
  ctx.prev = hist.state;
  if (n_s_ > 0) {
    ctx.micromorphic.s = s;
    ctx.micromorphic.grad_s = grad_s;
  } else {
    ctx.micromorphic = MicromorphicPoint::zero(catalogue_.size());
  }
  ctx.material = material_;
  ctx.integrator = integrator_;
  ctx.catalogue = &catalogue_;
  ctx.psi_prev = hist.psi_prev;
  return ctx;
}

namespace {

// Flux vector [P2D; q_s] of a solved local state.
void compute_flux(const StepContext& ctx, const Eigen::VectorXd& dlambda, int n_s,
                  Eigen::VectorXd& flux) {
  const LocalState st = evaluate_local_state(ctx, dlambda);
  const Eigen::Matrix3d P =
      st.Fe * st.Ce.inverse() * st.sigma * st.Fp.inverse().transpose();
  flux.resize(4 + n_s);
  flux(0) = P(0, 0);
  flux(1) = P(0, 1);
  flux(2) = P(1, 0);
  flux(3) = P(1, 1);
  for (int i = 0; i < n_s; ++i) {
    flux(4 + i) = -ctx.material.c1 * (st.alpha(i) - ctx.micromorphic.s(i));
  }
}

}  // namespace

Eigen::VectorXd FemModel::residual(const Eigen::VectorXd& values) {
  const int dpn = dofs_per_node();
  const int ngp = n_gauss();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n_dofs());

  for (int e = 0; e < mesh_.n_elements(); ++e) {
    const auto& conn = mesh_.elements[e];
    for (int gp = 0; gp < ngp; ++gp) {
      const auto& sh = shapes_[e * ngp + gp];

      Eigen::Matrix2d f2d = Eigen::Matrix2d::Identity();
      Eigen::VectorXd s_gp = Eigen::VectorXd::Zero(n_s_);
      Eigen::Matrix3Xd grad_s = Eigen::Matrix3Xd::Zero(3, n_s_);
      for (int k = 0; k < 8; ++k) {
        const int base = conn[k] * dpn;
        const Eigen::Vector2d uk(values(base), values(base + 1));
        f2d += uk * sh.dNX.row(k);
        for (int i = 0; i < n_s_; ++i) {
          const double sv = values(base + 2 + i);
          s_gp(i) += sh.N(k) * sv;
          grad_s(0, i) += sh.dNX(k, 0) * sv;
          grad_s(1, i) += sh.dNX(k, 1) * sv;
        }
      }

      const StepContext ctx =
          make_context(history_[e * ngp + gp], embed_plane_strain(f2d), s_gp, grad_s);

      GpCache& cache = cache_[e * ngp + gp];
      try {
        // Warm-start from the last accepted global iterate's root: at
        // non-unique multislip states this pins the local solve to one
        // branch, keeping the assembled residual a well-defined function of
        // the nodal values along the Newton path. The warm set is promoted
        // only for accepted iterates, never from line-search trials.
        const Eigen::VectorXd& warm = warm_[e * ngp + gp];
        const SolveResult solved =
            solve_local(ctx, solver_, warm.size() > 0 ? &warm : nullptr);
        cache.dlambda = solved.dlambda;
        cache.has_solution = true;
      } catch (const SolverError& err) {
        cache_valid_ = false;
        throw FemLocalError(e, gp, err.what());
      }

      cache.a_root = d_i_inc(ctx, cache.dlambda);
      cache.active.clear();
      for (int i = 0; i < catalogue_.size(); ++i) {
        if (cache.dlambda(i) > 1e-8) cache.active.push_back(i);
      }
      cache.plastic = !cache.active.empty();
      if (cache.plastic) {
        const Eigen::MatrixXd hess = d2_i_inc(ctx, cache.dlambda);
        const int na = static_cast<int>(cache.active.size());
        Eigen::MatrixXd haa(na, na);
        for (int a = 0; a < na; ++a) {
          for (int b = 0; b < na; ++b) {
            haa(a, b) = hess(cache.active[a], cache.active[b]);
          }
        }
        cache.lu_haa.compute(haa);
      }
      compute_flux(ctx, cache.dlambda, n_s_, cache.flux);

      // Scatter: displacement rows P : delta F, micromorphic rows
      // q_s delta s + q_grad . grad(delta s).
      for (int k = 0; k < 8; ++k) {
        const int base = conn[k] * dpn;
        r(base) += sh.wdetJ * (cache.flux(0) * sh.dNX(k, 0) + cache.flux(1) * sh.dNX(k, 1));
        r(base + 1) +=
            sh.wdetJ * (cache.flux(2) * sh.dNX(k, 0) + cache.flux(3) * sh.dNX(k, 1));
        for (int i = 0; i < n_s_; ++i) {
          double row = cache.flux(4 + i) * sh.N(k);
          if (material_.c2 > 0.0) {
            const Eigen::Vector2d m = catalogue_[i].direction.head<2>();
            const double proj = grad_s(0, i) * m(0) + grad_s(1, i) * m(1);
            row += material_.c2 * proj * (sh.dNX(k, 0) * m(0) + sh.dNX(k, 1) * m(1));
          }
          r(base + 2 + i) += sh.wdetJ * row;
        }
      }
    }
  }
  cache_values_ = values;
  cache_valid_ = true;
  return r;
}

Eigen::SparseMatrix<double> FemModel::tangent(const Eigen::VectorXd& values, bool exact) {
  if (!cache_valid_ || cache_values_.size() != values.size() || cache_values_ != values) {
    residual(values);
  }
  const int dpn = dofs_per_node();
  const int ngp = n_gauss();
  const int ndof_e = 8 * dpn;
  const int nz = 4 + n_s_;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh_.n_elements()) * 2048);

  Eigen::MatrixXd ke(ndof_e, ndof_e);
  Eigen::MatrixXd d(nz, nz);
  Eigen::MatrixXd ecols(nz, ndof_e);
  Eigen::VectorXd flux_pert;

  for (int e = 0; e < mesh_.n_elements(); ++e) {
    const auto& conn = mesh_.elements[e];
    ke.setZero();

    for (int gp = 0; gp < ngp; ++gp) {
      const auto& sh = shapes_[e * ngp + gp];
      const GpCache& cache = cache_[e * ngp + gp];

      Eigen::Matrix2d f2d = Eigen::Matrix2d::Identity();
      Eigen::VectorXd s_gp = Eigen::VectorXd::Zero(n_s_);
      Eigen::Matrix3Xd grad_s = Eigen::Matrix3Xd::Zero(3, n_s_);
      for (int k = 0; k < 8; ++k) {
        const int base = conn[k] * dpn;
        const Eigen::Vector2d uk(values(base), values(base + 1));
        f2d += uk * sh.dNX.row(k);
        for (int i = 0; i < n_s_; ++i) {
          const double sv = values(base + 2 + i);
          s_gp(i) += sh.N(k) * sv;
          grad_s(0, i) += sh.dNX(k, 0) * sv;
          grad_s(1, i) += sh.dNX(k, 1) * sv;
        }
      }

      // Gauss-point material tangent d(flux)/d(F2d, s) by finite differences
      // with warm-corrected local solves.
      for (int j = 0; j < nz; ++j) {
        Eigen::Matrix2d f_pert = f2d;
        Eigen::VectorXd s_pert = s_gp;
        if (j < 4) {
          f_pert(j / 2, j % 2) += kFdStep;
        } else {
          s_pert(j - 4) += kFdStep;
        }
        const StepContext ctx_pert = make_context(
            history_[e * ngp + gp], embed_plane_strain(f_pert), s_pert, grad_s);

        Eigen::VectorXd dl = cache.dlambda;
        bool full_solve = exact && cache.plastic;
        if (cache.plastic && !full_solve) {
          const int na = static_cast<int>(cache.active.size());
          Eigen::VectorXd ra(na);
          for (int pass = 0; pass < 2; ++pass) {
            const Eigen::VectorXd a = d_i_inc(ctx_pert, dl);
            for (int q = 0; q < na; ++q) {
              ra(q) = a(cache.active[q]) - cache.a_root(cache.active[q]);
            }
            if (ra.lpNorm<Eigen::Infinity>() < 1e-14 * material_.mu) break;
            const Eigen::VectorXd step = cache.lu_haa.solve(-ra);
            for (int q = 0; q < na; ++q) dl(cache.active[q]) += step(q);
          }
        }
        // The frozen-set correction is wrong when the perturbation flips a
        // marginal system in or out; detect that and re-solve the column in
        // full (warm-started) so the finite difference differentiates the
        // correct branch of the piecewise-smooth response.
        if (!full_solve) {
          const Eigen::VectorXd a_pert = d_i_inc(ctx_pert, dl);
          for (int i = 0; i < catalogue_.size() && !full_solve; ++i) {
            if (dl(i) < -1e-12) full_solve = true;
            if (dl(i) <= 1e-12 && a_pert(i) < -1e-8) full_solve = true;
          }
        }
        if (full_solve) {
          try {
            dl = solve_local(ctx_pert, solver_, &cache.dlambda).dlambda;
          } catch (const SolverError& err) {
            throw FemLocalError(e, gp, err.what());
          }
        }
        compute_flux(ctx_pert, dl, n_s_, flux_pert);
        d.col(j) = (flux_pert - cache.flux) / kFdStep;
      }

      // E = D * B and Ke += w detJ * B^T * E using the sparsity of B: a
      // u-dof feeds two F rows, an s-dof feeds one s row.
      ecols.setZero();
      for (int k = 0; k < 8; ++k) {
        for (int c = 0; c < 2; ++c) {
          const int p = k * dpn + c;
          ecols.col(p) =
              sh.dNX(k, 0) * d.col(2 * c + 0) + sh.dNX(k, 1) * d.col(2 * c + 1);
        }
        for (int i = 0; i < n_s_; ++i) {
          ecols.col(k * dpn + 2 + i) = sh.N(k) * d.col(4 + i);
        }
      }
      for (int k = 0; k < 8; ++k) {
        for (int c = 0; c < 2; ++c) {
          const int p = k * dpn + c;
          ke.row(p) += sh.wdetJ * (sh.dNX(k, 0) * ecols.row(2 * c + 0) +
                                   sh.dNX(k, 1) * ecols.row(2 * c + 1));
        }
        for (int i = 0; i < n_s_; ++i) {
          ke.row(k * dpn + 2 + i) += sh.wdetJ * sh.N(k) * ecols.row(4 + i);
        }
      }

      // Gradient-hardening block: analytic, per system, uncoupled.
      if (material_.c2 > 0.0) {
        for (int i = 0; i < n_s_; ++i) {
          const Eigen::Vector2d m = catalogue_[i].direction.head<2>();
          for (int k = 0; k < 8; ++k) {
            const double gk = sh.dNX(k, 0) * m(0) + sh.dNX(k, 1) * m(1);
            if (gk == 0.0) continue;
            for (int l = 0; l < 8; ++l) {
              const double gl = sh.dNX(l, 0) * m(0) + sh.dNX(l, 1) * m(1);
              ke(k * dpn + 2 + i, l * dpn + 2 + i) += sh.wdetJ * material_.c2 * gk * gl;
            }
          }
        }
      }
    }

    for (int p = 0; p < ndof_e; ++p) {
      const int gp_row = conn[p / dpn] * dpn + p % dpn;
      for (int q = 0; q < ndof_e; ++q) {
        const double v = ke(p, q);
        if (v != 0.0) {
          triplets.emplace_back(gp_row, conn[q / dpn] * dpn + q % dpn, v);
        }
      }
    }
  }

  Eigen::SparseMatrix<double> k(n_dofs(), n_dofs());
  k.setFromTriplets(triplets.begin(), triplets.end());
  return k;
}

double FemModel::incremental_energy(const Eigen::VectorXd& values) const {
  const int dpn = dofs_per_node();
  const int ngp = n_gauss();
  double energy = 0.0;
  for (int e = 0; e < mesh_.n_elements(); ++e) {
    const auto& conn = mesh_.elements[e];
    for (int gp = 0; gp < ngp; ++gp) {
      const auto& sh = shapes_[e * ngp + gp];
      Eigen::Matrix2d f2d = Eigen::Matrix2d::Identity();
      Eigen::VectorXd s_gp = Eigen::VectorXd::Zero(n_s_);
      Eigen::Matrix3Xd grad_s = Eigen::Matrix3Xd::Zero(3, n_s_);
      for (int k = 0; k < 8; ++k) {
        const int base = conn[k] * dpn;
        const Eigen::Vector2d uk(values(base), values(base + 1));
        f2d += uk * sh.dNX.row(k);
        for (int i = 0; i < n_s_; ++i) {
          const double sv = values(base + 2 + i);
          s_gp(i) += sh.N(k) * sv;
          grad_s(0, i) += sh.dNX(k, 0) * sv;
          grad_s(1, i) += sh.dNX(k, 1) * sv;
        }
      }
      const StepContext ctx =
          make_context(history_[e * ngp + gp], embed_plane_strain(f2d), s_gp, grad_s);
      try {
        const Eigen::VectorXd& warm = warm_[e * ngp + gp];
        const SolveResult solved =
            solve_local(ctx, solver_, warm.size() > 0 ? &warm : nullptr);
        energy += sh.wdetJ * i_inc(ctx, solved.dlambda);
      } catch (const SolverError& err) {
        throw FemLocalError(e, gp, err.what());
      }
    }
  }
  return energy;
}

bool FemModel::newton_solve(Eigen::VectorXd& values,
                            const std::vector<std::uint8_t>& constrained, int max_newton,
                            double* residual_norm, int* iterations,
                            Eigen::VectorXd* final_residual) {
  const double tol = global_tolerance();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;

  auto free_norm = [&](const Eigen::VectorXd& r) {
    double norm = 0.0;
    for (int d = 0; d < r.size(); ++d) {
      if (!constrained[d]) norm = std::max(norm, std::abs(r(d)));
    }
    return norm;
  };

  Eigen::VectorXd r = residual(values);
  double norm = free_norm(r);
  promote_warm_starts();
  bool exact_mode = false;
  bool have_factor = false;
  bool refresh = true;

  for (int it = 0;; ++it) {
    if (residual_norm) *residual_norm = norm;
    if (iterations) *iterations = it;
    if (std::getenv("SLIPFORM_DEBUG")) {
      std::fprintf(stderr, "[fem] it=%d |R|=%.4e%s\n", it, norm,
                   exact_mode ? " (exact)" : "");
    }
    if (!std::isfinite(norm)) return false;
    if (norm <= tol) {
      if (final_residual) *final_residual = r;
      return true;
    }
    if (it == max_newton) return false;

    // During heavily damped phases the factorized tangent is reused
    // (modified Newton); it is refreshed after clean progress or every few
    // iterations.
    if (refresh || !have_factor || it % 3 == 0) {
      Eigen::SparseMatrix<double> k = tangent(values, exact_mode);
      // Row/column elimination of the Dirichlet dofs with a unit diagonal.
      for (int col = 0; col < k.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator entry(k, col); entry; ++entry) {
          if (constrained[entry.row()] || constrained[entry.col()]) {
            entry.valueRef() = entry.row() == entry.col() ? 1.0 : 0.0;
          }
        }
      }
      lu.compute(k);
      if (lu.info() != Eigen::Success) return false;
      have_factor = true;
    }
    Eigen::VectorXd rhs = -r;
    for (int d = 0; d < rhs.size(); ++d) {
      if (constrained[d]) rhs(d) = 0.0;
    }
    const Eigen::VectorXd dx = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !dx.allFinite()) return false;

    // Backtracking on the free-dof residual: full steps near the solution,
    // damped steps across plastic-activation fronts.
    bool accepted = false;
    double t = 1.0;
    for (int ls = 0; ls < 8; ++ls, t *= 0.5) {
      const Eigen::VectorXd trial = values + t * dx;
      Eigen::VectorXd rt;
      try {
        rt = residual(trial);
      } catch (const FemLocalError&) {
        continue;
      }
      const double nt = free_norm(rt);
      if (std::isfinite(nt) && nt < norm * (1.0 - 1e-4 * t)) {
        values = trial;
        r = std::move(rt);
        norm = nt;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (exact_mode && refresh) return false;
      exact_mode = true;  // retry this iterate with the escalated tangent
      refresh = true;
      continue;
    }
    // Hard damping signals tangent trouble across the activation front;
    // escalate to full per-column re-solves and refresh after progress.
    exact_mode = t < 0.2;
    refresh = t >= 0.5;
    // The accepted trial was the last assembly; adopt its roots.
    promote_warm_starts();
  }
}

StepReport FemModel::solve_step(GlobalField& field, const std::vector<int>& reaction_dofs,
                                int max_newton, int max_bisect) {
  StepReport report;
  std::vector<std::uint8_t> constrained(n_dofs(), 0);
  Eigen::VectorXd start_values(field.dirichlet.size());
  for (std::size_t c = 0; c < field.dirichlet.size(); ++c) {
    constrained[field.dirichlet[c].first] = 1;
    start_values(c) = field.values(field.dirichlet[c].first);
  }

  const Eigen::VectorXd backup = field.values;
  double progress = 0.0;
  double fraction = 1.0;
  int successes = 0;
  Eigen::VectorXd final_residual;

  while (progress < 1.0 - 1e-12) {
    Eigen::VectorXd trial = field.values;
    const double target = std::min(1.0, progress + fraction);
    for (std::size_t c = 0; c < field.dirichlet.size(); ++c) {
      const auto& [dof, value] = field.dirichlet[c];
      trial(dof) = start_values(c) + target * (value - start_values(c));
    }

    double norm = 0.0;
    int iters = 0;
    bool ok = false;
    try {
      ok = newton_solve(trial, constrained, max_newton, &norm, &iters, &final_residual);
    } catch (const FemLocalError&) {
      ok = false;
    }
    report.newton_iters += iters;

    if (ok) {
      field.values = trial;
      commit(field.values);
      progress = target;
      report.residual_norm = norm;
      // Grow the substep back after two clean solves.
      if (++successes >= 2 && fraction < 1.0) {
        fraction *= 2.0;
        successes = 0;
      }
    } else {
      if (report.bisections >= max_bisect) {
        field.values = backup;
        throw std::runtime_error("global Newton failed after " +
                                 std::to_string(max_bisect) + " load halvings");
      }
      fraction *= 0.5;
      successes = 0;
      ++report.bisections;
    }
  }

  report.converged = true;
  report.reaction = 0.0;
  for (const int dof : reaction_dofs) {
    report.reaction += final_residual(dof);
  }
  return report;
}

void FemModel::commit(const Eigen::VectorXd& values) {
  if (!cache_valid_ || cache_values_.size() != values.size() || cache_values_ != values) {
    residual(values);
  }
  const int dpn = dofs_per_node();
  const int ngp = n_gauss();
  for (int e = 0; e < mesh_.n_elements(); ++e) {
    const auto& conn = mesh_.elements[e];
    for (int gp = 0; gp < ngp; ++gp) {
      const auto& sh = shapes_[e * ngp + gp];
      Eigen::Matrix2d f2d = Eigen::Matrix2d::Identity();
      Eigen::VectorXd s_gp = Eigen::VectorXd::Zero(n_s_);
      Eigen::Matrix3Xd grad_s = Eigen::Matrix3Xd::Zero(3, n_s_);
      for (int k = 0; k < 8; ++k) {
        const int base = conn[k] * dpn;
        const Eigen::Vector2d uk(values(base), values(base + 1));
        f2d += uk * sh.dNX.row(k);
        for (int i = 0; i < n_s_; ++i) {
          const double sv = values(base + 2 + i);
          s_gp(i) += sh.N(k) * sv;
          grad_s(0, i) += sh.dNX(k, 0) * sv;
          grad_s(1, i) += sh.dNX(k, 1) * sv;
        }
      }
      QuadraturePointState& hist = history_[e * ngp + gp];
      const StepContext ctx =
          make_context(hist, embed_plane_strain(f2d), s_gp, grad_s);
      const GpCache& cache = cache_[e * ngp + gp];
      const LocalState st = evaluate_local_state(ctx, cache.dlambda);

      hist.state.Fp = st.Fp;
      hist.state.alpha = st.alpha.cwiseMax(0.0);
      hist.state.dlambda_prev = cache.dlambda.cwiseMax(0.0);
      hist.dlambda = cache.dlambda;
      hist.psi_prev = total_energy(ctx.F, hist.state.Fp, hist.state.alpha,
                                   ctx.micromorphic, material_, catalogue_);
    }
  }
  // New history: the next solve stands on its own (cold local starts).
  for (auto& warm : warm_) warm.resize(0);
  cache_valid_ = false;
}

void FemModel::promote_warm_starts() {
  for (std::size_t g = 0; g < cache_.size(); ++g) {
    if (cache_[g].has_solution) warm_[g] = cache_[g].dlambda;
  }
}

std::vector<FemModel::GpSample> FemModel::sample_gauss_points(
    const Eigen::VectorXd& values) const {
  const int dpn = dofs_per_node();
  const int ngp = n_gauss();
  std::vector<GpSample> samples;
  samples.reserve(history_.size());
  for (int e = 0; e < mesh_.n_elements(); ++e) {
    const auto& conn = mesh_.elements[e];
    for (int gp = 0; gp < ngp; ++gp) {
      const auto& sh = shapes_[e * ngp + gp];
      GpSample sample;
      sample.X.setZero();
      for (int k = 0; k < 8; ++k) sample.X += sh.N(k) * mesh_.nodes[conn[k]];
      sample.weight = sh.wdetJ;
      const auto& hist = history_[e * ngp + gp];
      sample.alpha = hist.state.alpha;
      sample.sum_alpha = hist.state.alpha.sum();
      sample.s = Eigen::VectorXd::Zero(n_s_);
      for (int k = 0; k < 8; ++k) {
        const int base = conn[k] * dpn;
        for (int i = 0; i < n_s_; ++i) sample.s(i) += sh.N(k) * values(base + 2 + i);
      }
      samples.push_back(std::move(sample));
    }
  }
  return samples;
}

Eigen::VectorXd FemModel::nodal_sum_alpha() const {
  const int ngp = n_gauss();
  Eigen::VectorXd num = Eigen::VectorXd::Zero(mesh_.n_nodes());
  Eigen::VectorXd den = Eigen::VectorXd::Zero(mesh_.n_nodes());
  for (int e = 0; e < mesh_.n_elements(); ++e) {
    const auto& conn = mesh_.elements[e];
    for (int gp = 0; gp < ngp; ++gp) {
      const auto& sh = shapes_[e * ngp + gp];
      const double val = history_[e * ngp + gp].state.alpha.sum();
      for (int k = 0; k < 8; ++k) {
        const double w = std::abs(sh.N(k)) * sh.wdetJ;
        num(conn[k]) += w * val;
        den(conn[k]) += w;
      }
    }
  }
  for (int k = 0; k < mesh_.n_nodes(); ++k) {
    if (den(k) > 0.0) num(k) /= den(k);
  }
  return num;
}

TensileRunResult run_tensile(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const SlipCatalogue catalogue = catalogue_by_name(cfg.catalogue_name);
  Mesh mesh = build_tensile_mesh(cfg.fem, cfg.fem.refinement);

  FemModel model(std::move(mesh), catalogue, cfg.material, cfg.solver, cfg.integrator,
                 cfg.fem.quadrature);
  if (model.n_dofs() > cfg.fem.dof_budget) {
    std::cerr << "warning: " << model.n_dofs() << " dofs exceed fem.dof_budget = "
              << cfg.fem.dof_budget << "; consider a reduced catalogue\n";
  }

  GlobalField field;
  field.values = Eigen::VectorXd::Zero(model.n_dofs());

  const auto& left = model.mesh().boundary_sets.at("left_grip");
  const auto& right = model.mesh().boundary_sets.at("right_grip");
  std::vector<int> reaction_dofs;
  for (const int node : right) reaction_dofs.push_back(model.dof_u(node, 0));

  const double u_total = cfg.fem.elongation * cfg.fem.length;

  const bool write_outputs = cfg.output.csv || cfg.output.vtk;
  if (write_outputs) fs::create_directories(cfg.output.dir);
  std::ofstream csv;
  if (cfg.output.csv) {
    csv.open(fs::path(cfg.output.dir) / "force_displacement.csv");
    csv << "step,u_prescribed_um,reaction_force_N_per_um,newton_iters\n";
  }

  TensileRunResult result;
  result.n_elements = model.mesh().n_elements();
  result.n_dofs = model.n_dofs();

  for (int step = 1; step <= cfg.fem.steps; ++step) {
    const double u = u_total * step / cfg.fem.steps;
    field.dirichlet.clear();
    for (const int node : left) {
      field.dirichlet.emplace_back(model.dof_u(node, 0), 0.0);
      field.dirichlet.emplace_back(model.dof_u(node, 1), 0.0);
    }
    for (const int node : right) {
      field.dirichlet.emplace_back(model.dof_u(node, 0), u);
    }

    StepReport report;
    try {
      report = model.solve_step(field, reaction_dofs);
    } catch (const std::exception& err) {
      throw std::runtime_error("tensile step " + std::to_string(step) + ": " + err.what());
    }

    TensileStepRecord rec;
    rec.step = step;
    rec.u_prescribed = u;
    rec.reaction_gpa_um = report.reaction;
    rec.reaction_n_per_um = report.reaction * 1e-3;  // GPa*um -> N/um
    rec.newton_iters = report.newton_iters;
    rec.bisections = report.bisections;
    result.steps.push_back(rec);

    if (csv.is_open()) {
      char line[160];
      std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%d\n", step, u,
                    rec.reaction_n_per_um, rec.newton_iters);
      csv << line;
    }
    if (cfg.output.vtk) {
      char name[64];
      std::snprintf(name, sizeof(name), "tensile_step%04d.vtk", step);
      write_tensile_vtk((fs::path(cfg.output.dir) / name).string(), model, field.values);
    }
  }

  // Plastic-zone support width and the alpha-vs-s mismatch at the final state.
  const auto samples = model.sample_gauss_points(field.values);
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -std::numeric_limits<double>::infinity();
  double mismatch = 0.0;
  double norm = 0.0;
  for (const auto& sample : samples) {
    if (sample.sum_alpha <= kPlasticThreshold) continue;
    xmin = std::min(xmin, sample.X.x());
    xmax = std::max(xmax, sample.X.x());
    if (model.micromorphic()) {
      mismatch += sample.weight * (sample.alpha - sample.s).squaredNorm();
      norm += sample.weight * sample.alpha.squaredNorm();
    }
  }
  result.plastic_zone_width = xmax > xmin ? xmax - xmin : 0.0;
  result.alpha_s_mismatch = norm > 0.0 ? std::sqrt(mismatch / norm) : 0.0;
  return result;
}

}  // namespace slipform
