#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "slipform/fem.hpp"

using namespace slipform;

namespace {

RunConfig small_tensile_config() {
  // 45-degree crystal rotation gives the planar systems a full Schmid factor
  // under axial tension.
  return parse_config(
      "experiment = tensile\n"
      "catalogue = planar2\n"
      "material.c1 = 0.1\n"
      "material.c2 = 1e-4\n"
      "orientation.a = 0.78539816339744828\n"
      "fem.steps = 4\n"
      "fem.elongation = 0.008\n"
      "output.formats = csv\n");
}

// Independent Neo-Hooke stress oracle for the elastic patch test.
Eigen::Matrix3d neo_hooke_piola(const Eigen::Matrix3d& f, const MaterialParams& p) {
  const double j = f.determinant();
  const Eigen::Matrix3d finvT = f.inverse().transpose();
  const double trC = (f.transpose() * f).trace();
  return p.mu * std::pow(j, -2.0 / 3.0) * (f - trC / 3.0 * finvT) +
         p.kappa * std::log(j) * finvT;
}

}  // namespace

TEST_CASE("serendipity shape functions") {
  Eigen::Matrix<double, 8, 1> n;
  Eigen::Matrix<double, 8, 2> dn;

  SUBCASE("partition of unity and gradient closure") {
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      shape_serendipity8(unif(rng), unif(rng), n, dn);
      CHECK(n.sum() == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(std::abs(dn.col(0).sum()) <= 1e-14);
      CHECK(std::abs(dn.col(1).sum()) <= 1e-14);
    }
  }

  SUBCASE("Kronecker property at the nodes") {
    const double xs[8] = {-1, 1, 1, -1, 0, 1, 0, -1};
    const double ys[8] = {-1, -1, 1, 1, -1, 0, 1, 0};
    for (int k = 0; k < 8; ++k) {
      shape_serendipity8(xs[k], ys[k], n, dn);
      for (int j = 0; j < 8; ++j) {
        CHECK(n(j) == doctest::Approx(j == k ? 1.0 : 0.0).epsilon(1e-14));
      }
    }
  }

  SUBCASE("3x3 Gauss integrates each shape function exactly") {
    // Exact parent-square integrals: -1/3 for corners, 4/3 for mid-sides
    // (polynomials of degree <= 3, well inside the 3x3 rule).
    const double pts[3] = {-std::sqrt(3.0 / 5.0), 0.0, std::sqrt(3.0 / 5.0)};
    const double wts[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    Eigen::Matrix<double, 8, 1> integral = Eigen::Matrix<double, 8, 1>::Zero();
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        shape_serendipity8(pts[a], pts[b], n, dn);
        integral += wts[a] * wts[b] * n;
      }
    }
    for (int k = 0; k < 4; ++k) CHECK(integral(k) == doctest::Approx(-1.0 / 3.0));
    for (int k = 4; k < 8; ++k) CHECK(integral(k) == doctest::Approx(4.0 / 3.0));
  }
}

TEST_CASE("tensile mesh construction") {
  FemSpec geom;  // defaults: 84 x 10, centre 6, gauge 28

  SUBCASE("default refinement gives 160 elements with positive Jacobians") {
    const Mesh mesh = build_tensile_mesh(geom, 1);
    CHECK(mesh.n_elements() == 160);
    CHECK_NOTHROW(check_mesh(mesh, 3));
    CHECK(mesh.boundary_sets.at("left_grip").size() == 9);
    CHECK(mesh.boundary_sets.at("right_grip").size() == 9);
  }

  SUBCASE("refinement x2 gives 640 elements and preserves the outline area") {
    const Mesh coarse = build_tensile_mesh(geom, 1);
    const Mesh fine = build_tensile_mesh(geom, 2);
    CHECK(fine.n_elements() == 640);
    CHECK(fine.area() == doctest::Approx(coarse.area()).epsilon(5e-3));
  }

  SUBCASE("zero taper gives the exact rectangle area") {
    FemSpec straight = geom;
    straight.center_width = straight.width;
    const Mesh mesh = build_tensile_mesh(straight, 1);
    CHECK(mesh.area() == doctest::Approx(840.0).epsilon(1e-12));
  }

  SUBCASE("mid-side nodes at edge-corner means") {
    const Mesh mesh = build_tensile_mesh(geom, 1);
    for (const auto& conn : mesh.elements) {
      for (int e = 0; e < 4; ++e) {
        const Eigen::Vector2d mid =
            0.5 * (mesh.nodes[conn[e]] + mesh.nodes[conn[(e + 1) % 4]]);
        CHECK((mesh.nodes[conn[4 + e]] - mid).norm() <= 1e-12);
      }
    }
  }

  SUBCASE("degenerate geometry is rejected") {
    FemSpec bad = geom;
    bad.center_width = 20.0;
    CHECK_THROWS(build_tensile_mesh(bad, 1));
  }
}

TEST_CASE("single-element elastic patch test") {
  // Uniform stretch prescribed on all nodes of one element reproduces the
  // analytic Neo-Hooke stress through the assembled residual.
  Mesh mesh = make_rectangle_mesh(1, 1, 2.0, 1.0);
  MaterialParams mat;  // c1 = c2 = 0: local, no micromorphic dofs
  SolverParams sp = SolverParams::defaults_for(mat);
  FemModel model(mesh, planar2_catalogue(), mat, sp, Integrator::ExpMap, 3);
  REQUIRE(model.dofs_per_node() == 2);

  const double ex = 1e-4, ey = -0.4e-4;  // below yield
  Eigen::VectorXd values = Eigen::VectorXd::Zero(model.n_dofs());
  for (int k = 0; k < model.mesh().n_nodes(); ++k) {
    values(model.dof_u(k, 0)) = ex * model.mesh().nodes[k].x();
    values(model.dof_u(k, 1)) = ey * model.mesh().nodes[k].y();
  }

  Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
  f(0, 0) += ex;
  f(1, 1) += ey;
  const Eigen::Matrix3d pk1 = neo_hooke_piola(f, mat);

  // Internal forces of the uniform state equal the analytic stress resultant:
  // compare through the energy-conjugate identity R . u = P : (F - I) * V.
  const Eigen::VectorXd r = model.residual(values);
  const double work = r.dot(values);
  const double area = model.mesh().area();
  const Eigen::Matrix3d gradu = f - Eigen::Matrix3d::Identity();
  const double expected = (pk1.cwiseProduct(gradu)).sum() * area;
  CHECK(work == doctest::Approx(expected).epsilon(1e-8));

  // And pointwise: a patch of this size is exactly uniform, so the energy
  // density matches the analytic value too.
  const double energy = model.incremental_energy(values);
  const double psi = psi_elastic((f.transpose() * f).eval(), mat);
  CHECK(energy == doctest::Approx(psi * area).epsilon(1e-8));
}

TEST_CASE("assembled residual equals the FD gradient of the assembled energy") {
  // Four-element patch, micromorphic planar catalogue, plastic loading.
  Mesh mesh = make_rectangle_mesh(2, 2, 2.0, 2.0);
  MaterialParams mat;
  mat.c1 = 0.1;
  mat.c2 = 0.05;
  SolverParams sp = SolverParams::defaults_for(mat);
  FemModel model(mesh, planar2_catalogue(), mat, sp, Integrator::ExpMap, 3);
  const int dpn = model.dofs_per_node();
  REQUIRE(dpn == 4);

  // A smooth displacement + slack field well past yield in shear.
  Eigen::VectorXd values = Eigen::VectorXd::Zero(model.n_dofs());
  for (int k = 0; k < model.mesh().n_nodes(); ++k) {
    const Eigen::Vector2d x = model.mesh().nodes[k];
    values(model.dof_u(k, 0)) = 8e-3 * x.y() + 1e-3 * x.x() * x.y();
    values(model.dof_u(k, 1)) = -2e-3 * x.x();
    values(model.dof_s(k, 0)) = 1e-3 * x.x();
    values(model.dof_s(k, 1)) = 5e-4 * x.y();
  }

  const Eigen::VectorXd r = model.residual(values);
  CHECK(r.lpNorm<Eigen::Infinity>() > 0.0);

  std::mt19937 rng(44);
  std::uniform_int_distribution<int> pick(0, model.n_dofs() - 1);
  const double h = 1e-6;
  for (int trial = 0; trial < 25; ++trial) {
    const int dof = pick(rng);
    Eigen::VectorXd p = values, m = values;
    p(dof) += h;
    m(dof) -= h;
    const double fd = (model.incremental_energy(p) - model.incremental_energy(m)) / (2 * h);
    CHECK(r(dof) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("tangent matches directional finite differences of the residual") {
  Mesh mesh = make_rectangle_mesh(2, 1, 2.0, 1.0);
  MaterialParams mat;
  mat.c1 = 0.1;
  mat.c2 = 0.02;
  SolverParams sp = SolverParams::defaults_for(mat);
  FemModel model(mesh, planar2_catalogue(), mat, sp, Integrator::ExpMap, 3);

  Eigen::VectorXd values = Eigen::VectorXd::Zero(model.n_dofs());
  for (int k = 0; k < model.mesh().n_nodes(); ++k) {
    const Eigen::Vector2d x = model.mesh().nodes[k];
    values(model.dof_u(k, 0)) = 7e-3 * x.y();
    values(model.dof_u(k, 1)) = 1e-3 * x.x() * x.y();
  }

  model.residual(values);
  const Eigen::SparseMatrix<double> k = model.tangent(values);

  std::mt19937 rng(45);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd dv(model.n_dofs());
  for (int i = 0; i < dv.size(); ++i) dv(i) = unif(rng);
  dv *= 1e-6 / dv.lpNorm<Eigen::Infinity>();

  const Eigen::VectorXd r0 = model.residual(values);
  const Eigen::VectorXd r1 = model.residual(values + dv);
  const Eigen::VectorXd predicted = k * dv;
  CHECK((r1 - r0 - predicted).lpNorm<Eigen::Infinity>() <=
        2e-2 * predicted.lpNorm<Eigen::Infinity>());
}

TEST_CASE("elastic global step converges in at most three Newton iterations") {
  RunConfig cfg = small_tensile_config();
  cfg.fem.steps = 1;
  cfg.fem.elongation = 2e-5;  // safely below first yield
  cfg.output.csv = false;
  cfg.output.vtk = false;
  const TensileRunResult run = run_tensile(cfg);
  REQUIRE(run.steps.size() == 1);
  CHECK(run.steps[0].newton_iters <= 3);
  CHECK(run.steps[0].reaction_gpa_um > 0.0);
  CHECK(run.steps[0].bisections == 0);
}

TEST_CASE("small tensile run: plasticity, outputs and zone metrics") {
  namespace fs = std::filesystem;
  RunConfig cfg = small_tensile_config();
  const fs::path dir = fs::temp_directory_path() / "slipform_test_tensile";
  fs::remove_all(dir);
  cfg.output.dir = dir.string();
  cfg.output.vtk = true;

  const TensileRunResult run = run_tensile(cfg);
  REQUIRE(run.steps.size() == 4);
  CHECK(run.n_elements == 160);
  CHECK(run.plastic_zone_width > 0.0);          // yielding started at the notch
  CHECK(run.plastic_zone_width < 84.0);
  CHECK(run.alpha_s_mismatch >= 0.0);

  CHECK(fs::exists(dir / "force_displacement.csv"));
  CHECK(fs::exists(dir / "tensile_step0001.vtk"));
  std::ifstream csv(dir / "force_displacement.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "step,u_prescribed_um,reaction_force_N_per_um,newton_iters");
  fs::remove_all(dir);
}
