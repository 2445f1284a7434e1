#ifndef SLIPFORM_FEM_HPP
#define SLIPFORM_FEM_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>
#include <vector>

#include "slipform/mesh.hpp"
#include "slipform/solvers.hpp"

namespace slipform {

/// Local solver failure tagged with its element and Gauss point.
class FemLocalError : public std::runtime_error {
 public:
  FemLocalError(int element, int gp, const std::string& what)
      : std::runtime_error("element " + std::to_string(element) + ", gp " +
                           std::to_string(gp) + ": " + what),
        element(element), gp(gp) {}
  int element;
  int gp;
};

/// Committed history of one Gauss point; updated only on globally converged
/// steps.
struct QuadraturePointState {
  CrystalState state;
  double psi_prev = 0.0;
  Eigen::VectorXd dlambda;  // last converged increment
};

/// Nodal unknowns [u_x, u_y, s^(1..n_sys)] per node plus the Dirichlet table.
struct GlobalField {
  Eigen::VectorXd values;
  std::vector<std::pair<int, double>> dirichlet;  // dof index -> value
};

struct StepReport {
  bool converged = false;
  int newton_iters = 0;
  int bisections = 0;
  double residual_norm = 0.0;
  double reaction = 0.0;  // sum of internal forces on the reaction dofs, GPa*um
};

/// Plane-strain monolithic displacement + micromorphic model on a Q8 mesh.
/// The displacement field is 2D; plastic kinematics and slip systems stay 3D
/// through the embedding F = [[F2d, 0], [0, 1]].
class FemModel {
 public:
  FemModel(Mesh mesh, SlipCatalogue catalogue, MaterialParams material,
           SolverParams solver, Integrator integrator, int quad_order);

  const Mesh& mesh() const { return mesh_; }
  const SlipCatalogue& catalogue() const { return catalogue_; }
  bool micromorphic() const { return n_s_ > 0; }
  int dofs_per_node() const { return 2 + n_s_; }
  int n_dofs() const { return mesh_.n_nodes() * dofs_per_node(); }
  int dof_u(int node, int comp) const { return node * dofs_per_node() + comp; }
  int dof_s(int node, int sys) const { return node * dofs_per_node() + 2 + sys; }
  int n_gauss() const { return quad_ * quad_; }

  /// Convergence threshold on ||R||_inf: 1e-8 * mu * mean element volume.
  double global_tolerance() const;

  /// Internal-force vector of the assembled incremental energy; caches the
  /// per-GP local solves for a following tangent() call.
  Eigen::VectorXd residual(const Eigen::VectorXd& values);

  /// Consistent tangent from Gauss-point-level finite differences of the
  /// fluxes (step 1e-7 per generalized strain), chained through the constant
  /// strain-displacement operators. Requires residual(values) first. With
  /// exact = true every perturbed flux comes from a full warm-started local
  /// solve instead of the frozen-active-set correction; the global Newton
  /// escalates to this when its line search has to damp hard.
  Eigen::SparseMatrix<double> tangent(const Eigen::VectorXd& values, bool exact = false);

  /// Assembled incremental energy (fresh local solves; test oracle surface).
  double incremental_energy(const Eigen::VectorXd& values) const;

  /// One Dirichlet-driven load step: undamped Newton with up to `max_bisect`
  /// load halvings on failure. Commits history on success. The reaction is
  /// accumulated over `reaction_dofs`.
  StepReport solve_step(GlobalField& field, const std::vector<int>& reaction_dofs,
                        int max_newton = 60, int max_bisect = 4);

  void commit(const Eigen::VectorXd& values);

  /// Adopt the cached local roots as warm starts for subsequent assemblies.
  void promote_warm_starts();

  const std::vector<QuadraturePointState>& history() const { return history_; }

  struct GpSample {
    Eigen::Vector2d X;
    double weight = 0.0;     // w * detJ
    double sum_alpha = 0.0;  // committed
    Eigen::VectorXd alpha;
    Eigen::VectorXd s;       // field values at the point (empty if local)
  };
  std::vector<GpSample> sample_gauss_points(const Eigen::VectorXd& values) const;

  /// Mass-lumped projection of committed sum-alpha onto the nodes.
  Eigen::VectorXd nodal_sum_alpha() const;

 private:
  struct GpCache {
    Eigen::VectorXd dlambda;
    Eigen::VectorXd a_root;
    std::vector<int> active;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_haa;
    Eigen::VectorXd flux;  // [P11, P12, P21, P22, q_s(0..ns-1)]
    bool plastic = false;
    bool has_solution = false;  // warm start available for the next assembly
  };
  struct Shape {
    Eigen::Matrix<double, 8, 1> N;
    Eigen::Matrix<double, 8, 2> dNX;  // gradients w.r.t. reference coordinates
    double wdetJ = 0.0;
  };

  StepContext make_context(const QuadraturePointState& hist, const Eigen::Matrix3d& F,
                           const Eigen::VectorXd& s, const Eigen::Matrix3Xd& grad_s) const;
  bool newton_solve(Eigen::VectorXd& values, const std::vector<std::uint8_t>& constrained,
                    int max_newton, double* residual_norm, int* iterations,
                    Eigen::VectorXd* final_residual);

  Mesh mesh_;
  SlipCatalogue catalogue_;
  MaterialParams material_;
  SolverParams solver_;
  Integrator integrator_;
  int quad_;
  int n_s_;  // micromorphic dofs per node (0 or catalogue size)

  std::vector<double> gauss_points_;
  std::vector<double> gauss_weights_;
  std::vector<Shape> shapes_;  // n_elements * n_gauss
  std::vector<QuadraturePointState> history_;
  std::vector<GpCache> cache_;
  std::vector<Eigen::VectorXd> warm_;  // per-GP roots of the last accepted iterate
  Eigen::VectorXd cache_values_;
  bool cache_valid_ = false;
};

struct TensileStepRecord {
  int step = 0;
  double u_prescribed = 0.0;        // um
  double reaction_gpa_um = 0.0;     // per unit out-of-plane thickness
  double reaction_n_per_um = 0.0;   // 1 GPa*um = 1e-3 N/um
  int newton_iters = 0;
  int bisections = 0;
};

struct TensileRunResult {
  std::vector<TensileStepRecord> steps;
  double plastic_zone_width = 0.0;  // x-extent of Gauss points with sum-alpha > 1e-4
  double alpha_s_mismatch = 0.0;    // relative L2 of alpha - s over the plastic zone
  int n_elements = 0;
  int n_dofs = 0;
};

/// Tensile experiment: dog-bone mesh, clamped left grip, prescribed axial
/// displacement on the right grip (lateral component free), equal load
/// steps. Writes CSV/VTK into cfg.output.dir when enabled.
TensileRunResult run_tensile(const RunConfig& cfg);

}  // namespace slipform

#endif  // SLIPFORM_FEM_HPP
