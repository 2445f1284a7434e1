#ifndef SLIPFORM_SLIP_GEOMETRY_HPP
#define SLIPFORM_SLIP_GEOMETRY_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace slipform {

/// One one-sided slip system: unit slip direction M and unit plane normal N.
/// Both senses of a physical system appear as separate entries in a
/// catalogue, so downstream yield functions carry no absolute value and all
/// slip increments are nonnegative.
struct SlipSystem {
  Eigen::Vector3d direction;  // M, |M| = 1
  Eigen::Vector3d normal;     // N, |N| = 1, M.N = 0

  SlipSystem(const Eigen::Vector3d& m, const Eigen::Vector3d& n);

  /// Schmid dyad M (x) N.
  Eigen::Matrix3d dyad() const { return direction * normal.transpose(); }
};

/// Ordered, index-stable list of slip systems.
class SlipCatalogue {
 public:
  SlipCatalogue(std::string name, std::vector<SlipSystem> systems);

  const std::string& name() const { return name_; }
  int size() const { return static_cast<int>(systems_.size()); }
  const SlipSystem& operator[](int i) const { return systems_[i]; }
  const std::vector<SlipSystem>& systems() const { return systems_; }

 private:
  std::string name_;
  std::vector<SlipSystem> systems_;
};

/// The 24 one-sided FCC systems (12 physical systems and their negatives).
SlipCatalogue fcc_catalogue();

/// Two one-sided systems +-e1 (x) e2; mutually orthogonal pair, in-plane.
SlipCatalogue planar2_catalogue();

/// Four in-plane systems: +-e1 (x) e2 and +-e2 (x) e1.
SlipCatalogue planar4_catalogue();

/// Four systems +-e1 (x) e2, +-e1 (x) e3 with M(i) . N(j) = 0 for all pairs.
SlipCatalogue ortho4_catalogue();

/// Lookup by the names accepted in config files:
/// "fcc24", "planar2", "planar4", "ortho4". Throws on unknown names.
SlipCatalogue catalogue_by_name(const std::string& name);

/// Crystal orientation given by three Euler angles and the resulting
/// rotation, which doubles as the initial plastic deformation gradient.
struct Orientation {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
};

/// R0 = Rz(c) * Rx(b) * Rz(a), the left matrix applied last.
Orientation rotation_from_euler(double a, double b, double c);

/// Resolved shear stress tau = M . Sigma . N on one system.
inline double schmid_stress(const Eigen::Matrix3d& sigma, const SlipSystem& sys) {
  return sys.direction.dot(sigma * sys.normal);
}

/// Geometry Gram matrix F_ij = (Mi.Mj)(Ni.Nj) + (Mi.Nj)(Ni.Mj).
/// For the FCC catalogue it has numerical rank five, the root cause of the
/// ill-posedness of rate-independent multislip updates.
Eigen::MatrixXd geometry_gram_matrix(const SlipCatalogue& catalogue);

/// Number of singular values above threshold * sigma_max.
int numerical_rank(const Eigen::MatrixXd& m, double threshold = 1e-10);

}  // namespace slipform

#endif  // SLIPFORM_SLIP_GEOMETRY_HPP
