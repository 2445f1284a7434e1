#include "slipform/slip_geometry.hpp"

#include <cmath>

namespace slipform {

namespace {

constexpr double kUnitTol = 1e-14;

}  // namespace

SlipSystem::SlipSystem(const Eigen::Vector3d& m, const Eigen::Vector3d& n)
    : direction(m), normal(n) {
  if (std::abs(direction.norm() - 1.0) > kUnitTol ||
      std::abs(normal.norm() - 1.0) > kUnitTol) {
    throw std::invalid_argument("SlipSystem: direction and normal must be unit vectors");
  }
  if (std::abs(direction.dot(normal)) > kUnitTol) {
    throw std::invalid_argument("SlipSystem: direction must be orthogonal to normal");
  }
}

SlipCatalogue::SlipCatalogue(std::string name, std::vector<SlipSystem> systems)
    : name_(std::move(name)), systems_(std::move(systems)) {
  if (systems_.empty()) {
    throw std::invalid_argument("SlipCatalogue: empty system list");
  }
}

SlipCatalogue fcc_catalogue() {
  const double s2 = 1.0 / std::sqrt(2.0);
  const double s3 = 1.0 / std::sqrt(3.0);
  using V = Eigen::Vector3d;

  // Slip directions of systems 1..12; systems 13..24 are their negatives on
  // the same planes so every physical system is modelled one-sidedly twice.
  const V m[12] = {
      V(-1, 1, 0), V(1, 0, -1), V(0, -1, 1),   // plane (1,1,1)
      V(-1, -1, 0), V(1, 0, 1), V(0, 1, -1),   // plane (1,-1,-1)
      V(1, 1, 0), V(-1, 0, 1), V(0, -1, -1),   // plane (-1,1,-1)
      V(1, -1, 0), V(-1, 0, -1), V(0, 1, 1),   // plane (-1,-1,1)
  };
  const V n[4] = {V(1, 1, 1), V(1, -1, -1), V(-1, 1, -1), V(-1, -1, 1)};

  std::vector<SlipSystem> systems;
  systems.reserve(24);
  for (int i = 0; i < 12; ++i) {
    systems.emplace_back(s2 * m[i], s3 * n[i / 3]);
  }
  for (int i = 0; i < 12; ++i) {
    systems.emplace_back(-s2 * m[i], s3 * n[i / 3]);
  }
  return SlipCatalogue("fcc24", std::move(systems));
}

SlipCatalogue planar2_catalogue() {
  using V = Eigen::Vector3d;
  std::vector<SlipSystem> systems{
      SlipSystem(V(1, 0, 0), V(0, 1, 0)),
      SlipSystem(V(-1, 0, 0), V(0, 1, 0)),
  };
  return SlipCatalogue("planar2", std::move(systems));
}

SlipCatalogue planar4_catalogue() {
  using V = Eigen::Vector3d;
  std::vector<SlipSystem> systems{
      SlipSystem(V(1, 0, 0), V(0, 1, 0)),
      SlipSystem(V(-1, 0, 0), V(0, 1, 0)),
      SlipSystem(V(0, 1, 0), V(1, 0, 0)),
      SlipSystem(V(0, -1, 0), V(1, 0, 0)),
  };
  return SlipCatalogue("planar4", std::move(systems));
}

SlipCatalogue ortho4_catalogue() {
  using V = Eigen::Vector3d;
  std::vector<SlipSystem> systems{
      SlipSystem(V(1, 0, 0), V(0, 1, 0)),
      SlipSystem(V(-1, 0, 0), V(0, 1, 0)),
      SlipSystem(V(1, 0, 0), V(0, 0, 1)),
      SlipSystem(V(-1, 0, 0), V(0, 0, 1)),
  };
  return SlipCatalogue("ortho4", std::move(systems));
}

SlipCatalogue catalogue_by_name(const std::string& name) {
  if (name == "fcc24") return fcc_catalogue();
  if (name == "planar2") return planar2_catalogue();
  if (name == "planar4") return planar4_catalogue();
  if (name == "ortho4") return ortho4_catalogue();
  throw std::invalid_argument("unknown slip catalogue: " + name);
}

Orientation rotation_from_euler(double a, double b, double c) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) {
    throw std::invalid_argument("rotation_from_euler: angles must be finite");
  }
  Eigen::Matrix3d rz_c, rx_b, rz_a;
  rz_c << std::cos(c), std::sin(c), 0,
         -std::sin(c), std::cos(c), 0,
          0, 0, 1;
  rx_b << 1, 0, 0,
          0, std::cos(b), std::sin(b),
          0, -std::sin(b), std::cos(b);
  rz_a << std::cos(a), std::sin(a), 0,
         -std::sin(a), std::cos(a), 0,
          0, 0, 1;
  Orientation o;
  o.a = a;
  o.b = b;
  o.c = c;
  o.rotation = rz_c * rx_b * rz_a;
  return o;
}

Eigen::MatrixXd geometry_gram_matrix(const SlipCatalogue& catalogue) {
  const int n = catalogue.size();
  Eigen::MatrixXd f(n, n);
  for (int i = 0; i < n; ++i) {
    const auto& si = catalogue[i];
    for (int j = 0; j < n; ++j) {
      const auto& sj = catalogue[j];
      f(i, j) = si.direction.dot(sj.direction) * si.normal.dot(sj.normal) +
                si.direction.dot(sj.normal) * si.normal.dot(sj.direction);
    }
  }
  return f;
}

int numerical_rank(const Eigen::MatrixXd& m, double threshold) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double cut = threshold * sv(0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut) ++rank;
  }
  return rank;
}

}  // namespace slipform
