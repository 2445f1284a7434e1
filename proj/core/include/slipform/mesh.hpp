#ifndef SLIPFORM_MESH_HPP
#define SLIPFORM_MESH_HPP

#include <Eigen/Dense>

#include <array>
#include <map>
#include <string>
#include <vector>

#include "slipform/config.hpp"

namespace slipform {

/// 8-node serendipity quadrilateral mesh in the reference configuration.
/// Node ordering per element: corners counterclockwise, then mid-sides
/// (between corners 0-1, 1-2, 2-3, 3-0).
struct Mesh {
  std::vector<Eigen::Vector2d> nodes;  // um
  std::vector<std::array<int, 8>> elements;
  std::map<std::string, std::vector<int>> boundary_sets;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_elements() const { return static_cast<int>(elements.size()); }

  /// Reference area from the isoparametric mapping (3x3 Gauss).
  double area() const;
};

/// Shape functions and parent-space gradients of the serendipity Q8 element.
void shape_serendipity8(double xi, double eta, Eigen::Matrix<double, 8, 1>& N,
                        Eigen::Matrix<double, 8, 2>& dN);

/// Dog-bone specimen: length x [0, L], width tapering from `width` at the
/// grips to `center_width` at midspan with a cosine blend over the central
/// gauge region. refinement = 1 gives 40 x 4 = 160 elements. Boundary sets
/// "left_grip" and "right_grip" hold the end-face nodes.
Mesh build_tensile_mesh(const FemSpec& geom, int refinement);

/// Structured rectangle [0,Lx] x [0,Ly], nx x ny elements; boundary sets
/// "left", "right", "bottom", "top".
Mesh make_rectangle_mesh(int nx, int ny, double Lx, double Ly);

/// Throws when any element Jacobian is non-positive at the given quadrature.
void check_mesh(const Mesh& mesh, int quad_order);

}  // namespace slipform

#endif  // SLIPFORM_MESH_HPP
