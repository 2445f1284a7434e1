#include "slipform/mesh.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace slipform {

namespace {

struct GaussRule {
  std::vector<double> points;
  std::vector<double> weights;
};

GaussRule gauss_rule(int order) {
  if (order == 2) {
    const double p = 1.0 / std::sqrt(3.0);
    return {{-p, p}, {1.0, 1.0}};
  }
  if (order == 3) {
    const double p = std::sqrt(3.0 / 5.0);
    return {{-p, 0.0, p}, {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}};
  }
  throw std::invalid_argument("gauss_rule: order must be 2 or 3");
}

Eigen::Matrix2d jacobian_at(const Mesh& mesh, const std::array<int, 8>& conn,
                            double xi, double eta) {
  Eigen::Matrix<double, 8, 1> N;
  Eigen::Matrix<double, 8, 2> dN;
  shape_serendipity8(xi, eta, N, dN);
  Eigen::Matrix2d jac = Eigen::Matrix2d::Zero();
  for (int k = 0; k < 8; ++k) {
    jac += mesh.nodes[conn[k]] * dN.row(k);
  }
  return jac;
}

// Structured Q8 grid over a parametrized strip: x from column index,
// y = eta * halfwidth(x). Mid-side nodes sit at their edge-corner means.
template <typename HalfWidth>
Mesh structured_q8(int nx, int ny, double length, HalfWidth halfwidth) {
  Mesh mesh;

  // Corner grid (nx+1) x (ny+1), then mid-side nodes on the fine grid.
  // Fine grid indexing: (2nx+1) x (2ny+1); centers (both indices odd) are
  // not Q8 nodes.
  const int fx = 2 * nx + 1;
  const int fy = 2 * ny + 1;
  std::vector<int> node_id(static_cast<std::size_t>(fx) * fy, -1);
  auto fine = [fx](int i, int j) { return j * fx + i; };

  auto corner_xy = [&](int i, int j) {
    const double x = length * i / (2.0 * nx);
    const double eta = static_cast<double>(j) / ny - 1.0;  // j in [0, 2ny]
    return Eigen::Vector2d(x, eta * halfwidth(x));
  };

  // Corners first.
  for (int j = 0; j < fy; j += 2) {
    for (int i = 0; i < fx; i += 2) {
      node_id[fine(i, j)] = mesh.n_nodes();
      mesh.nodes.push_back(corner_xy(i, j));
    }
  }
  // Mid-side nodes at corner means (straight element edges).
  for (int j = 0; j < fy; ++j) {
    for (int i = 0; i < fx; ++i) {
      const bool mid_h = (i % 2 == 1) && (j % 2 == 0);
      const bool mid_v = (i % 2 == 0) && (j % 2 == 1);
      if (!mid_h && !mid_v) continue;
      node_id[fine(i, j)] = mesh.n_nodes();
      if (mid_h) {
        mesh.nodes.push_back(0.5 * (mesh.nodes[node_id[fine(i - 1, j)]] +
                                    mesh.nodes[node_id[fine(i + 1, j)]]));
      } else {
        mesh.nodes.push_back(0.5 * (mesh.nodes[node_id[fine(i, j - 1)]] +
                                    mesh.nodes[node_id[fine(i, j + 1)]]));
      }
    }
  }

  for (int ey = 0; ey < ny; ++ey) {
    for (int ex = 0; ex < nx; ++ex) {
      const int i0 = 2 * ex;
      const int j0 = 2 * ey;
      mesh.elements.push_back({
          node_id[fine(i0, j0)], node_id[fine(i0 + 2, j0)],
          node_id[fine(i0 + 2, j0 + 2)], node_id[fine(i0, j0 + 2)],
          node_id[fine(i0 + 1, j0)], node_id[fine(i0 + 2, j0 + 1)],
          node_id[fine(i0 + 1, j0 + 2)], node_id[fine(i0, j0 + 1)],
      });
    }
  }

  auto& left = mesh.boundary_sets["left_grip"];
  auto& right = mesh.boundary_sets["right_grip"];
  for (int j = 0; j < fy; ++j) {
    if (node_id[fine(0, j)] >= 0) left.push_back(node_id[fine(0, j)]);
    if (node_id[fine(fx - 1, j)] >= 0) right.push_back(node_id[fine(fx - 1, j)]);
  }
  return mesh;
}

}  // namespace

void shape_serendipity8(double xi, double eta, Eigen::Matrix<double, 8, 1>& N,
                        Eigen::Matrix<double, 8, 2>& dN) {
  static const double xs[8] = {-1, 1, 1, -1, 0, 1, 0, -1};
  static const double ys[8] = {-1, -1, 1, 1, -1, 0, 1, 0};
  for (int k = 0; k < 4; ++k) {
    const double xk = xs[k], yk = ys[k];
    N(k) = 0.25 * (1 + xi * xk) * (1 + eta * yk) * (xi * xk + eta * yk - 1);
    dN(k, 0) = 0.25 * xk * (1 + eta * yk) * (2 * xi * xk + eta * yk);
    dN(k, 1) = 0.25 * yk * (1 + xi * xk) * (xi * xk + 2 * eta * yk);
  }
  for (int k = 4; k < 8; ++k) {
    const double xk = xs[k], yk = ys[k];
    if (xk == 0.0) {  // mid-side on a horizontal edge
      N(k) = 0.5 * (1 - xi * xi) * (1 + eta * yk);
      dN(k, 0) = -xi * (1 + eta * yk);
      dN(k, 1) = 0.5 * (1 - xi * xi) * yk;
    } else {  // mid-side on a vertical edge
      N(k) = 0.5 * (1 + xi * xk) * (1 - eta * eta);
      dN(k, 0) = 0.5 * xk * (1 - eta * eta);
      dN(k, 1) = -eta * (1 + xi * xk);
    }
  }
}

double Mesh::area() const {
  const GaussRule rule = gauss_rule(3);
  double area = 0.0;
  for (const auto& conn : elements) {
    for (std::size_t b = 0; b < rule.points.size(); ++b) {
      for (std::size_t a = 0; a < rule.points.size(); ++a) {
        const Eigen::Matrix2d jac = jacobian_at(*this, conn, rule.points[a], rule.points[b]);
        area += rule.weights[a] * rule.weights[b] * jac.determinant();
      }
    }
  }
  return area;
}

Mesh build_tensile_mesh(const FemSpec& geom, int refinement) {
  if (refinement < 1) throw std::invalid_argument("build_tensile_mesh: refinement >= 1");
  if (geom.length <= 0 || geom.width <= 0 || geom.center_width <= 0 ||
      geom.center_width > geom.width || geom.gauge_length <= 0 ||
      geom.gauge_length >= geom.length) {
    throw std::invalid_argument("build_tensile_mesh: degenerate geometry");
  }
  const int nx = 40 * refinement;
  const int ny = 4 * refinement;
  const double half_outer = 0.5 * geom.width;
  const double half_center = 0.5 * geom.center_width;
  const double half_gauge = 0.5 * geom.gauge_length;
  const double mid = 0.5 * geom.length;

  auto halfwidth = [=](double x) {
    const double d = std::abs(x - mid);
    if (d >= half_gauge) return half_outer;
    const double t = d / half_gauge;  // 0 at midspan, 1 at the gauge ends
    return half_center +
           (half_outer - half_center) * 0.5 * (1.0 - std::cos(std::numbers::pi * t));
  };

  Mesh mesh = structured_q8(nx, ny, geom.length, halfwidth);
  check_mesh(mesh, 3);
  return mesh;
}

Mesh make_rectangle_mesh(int nx, int ny, double Lx, double Ly) {
  if (nx < 1 || ny < 1 || Lx <= 0 || Ly <= 0) {
    throw std::invalid_argument("make_rectangle_mesh: invalid dimensions");
  }
  Mesh mesh = structured_q8(nx, ny, Lx, [Ly](double) { return 0.5 * Ly; });
  // Shift from y in [-Ly/2, Ly/2] to [0, Ly] and rename the boundary sets.
  for (auto& node : mesh.nodes) node.y() += 0.5 * Ly;
  mesh.boundary_sets["left"] = mesh.boundary_sets["left_grip"];
  mesh.boundary_sets["right"] = mesh.boundary_sets["right_grip"];
  mesh.boundary_sets.erase("left_grip");
  mesh.boundary_sets.erase("right_grip");
  auto& bottom = mesh.boundary_sets["bottom"];
  auto& top = mesh.boundary_sets["top"];
  for (int k = 0; k < mesh.n_nodes(); ++k) {
    if (std::abs(mesh.nodes[k].y()) < 1e-12 * Ly) bottom.push_back(k);
    if (std::abs(mesh.nodes[k].y() - Ly) < 1e-12 * Ly) top.push_back(k);
  }
  check_mesh(mesh, 3);
  return mesh;
}

void check_mesh(const Mesh& mesh, int quad_order) {
  const GaussRule rule = gauss_rule(quad_order);
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    for (const int node : mesh.elements[e]) {
      if (node < 0 || node >= mesh.n_nodes()) {
        throw std::runtime_error("mesh connectivity out of range in element " +
                                 std::to_string(e));
      }
    }
    for (double b : rule.points) {
      for (double a : rule.points) {
        const Eigen::Matrix2d jac = jacobian_at(mesh, mesh.elements[e], a, b);
        if (jac.determinant() <= 0.0) {
          throw std::runtime_error("non-positive Jacobian in element " + std::to_string(e));
        }
      }
    }
  }
}

}  // namespace slipform
