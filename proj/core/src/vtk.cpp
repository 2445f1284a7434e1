#include "slipform/vtk.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace slipform {

void write_tensile_vtk(const std::string& path, const FemModel& model,
                       const Eigen::VectorXd& values) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write VTK file '" + path + "'");
  const Mesh& mesh = model.mesh();
  const int dpn = model.dofs_per_node();
  const int ns = model.micromorphic() ? model.catalogue().size() : 0;

  char buf[128];
  out << "# vtk DataFile Version 3.0\n";
  out << "slipform tensile snapshot\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";

  out << "POINTS " << mesh.n_nodes() << " double\n";
  for (const auto& node : mesh.nodes) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g 0\n", node.x(), node.y());
    out << buf;
  }

  out << "CELLS " << mesh.n_elements() << ' ' << mesh.n_elements() * 9 << '\n';
  for (const auto& conn : mesh.elements) {
    out << 8;
    for (const int node : conn) out << ' ' << node;
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.n_elements() << '\n';
  for (int e = 0; e < mesh.n_elements(); ++e) {
    out << 23 << '\n';  // VTK_QUADRATIC_QUAD
  }

  out << "POINT_DATA " << mesh.n_nodes() << '\n';
  out << "VECTORS displacement double\n";
  for (int k = 0; k < mesh.n_nodes(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g 0\n", values(k * dpn), values(k * dpn + 1));
    out << buf;
  }

  const Eigen::VectorXd sum_alpha = model.nodal_sum_alpha();
  out << "SCALARS sum_alpha double 1\nLOOKUP_TABLE default\n";
  for (int k = 0; k < mesh.n_nodes(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.9g\n", sum_alpha(k));
    out << buf;
  }

  out << "SCALARS s_norm double 1\nLOOKUP_TABLE default\n";
  for (int k = 0; k < mesh.n_nodes(); ++k) {
    double norm = 0.0;
    for (int i = 0; i < ns; ++i) {
      const double s = values(k * dpn + 2 + i);
      norm += s * s;
    }
    std::snprintf(buf, sizeof(buf), "%.9g\n", std::sqrt(norm));
    out << buf;
  }

  out << "CELL_DATA " << mesh.n_elements() << '\n';
  out << "SCALARS element_id int 1\nLOOKUP_TABLE default\n";
  for (int e = 0; e < mesh.n_elements(); ++e) out << e << '\n';
}

}  // namespace slipform
