#ifndef SLIPFORM_VTK_HPP
#define SLIPFORM_VTK_HPP

#include <string>

#include "slipform/fem.hpp"

namespace slipform {

/// Legacy-ASCII unstructured-grid snapshot: displacement vector, projected
/// accumulated slip and micromorphic norm as point data, element id as cell
/// data.
void write_tensile_vtk(const std::string& path, const FemModel& model,
                       const Eigen::VectorXd& values);

}  // namespace slipform

#endif  // SLIPFORM_VTK_HPP
