#ifndef SLIPFORM_CONFIG_HPP
#define SLIPFORM_CONFIG_HPP

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "slipform/solvers.hpp"

namespace slipform {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadingSpec {
  std::string component = "F12";  // driven deformation-gradient entry
  double range = 4.0;
  double increment = 2e-2;

  int steps() const;
  // Row/column of the driven entry, zero-based.
  int row() const;
  int col() const;
};

struct FemSpec {
  int refinement = 1;       // 1 -> 40x4 = 160 elements
  int steps = 100;
  double elongation = 0.02; // fraction of the specimen length
  int quadrature = 3;       // Gauss points per direction (2 or 3)
  double length = 84.0;     // um
  double width = 10.0;      // um, at the grips
  double center_width = 6.0;
  double gauge_length = 28.0;
  int dof_budget = 50000;   // advisory: warn when n_dofs exceeds it
};

struct OutputSpec {
  std::string dir = "out";
  bool csv = true;
  bool vtk = true;
};

struct SweepSpec {
  std::vector<double> w_scales{0.1, 1.0, 10.0, 100.0};
  std::vector<double> snapshots{4e-2, 8e-2};  // F12 values to instrument
};

struct RunConfig {
  std::string experiment = "simple_shear";  // simple_shear | tensile | custom_path
  std::string catalogue_name = "fcc24";
  Integrator integrator = Integrator::ExpMap;
  Orientation orientation;
  MaterialParams material;  // c2 already converted to GPa*um^2
  SolverParams solver;      // fully resolved (w, tolerances)
  LoadingSpec loading;
  FemSpec fem;
  OutputSpec output;
  SweepSpec sweep;

  std::uint64_t config_hash = 0;
  std::set<std::string> keys_set;  // keys present in the file

  bool is_set(const std::string& key) const { return keys_set.count(key) > 0; }

  /// Deterministic echo of every resolved value, for the run manifest.
  std::string manifest() const;
};

/// Parses the dotted-key config format (`section.key = value`, `#` comments).
/// Unknown keys are hard errors naming the key; malformed lines report their
/// line number. material.c2 is read in MPa*m and converted to GPa*um^2.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& origin = "<string>");

/// Conversion factor applied to material.c2: 1 MPa*m = 1e3 GPa*um^2
/// (stress scaled MPa -> GPa, the length pair m -> um^2 at FE scale).
constexpr double kC2UnitFactor = 1e3;

extern const char* const kLibraryVersion;

}  // namespace slipform

#endif  // SLIPFORM_CONFIG_HPP
