#include "slipform/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace slipform {

const char* const kLibraryVersion = "slipform 0.1.0";

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& value, const std::string& key, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config line " + std::to_string(line) + ": key '" + key +
                      "': cannot parse number from '" + value + "'");
  }
}

int parse_int(const std::string& value, const std::string& key, int line) {
  const double v = parse_double(value, key, line);
  if (v != std::floor(v)) {
    throw ConfigError("config line " + std::to_string(line) + ": key '" + key +
                      "' expects an integer, got '" + value + "'");
  }
  return static_cast<int>(v);
}

bool parse_bool(const std::string& value, const std::string& key, int line) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("config line " + std::to_string(line) + ": key '" + key +
                    "' expects a boolean, got '" + value + "'");
}

std::vector<double> parse_list(const std::string& value, const std::string& key, int line) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(item, key, line));
  }
  if (out.empty()) {
    throw ConfigError("config line " + std::to_string(line) + ": key '" + key +
                      "' expects a comma-separated list");
  }
  return out;
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt(v[i]);
  }
  return out;
}

}  // namespace

int LoadingSpec::steps() const {
  const double ratio = range / increment;
  return static_cast<int>(std::llround(ratio));
}

int LoadingSpec::row() const {
  if (component.size() != 3 || component[0] != 'F') {
    throw ConfigError("loading.component must look like F12, got '" + component + "'");
  }
  return component[1] - '1';
}

int LoadingSpec::col() const { return component[2] - '1'; }

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  cfg.config_hash = fnv1a(text);

  std::map<std::string, std::string> raw;
  std::map<std::string, int> lines;
  {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + " line " + std::to_string(lineno) +
                          ": expected 'key = value'");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty() || value.empty()) {
        throw ConfigError(origin + " line " + std::to_string(lineno) +
                          ": empty key or value");
      }
      if (raw.count(key)) {
        throw ConfigError(origin + " line " + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
      }
      raw[key] = value;
      lines[key] = lineno;
      cfg.keys_set.insert(key);
    }
  }

  auto take = [&](const std::string& key) -> const std::string* {
    const auto it = raw.find(key);
    return it == raw.end() ? nullptr : &it->second;
  };
  std::set<std::string> consumed;
  auto get_double = [&](const std::string& key, double fallback) {
    consumed.insert(key);
    const std::string* v = take(key);
    return v ? parse_double(*v, key, lines[key]) : fallback;
  };
  auto get_int = [&](const std::string& key, int fallback) {
    consumed.insert(key);
    const std::string* v = take(key);
    return v ? parse_int(*v, key, lines[key]) : fallback;
  };
  auto get_string = [&](const std::string& key, const std::string& fallback) {
    consumed.insert(key);
    const std::string* v = take(key);
    return v ? *v : fallback;
  };
  auto get_list = [&](const std::string& key, const std::vector<double>& fallback) {
    consumed.insert(key);
    const std::string* v = take(key);
    return v ? parse_list(*v, key, lines[key]) : fallback;
  };

  cfg.experiment = get_string("experiment", "simple_shear");
  if (cfg.experiment != "simple_shear" && cfg.experiment != "tensile" &&
      cfg.experiment != "custom_path") {
    throw ConfigError("experiment must be simple_shear, tensile or custom_path, got '" +
                      cfg.experiment + "'");
  }
  cfg.catalogue_name = get_string("catalogue", "fcc24");
  try {
    catalogue_by_name(cfg.catalogue_name);  // validate early
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }

  const std::string integ = get_string("time_integration", "expmap");
  if (integ == "expmap") {
    cfg.integrator = Integrator::ExpMap;
  } else if (integ == "backward_euler") {
    cfg.integrator = Integrator::BackwardEuler;
  } else {
    throw ConfigError("time_integration must be expmap or backward_euler, got '" +
                      integ + "'");
  }

  cfg.orientation = rotation_from_euler(get_double("orientation.a", 0.0),
                                        get_double("orientation.b", 0.0),
                                        get_double("orientation.c", 0.0));

  cfg.material.kappa = get_double("material.kappa", 49.98);
  cfg.material.mu = get_double("material.mu", 21.1);
  cfg.material.Q0 = get_double("material.Q0", 0.06);
  cfg.material.Qinf = get_double("material.Qinf", cfg.material.Q0);
  cfg.material.H = get_double("material.H", 1.0);
  cfg.material.c1 = get_double("material.c1", 0.0);
  const double c2_input = get_double("material.c2", 0.0);
  const std::string c2_unit = get_string("material.c2_unit", "MPa*m");
  if (c2_unit == "MPa*m") {
    cfg.material.c2 = c2_input * kC2UnitFactor;
  } else if (c2_unit == "GPa*um^2") {
    cfg.material.c2 = c2_input;
  } else {
    throw ConfigError("material.c2_unit: unsupported unit '" + c2_unit +
                      "' (expected MPa*m or GPa*um^2); stresses are GPa and "
                      "lengths um internally, 1 MPa*m = " +
                      fmt(kC2UnitFactor) + " GPa*um^2");
  }
  cfg.material.validate();

  cfg.solver = SolverParams::defaults_for(cfg.material);
  try {
    cfg.solver.algorithm =
        algorithm_from_string(get_string("solver.algorithm", "fb_variational"));
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }
  cfg.solver.w = get_double("solver.w_scale", 1.0) * cfg.material.mu;
  cfg.solver.delta = get_double("solver.delta", 1e-10);
  cfg.solver.penalty_hat = get_double("solver.penalty_hat", 1.0);
  cfg.solver.penalty_growth = get_double("solver.penalty_growth", 10.0);
  cfg.solver.penalty_cap = get_double("solver.penalty_cap", 1e6);
  cfg.solver.newton_tol =
      get_double("solver.tolerances.newton", 1e-10 * cfg.material.mu);
  cfg.solver.outer_tol = get_double("solver.tolerances.outer", 1e-8);
  cfg.solver.max_newton = get_int("solver.max_newton", 50);
  cfg.solver.max_outer_al = get_int("solver.max_outer", 30);
  cfg.solver.validate();

  cfg.loading.component = get_string("loading.component", "F12");
  cfg.loading.range = get_double("loading.range", 4.0);
  cfg.loading.increment = get_double("loading.increment", 2e-2);
  if (cfg.loading.increment <= 0.0 || cfg.loading.range <= 0.0) {
    throw ConfigError("loading.range and loading.increment must be positive");
  }
  {
    const double ratio = cfg.loading.range / cfg.loading.increment;
    if (std::abs(ratio - std::llround(ratio)) > 1e-9 * ratio) {
      throw ConfigError("loading.increment must divide loading.range evenly");
    }
  }
  cfg.loading.row();  // validates the component spelling
  if (cfg.loading.row() < 0 || cfg.loading.row() > 2 || cfg.loading.col() < 0 ||
      cfg.loading.col() > 2) {
    throw ConfigError("loading.component indices must be in 1..3");
  }

  cfg.fem.refinement = get_int("fem.refinement", 1);
  cfg.fem.steps = get_int("fem.steps", 100);
  cfg.fem.elongation = get_double("fem.elongation", 0.02);
  cfg.fem.quadrature = get_int("fem.quadrature", 3);
  cfg.fem.length = get_double("fem.length", 84.0);
  cfg.fem.width = get_double("fem.width", 10.0);
  cfg.fem.center_width = get_double("fem.center_width", 6.0);
  cfg.fem.gauge_length = get_double("fem.gauge_length", 28.0);
  cfg.fem.dof_budget = get_int("fem.dof_budget", 50000);
  if (cfg.fem.quadrature != 2 && cfg.fem.quadrature != 3) {
    throw ConfigError("fem.quadrature must be 2 or 3");
  }
  if (cfg.fem.refinement < 1 || cfg.fem.steps < 1) {
    throw ConfigError("fem.refinement and fem.steps must be >= 1");
  }
  if (cfg.fem.length <= 0.0 || cfg.fem.width <= 0.0 || cfg.fem.center_width <= 0.0 ||
      cfg.fem.center_width > cfg.fem.width || cfg.fem.gauge_length <= 0.0 ||
      cfg.fem.gauge_length >= cfg.fem.length) {
    throw ConfigError("degenerate tensile specimen geometry");
  }

  cfg.output.dir = get_string("output.dir", "out");
  {
    const std::string formats = get_string("output.formats", "csv,vtk");
    cfg.output.csv = formats.find("csv") != std::string::npos;
    cfg.output.vtk = formats.find("vtk") != std::string::npos;
  }

  cfg.sweep.w_scales = get_list("sweep.w_scales", {0.1, 1.0, 10.0, 100.0});
  cfg.sweep.snapshots = get_list("sweep.snapshots", {4e-2, 8e-2});

  for (const auto& [key, value] : raw) {
    if (!consumed.count(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

std::string RunConfig::manifest() const {
  std::ostringstream out;
  out << "version = " << kLibraryVersion << "\n";
  char hash[20];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(config_hash));
  out << "config_hash = " << hash << "\n";
  out << "experiment = " << experiment << "\n";
  out << "catalogue = " << catalogue_name << "\n";
  out << "time_integration = "
      << (integrator == Integrator::ExpMap ? "expmap" : "backward_euler") << "\n";
  out << "orientation.a = " << fmt(orientation.a) << "\n";
  out << "orientation.b = " << fmt(orientation.b) << "\n";
  out << "orientation.c = " << fmt(orientation.c) << "\n";
  out << "material.kappa = " << fmt(material.kappa) << "\n";
  out << "material.mu = " << fmt(material.mu) << "\n";
  out << "material.Q0 = " << fmt(material.Q0) << "\n";
  out << "material.Qinf = " << fmt(material.Qinf) << "\n";
  out << "material.H = " << fmt(material.H) << "\n";
  out << "material.c1 = " << fmt(material.c1) << "\n";
  out << "material.c2_gpa_um2 = " << fmt(material.c2) << "  # input unit MPa*m, factor "
      << fmt(kC2UnitFactor) << "\n";
  out << "solver.algorithm = " << to_string(solver.algorithm) << "\n";
  out << "solver.w_gpa = " << fmt(solver.w) << "\n";
  out << "solver.delta = " << fmt(solver.delta) << "\n";
  out << "solver.penalty_hat = " << fmt(solver.penalty_hat) << "\n";
  out << "solver.penalty_growth = " << fmt(solver.penalty_growth) << "\n";
  out << "solver.penalty_cap = " << fmt(solver.penalty_cap) << "\n";
  out << "solver.tolerances.newton = " << fmt(solver.newton_tol) << "\n";
  out << "solver.tolerances.outer = " << fmt(solver.outer_tol) << "\n";
  out << "solver.max_newton = " << solver.max_newton << "\n";
  out << "solver.max_outer = " << solver.max_outer_al << "\n";
  out << "loading.component = " << loading.component << "\n";
  out << "loading.range = " << fmt(loading.range) << "\n";
  out << "loading.increment = " << fmt(loading.increment) << "\n";
  out << "fem.refinement = " << fem.refinement << "\n";
  out << "fem.steps = " << fem.steps << "\n";
  out << "fem.elongation = " << fmt(fem.elongation) << "\n";
  out << "fem.quadrature = " << fem.quadrature << "\n";
  out << "fem.length = " << fmt(fem.length) << "\n";
  out << "fem.width = " << fmt(fem.width) << "\n";
  out << "fem.center_width = " << fmt(fem.center_width) << "\n";
  out << "fem.gauge_length = " << fmt(fem.gauge_length) << "\n";
  out << "fem.dof_budget = " << fem.dof_budget << "\n";
  out << "output.dir = " << output.dir << "\n";
  std::string formats;
  if (output.csv) formats += "csv";
  if (output.vtk) formats += formats.empty() ? "vtk" : ",vtk";
  out << "output.formats = " << formats << "\n";
  out << "sweep.w_scales = " << fmt_list(sweep.w_scales) << "\n";
  out << "sweep.snapshots = " << fmt_list(sweep.snapshots) << "\n";
  return out.str();
}

}  // namespace slipform
