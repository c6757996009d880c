#pragma once

// Named example flows with their default sections.
//
//   rotation           X = (vx, vy, vz) on the unit torus; defaults (1, sqrt2, sqrt3)
//   cylinder           x' = x(1-r^2) - y, y' = y(1-r^2) + x, z' = c z; default c = 1
//   catmap-suspension  unit-speed suspension of [[2,1],[1,1]] on its mapping torus
//   torus-mixed        (1 + a sin 2pi x, sqrt2 + a sin 2pi y, sqrt3); default a = 0.5

#include <map>
#include <string>
#include <vector>

#include "lpflow/flowcore.hpp"
#include "lpflow/periodic.hpp"

namespace lpflow {

using ParamMap = std::map<std::string, double>;

struct BuiltinFlow {
  VectorFieldSpec spec;
  std::vector<SectionSpec> sections;
  ParamMap params;  // effective values, defaults filled in
};

std::vector<std::string> builtin_names();

/// Throws InvalidArgument for unknown names or parameters.
BuiltinFlow make_builtin(const std::string& name, const ParamMap& params = {});

VectorFieldSpec rotation_flow(const Vec3& velocity);
VectorFieldSpec cylinder_flow(double c);
VectorFieldSpec catmap_suspension();
VectorFieldSpec torus_mixed_flow(double a);

/// The trapping shell used for cylinder sampling: 0.5 <= r <= 1.5, |z| <= 0.5.
Shape cylinder_trapping_shell();

}  // namespace lpflow
