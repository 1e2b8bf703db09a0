#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qcmesh/mesh.hpp"

namespace qcmesh {

// Planar region: a polygon (even-odd) or a disk.
struct Region {
  enum class Kind { polygon, disk } kind = Kind::polygon;
  std::vector<Vec2> polygon;
  Vec2 center;
  double radius = 0;

  static Region poly(std::vector<Vec2> v);
  static Region rect(double x0, double y0, double x1, double y1);
  static Region disk(Vec2 c, double r);
  bool contains(Vec2 p) const;
};

// Union of `add` minus union of `subtract`, sampled at cell centres.
struct GridDomain {
  std::vector<Region> add;
  std::vector<Region> subtract;
  bool contains(Vec2 p) const;
};

// Picks boundary sides of the raster: a side belongs to the set when the centre of the
// neighbouring outside cell lies in `region` (or outside it when `complement`).
struct BoundarySelector {
  Region region;
  bool complement = false;
  bool selects(Vec2 outside_center) const;
};

enum class FamilyKind { connect, separate };

struct PathFamilySpec {
  GridDomain domain;
  BoundarySelector E, F;
  FamilyKind kind = FamilyKind::connect;
  double h = 1.0 / 64;
};

struct ModulusResult {
  double value = 0;
  bool infinite = false;  // E and F touch (connect) or do not communicate (separate)
  size_t unknowns = 0;
  double residual = 0;
};

// Cell-centred resistor network: unit conductance between adjacent cells, conductance 2 from a
// cell to a Dirichlet side (half a cell). For connect families the modulus is the effective
// conductance between E (potential 0) and F (potential 1); separate families take the reciprocal.
ModulusResult discrete_modulus(const PathFamilySpec& spec);

struct ConvergenceRow {
  double h = 0;
  double value = 0;
};

// Values at h, h/2, ... (`levels` rows).
std::vector<ConvergenceRow> modulus_convergence(const PathFamilySpec& spec, int levels);

struct ExtensionReport {
  bool pass = false;
  double contained = 0;  // modulus of the family whose curves are contained in the others
  double containing = 0;
};

// Every curve of `containing` contains a curve of `contained`, so its modulus cannot be larger.
ExtensionReport extension_rule_check(const PathFamilySpec& contained, const PathFamilySpec& containing,
                                     double rel_tol = 1e-6);

PathFamilySpec family_from_json(const std::string& text);
std::string family_to_json(const PathFamilySpec& spec);

}  // namespace qcmesh
