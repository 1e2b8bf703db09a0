#pragma once

#include <string>
#include <vector>

#include "qcmesh/dilatation.hpp"
#include "qcmesh/mesh.hpp"

namespace qcmesh {

// A triangulated doubly connected region. Both loops list boundary vertex ids counter-clockwise
// (the outer loop with the region on its left, the inner loop around the hole). Marked vertices
// cut each loop into sub-arcs.
struct ConformalGridAnnulus {
  Mesh grid;
  std::vector<int> inner, outer;
  std::vector<uint8_t> marked;  // per grid vertex
  int thickness = 0;            // fewest edge-adjacent faces joining the two loops
};

// Derives loops and thickness. `marked_ids` empty marks every boundary vertex.
// Throws Error(validation) unless the mesh is a positively oriented annulus with >= 4 marked
// vertices on each loop.
ConformalGridAnnulus make_grid_annulus(Mesh grid, const std::vector<int>& marked_ids = {});

// Mesh JSON; "boundary_vertices" lists the marked vertices.
ConformalGridAnnulus grid_annulus_from_json(const std::string& text);
std::string grid_annulus_to_json(const ConformalGridAnnulus& a);

struct RoundAnnulusModel {
  double flux = 0;     // Dirichlet energy of u, the modulus of the curves joining the loops
  double modulus = 0;  // 1 / flux
  double delta = 0;    // exp(2 pi modulus) - 1
  double h = 0;        // longest solver edge
  int refinements = 0;
  Mesh solver;                  // grid after refinement; original vertex ids are kept
  std::vector<double> u, v;     // potential and conjugate per solver vertex
  std::vector<double> lift;     // per face corner: multiples of flux to add to v (branch cut)
  std::vector<int> inner_marked, outer_marked;         // loop order = increasing angle
  std::vector<double> inner_angle, outer_angle;        // in [0, 2 pi)
  double residual_u = 0, residual_v = 0;
};

struct ConformalSolveOptions {
  double h = 0;              // refine by 4-splitting until every edge is <= h (0: keep)
  double tolerance = 1e-10;  // relative residual
  int min_thickness = 8;
};

// Piecewise-linear potential with u = 0 on the inner loop and 1 on the outer, then a conjugate by
// least squares on gradients. Throws Error(solver) above tolerance, Error(validation) when the
// refined grid is thinner than `min_thickness` faces.
RoundAnnulusModel discrete_conformal_annulus(const ConformalGridAnnulus& a, const ConformalSolveOptions& opt);

struct ArcReport {
  std::vector<double> inner_lengths, outer_lengths;  // on |z| = 1 and |z| = 1 + delta
  double max_adjacent_ratio = 1;
  double max_arc = 0;
  double max_arc_over_delta = 0;
};

ArcReport check_comparable_arcs(const RoundAnnulusModel& m);

struct AnnulusMetrics {
  double inrad = 0;  // max distance from a solver vertex to the boundary
  double gap = 0;    // largest sub-arc diameter
  std::vector<double> inner_arcs, outer_arcs;  // Euclidean arclength of each sub-arc
};

AnnulusMetrics annulus_metrics(const ConformalGridAnnulus& a);

struct AnnulusTriangulateOptions {
  double delta_max = 0.01;
  double arc_over_delta_max = 0.1;
};

struct AnnulusMesh {
  Mesh mesh;                     // tag_annulus faces with Beltrami data against unit targets
  std::vector<int> grid_vertex;  // grid id of each boundary vertex, -1 inside
  Mesh strip;
  double strip_period = 0;
  double M = 1;                  // adjacent-gap ratio handed to the strip mesher
  double size_ratio_interior = 0;  // max diam(T) / inrad(A) over faces off the boundary
  double size_ratio_boundary = 0;  // max diam(T) / diam(arc) over faces touching a sub-arc
};

// Throws Error(hypothesis) when delta or the arc lengths break the options, or when the strip
// partitions are not admissible; Error(solver) when a vertex cannot be located in the solver image
// or a pulled-back face is not positively oriented.
AnnulusMesh annulus_triangulate(const ConformalGridAnnulus& a, const RoundAnnulusModel& m,
                                const AnnulusTriangulateOptions& opt = {});

// Target length of each boundary edge: its share of the enclosing sub-arc times `side`.
// `grid_vertex` maps mesh vertices to grid ids (empty: identity).
std::vector<EdgeTarget> reparam_boundary(const Mesh& mesh, const std::vector<int>& grid_vertex,
                                         const ConformalGridAnnulus& a, double side = 1);

}  // namespace qcmesh
