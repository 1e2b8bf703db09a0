#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qcmesh/dyadic.hpp"

namespace qcmesh {

struct Vec2 {
  double x = 0, y = 0;
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double orient(Vec2 a, Vec2 b, Vec2 c) { return cross(b - a, c - a); }

using Face = std::array<int, 3>;

// Face tags used by the pipeline; plain meshes leave tags empty.
enum FaceTag : uint8_t { tag_none = 0, tag_outer = 1, tag_annulus = 2, tag_grid = 3, tag_wall = 4 };

struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<Face> faces;
  // optional exact coordinates, parallel to vertices
  std::vector<DyadicPoint> exact;
  // per-face Beltrami coefficient; NaN real part means "no datum"
  std::vector<std::complex<double>> mu;
  std::vector<uint8_t> tags;
  // explicit boundary markers; empty means derive from topology
  std::vector<int> boundary_marked;
  // x-period for strip meshes living on a cylinder; 0 means planar
  double period = 0;

  size_t num_vertices() const { return vertices.size(); }
  size_t num_faces() const { return faces.size(); }
  bool has_exact() const { return !exact.empty() && exact.size() == vertices.size(); }
  bool has_mu(size_t f) const { return f < mu.size() && !std::isnan(mu[f].real()); }

  // corner positions of face f, unwrapped across the period seam when needed
  std::array<Vec2, 3> corners(size_t f) const;
  double signed_area(size_t f) const;
  double diameter(size_t f) const;
};

inline std::complex<double> no_mu() { return {std::nan(""), 0.0}; }

// Implicit half-edge layout: half-edge 3f+i runs from faces[f][i] to faces[f][(i+1)%3].
struct HalfEdges {
  std::vector<int> twin;  // -1 on boundary
  static int face(int he) { return he / 3; }
  static int next(int he) { return 3 * (he / 3) + (he % 3 + 1) % 3; }
  static int prev(int he) { return 3 * (he / 3) + (he % 3 + 2) % 3; }
};

// Builds twins; throws Error(validation) on non-manifold or inconsistently oriented edges.
HalfEdges build_half_edges(const Mesh& mesh);

struct ConformityReport {
  bool ok = true;
  size_t degenerate_faces = 0;
  size_t negative_faces = 0;
  size_t nonmanifold_edges = 0;
  size_t orientation_conflicts = 0;
  size_t hanging_vertices = 0;
  size_t pinched_vertices = 0;
  size_t components = 0;
  bool euler_ok = true;
  std::vector<std::string> messages;
};

ConformityReport check_conformity(const Mesh& mesh);

// Vertices incident to a twinless half-edge.
std::vector<int> topological_boundary(const Mesh& mesh, const HalfEdges& he);

Mesh barycentric_subdivide(const Mesh& mesh);
Mesh subdivide4(const Mesh& mesh);

struct ColoringResult {
  bool ok = false;
  std::vector<int> colors;
  // on failure: odd wheel as center followed by its cyclic link, or an odd cycle
  std::vector<int> certificate;
  std::string message;
};

ColoringResult three_color(const Mesh& mesh);

double min_angle(const Mesh& mesh);
// minimum over faces whose tag is not tag_wall
double min_angle_excluding_walls(const Mesh& mesh);

struct DegreeStats {
  std::map<int, size_t> histogram;
  int max_degree = 0;
};

DegreeStats degree_stats(const Mesh& mesh);
std::vector<int> vertex_degrees(const Mesh& mesh);

// Merges vertices closer than tol (explicit operation, never implicit).
Mesh weld(const Mesh& mesh, double tol);

// Unit-side patches of the equilateral lattice, used as fixtures and base frames.
Mesh equilateral_patch(int nx, int ny, double side, Vec2 origin = {0, 0});

}  // namespace qcmesh
