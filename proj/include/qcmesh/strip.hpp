#pragma once

#include <random>
#include <vector>

#include "qcmesh/dyadic.hpp"
#include "qcmesh/mesh.hpp"

namespace qcmesh {

// Partition points of one edge of the strip {0 < y < 2}. With period > 0 the points lie in
// [0, period) and repeat with that period; otherwise they describe a finite window [x.front(), x.back()].
struct BoundaryPartition {
  std::vector<double> x;
  double period = 0;
};

// Throws Error(validation) naming the offending index.
void validate_partition(const BoundaryPartition& p, double M);

BoundaryPartition partition_from_json(const std::string& text);
std::string partition_to_json(const BoundaryPartition& p);

struct SigmaVertex {
  double x = 0;
  double D = 0;  // smaller adjacent gap
  int j = 0;     // D/(16M) in (2^-j-1, 2^-j]
  Dyadic y;      // 3/4 * 2^-j
};

std::vector<SigmaVertex> sigma_heights(const BoundaryPartition& p, double M);

// Square of side 2^-depth occupying [i s, (i+1) s] x [s, 2s].
struct StripSquare {
  int depth = 1;
  int64_t i = 0;
  Dyadic side() const { return Dyadic(1, depth); }
  Dyadic x0() const { return Dyadic(i, depth); }
  friend auto operator<=>(const StripSquare&, const StripSquare&) = default;
};

struct GammaVertex {
  DyadicPoint p;
  bool optional = false;  // bottom-edge midpoint of a square; a vertex only when chosen as some w_k
};

// Lower boundary of the squares lying above sigma, over columns [lo, hi).
struct GammaCurve {
  std::vector<StripSquare> squares;
  std::vector<GammaVertex> vertices;  // left to right; vertical steps listed in walking order
  Dyadic lo, hi;
  bool periodic = false;
};

// sigma is the polygonal arc through (x_k, y_k); for periodic curves it is the base period.
GammaCurve carve_gamma(const std::vector<SigmaVertex>& sigma, double period, Dyadic lo, Dyadic hi);

// Index of w_k in gamma.vertices for each partition point; for periodic curves the index is
// unwrapped (index / size counts laps) and increases with k.
std::vector<long> choose_w(const GammaCurve& g, const std::vector<double>& xs);

// Fan triangulation of the region between the bottom edge and gamma (exact coordinates).
Mesh triangulate_W(const GammaCurve& g, const std::vector<double>& xs, const std::vector<long>& w);

// Triangulation of the squares above gamma; `used_mid` lists optional gamma vertices that are vertices.
Mesh triangulate_upper(const GammaCurve& g, const std::vector<DyadicPoint>& used_mid);

// Lower half {0 <= y <= 1} meshed from the bottom partition; the centre line carries vertices every 1/2.
Mesh strip_lower_half(const BoundaryPartition& bottom, double M);

// Full strip {0 <= y <= 2}. Periodic inputs need equal periods that are multiples of 1/2 and >= 1;
// a period of 1 is meshed on a cylinder of circumference 2.
// Finite inputs are meshed on [x0, xN] with vertical walls; faces meeting a wall carry tag_wall.
Mesh strip_triangulate(const BoundaryPartition& top, const BoundaryPartition& bottom, double M);

// Random periodic partition with gaps <= 1/8 and cyclic neighbour ratios within M, on a 2^-40 grid.
BoundaryPartition random_partition(std::mt19937_64& rng, double M, double period);

}  // namespace qcmesh
