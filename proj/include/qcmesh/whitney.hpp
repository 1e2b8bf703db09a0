#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qcmesh/dyadic.hpp"

namespace qcmesh {

// Points, segments and closed polylines with dyadic coordinates. Closed polylines are filled:
// the working domain is the unbounded component of the complement.
struct CompactSet {
  std::vector<DyadicPoint> points;
  std::vector<std::array<DyadicPoint, 2>> segments;
  std::vector<std::vector<DyadicPoint>> polylines;
  Dyadic window_half = Dyadic(1, 0);   // working window [-w,w]^2, w a power of two
  Dyadic k_radius = Dyadic(1, 4);      // K must lie in the closed disk of this radius
};

CompactSet compact_set_from_json(const std::string& text);
std::string compact_set_to_json(const CompactSet& k);
void validate_compact_set(const CompactSet& k);

// Q = [i 2^-depth, (i+1) 2^-depth] x [j 2^-depth, (j+1) 2^-depth]
struct DyadicSquare {
  int depth = 0;
  int64_t i = 0, j = 0;
  Dyadic side() const { return Dyadic(1, depth); }
  Dyadic x0() const { return Dyadic(i, depth); }
  Dyadic y0() const { return Dyadic(j, depth); }
  friend bool operator==(const DyadicSquare&, const DyadicSquare&) = default;
  friend auto operator<=>(const DyadicSquare&, const DyadicSquare&) = default;
};

struct WhitneyDecomposition {
  std::vector<DyadicSquare> squares;     // maximal squares with closed 3Q disjoint from K
  std::vector<DyadicSquare> unresolved;  // squares at max_depth still meeting K within 3Q
  int max_depth = 0;
};

WhitneyDecomposition whitney_decompose(const CompactSet& k, int max_depth);

using Polygon = std::vector<DyadicPoint>;

struct ContourSet {
  int n = 0;
  std::vector<Polygon> components;  // counter-clockwise, consecutive collinear vertices removed
  size_t crossings_split = 0;
};

ContourSet contours(const CompactSet& k, int n);

// Union of closed dyadic squares with pairwise disjoint interiors.
struct SquareRegion {
  std::vector<DyadicSquare> squares;
};

// Boundary of the region as directed unit-free edges (region on the left).
std::vector<std::array<DyadicPoint, 2>> region_boundary_edges(const SquareRegion& region);

// Resolves degree-4 boundary vertices by cutting the corner quarter of both diagonal squares
// at the crossing, then traces the boundary into simple counter-clockwise polygons.
std::vector<Polygon> split_crossings(const SquareRegion& region, size_t* splits = nullptr);

std::string contours_to_json(const ContourSet& c);
ContourSet contours_from_json(const std::string& text);

// Smallest distance from the contour polygon vertices and edges to K, as doubles (reporting only).
double contour_min_distance(const CompactSet& k, const Polygon& p);

}  // namespace qcmesh
