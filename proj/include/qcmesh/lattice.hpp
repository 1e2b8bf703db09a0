#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "qcmesh/mesh.hpp"

namespace qcmesh {

// Triangle of the equilateral lattice at `level` (side base * 2^-level). Lattice point (i, j) sits at
// ((i + j/2) s, j (sqrt 3 / 2) s). An up triangle has corners (i,j), (i+1,j), (i,j+1); a down
// triangle has corners (i+1,j), (i+1,j+1), (i,j+1). Both are listed counter-clockwise.
struct LatticeTri {
  int level = 0;
  int64_t i = 0, j = 0;
  bool up = true;
  friend bool operator==(const LatticeTri&, const LatticeTri&) = default;
};

struct LatticeMesh {
  Mesh mesh;
  std::vector<std::array<int64_t, 2>> keys;  // vertex coordinates at the finest level
  std::vector<int> level;                     // per face
  std::vector<uint8_t> green;                 // per face: half of a lattice triangle
};

// Red refinement of an equilateral lattice with 2:1 balance across edges, followed by green
// closure: a leaf with one refined neighbour is split in two through the hanging midpoint, a leaf
// with two or more is refined.
class GradedLattice {
public:
  GradedLattice(double base_side, int max_level);

  double side(int level) const;
  int max_level() const { return max_level_; }
  std::array<Vec2, 3> corners(const LatticeTri& t) const;

  // Base triangles whose closure meets the box.
  void cover_box(Vec2 lo, Vec2 hi);

  // Refines leaves, coarse to fine, while `split` asks for it and the level allows, then restores
  // balance. Throws Error(hypothesis) once the leaf count would exceed `max_leaves`.
  void refine(const std::function<bool(const LatticeTri&)>& split, size_t max_leaves);

  size_t leaf_count() const { return leaves_; }
  LatticeMesh extract(const std::function<bool(const std::array<Vec2, 3>&)>& keep = {}) const;

private:
  struct KeyHash {
    size_t operator()(const LatticeTri& t) const;
  };
  enum : uint8_t { leaf = 1, split_node = 2 };

  void split_leaf(const LatticeTri& t);
  // leaf containing a point given in units of the finest level / 4
  const LatticeTri* leaf_at(int64_t pi, int64_t pj, int hint) const;
  // level of the leaf just across each edge (-1 outside the domain)
  std::array<std::array<int, 2>, 3> across(const LatticeTri& t, std::array<LatticeTri, 6>* found) const;
  std::array<std::array<int64_t, 2>, 3> corner_keys(const LatticeTri& t) const;

  double base_;
  int max_level_;
  std::unordered_map<LatticeTri, uint8_t, KeyHash> nodes_;
  size_t leaves_ = 0;
  size_t budget_ = 0;
};

std::array<LatticeTri, 4> lattice_children(const LatticeTri& t);

}  // namespace qcmesh
