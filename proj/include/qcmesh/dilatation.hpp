#pragma once

#include <array>
#include <complex>
#include <vector>

#include "qcmesh/mesh.hpp"

namespace qcmesh {

// Source vertex i of a face goes to vertex (i + shift) % 3 of the positively oriented
// equilateral triangle 0, side, side * e^{i pi/3}.
struct FaceTarget {
  int shift = 0;
  double side = 1;
};

struct BeltramiDatum {
  std::complex<double> mu;        // f_zbar / f_z of the affine map, in mesh coordinates
  std::complex<double> mu_local;  // same map after moving the corresponded edge to [0, 1]
  FaceTarget target;
};

// Throws Error(validation) for degenerate or negatively oriented sources.
BeltramiDatum affine_dilatation(Vec2 p0, Vec2 p1, Vec2 p2, FaceTarget target = {});

inline double dilatation_K(double abs_mu) { return (1 + abs_mu) / (1 - abs_mu); }

struct DilatationCertificate {
  std::vector<std::complex<double>> mu;
  double sup_mu = 0;
  double K = 1;
  double support_area = 0;  // faces with |mu| > 1e-12
  size_t support_faces = 0;
};

// `targets` may be empty (unit targets, shift 0) or have one entry per face.
DilatationCertificate mesh_dilatation_certificate(const Mesh& mesh, const std::vector<FaceTarget>& targets);

// Prescribed target length of a boundary edge, undirected.
struct EdgeTarget {
  int a = 0, b = 0;
  double length = 0;
};

struct GluingReport {
  bool ok = true;
  size_t interior_edges = 0;
  size_t boundary_edges_checked = 0;
  double max_rel_discrepancy = 0;
  std::vector<std::array<int, 2>> violations;  // sorted vertex pairs
};

// Every interior edge must receive the same target length from both faces, and boundary edges
// listed in `boundary` must match their prescribed length (relative tolerance 1e-9).
GluingReport gluing_check(const Mesh& mesh, const std::vector<FaceTarget>& targets,
                          const std::vector<EdgeTarget>& boundary = {});

}  // namespace qcmesh
