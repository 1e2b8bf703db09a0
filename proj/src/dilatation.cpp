#include "qcmesh/dilatation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "qcmesh/error.hpp"

namespace qcmesh {

namespace {

using C = std::complex<double>;

C to_c(Vec2 v) { return {v.x, v.y}; }

const std::vector<FaceTarget>& check_targets(const Mesh& mesh, const std::vector<FaceTarget>& targets) {
  if (!targets.empty() && targets.size() != mesh.faces.size())
    throw Error(Status::validation, "target list has " + std::to_string(targets.size()) + " entries for " +
                                        std::to_string(mesh.faces.size()) + " faces");
  return targets;
}

FaceTarget target_of(const std::vector<FaceTarget>& t, size_t f) { return t.empty() ? FaceTarget{} : t[f]; }

}  // namespace

BeltramiDatum affine_dilatation(Vec2 p0, Vec2 p1, Vec2 p2, FaceTarget target) {
  const double area2 = orient(p0, p1, p2);
  const double scale = std::max({norm(p1 - p0), norm(p2 - p1), norm(p0 - p2)});
  if (!(scale > 0) || !(std::abs(area2) > 1e-14 * scale * scale))
    throw Error(Status::validation, "degenerate source triangle");
  if (area2 < 0) throw Error(Status::validation, "negatively oriented source triangle");
  if (!(target.side > 0)) throw Error(Status::validation, "target side must be positive");
  int s = ((target.shift % 3) + 3) % 3;
  // source vertices landing on target vertices 0, 1, 2
  std::array<Vec2, 3> src{p0, p1, p2};
  std::array<C, 3> q;
  for (int i = 0; i < 3; ++i) q[(i + s) % 3] = to_c(src[i]);
  const C e = q[1] - q[0];
  const C a = (q[2] - q[0]) / e;
  const C b = std::polar(1.0, M_PI / 3);
  BeltramiDatum d;
  d.target = {s, target.side};
  d.mu_local = (b - a) / (std::conj(a) - b);
  // precomposing with z -> (z - q0) / e multiplies the coefficient by conj(1/e) / (1/e)
  d.mu = d.mu_local * e / std::conj(e);
  return d;
}

DilatationCertificate mesh_dilatation_certificate(const Mesh& mesh, const std::vector<FaceTarget>& targets) {
  check_targets(mesh, targets);
  DilatationCertificate c;
  c.mu.resize(mesh.faces.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    auto p = mesh.corners(f);
    auto d = affine_dilatation(p[0], p[1], p[2], target_of(targets, f));
    c.mu[f] = d.mu;
    double m = std::abs(d.mu);
    c.sup_mu = std::max(c.sup_mu, m);
    if (m > 1e-12) {
      c.support_area += mesh.signed_area(f);
      ++c.support_faces;
    }
  }
  c.K = dilatation_K(c.sup_mu);
  return c;
}

GluingReport gluing_check(const Mesh& mesh, const std::vector<FaceTarget>& targets,
                          const std::vector<EdgeTarget>& boundary) {
  check_targets(mesh, targets);
  std::map<std::array<int, 2>, std::vector<double>> seen;
  for (size_t f = 0; f < mesh.faces.size(); ++f)
    for (int i = 0; i < 3; ++i) {
      int a = mesh.faces[f][i], b = mesh.faces[f][(i + 1) % 3];
      seen[{std::min(a, b), std::max(a, b)}].push_back(target_of(targets, f).side);
    }
  std::map<std::array<int, 2>, double> prescribed;
  for (auto& e : boundary) prescribed[{std::min(e.a, e.b), std::max(e.a, e.b)}] = e.length;

  GluingReport r;
  auto compare = [&](const std::array<int, 2>& key, double x, double y) {
    double rel = std::abs(x - y) / std::max(std::abs(x), std::abs(y));
    r.max_rel_discrepancy = std::max(r.max_rel_discrepancy, rel);
    if (!(rel <= 1e-9)) r.violations.push_back(key);
  };
  for (auto& [key, sides] : seen) {
    if (sides.size() == 2) {
      ++r.interior_edges;
      compare(key, sides[0], sides[1]);
    } else if (auto it = prescribed.find(key); it != prescribed.end()) {
      ++r.boundary_edges_checked;
      compare(key, sides[0], it->second);
    }
  }
  r.ok = r.violations.empty();
  return r;
}

}  // namespace qcmesh
