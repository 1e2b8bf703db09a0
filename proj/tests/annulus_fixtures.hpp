#pragma once

#include <cmath>
#include <map>
#include <utility>

#include "qcmesh/annulus.hpp"
#include "qcmesh/lattice.hpp"

namespace annfix {

using namespace qcmesh;

// r < |z| < R, k sectors and nr geometric rings; invariant under rotation by 2 pi / k
inline Mesh polar_annulus(double r, double R, int k, int nr) {
  Mesh m;
  for (int i = 0; i <= nr; ++i) {
    double rad = r * std::pow(R / r, static_cast<double>(i) / nr);
    for (int j = 0; j < k; ++j) {
      double t = 2 * M_PI * j / k;
      m.vertices.push_back({rad * std::cos(t), rad * std::sin(t)});
    }
  }
  auto id = [&](int i, int j) { return i * k + (j % k); };
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < k; ++j) {
      int a = id(i, j), b = id(i, j + 1), c = id(i + 1, j + 1), d = id(i + 1, j);
      m.faces.push_back({a, d, c});
      m.faces.push_back({a, c, b});
    }
  return m;
}

// [-outer/2, outer/2]^2 minus the open concentric square of side `inner`, cells of side h, with
// diagonals arranged so the grid is invariant under rotation by 90 degrees
inline Mesh square_frame_grid(double outer, double inner, double h) {
  Mesh m;
  const int n = static_cast<int>(std::lround(outer / (2 * h)));
  const int b = static_cast<int>(std::lround(inner / (2 * h)));
  std::map<std::pair<int, int>, int> ids;
  auto vid = [&](int i, int j) {
    auto [it, fresh] = ids.emplace(std::pair{i, j}, static_cast<int>(m.vertices.size()));
    if (fresh) m.vertices.push_back({i * h, j * h});
    return it->second;
  };
  for (int j = -n; j < n; ++j)
    for (int i = -n; i < n; ++i) {
      if (i >= -b && i < b && j >= -b && j < b) continue;
      int p00 = vid(i, j), p10 = vid(i + 1, j), p11 = vid(i + 1, j + 1), p01 = vid(i, j + 1);
      if ((2 * i + 1) * (2 * j + 1) > 0) {
        m.faces.push_back({p00, p10, p11});
        m.faces.push_back({p00, p11, p01});
      } else {
        m.faces.push_back({p00, p10, p01});
        m.faces.push_back({p10, p11, p01});
      }
    }
  return m;
}

// equilateral lattice faces whose centroid lies in r < |z - c| < R
inline Mesh lattice_annulus(double r, double R, double side, Vec2 c = {0, 0}) {
  GradedLattice g(side, 0);
  g.cover_box({c.x - R - side, c.y - R - side}, {c.x + R + side, c.y + R + side});
  auto keep = [&](const std::array<Vec2, 3>& t) {
    Vec2 m = (t[0] + t[1] + t[2]) * (1.0 / 3) - c;
    double d = norm(m);
    return d > r && d < R;
  };
  return g.extract(keep).mesh;
}

inline Mesh rotated(Mesh m, double angle) {
  const double cs = std::cos(angle), sn = std::sin(angle);
  for (auto& p : m.vertices) p = {cs * p.x - sn * p.y, sn * p.x + cs * p.y};
  return m;
}

}  // namespace annfix
