#pragma once

#include <string>
#include <vector>

#include "qcmesh/whitney.hpp"

namespace fixtures {

inline qcmesh::DyadicPoint dp(double x, double y) {
  return {qcmesh::Dyadic::from_double(x), qcmesh::Dyadic::from_double(y)};
}

inline qcmesh::CompactSet point() {
  qcmesh::CompactSet k;
  k.points = {dp(0, 0)};
  return k;
}

inline qcmesh::CompactSet segment() {
  qcmesh::CompactSet k;
  k.segments = {{dp(-0x1p-10, 0), dp(0x1p-10, 0)}};
  return k;
}

inline qcmesh::CompactSet two_points() {
  qcmesh::CompactSet k;
  k.points = {dp(-0x1p-6, 0), dp(0x1p-6, 0)};
  return k;
}

inline qcmesh::CompactSet square_outline() {
  qcmesh::CompactSet k;
  double h = 0x1p-10;
  k.polylines = {{dp(-h, -h), dp(h, -h), dp(h, h), dp(-h, h)}};
  return k;
}

struct Named {
  std::string name;
  qcmesh::CompactSet k;
};

inline std::vector<Named> corpus() {
  return {{"point", point()}, {"segment", segment()}, {"two-points", two_points()}, {"square", square_outline()}};
}

}  // namespace fixtures
