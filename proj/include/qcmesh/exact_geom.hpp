#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

// Exact predicates on integer points (coordinates scaled by a power of two).
namespace qcmesh::exact {

using i128 = __int128;
using i256 = boost::multiprecision::int256_t;

struct IP {
  int64_t x = 0, y = 0;
  friend bool operator==(const IP&, const IP&) = default;
};

struct ISeg {
  IP a, b;
};

inline i128 cross(IP o, IP a, IP b) {
  return static_cast<i128>(a.x - o.x) * (b.y - o.y) - static_cast<i128>(a.y - o.y) * (b.x - o.x);
}

inline int orient(IP a, IP b, IP c) {
  i128 v = cross(a, b, c);
  return (v > 0) - (v < 0);
}

inline i128 dist2(IP a, IP b) {
  i128 dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline bool on_segment(IP p, const ISeg& s) {
  return orient(s.a, s.b, p) == 0 && p.x >= std::min(s.a.x, s.b.x) && p.x <= std::max(s.a.x, s.b.x) &&
         p.y >= std::min(s.a.y, s.b.y) && p.y <= std::max(s.a.y, s.b.y);
}

// closed segments intersect
inline bool segments_meet(const ISeg& s, const ISeg& t) {
  int o1 = orient(s.a, s.b, t.a), o2 = orient(s.a, s.b, t.b);
  int o3 = orient(t.a, t.b, s.a), o4 = orient(t.a, t.b, s.b);
  if (o1 * o2 < 0 && o3 * o4 < 0) return true;
  return on_segment(t.a, s) || on_segment(t.b, s) || on_segment(s.a, t) || on_segment(s.b, t);
}

// dist(p, s)^2 <= t2, exact
inline bool point_segment_within(IP p, const ISeg& s, i128 t2) {
  i128 dx = s.b.x - s.a.x, dy = s.b.y - s.a.y;
  i128 L = dx * dx + dy * dy;
  i128 t = (p.x - s.a.x) * dx + (p.y - s.a.y) * dy;
  if (L == 0 || t <= 0) return dist2(p, s.a) <= t2;
  if (t >= L) return dist2(p, s.b) <= t2;
  i128 c = cross(s.a, s.b, p);
  return i256(c) * i256(c) <= i256(t2) * i256(L);
}

// dist(p, s)^2 >= t2, exact
inline bool point_segment_clear(IP p, const ISeg& s, i128 t2) {
  i128 dx = s.b.x - s.a.x, dy = s.b.y - s.a.y;
  i128 L = dx * dx + dy * dy;
  i128 t = (p.x - s.a.x) * dx + (p.y - s.a.y) * dy;
  if (L == 0 || t <= 0) return dist2(p, s.a) >= t2;
  if (t >= L) return dist2(p, s.b) >= t2;
  i128 c = cross(s.a, s.b, p);
  return i256(c) * i256(c) >= i256(t2) * i256(L);
}

// dist(s, t)^2 >= t2 for closed segments
inline bool segments_clear(const ISeg& s, const ISeg& t, i128 t2) {
  if (t2 > 0 && segments_meet(s, t)) return false;
  return point_segment_clear(s.a, t, t2) && point_segment_clear(s.b, t, t2) && point_segment_clear(t.a, s, t2) &&
         point_segment_clear(t.b, s, t2);
}

inline i128 box_point_dist2(int64_t x0, int64_t y0, int64_t x1, int64_t y1, IP p) {
  i128 dx = p.x < x0 ? x0 - p.x : (p.x > x1 ? p.x - x1 : 0);
  i128 dy = p.y < y0 ? y0 - p.y : (p.y > y1 ? p.y - y1 : 0);
  return dx * dx + dy * dy;
}

inline bool segment_meets_box(const ISeg& s, int64_t x0, int64_t y0, int64_t x1, int64_t y1) {
  auto in = [&](IP p) { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; };
  if (in(s.a) || in(s.b)) return true;
  if (std::max(s.a.x, s.b.x) < x0 || std::min(s.a.x, s.b.x) > x1) return false;
  if (std::max(s.a.y, s.b.y) < y0 || std::min(s.a.y, s.b.y) > y1) return false;
  IP c[4] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  for (int i = 0; i < 4; ++i)
    if (segments_meet(s, {c[i], c[(i + 1) % 4]})) return true;
  return false;
}

inline bool box_segment_within(int64_t x0, int64_t y0, int64_t x1, int64_t y1, const ISeg& s, i128 t2) {
  if (segment_meets_box(s, x0, y0, x1, y1)) return true;
  if (box_point_dist2(x0, y0, x1, y1, s.a) <= t2 || box_point_dist2(x0, y0, x1, y1, s.b) <= t2) return true;
  IP c[4] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  for (auto& p : c)
    if (point_segment_within(p, s, t2)) return true;
  return false;
}

// 0 outside, 1 inside, 2 on the boundary
inline int point_in_polygon(IP p, const std::vector<IP>& poly) {
  const size_t n = poly.size();
  bool in = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    IP a = poly[j], b = poly[i];
    if (on_segment(p, {a, b})) return 2;
    if ((a.y > p.y) != (b.y > p.y)) {
      int o = orient(a, b, p);
      if ((b.y > a.y) ? o > 0 : o < 0) in = !in;
    }
  }
  return in ? 1 : 0;
}

inline i128 signed_area2(const std::vector<IP>& poly) {
  i128 s = 0;
  for (size_t i = 0; i < poly.size(); ++i) {
    IP a = poly[i], b = poly[(i + 1) % poly.size()];
    s += static_cast<i128>(a.x) * b.y - static_cast<i128>(b.x) * a.y;
  }
  return s;
}

}  // namespace qcmesh::exact
