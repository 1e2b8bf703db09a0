#include "qcmesh/whitney.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "qcmesh/error.hpp"
#include "qcmesh/exact_geom.hpp"

namespace qcmesh {

using exact::i128;
using exact::IP;
using exact::ISeg;

namespace {

constexpr int kMaxScale = 32;

int max_exponent(const CompactSet& k) {
  int e = 0;
  auto upd = [&](const DyadicPoint& p) { e = std::max({e, p.x.e, p.y.e}); };
  for (auto& p : k.points) upd(p);
  for (auto& s : k.segments) {
    upd(s[0]);
    upd(s[1]);
  }
  for (auto& pl : k.polylines)
    for (auto& p : pl) upd(p);
  return e;
}

int window_depth(const CompactSet& k) {
  // 2^-d = window half-width
  const Dyadic& w = k.window_half;
  if (w.m != 1) fail(Status::validation, "window half-width must be a power of two");
  return w.e;
}

struct SqKey {
  int d;
  int64_t i, j;
  bool operator==(const SqKey&) const = default;
};

struct SqHash {
  size_t operator()(const SqKey& k) const {
    uint64_t h = static_cast<uint64_t>(k.i) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<uint64_t>(k.j) + 0x7F4A7C159E3779B9ull + (h << 6) + (h >> 2);
    h ^= static_cast<uint64_t>(k.d + 1000) * 0xC2B2AE3D27D4EB4Full;
    return static_cast<size_t>(h);
  }
};

struct Box {
  int64_t x0, y0, x1, y1;
};

Box square_box(const DyadicSquare& q, int P) {
  int64_t s = int64_t{1} << (P - q.depth);
  return {q.i * s, q.j * s, (q.i + 1) * s, (q.j + 1) * s};
}

Box triple(const Box& b) {
  int64_t s = b.x1 - b.x0;
  return {b.x0 - s, b.y0 - s, b.x1 + s, b.y1 + s};
}

class ExactK {
public:
  ExactK(const CompactSet& k, int P) : P_(P) {
    auto conv = [&](const DyadicPoint& p) { return IP{p.x.at_scale(P), p.y.at_scale(P)}; };
    for (auto& p : k.points) pts_.push_back(conv(p));
    for (auto& s : k.segments) segs_.push_back({conv(s[0]), conv(s[1])});
    for (auto& pl : k.polylines) {
      std::vector<IP> poly;
      for (auto& p : pl) poly.push_back(conv(p));
      for (size_t i = 0; i < poly.size(); ++i) segs_.push_back({poly[i], poly[(i + 1) % poly.size()]});
      polys_.push_back(std::move(poly));
    }
  }

  int scale() const { return P_; }

  bool inside_filled(IP p) const {
    for (auto& poly : polys_)
      if (exact::point_in_polygon(p, poly) != 0) return true;
    return false;
  }

  // closed box meets the filled set
  bool meets_box(const Box& b) const {
    for (auto& p : pts_)
      if (p.x >= b.x0 && p.x <= b.x1 && p.y >= b.y0 && p.y <= b.y1) return true;
    for (auto& s : segs_)
      if (exact::segment_meets_box(s, b.x0, b.y0, b.x1, b.y1)) return true;
    IP c{b.x0, b.y0};
    return inside_filled(c);
  }

  // box lies in the open interior of a filled polyline
  bool box_in_interior(const Box& b) const {
    for (auto& s : segs_)
      if (exact::segment_meets_box(s, b.x0, b.y0, b.x1, b.y1)) return false;
    for (auto& p : pts_)
      if (p.x >= b.x0 && p.x <= b.x1 && p.y >= b.y0 && p.y <= b.y1) return false;
    return inside_filled({b.x0, b.y0});
  }

  // dist(box, K)^2 <= t2
  bool box_within(const Box& b, i128 t2) const {
    for (auto& p : pts_)
      if (exact::box_point_dist2(b.x0, b.y0, b.x1, b.y1, p) <= t2) return true;
    for (auto& s : segs_)
      if (exact::box_segment_within(b.x0, b.y0, b.x1, b.y1, s, t2)) return true;
    return inside_filled({b.x0, b.y0});
  }

  // dist(p, K-hat)^2 <= t2
  bool point_within(IP p, i128 t2) const {
    for (auto& q : pts_)
      if (exact::dist2(p, q) <= t2) return true;
    for (auto& s : segs_)
      if (exact::point_segment_within(p, s, t2)) return true;
    return inside_filled(p);
  }

private:
  int P_;
  std::vector<IP> pts_;
  std::vector<ISeg> segs_;
  std::vector<std::vector<IP>> polys_;
};

DyadicPoint from_ip(IP p, int P) { return {Dyadic(p.x, P), Dyadic(p.y, P)}; }

class RegionIndex {
public:
  RegionIndex(const std::vector<DyadicSquare>& squares, int P) : P_(P) {
    for (auto& q : squares) add(q);
  }

  void add(const DyadicSquare& q) {
    inside_.insert({q.depth, q.i, q.j});
    dmin_ = std::min(dmin_, q.depth);
    dmax_ = std::max(dmax_, q.depth);
    int d = q.depth;
    int64_t i = q.i, j = q.j;
    while (d > -64) {
      --d;
      i >>= 1;
      j >>= 1;
      if (!internal_.insert({d, i, j}).second) break;
    }
  }

  void remove(const DyadicSquare& q) { inside_.erase({q.depth, q.i, q.j}); }

  // 1: covered by an inside square, 0: outside, -1: partially (descend)
  int status(int d, int64_t i, int64_t j) const {
    for (int k = 0; d - k >= dmin_; ++k)
      if (inside_.count({d - k, i >> k, j >> k})) return 1;
    if (d < dmax_ && internal_.count({d, i, j})) return -1;
    return 0;
  }

  // inside square containing the open quadrant just off corner point (x,y) in direction (sx,sy)
  std::optional<DyadicSquare> square_at(int64_t x, int64_t y, int sx, int sy) const {
    for (int d = dmin_; d <= dmax_; ++d) {
      int sh = P_ - d;
      int64_t i = sx > 0 ? (x >> sh) : ((x - 1) >> sh);
      int64_t j = sy > 0 ? (y >> sh) : ((y - 1) >> sh);
      if (inside_.count({d, i, j})) return DyadicSquare{d, i, j};
    }
    return std::nullopt;
  }

  std::vector<DyadicSquare> squares() const {
    std::vector<DyadicSquare> out;
    for (auto& k : inside_) out.push_back({k.d, k.i, k.j});
    std::sort(out.begin(), out.end());
    return out;
  }

private:
  int P_;
  int dmin_ = 1 << 20, dmax_ = -(1 << 20);
  std::unordered_set<SqKey, SqHash> inside_, internal_;
};

struct DirEdge {
  IP a, b;
};

void side_pieces(const RegionIndex& idx, int P, int d, int64_t ni, int64_t nj, int side, IP a, IP b,
                 std::vector<DirEdge>& out) {
  int st = idx.status(d, ni, nj);
  if (st == 1) return;
  if (st == 0) {
    out.push_back({a, b});
    return;
  }
  // children of the neighbour touching the shared side; side: 0=S,1=E,2=N,3=W of the inside square
  int64_t ci0 = 2 * ni, cj0 = 2 * nj;
  std::array<std::pair<int64_t, int64_t>, 2> kids;
  switch (side) {
    case 0: kids = {{{ci0, cj0 + 1}, {ci0 + 1, cj0 + 1}}}; break;
    case 1: kids = {{{ci0, cj0}, {ci0, cj0 + 1}}}; break;
    case 2: kids = {{{ci0 + 1, cj0}, {ci0, cj0}}}; break;
    default: kids = {{{ci0 + 1, cj0 + 1}, {ci0 + 1, cj0}}}; break;
  }
  IP m{(a.x + b.x) / 2, (a.y + b.y) / 2};
  side_pieces(idx, P, d + 1, kids[0].first, kids[0].second, side, a, m, out);
  side_pieces(idx, P, d + 1, kids[1].first, kids[1].second, side, m, b, out);
}

std::vector<DirEdge> boundary_edges(const RegionIndex& idx, const std::vector<DyadicSquare>& squares, int P) {
  std::vector<DirEdge> out;
  for (auto& q : squares) {
    if (P - q.depth < 1) fail(Status::internal, "square finer than working scale");
    Box b = square_box(q, P);
    IP sw{b.x0, b.y0}, se{b.x1, b.y0}, ne{b.x1, b.y1}, nw{b.x0, b.y1};
    side_pieces(idx, P, q.depth, q.i, q.j - 1, 0, sw, se, out);
    side_pieces(idx, P, q.depth, q.i + 1, q.j, 1, se, ne, out);
    side_pieces(idx, P, q.depth, q.i, q.j + 1, 2, ne, nw, out);
    side_pieces(idx, P, q.depth, q.i - 1, q.j, 3, nw, sw, out);
  }
  return out;
}

struct IPHash {
  size_t operator()(const IP& p) const {
    return std::hash<int64_t>()(p.x) * 1000003u ^ std::hash<int64_t>()(p.y);
  }
};
struct IPEq {
  bool operator()(const IP& a, const IP& b) const { return a.x == b.x && a.y == b.y; }
};

int needed_scale(const std::vector<DyadicSquare>& squares) {
  int P = 2;
  for (auto& q : squares) P = std::max(P, q.depth + 2);
  return P;
}

std::vector<Polygon> trace_simple(RegionIndex& idx, int P, size_t* splits) {
  size_t count = 0;
  for (int round = 0;; ++round) {
    auto squares = idx.squares();
    auto edges = boundary_edges(idx, squares, P);
    std::unordered_map<IP, std::vector<size_t>, IPHash, IPEq> out;
    for (size_t e = 0; e < edges.size(); ++e) out[edges[e].a].push_back(e);
    std::vector<IP> crossings;
    for (auto& [p, list] : out) {
      if (list.size() > 2) fail(Status::internal, "boundary vertex of degree > 4");
      if (list.size() == 2) crossings.push_back(p);
    }
    if (!crossings.empty()) {
      if (round > 64) fail(Status::internal, "crossing removal did not terminate");
      std::sort(crossings.begin(), crossings.end(), [](IP a, IP b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
      // every crossing cuts the quarter at x from both squares meeting there; squares with several
      // crossings lose several quarters of the same square
      std::map<DyadicSquare, std::array<bool, 4>> cuts;
      for (IP x : crossings) {
        for (auto [sx, sy] : {std::pair{1, 1}, {-1, -1}, {-1, 1}, {1, -1}}) {
          auto q = idx.square_at(x.x, x.y, sx, sy);
          if (!q) continue;
          auto& c = cuts.try_emplace(*q, std::array<bool, 4>{}).first->second;
          c[(sx > 0 ? 0 : 1) + (sy > 0 ? 0 : 2)] = true;
        }
        ++count;
      }
      for (auto& [q, c] : cuts) {
        idx.remove(q);
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            if (!c[a + 2 * b]) idx.add({q.depth + 1, 2 * q.i + a, 2 * q.j + b});
      }
      if (P < needed_scale(idx.squares())) fail(Status::validation, "crossing removal needs a finer working scale");
      continue;
    }
    if (splits) *splits = count;
    std::vector<char> used(edges.size(), 0);
    std::vector<std::vector<IP>> loops;
    for (size_t e0 = 0; e0 < edges.size(); ++e0) {
      if (used[e0]) continue;
      std::vector<IP> loop;
      size_t e = e0;
      while (!used[e]) {
        used[e] = 1;
        loop.push_back(edges[e].a);
        auto it = out.find(edges[e].b);
        if (it == out.end()) fail(Status::internal, "open boundary chain");
        e = it->second[0];
      }
      loops.push_back(std::move(loop));
    }
    std::vector<Polygon> polys;
    for (auto& loop : loops) {
      std::vector<IP> c;
      const size_t m = loop.size();
      for (size_t i = 0; i < m; ++i) {
        IP prev = loop[(i + m - 1) % m], cur = loop[i], next = loop[(i + 1) % m];
        if (exact::orient(prev, cur, next) != 0) c.push_back(cur);
      }
      // start at the lexicographically smallest vertex for deterministic output
      auto it = std::min_element(c.begin(), c.end(), [](IP a, IP b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
      std::rotate(c.begin(), it, c.end());
      if (exact::signed_area2(c) <= 0) continue;  // holes are not contours
      Polygon poly;
      for (IP p : c) poly.push_back(from_ip(p, P));
      polys.push_back(std::move(poly));
    }
    std::sort(polys.begin(), polys.end(), [](const Polygon& a, const Polygon& b) {
      return a[0].x != b[0].x ? a[0].x < b[0].x : a[0].y < b[0].y;
    });
    return polys;
  }
}

DyadicPoint read_point(const nlohmann::json& j) {
  auto coord = [](const nlohmann::json& c) {
    if (c.is_object()) return Dyadic(c.at("m").get<int64_t>(), c.at("e").get<int32_t>());
    if (c.is_number_integer()) return Dyadic::from_int(c.get<int64_t>());
    if (c.is_number()) return Dyadic::from_double(c.get<double>());
    fail(Status::validation, "scene: coordinate must be a number or {m,e}");
  };
  if (!j.is_array() || j.size() != 2) fail(Status::validation, "scene: point must be [x,y]");
  return {coord(j[0]), coord(j[1])};
}

nlohmann::json dyadic_json(const Dyadic& d) { return {{"m", d.m}, {"e", d.e}}; }
nlohmann::json point_json(const DyadicPoint& p) { return nlohmann::json::array({dyadic_json(p.x), dyadic_json(p.y)}); }

}  // namespace

void validate_compact_set(const CompactSet& k) {
  if (k.points.empty() && k.segments.empty() && k.polylines.empty()) fail(Status::validation, "K is empty");
  window_depth(k);
  Dyadic r2 = k.k_radius * k.k_radius;
  auto check = [&](const DyadicPoint& p) {
    if (p.x * p.x + p.y * p.y > r2)
      fail(Status::validation, "K point (" + std::to_string(p.x.to_double()) + "," + std::to_string(p.y.to_double()) +
                                   ") outside the disk of radius " + std::to_string(k.k_radius.to_double()));
  };
  for (auto& p : k.points) check(p);
  for (auto& s : k.segments) {
    check(s[0]);
    check(s[1]);
  }
  for (auto& pl : k.polylines) {
    if (pl.size() < 3) fail(Status::validation, "closed polyline needs at least 3 vertices");
    for (auto& p : pl) check(p);
  }
  if (k.k_radius > k.window_half) fail(Status::validation, "K disk exceeds the working window");
}

CompactSet compact_set_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(Status::validation, std::string("scene: invalid JSON: ") + e.what());
  }
  CompactSet k;
  if (j.contains("points"))
    for (auto& p : j["points"]) k.points.push_back(read_point(p));
  if (j.contains("segments"))
    for (auto& s : j["segments"]) {
      if (!s.is_array() || s.size() != 2) fail(Status::validation, "scene: segment must be [[x,y],[x,y]]");
      k.segments.push_back({read_point(s[0]), read_point(s[1])});
    }
  if (j.contains("polylines"))
    for (auto& pl : j["polylines"]) {
      std::vector<DyadicPoint> poly;
      for (auto& p : pl) poly.push_back(read_point(p));
      k.polylines.push_back(std::move(poly));
    }
  if (j.contains("window")) k.window_half = Dyadic::from_double(j["window"].get<double>());
  if (j.contains("k_radius")) k.k_radius = Dyadic::from_double(j["k_radius"].get<double>());
  validate_compact_set(k);
  return k;
}

std::string compact_set_to_json(const CompactSet& k) {
  nlohmann::json j;
  j["points"] = nlohmann::json::array();
  for (auto& p : k.points) j["points"].push_back(point_json(p));
  j["segments"] = nlohmann::json::array();
  for (auto& s : k.segments) j["segments"].push_back({point_json(s[0]), point_json(s[1])});
  j["polylines"] = nlohmann::json::array();
  for (auto& pl : k.polylines) {
    nlohmann::json a = nlohmann::json::array();
    for (auto& p : pl) a.push_back(point_json(p));
    j["polylines"].push_back(a);
  }
  j["window"] = k.window_half.to_double();
  j["k_radius"] = k.k_radius.to_double();
  return j.dump() + "\n";
}

WhitneyDecomposition whitney_decompose(const CompactSet& k, int max_depth) {
  validate_compact_set(k);
  const int d0 = window_depth(k);
  if (max_depth < d0 + 2) fail(Status::validation, "max_depth too small to resolve anything inside the window");
  const int P = std::max(max_depth + 2, max_exponent(k));
  if (P > kMaxScale) fail(Status::validation, "max_depth exceeds the exact working scale");
  ExactK K(k, P);
  {
    // distinct primitives must be separable at the finest scale
    auto n = k.points.size() + k.segments.size() + k.polylines.size();
    if (n > 1) {
      double res = std::ldexp(3 * std::sqrt(2.0), -max_depth);
      std::vector<std::vector<DyadicPoint>> prims;
      for (auto& p : k.points) prims.push_back({p});
      for (auto& s : k.segments) prims.push_back({s[0], s[1]});
      for (auto& pl : k.polylines) prims.push_back(pl);
      for (size_t a = 0; a < prims.size(); ++a)
        for (size_t b = a + 1; b < prims.size(); ++b) {
          double best = INFINITY;
          for (auto& p : prims[a])
            for (auto& q : prims[b])
              best = std::min(best, std::hypot(p.x.to_double() - q.x.to_double(), p.y.to_double() - q.y.to_double()));
          if (best > 0 && best < 2 * res)
            fail(Status::validation, "max_depth too small to separate the components of K");
        }
    }
  }
  WhitneyDecomposition w;
  w.max_depth = max_depth;
  std::function<void(const DyadicSquare&)> rec = [&](const DyadicSquare& q) {
    Box b = square_box(q, P);
    if (!K.meets_box(triple(b))) {
      w.squares.push_back(q);
      return;
    }
    if (K.box_in_interior(b)) return;
    if (q.depth >= max_depth) {
      w.unresolved.push_back(q);
      return;
    }
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) rec({q.depth + 1, 2 * q.i + a, 2 * q.j + c});
  };
  for (int a = -1; a < 1; ++a)
    for (int c = -1; c < 1; ++c) rec({d0, a, c});
  std::sort(w.squares.begin(), w.squares.end());
  std::sort(w.unresolved.begin(), w.unresolved.end());
  return w;
}

ContourSet contours(const CompactSet& k, int n) {
  validate_compact_set(k);
  if (n < 1) fail(Status::validation, "contour level must be at least 1");
  const int d0 = window_depth(k);
  const int depth_cut = 4 * n + 2;
  const int P = std::max(depth_cut + 4, max_exponent(k));
  if (P > kMaxScale) fail(Status::validation, "contour level exceeds the exact working scale");
  ExactK K(k, P);
  const i128 T = i128{1} << (P - 4 * n);
  const i128 T2 = T * T;
  std::vector<DyadicSquare> inside;
  bool touches_window = false;
  const int64_t wlim = int64_t{1} << (P - d0);
  std::function<void(const DyadicSquare&)> rec = [&](const DyadicSquare& q) {
    Box b = square_box(q, P);
    auto take = [&] {
      inside.push_back(q);
      if (b.x0 <= -wlim || b.y0 <= -wlim || b.x1 >= wlim || b.y1 >= wlim) touches_window = true;
    };
    if (!K.meets_box(triple(b))) {
      if (K.box_within(b, T2)) take();
      return;
    }
    const int64_t s = b.x1 - b.x0;
    if (q.depth >= depth_cut) {
      take();
      return;
    }
    i128 slack = T - (i128{3} * s) / 4;
    if (slack > 0 && K.point_within({b.x0 + s / 2, b.y0 + s / 2}, slack * slack)) {
      take();
      return;
    }
    if (K.box_in_interior(b)) {
      take();
      return;
    }
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) rec({q.depth + 1, 2 * q.i + a, 2 * q.j + c});
  };
  for (int a = -1; a < 1; ++a)
    for (int c = -1; c < 1; ++c) rec({d0, a, c});
  if (touches_window) fail(Status::validation, "contour level " + std::to_string(n) + " exits the working window");
  RegionIndex idx(inside, P);
  ContourSet cs;
  cs.n = n;
  cs.components = trace_simple(idx, P, &cs.crossings_split);
  return cs;
}

std::vector<std::array<DyadicPoint, 2>> region_boundary_edges(const SquareRegion& region) {
  const int P = needed_scale(region.squares);
  RegionIndex idx(region.squares, P);
  auto edges = boundary_edges(idx, idx.squares(), P);
  std::vector<std::array<DyadicPoint, 2>> out;
  for (auto& e : edges) out.push_back({from_ip(e.a, P), from_ip(e.b, P)});
  return out;
}

std::vector<Polygon> split_crossings(const SquareRegion& region, size_t* splits) {
  const int P = needed_scale(region.squares) + 6;
  if (P > 62) fail(Status::validation, "region too fine");
  RegionIndex idx(region.squares, P);
  return trace_simple(idx, P, splits);
}

std::string contours_to_json(const ContourSet& c) {
  nlohmann::json j;
  j["n"] = c.n;
  j["crossings_split"] = c.crossings_split;
  j["components"] = nlohmann::json::array();
  for (auto& poly : c.components) {
    nlohmann::json a = nlohmann::json::array();
    for (auto& p : poly) a.push_back(point_json(p));
    j["components"].push_back(a);
  }
  return j.dump() + "\n";
}

ContourSet contours_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  ContourSet c;
  c.n = j.at("n").get<int>();
  if (j.contains("crossings_split")) c.crossings_split = j["crossings_split"].get<size_t>();
  for (auto& poly : j.at("components")) {
    Polygon p;
    for (auto& v : poly) p.push_back(read_point(v));
    c.components.push_back(std::move(p));
  }
  return c;
}

double contour_min_distance(const CompactSet& k, const Polygon& p) {
  auto pt = [](const DyadicPoint& q) { return std::array<double, 2>{q.x.to_double(), q.y.to_double()}; };
  auto seg_dist = [](std::array<double, 2> a, std::array<double, 2> b, std::array<double, 2> c, std::array<double, 2> d) {
    auto ps = [](std::array<double, 2> p, std::array<double, 2> s0, std::array<double, 2> s1) {
      double dx = s1[0] - s0[0], dy = s1[1] - s0[1];
      double L = dx * dx + dy * dy;
      double t = L > 0 ? std::clamp(((p[0] - s0[0]) * dx + (p[1] - s0[1]) * dy) / L, 0.0, 1.0) : 0.0;
      return std::hypot(p[0] - s0[0] - t * dx, p[1] - s0[1] - t * dy);
    };
    return std::min({ps(a, c, d), ps(b, c, d), ps(c, a, b), ps(d, a, b)});
  };
  double best = INFINITY;
  std::vector<std::array<std::array<double, 2>, 2>> ks;
  for (auto& q : k.points) ks.push_back({pt(q), pt(q)});
  for (auto& s : k.segments) ks.push_back({pt(s[0]), pt(s[1])});
  for (auto& pl : k.polylines)
    for (size_t i = 0; i < pl.size(); ++i) ks.push_back({pt(pl[i]), pt(pl[(i + 1) % pl.size()])});
  for (size_t i = 0; i < p.size(); ++i)
    for (auto& s : ks) best = std::min(best, seg_dist(pt(p[i]), pt(p[(i + 1) % p.size()]), s[0], s[1]));
  return best;
}

}  // namespace qcmesh
