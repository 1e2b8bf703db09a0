#include "qcmesh/strip.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

#include "qcmesh/error.hpp"

namespace qcmesh {

namespace {

// slack for comparing gaps computed from rounded positions
constexpr double kRel = 1e-9;

std::vector<double> gaps_of(const BoundaryPartition& p) {
  std::vector<double> g;
  for (size_t k = 0; k + 1 < p.x.size(); ++k) g.push_back(p.x[k + 1] - p.x[k]);
  if (p.period > 0) g.push_back(p.x.front() + p.period - p.x.back());
  return g;
}

bool is_half_multiple(double v) { return std::floor(2 * v) == 2 * v; }

class SigmaLine {
public:
  SigmaLine(const std::vector<SigmaVertex>& s, double period) {
    int laps = period > 0 ? 1 : 0;
    for (int lap = -laps; lap <= laps; ++lap)
      for (auto& v : s) {
        xs_.push_back(v.x + lap * period);
        ys_.push_back(v.y.to_double());
      }
  }

  double eval(double x) const {
    if (x < xs_.front() || x > xs_.back()) fail(Status::internal, "sigma evaluated outside its domain");
    size_t k = std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin();
    if (k == xs_.size()) return ys_.back();
    if (k == 0) return ys_.front();
    double t = (x - xs_[k - 1]) / (xs_[k] - xs_[k - 1]);
    return ys_[k - 1] + t * (ys_[k] - ys_[k - 1]);
  }

  double max_over(double a, double b) const {
    double m = std::max(eval(a), eval(b));
    auto it = std::upper_bound(xs_.begin(), xs_.end(), a);
    for (; it != xs_.end() && *it < b; ++it) m = std::max(m, ys_[it - xs_.begin()]);
    return m;
  }

private:
  std::vector<double> xs_, ys_;
};

bool multiple_of(const Dyadic& x, int depth) { return x.is_zero() || x.e <= depth; }

int depth_of(const Dyadic& pow2) { return pow2.e; }

struct Piece {
  Dyadic a, b, y;
};

struct KeyLess {
  bool operator()(const DyadicPoint& p, const DyadicPoint& q) const {
    if (p.x != q.x) return p.x < q.x;
    return p.y < q.y;
  }
};

Dyadic wrap(Dyadic x, const Dyadic& L) {
  if (L.is_zero()) return x;
  while (x < Dyadic()) x = x + L;
  while (!(x < L)) x = x - L;
  return x;
}

// Collects exact-coordinate faces and merges coincident vertices (modulo the period).
class Assembler {
public:
  explicit Assembler(double period) : period_(period), L_(period > 0 ? Dyadic::from_double(period) : Dyadic()) {}

  int vertex(DyadicPoint p) {
    p.x = wrap(p.x, L_);
    auto [it, fresh] = ids_.try_emplace(p, static_cast<int>(pts_.size()));
    if (fresh) pts_.push_back(p);
    return it->second;
  }

  void face(int a, int b, int c, uint8_t tag = tag_none) {
    faces_.push_back({a, b, c});
    tags_.push_back(tag);
  }

  const DyadicPoint& point(int id) const { return pts_[id]; }

  void add_mesh(const Mesh& m, bool mirror_y = false) {
    std::vector<int> map;
    for (size_t v = 0; v < m.vertices.size(); ++v) {
      DyadicPoint p = m.exact[v];
      if (mirror_y) p.y = Dyadic::from_int(2) - p.y;
      map.push_back(vertex(p));
    }
    for (size_t f = 0; f < m.faces.size(); ++f) {
      auto t = m.faces[f];
      uint8_t tag = f < m.tags.size() ? m.tags[f] : uint8_t{tag_none};
      if (mirror_y)
        face(map[t[0]], map[t[2]], map[t[1]], tag);
      else
        face(map[t[0]], map[t[1]], map[t[2]], tag);
    }
  }

  Mesh finish(bool with_tags) const {
    Mesh m;
    m.period = period_;
    m.exact = pts_;
    for (auto& p : pts_) m.vertices.push_back({p.x.to_double(), p.y.to_double()});
    m.faces = faces_;
    if (with_tags) m.tags = tags_;
    return m;
  }

private:
  double period_;
  Dyadic L_;
  std::map<DyadicPoint, int, KeyLess> ids_;
  std::vector<DyadicPoint> pts_;
  std::vector<Face> faces_;
  std::vector<uint8_t> tags_;
};

Dyadic floor_half(double v) { return Dyadic(static_cast<int64_t>(std::floor(2 * v)), 1); }
Dyadic ceil_half(double v) { return Dyadic(static_cast<int64_t>(std::ceil(2 * v)), 1); }

// Extension of a finite partition by repeated reflection in its end points.
BoundaryPartition mirrored_extension(const BoundaryPartition& p, double pad) {
  const long N = static_cast<long>(p.x.size()) - 1;
  const Dyadic x0 = Dyadic::from_double(p.x.front());
  const Dyadic W = Dyadic::from_double(p.x.back()) - x0;
  const double w = W.to_double();
  const long reps = static_cast<long>(std::ceil(pad / w)) + 1;
  BoundaryPartition e;
  for (long t = -reps * N; t <= N + reps * N; ++t) {
    long q = t >= 0 ? t / N : -((-t + N - 1) / N);
    long r = t - q * N;
    Dyadic v;
    if (q % 2 == 0)
      v = x0 + Dyadic::from_int(q) * W + (Dyadic::from_double(p.x[r]) - x0);
    else
      v = x0 + Dyadic::from_int(q + 1) * W - (Dyadic::from_double(p.x[N - r]) - x0);
    e.x.push_back(v.to_double());
  }
  return e;
}

// Sutherland-Hodgman against x >= wall (keep_right) or x <= wall; the crossing point of an edge
// is computed from its canonically ordered end points so both incident faces agree.
std::vector<DyadicPoint> clip_polygon(const std::vector<DyadicPoint>& poly, const Dyadic& wall, bool keep_right) {
  auto side = [&](const DyadicPoint& p) {
    auto c = p.x <=> wall;
    int s = c < 0 ? -1 : (c > 0 ? 1 : 0);
    return keep_right ? s : -s;
  };
  auto cut = [&](DyadicPoint a, DyadicPoint b) {
    if (KeyLess()(b, a)) std::swap(a, b);
    double xa = a.x.to_double(), ya = a.y.to_double(), xb = b.x.to_double(), yb = b.y.to_double();
    double y = ya + (yb - ya) * ((wall.to_double() - xa) / (xb - xa));
    return DyadicPoint{wall, Dyadic::from_double(y)};
  };
  std::vector<DyadicPoint> out;
  for (size_t i = 0; i < poly.size(); ++i) {
    const DyadicPoint& a = poly[i];
    const DyadicPoint& b = poly[(i + 1) % poly.size()];
    int sa = side(a), sb = side(b);
    if (sa >= 0) out.push_back(a);
    if ((sa > 0 && sb < 0) || (sa < 0 && sb > 0)) out.push_back(cut(a, b));
  }
  return out;
}

Mesh clip_to_window(const Mesh& m, const Dyadic& x0, const Dyadic& x1) {
  Assembler as(0);
  for (size_t f = 0; f < m.faces.size(); ++f) {
    std::vector<DyadicPoint> poly;
    for (int v : m.faces[f]) poly.push_back(m.exact[v]);
    bool inside = true;
    for (auto& p : poly) inside = inside && !(p.x < x0) && !(x1 < p.x);
    if (inside) {
      bool wall = false;
      for (auto& p : poly) wall = wall || p.x == x0 || p.x == x1;
      as.face(as.vertex(poly[0]), as.vertex(poly[1]), as.vertex(poly[2]), wall ? tag_wall : tag_none);
      continue;
    }
    poly = clip_polygon(poly, x0, true);
    if (poly.size() >= 3) poly = clip_polygon(poly, x1, false);
    if (poly.size() < 3) continue;
    std::vector<int> ids;
    for (auto& p : poly) {
      int id = as.vertex(p);
      if (ids.empty() || ids.back() != id) ids.push_back(id);
    }
    if (ids.size() > 1 && ids.front() == ids.back()) ids.pop_back();
    // fan from a wall vertex so every piece meets the wall
    auto on_wall = [&](int id) { return as.point(id).x == x0 || as.point(id).x == x1; };
    std::rotate(ids.begin(), std::find_if(ids.begin(), ids.end(), on_wall), ids.end());
    for (size_t i = 1; i + 1 < ids.size(); ++i) as.face(ids[0], ids[i], ids[i + 1], tag_wall);
  }
  return as.finish(true);
}

}  // namespace

void validate_partition(const BoundaryPartition& p, double M) {
  if (!(M >= 1)) fail(Status::validation, "comparability factor M must be >= 1");
  const auto& x = p.x;
  if (x.size() < 2) fail(Status::validation, "partition needs at least two points");
  for (size_t k = 0; k < x.size(); ++k)
    if (!std::isfinite(x[k])) fail(Status::validation, "partition point " + std::to_string(k) + " is not finite");
  if (p.period > 0) {
    if (p.period < 1 || !is_half_multiple(p.period))
      fail(Status::validation, "period must be a multiple of 1/2 and at least 1");
    if (x.front() < 0 || x.back() >= p.period) fail(Status::validation, "periodic partition points must lie in [0, L)");
  } else if (p.period < 0) {
    fail(Status::validation, "negative period");
  }
  for (size_t k = 0; k + 1 < x.size(); ++k)
    if (!(x[k] < x[k + 1])) fail(Status::validation, "partition not strictly increasing at index " + std::to_string(k + 1));
  auto g = gaps_of(p);
  for (size_t k = 0; k < g.size(); ++k) {
    if (!(g[k] > 0)) fail(Status::validation, "empty gap at index " + std::to_string(k));
    if (g[k] > 0.125 * (1 + kRel))
      fail(Status::validation, "gap at index " + std::to_string(k) + " exceeds 1/8");
  }
  size_t n = g.size();
  size_t pairs = p.period > 0 ? n : n - 1;
  for (size_t k = 0; k < pairs; ++k) {
    double a = g[k], b = g[(k + 1) % n];
    if (a > M * b * (1 + kRel) || b > M * a * (1 + kRel))
      fail(Status::validation, "adjacent gaps not comparable within M at index " + std::to_string((k + 1) % x.size()));
  }
}

BoundaryPartition partition_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(Status::validation, std::string("partition: invalid JSON: ") + e.what());
  }
  BoundaryPartition p;
  const nlohmann::json* pts = &j;
  if (j.is_object()) {
    if (!j.contains("x")) fail(Status::validation, "partition: missing \"x\"");
    pts = &j["x"];
    if (j.contains("period")) p.period = j["period"].get<double>();
  }
  if (!pts->is_array()) fail(Status::validation, "partition: \"x\" must be an array");
  for (auto& v : *pts) p.x.push_back(v.get<double>());
  return p;
}

std::string partition_to_json(const BoundaryPartition& p) {
  nlohmann::json j;
  j["x"] = p.x;
  if (p.period > 0) j["period"] = p.period;
  return j.dump() + "\n";
}

std::vector<SigmaVertex> sigma_heights(const BoundaryPartition& p, double M) {
  validate_partition(p, M);
  auto g = gaps_of(p);
  const size_t N = p.x.size();
  std::vector<SigmaVertex> out(N);
  for (size_t k = 0; k < N; ++k) {
    double left, right;
    if (p.period > 0) {
      left = g[(k + g.size() - 1) % g.size()];
      right = g[k];
    } else {
      left = k > 0 ? g[k - 1] : g[k];
      right = k < g.size() ? g[k] : g[k - 1];
    }
    double D = std::min(left, right);
    double v = D / (16 * M);
    int e;
    double f = std::frexp(v, &e);  // v = f 2^e, f in [1/2, 1)
    int j = f == 0.5 ? 1 - e : -e;
    out[k] = {p.x[k], D, j, Dyadic(3, j + 2)};
  }
  return out;
}

GammaCurve carve_gamma(const std::vector<SigmaVertex>& sigma, double period, Dyadic lo, Dyadic hi) {
  if (sigma.empty()) fail(Status::validation, "empty sigma");
  SigmaLine line(sigma, period);
  GammaCurve g;
  g.lo = lo;
  g.hi = hi;
  g.periodic = period > 0;
  auto survives = [&](const StripSquare& q) {
    double s = q.side().to_double(), x0 = q.x0().to_double();
    return line.max_over(x0, x0 + s) <= s;
  };
  const int64_t c0 = lo.at_scale(1), c1 = hi.at_scale(1);
  std::vector<Piece> pieces;
  std::function<void(const StripSquare&)> rec = [&](const StripSquare& q) {
    g.squares.push_back(q);
    if (q.depth > 60) fail(Status::internal, "square recursion too deep");
    for (int c = 0; c < 2; ++c) {
      StripSquare ch{q.depth + 1, 2 * q.i + c};
      if (survives(ch))
        rec(ch);
      else
        pieces.push_back({ch.x0(), ch.x0() + ch.side(), q.side()});
    }
  };
  for (int64_t i = c0; i < c1; ++i) {
    StripSquare q{1, i};
    if (!survives(q)) fail(Status::hypothesis, "sigma reaches the top row of squares");
    rec(q);
  }
  std::sort(g.squares.begin(), g.squares.end());
  std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) { return a.a < b.a; });
  std::vector<Piece> merged;
  for (auto& p : pieces) {
    if (!merged.empty() && !(merged.back().b == p.a)) fail(Status::internal, "gamma pieces are not contiguous");
    if (!merged.empty() && merged.back().y == p.y)
      merged.back().b = p.b;
    else
      merged.push_back(p);
  }
  auto chain = [&](const Dyadic& x, const Dyadic& from, const Dyadic& to) {
    // intermediate corners strictly between the two levels, in walking order
    std::vector<Dyadic> hs;
    Dyadic a = from < to ? from : to, b = from < to ? to : from;
    for (Dyadic h = a * Dyadic::from_int(2); h < b; h = h * Dyadic::from_int(2)) hs.push_back(h);
    if (to < from) std::reverse(hs.begin(), hs.end());
    for (auto& h : hs) g.vertices.push_back({{x, h}, false});
  };
  if (g.periodic && merged.size() > 1 && !(merged.back().y == merged.front().y)) {
    g.vertices.push_back({{lo, merged.back().y}, false});
    chain(lo, merged.back().y, merged.front().y);
  }
  for (size_t m = 0; m < merged.size(); ++m) {
    const Piece& p = merged[m];
    const int d = depth_of(p.y);
    const Dyadic step = Dyadic(1, d + 1);
    for (Dyadic x = p.a; x < p.b; x = x + step) g.vertices.push_back({{x, p.y}, !multiple_of(x, d) && !(x == p.a)});
    if (m + 1 < merged.size()) {
      g.vertices.push_back({{p.b, p.y}, false});
      chain(p.b, p.y, merged[m + 1].y);
    } else if (!g.periodic) {
      g.vertices.push_back({{p.b, p.y}, false});
    }
  }
  // a piece start that is a midpoint is a step corner, hence a vertex; drop duplicates from steps
  std::vector<GammaVertex> dedup;
  for (auto& v : g.vertices)
    if (dedup.empty() || !(dedup.back().p == v.p)) dedup.push_back(v);
  if (g.periodic && dedup.size() > 1 && dedup.front().p == dedup.back().p) dedup.pop_back();
  g.vertices = std::move(dedup);
  return g;
}

std::vector<long> choose_w(const GammaCurve& g, const std::vector<double>& xs) {
  const long n = static_cast<long>(g.vertices.size());
  if (n == 0) fail(Status::internal, "empty gamma");
  const double L = g.periodic ? (g.hi - g.lo).to_double() : 0;
  const long t_lo = g.periodic ? -n : 0, t_hi = g.periodic ? 2 * n : n;
  auto vx = [&](long t) {
    long lap = t >= 0 ? t / n : -((-t + n - 1) / n);
    return g.vertices[t - lap * n].p.x.to_double() + lap * L;
  };
  auto vy = [&](long t) {
    long lap = t >= 0 ? t / n : -((-t + n - 1) / n);
    return g.vertices[t - lap * n].p.y.to_double();
  };
  std::vector<long> w;
  for (double x : xs) {
    long lo = t_lo, hi = t_hi;
    while (lo < hi) {
      long mid = lo + (hi - lo) / 2;
      if (vx(mid) < x)
        lo = mid + 1;
      else
        hi = mid;
    }
    long best = -1;
    double bd = INFINITY;
    for (long t = std::max(t_lo, lo - 8); t < std::min(t_hi, lo + 8); ++t) {
      double d = std::abs(vx(t) - x);
      // ties: the left candidate, then the lower one
      if (d < bd || (d == bd && (vx(t) < vx(best) || (vx(t) == vx(best) && vy(t) < vy(best))))) {
        bd = d;
        best = t;
      }
    }
    // widen for long vertical chains
    for (long t = lo - 9; t >= t_lo && vx(t) >= x - bd; --t) {
      double d = std::abs(vx(t) - x);
      if (d < bd || (d == bd && (vx(t) < vx(best) || (vx(t) == vx(best) && vy(t) < vy(best))))) {
        bd = d;
        best = t;
      }
    }
    for (long t = lo + 8; t < t_hi && vx(t) <= x + bd; ++t) {
      double d = std::abs(vx(t) - x);
      if (d < bd) {
        bd = d;
        best = t;
      }
    }
    w.push_back(best);
  }
  for (size_t k = 1; k < w.size(); ++k)
    if (w[k] < w[k - 1]) fail(Status::internal, "w choices out of order");
  return w;
}

Mesh triangulate_W(const GammaCurve& g, const std::vector<double>& xs, const std::vector<long>& w) {
  const long n = static_cast<long>(g.vertices.size());
  const Dyadic L = g.periodic ? g.hi - g.lo : Dyadic();
  std::set<long> chosen;
  for (long t : w) chosen.insert(((t % n) + n) % n);
  auto vert = [&](long t) {
    long lap = t >= 0 ? t / n : -((-t + n - 1) / n);
    DyadicPoint p = g.vertices[t - lap * n].p;
    p.x = p.x + Dyadic::from_int(lap) * L;
    return p;
  };
  auto active = [&](long t) {
    long r = ((t % n) + n) % n;
    return !g.vertices[r].optional || chosen.count(r);
  };
  std::vector<DyadicPoint> pts;
  std::vector<Face> faces;
  auto add = [&](const DyadicPoint& p) {
    pts.push_back(p);
    return static_cast<int>(pts.size()) - 1;
  };
  auto pos = [](const DyadicPoint& p) { return Vec2{p.x.to_double(), p.y.to_double()}; };
  const size_t K = xs.size();
  const size_t quads = g.periodic ? K : K - 1;
  for (size_t k = 0; k < quads; ++k) {
    DyadicPoint a{Dyadic::from_double(xs[k]), Dyadic()};
    DyadicPoint b{Dyadic::from_double(xs[(k + 1) % K]), Dyadic()};
    long t0 = w[k], t1 = k + 1 < K ? w[k + 1] : w[0] + n;
    if (k + 1 == K) b.x = b.x + L;
    std::vector<DyadicPoint> arc;
    for (long t = t0; t <= t1; ++t)
      if (active(t)) arc.push_back(vert(t));
    bool up = false, down = false;
    for (size_t i = 0; i + 1 < arc.size(); ++i) {
      if (arc[i + 1].y < arc[i].y) down = true;
      if (arc[i].y < arc[i + 1].y) up = true;
    }
    if (up && down) fail(Status::hypothesis, "gamma is not monotone over gap " + std::to_string(k));
    int ia = add(a), ib = add(b);
    std::vector<int> ids;
    for (auto& p : arc) ids.push_back(add(p));
    if (!up) {
      faces.push_back({ia, ib, ids.back()});
      for (size_t i = 0; i + 1 < ids.size(); ++i) faces.push_back({ia, ids[i + 1], ids[i]});
    } else {
      faces.push_back({ia, ib, ids.front()});
      for (size_t i = 0; i + 1 < ids.size(); ++i) faces.push_back({ib, ids[i + 1], ids[i]});
    }
  }
  Mesh m;
  m.exact = pts;
  for (auto& p : pts) m.vertices.push_back(pos(p));
  m.faces = faces;
  for (size_t f = 0; f < m.faces.size(); ++f)
    if (!(m.signed_area(f) > 0)) fail(Status::hypothesis, "fan triangle " + std::to_string(f) + " is not positively oriented");
  return m;
}

Mesh triangulate_upper(const GammaCurve& g, const std::vector<DyadicPoint>& used_mid) {
  std::set<StripSquare> alive(g.squares.begin(), g.squares.end());
  std::set<DyadicPoint, KeyLess> mids(used_mid.begin(), used_mid.end());
  const Dyadic L = g.periodic ? g.hi - g.lo : Dyadic();
  Mesh m;
  auto add = [&](Dyadic x, Dyadic y) {
    m.exact.push_back({x, y});
    m.vertices.push_back({x.to_double(), y.to_double()});
    return static_cast<int>(m.vertices.size()) - 1;
  };
  for (auto& q : g.squares) {
    Dyadic s = q.side(), x0 = q.x0(), x1 = x0 + s, half = Dyadic(1, q.depth + 1);
    Dyadic xm = x0 + half;
    bool mid = alive.count({q.depth + 1, 2 * q.i}) || alive.count({q.depth + 1, 2 * q.i + 1}) ||
               mids.count({wrap(xm, L), s});
    int bl = add(x0, s), br = add(x1, s), tl = add(x0, s + s), tr = add(x1, s + s);
    if (mid) {
      int bm = add(xm, s);
      m.faces.push_back({bl, bm, tl});
      m.faces.push_back({bm, tr, tl});
      m.faces.push_back({bm, br, tr});
    } else {
      m.faces.push_back({bl, br, tr});
      m.faces.push_back({bl, tr, tl});
    }
  }
  return m;
}

namespace {

Mesh lower_half_unclipped(const BoundaryPartition& bottom, double M, Dyadic* wall0, Dyadic* wall1) {
  validate_partition(bottom, M);
  if (bottom.period > 0) {
    auto sigma = sigma_heights(bottom, M);
    Dyadic L = Dyadic::from_double(bottom.period);
    auto g = carve_gamma(sigma, bottom.period, Dyadic(), L);
    auto w = choose_w(g, bottom.x);
    std::vector<DyadicPoint> mids;
    const long n = static_cast<long>(g.vertices.size());
    for (long t : w) {
      auto& v = g.vertices[((t % n) + n) % n];
      if (v.optional) mids.push_back(v.p);
    }
    Assembler as(bottom.period);
    as.add_mesh(triangulate_W(g, bottom.x, w));
    as.add_mesh(triangulate_upper(g, mids));
    return as.finish(false);
  }
  if (bottom.x.back() - bottom.x.front() < 1) fail(Status::validation, "finite strip windows must be at least 1 wide");
  const double pad = 2;
  BoundaryPartition ext = mirrored_extension(bottom, pad);
  auto sigma = sigma_heights(ext, M);
  Dyadic lo = floor_half(bottom.x.front() - 1), hi = ceil_half(bottom.x.back() + 1);
  auto g = carve_gamma(sigma, 0, lo, hi);
  std::vector<double> xs;
  double a = lo.to_double() + 0.25, b = hi.to_double() - 0.25;
  for (double x : ext.x)
    if (x >= a && x <= b) xs.push_back(x);
  auto w = choose_w(g, xs);
  std::vector<DyadicPoint> mids;
  for (long t : w)
    if (g.vertices[t].optional) mids.push_back(g.vertices[t].p);
  Assembler as(0);
  as.add_mesh(triangulate_W(g, xs, w));
  as.add_mesh(triangulate_upper(g, mids));
  *wall0 = Dyadic::from_double(bottom.x.front());
  *wall1 = Dyadic::from_double(bottom.x.back());
  return as.finish(false);
}

}  // namespace

Mesh strip_lower_half(const BoundaryPartition& bottom, double M) {
  if (bottom.period > 0 && bottom.period < 1.5)
    fail(Status::validation, "a periodic half strip needs a period of at least 3/2");
  Dyadic a, b;
  Mesh m = lower_half_unclipped(bottom, M, &a, &b);
  if (bottom.period > 0) return m;
  return clip_to_window(m, a, b);
}

Mesh strip_triangulate(const BoundaryPartition& top, const BoundaryPartition& bottom, double M) {
  if ((top.period > 0) != (bottom.period > 0) || top.period != bottom.period)
    fail(Status::validation, "top and bottom partitions must share the same period");
  if (bottom.period == 0) {
    validate_partition(top, M);
    validate_partition(bottom, M);
    if (top.x.front() != bottom.x.front() || top.x.back() != bottom.x.back())
      fail(Status::validation, "finite top and bottom partitions must span the same window");
  }
  if (bottom.period > 0 && bottom.period < 1.5) {
    // two centre-line vertices per period would make a multigraph; mesh two periods instead
    auto twice = [](const BoundaryPartition& p) {
      BoundaryPartition q = p;
      q.period = 2 * p.period;
      for (double x : p.x) q.x.push_back((Dyadic::from_double(x) + Dyadic::from_double(p.period)).to_double());
      return q;
    };
    return strip_triangulate(twice(top), twice(bottom), M);
  }
  Mesh lower = strip_lower_half(bottom, M);
  Mesh upper = strip_lower_half(top, M);
  Assembler as(bottom.period);
  as.add_mesh(lower);
  as.add_mesh(upper, true);
  return as.finish(bottom.period == 0);
}

BoundaryPartition random_partition(std::mt19937_64& rng, double M, double L) {
  if (!(M >= 1) || !(L >= 1)) fail(Status::validation, "random partition needs M >= 1 and period >= 1");
  std::uniform_real_distribution<double> u(0, 1);
  for (;;) {
    int n = static_cast<int>(8 * L) + static_cast<int>(rng() % static_cast<unsigned>(24 * L + 1));
    std::vector<double> logs(n);
    double c = std::log(M) / 2, acc = 0;
    std::vector<double> steps(n);
    for (auto& s : steps) s = (2 * u(rng) - 1) * c;
    double mean = 0;
    for (double s : steps) mean += s / n;
    for (int i = 0; i < n; ++i) {
      logs[i] = acc;
      acc += steps[i] - mean;
    }
    std::vector<double> g(n);
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += g[i] = std::exp(logs[i]);
    double mx = 0;
    for (auto& v : g) mx = std::max(mx, v *= L / sum);
    if (mx > 0.125) continue;
    BoundaryPartition p;
    p.period = L;
    double x = u(rng) * g[0];
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) {
      xs.push_back(std::fmod(x, L));
      x += g[i];
    }
    std::sort(xs.begin(), xs.end());
    // snap to a 2^-40 grid so positions stay exactly representable after shifts by L
    for (auto& v : xs) v = std::ldexp(std::round(std::ldexp(v, 40)), -40);
    if (xs.back() >= L) continue;
    p.x = xs;
    try {
      validate_partition(p, M);
    } catch (const Error&) {
      continue;
    }
    return p;
  }
}

}  // namespace qcmesh
