#include "qcmesh/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "qcmesh/error.hpp"
#include "qcmesh/exact_geom.hpp"
#include "qcmesh/lattice.hpp"
#include "qcmesh/mesh_io.hpp"

namespace qcmesh {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec2 to_vec(const DyadicPoint& q) { return {q.x.to_double(), q.y.to_double()}; }

double seg_dist(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double l2 = dot(ab, ab);
  double t = l2 > 0 ? std::clamp(dot(p - a, ab) / l2, 0.0, 1.0) : 0.0;
  return norm(p - (a + ab * t));
}

bool in_polygon(const std::vector<Vec2>& poly, Vec2 p) {
  bool in = false;
  for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

struct Box {
  Vec2 lo{kInf, kInf}, hi{-kInf, -kInf};
  void add(Vec2 p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  double distance(Vec2 p) const {
    double dx = std::max({lo.x - p.x, 0.0, p.x - hi.x});
    double dy = std::max({lo.y - p.y, 0.0, p.y - hi.y});
    return std::hypot(dx, dy);
  }
};

class SetGeometry {
public:
  explicit SetGeometry(const CompactSet& k) {
    for (const auto& p : k.points) points_.push_back(to_vec(p));
    for (const auto& s : k.segments) segments_.push_back({to_vec(s[0]), to_vec(s[1])});
    for (const auto& pl : k.polylines) {
      std::vector<Vec2> poly;
      for (const auto& p : pl) poly.push_back(to_vec(p));
      polygons_.push_back(std::move(poly));
    }
  }

  double distance(Vec2 p) const {
    double d = kInf;
    for (const auto& q : points_) d = std::min(d, norm(p - q));
    for (const auto& s : segments_) d = std::min(d, seg_dist(p, s[0], s[1]));
    for (const auto& poly : polygons_) {
      if (poly.size() >= 3 && in_polygon(poly, p)) return 0;
      for (size_t i = 0; i < poly.size(); ++i) d = std::min(d, seg_dist(p, poly[i], poly[(i + 1) % poly.size()]));
    }
    return d;
  }

  Box bounds() const {
    Box b;
    for (const auto& q : points_) b.add(q);
    for (const auto& s : segments_) b.add(s[0]), b.add(s[1]);
    for (const auto& poly : polygons_)
      for (const auto& q : poly) b.add(q);
    return b;
  }

private:
  std::vector<Vec2> points_;
  std::vector<std::array<Vec2, 2>> segments_;
  std::vector<std::vector<Vec2>> polygons_;
};

class ContourGeometry {
public:
  explicit ContourGeometry(const ContourSet& c) {
    for (const auto& comp : c.components) {
      std::vector<Vec2> poly;
      Box b;
      for (const auto& p : comp) {
        poly.push_back(to_vec(p));
        b.add(poly.back());
      }
      polys_.push_back(std::move(poly));
      boxes_.push_back(b);
    }
  }

  double distance(Vec2 p) const {
    double d = kInf;
    for (size_t c = 0; c < polys_.size(); ++c) {
      if (boxes_[c].distance(p) >= d) continue;
      const auto& poly = polys_[c];
      for (size_t i = 0; i < poly.size(); ++i) d = std::min(d, seg_dist(p, poly[i], poly[(i + 1) % poly.size()]));
    }
    return d;
  }

  bool inside(Vec2 p) const {
    for (size_t c = 0; c < polys_.size(); ++c) {
      if (boxes_[c].distance(p) > 0) continue;
      if (in_polygon(polys_[c], p)) return true;
    }
    return false;
  }

  // Re-entrant corners of the two offset curves at distance w: inside a convex vertex of the
  // contour and outside a reflex one.
  std::vector<Vec2> offset_corners(double w) const {
    std::vector<Vec2> out;
    for (const auto& poly : polys_) {
      const size_t m = poly.size();
      for (size_t i = 0; i < m; ++i) {
        Vec2 a = poly[(i + m - 1) % m], p = poly[i], b = poly[(i + 1) % m];
        Vec2 e1 = p - a, e2 = b - p;
        double l1 = norm(e1), l2 = norm(e2), turn = cross(e1, e2);
        if (l1 == 0 || l2 == 0 || turn == 0) continue;
        Vec2 n1{e1.y / l1, -e1.x / l1}, n2{e2.y / l2, -e2.x / l2};
        Vec2 bis = n1 + n2;
        double scale = w / (1 + dot(n1, n2));
        out.push_back(turn > 0 ? p - bis * scale : p + bis * scale);
      }
    }
    return out;
  }

  double perimeter() const {
    double s = 0;
    for (const auto& poly : polys_)
      for (size_t i = 0; i < poly.size(); ++i) s += norm(poly[(i + 1) % poly.size()] - poly[i]);
    return s;
  }

private:
  std::vector<std::vector<Vec2>> polys_;
  std::vector<Box> boxes_;
};

double pow2_floor(double v) {
  int e = 0;
  std::frexp(v, &e);
  return std::ldexp(1.0, e - 1);
}

int log2_exact(double v) {
  int e = 0;
  double m = std::frexp(v, &e);
  if (m != 0.5) fail(Status::internal, "expected a power of two, got " + format_double(v));
  return e - 1;
}

// U_n inside in(U_{n-1}): every vertex of gamma_n lies inside gamma_{n-1} and the two contours
// are more than r apart. Exact on the integer grid 2^-p.
bool nested_exact(const ContourSet& inner, const ContourSet& outer, double r) {
  int p = -log2_exact(pow2_floor(r)) + 2;
  while (p < 60 && std::floor(std::ldexp(r, p)) != std::ldexp(r, p)) ++p;
  auto visit = [&](const ContourSet& c) {
    for (const auto& poly : c.components)
      for (const auto& q : poly)
        for (const Dyadic* d : {&q.x, &q.y}) p = std::max(p, static_cast<int>(d->e));
  };
  visit(inner);
  visit(outer);
  if (p > 60) fail(Status::internal, "contour coordinates too fine for the exact nesting check");
  auto scale = [&](const Dyadic& d) {
    const int sh = p - d.e;
    if (sh < 0) fail(Status::internal, "dyadic exponent above the nesting grid");
    return static_cast<int64_t>(static_cast<exact::i128>(d.m) << sh);
  };
  auto ip = [&](const DyadicPoint& q) { return exact::IP{scale(q.x), scale(q.y)}; };
  const exact::i128 rr = static_cast<exact::i128>(std::ldexp(r, p));
  if (static_cast<double>(rr) != std::ldexp(r, p)) fail(Status::internal, "band width is not on the nesting grid");
  const exact::i128 r2 = rr * rr;

  auto winding = [](const std::vector<exact::IP>& poly, exact::IP q) {
    int w = 0;
    for (size_t i = 0; i < poly.size(); ++i) {
      exact::IP a = poly[i], b = poly[(i + 1) % poly.size()];
      if (a.y <= q.y) {
        if (b.y > q.y && exact::orient(a, b, q) > 0) ++w;
      } else if (b.y <= q.y && exact::orient(a, b, q) < 0) {
        --w;
      }
    }
    return w;
  };
  std::vector<std::vector<exact::IP>> in, out;
  for (const auto& poly : inner.components) {
    in.emplace_back();
    for (const auto& q : poly) in.back().push_back(ip(q));
  }
  for (const auto& poly : outer.components) {
    out.emplace_back();
    for (const auto& q : poly) out.back().push_back(ip(q));
  }
  auto close = [&](const std::vector<std::vector<exact::IP>>& pts, const std::vector<std::vector<exact::IP>>& segs) {
    for (const auto& poly : pts)
      for (const auto& q : poly)
        for (const auto& s : segs)
          for (size_t i = 0; i < s.size(); ++i)
            if (exact::point_segment_within(q, {s[i], s[(i + 1) % s.size()]}, r2)) return true;
    return false;
  };
  for (const auto& poly : in)
    for (const auto& q : poly) {
      int w = 0;
      for (const auto& o : out) w += winding(o, q);
      if (w == 0) return false;
    }
  return !close(in, out) && !close(out, in);
}

void compact_vertices(Mesh& m) {
  std::vector<int> remap(m.vertices.size(), -1);
  for (const auto& f : m.faces)
    for (int v : f) remap[v] = 0;
  int next = 0;
  std::vector<Vec2> verts;
  for (size_t v = 0; v < remap.size(); ++v)
    if (remap[v] == 0) {
      remap[v] = next++;
      verts.push_back(m.vertices[v]);
    }
  for (auto& f : m.faces)
    for (int& v : f) v = remap[v];
  m.vertices = std::move(verts);
  m.exact.clear();
  m.boundary_marked.clear();
}

// vertex -> incident faces, compressed
struct Incidence {
  std::vector<int> start, faces;
  explicit Incidence(const Mesh& m) : start(m.vertices.size() + 1, 0) {
    for (const auto& f : m.faces)
      for (int v : f) ++start[v + 1];
    std::partial_sum(start.begin(), start.end(), start.begin());
    faces.resize(start.back());
    std::vector<int> fill(start.begin(), start.end() - 1);
    for (size_t f = 0; f < m.faces.size(); ++f)
      for (int v : m.faces[f]) faces[fill[v]++] = static_cast<int>(f);
  }
};

enum VertexClass : uint8_t { vc_ex, vc_band, vc_in };
enum FaceClass : uint8_t { fc_v, fc_a, fc_w };

// labels connected components of faces of class `cls` across shared edges
std::vector<int> face_components(const HalfEdges& he, const std::vector<uint8_t>& cls, uint8_t want, int& count) {
  const size_t nf = cls.size();
  std::vector<int> comp(nf, -1);
  count = 0;
  std::vector<int> stack;
  for (size_t f0 = 0; f0 < nf; ++f0) {
    if (cls[f0] != want || comp[f0] >= 0) continue;
    comp[f0] = count;
    stack.push_back(static_cast<int>(f0));
    while (!stack.empty()) {
      int f = stack.back();
      stack.pop_back();
      for (int i = 0; i < 3; ++i) {
        int t = he.twin[3 * f + i];
        if (t < 0) continue;
        int g = t / 3;
        if (cls[g] == want && comp[g] < 0) {
          comp[g] = count;
          stack.push_back(g);
        }
      }
    }
    ++count;
  }
  return comp;
}

double residual_bound_area(const SetGeometry& kg, double r) {
  Box b = kg.bounds();
  const int n = 1024;
  const double x0 = b.lo.x - r, y0 = b.lo.y - r;
  const double hx = (b.hi.x - b.lo.x + 2 * r) / n, hy = (b.hi.y - b.lo.y + 2 * r) / n;
  size_t hit = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (kg.distance({x0 + (i + 0.5) * hx, y0 + (j + 0.5) * hy}) <= r) ++hit;
  return static_cast<double>(hit) * hx * hy;
}

void dump(const PipelineConfig& cfg, const std::string& text) {
  if (!cfg.dump_path.empty()) write_file(cfg.dump_path, text);
}

}  // namespace

double distance_to_set(const CompactSet& k, Vec2 p) { return SetGeometry(k).distance(p); }

StageSchedule epsilon_schedule(int n, const SizingFn& eta, int N, int band_shift) {
  if (n < 1) fail(Status::validation, "stage index must be at least 1");
  if (N < 1) fail(Status::validation, "N must be at least 1");
  if (band_shift < 1) fail(Status::validation, "band shift must be at least 1");
  auto eps_of = [&](int m) {
    const int e = 4 * (m + band_shift);
    const double b = std::ldexp(1.0, -e);
    const double raw = 0.5 * std::min(b / N, eta(b));
    // eps / 16 must stay a normal double
    if (!(raw >= std::ldexp(1.0, -1000)) || !std::isfinite(raw))
      fail(Status::hypothesis, "eta(" + format_double(b) + ") underflows at stage " + std::to_string(m));
    return pow2_floor(raw);
  };
  StageSchedule s;
  s.n = n;
  s.band_scale = std::ldexp(1.0, -4 * (n + band_shift));
  s.eps = eps_of(n);
  s.delta = eps_of(n + 1) / 4;
  s.side = s.eps / 4;
  return s;
}

CostEstimate estimate_cost(const CompactSet& k, const SizingFn& eta, const PipelineConfig& cfg) {
  CostEstimate c;
  const double w = k.window_half.to_double();
  const double base = w / 4;
  const double tri = std::sqrt(3.0) / 4;
  if (cfg.n_max == 0) {
    c.eta_faces = 2 * std::pow(2 * w / base + 2, 2);
  } else {
    for (int n = 1; n <= cfg.n_max; ++n) {
      StageSchedule s = epsilon_schedule(n, eta, cfg.N, cfg.band_shift);
      const double perim = ContourGeometry(contours(k, n)).perimeter();
      // the strip mesh of an annulus has 5 to 9 faces per grid face on the corpus
      c.band_faces.push_back(6 * perim * (2 * cfg.N * s.eps + 6 * s.side) / (tri * s.side * s.side));
    }
    // eta-graded lattice around a point, lattice sides between eta/2 and eta
    const double r0 = std::pow(16.0, -cfg.n_max), r1 = w * std::sqrt(2.0);
    const int steps = 2000;
    const double q = std::log(r1 / r0) / steps;
    for (int i = 0; i < steps; ++i) {
      double r = r0 * std::exp((i + 0.5) * q), dr = r * q;
      double side = std::min(eta(r) / std::sqrt(2.0), base);
      c.eta_faces += 2 * M_PI * r * dr / (tri * side * side);
    }
  }
  c.total_faces = c.eta_faces;
  for (double f : c.band_faces) c.total_faces += f;
  c.within_budget = c.total_faces <= cfg.face_budget;
  if (!c.within_budget)
    c.reason = "estimated " + format_double(std::round(c.total_faces)) + " faces exceed the desk-scale budget of " +
               format_double(cfg.face_budget);
  return c;
}

StageState build_stage(const StageState& prev, const CompactSet& k, const SizingFn& eta, const PipelineConfig& cfg,
                       const ContourSet& gamma) {
  (void)k;
  const int n = prev.n + 1;
  if (gamma.n != n) fail(Status::internal, "contour stage does not match");
  const StageSchedule sch = epsilon_schedule(n, eta, cfg.N, cfg.band_shift);
  const double w = cfg.N * sch.eps;
  const Mesh& T = prev.mesh;
  const size_t nv = T.vertices.size(), nf = T.faces.size();
  ContourGeometry cg(gamma);

  std::vector<double> dist(nv);
  std::vector<uint8_t> vcls(nv);
  for (size_t v = 0; v < nv; ++v) {
    dist[v] = cg.distance(T.vertices[v]);
    vcls[v] = dist[v] <= w ? vc_band : (cg.inside(T.vertices[v]) ? vc_in : vc_ex);
  }
  std::vector<uint8_t> fcls(nf);
  for (size_t f = 0; f < nf; ++f) {
    bool ex = false, in = false;
    for (int v : T.faces[f]) {
      ex |= vcls[v] == vc_ex;
      in |= vcls[v] == vc_in;
    }
    if (ex && in) fail(Status::internal, "a face spans band " + std::to_string(n));
    fcls[f] = ex ? fc_v : (in ? fc_w : fc_a);
  }

  HalfEdges he = build_half_edges(T);
  size_t repaired = 0;
  // faces cut off from the open regions by the band join it
  const double deep = w + 2 * sch.side;
  for (uint8_t cls : {fc_v, fc_w}) {
    int count = 0;
    auto comp = face_components(he, fcls, cls, count);
    std::vector<uint8_t> genuine(count, 0);
    for (size_t f = 0; f < nf; ++f)
      if (comp[f] >= 0)
        for (int v : T.faces[f])
          if (dist[v] > deep) genuine[comp[f]] = 1;
    for (size_t f = 0; f < nf; ++f)
      if (comp[f] >= 0 && !genuine[comp[f]]) {
        fcls[f] = fc_a;
        ++repaired;
      }
  }
  // pinched band vertices: the band takes every face around them
  Incidence inc(T);
  for (int round = 0;; ++round) {
    if (round == 64) fail(Status::internal, "band repair did not settle");
    std::vector<int> out_edges(nv, 0);
    for (size_t f = 0; f < nf; ++f) {
      if (fcls[f] != fc_a) continue;
      for (int i = 0; i < 3; ++i) {
        int t = he.twin[3 * f + i];
        if (t < 0 || fcls[t / 3] != fc_a) ++out_edges[T.faces[f][i]];
      }
    }
    bool changed = false;
    for (size_t v = 0; v < nv; ++v) {
      if (out_edges[v] <= 1) continue;
      for (int i = inc.start[v]; i < inc.start[v + 1]; ++i) {
        int f = inc.faces[i];
        if (fcls[f] != fc_a) {
          fcls[f] = fc_a;
          ++repaired;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }

  StageReport rep;
  rep.n = n;
  rep.schedule = sch;
  rep.contour_components = gamma.components.size();
  rep.repaired_faces = repaired;

  int ncomp = 0;
  auto comp = face_components(he, fcls, fc_a, ncomp);
  std::vector<std::vector<int>> comp_faces(ncomp);
  for (size_t f = 0; f < nf; ++f)
    if (comp[f] >= 0) {
      if (prev.stage_of[f] != 0) fail(Status::internal, "band " + std::to_string(n) + " overlaps an earlier annulus");
      comp_faces[comp[f]].push_back(static_cast<int>(f));
    }

  StageState next;
  next.n = n;
  next.reports = prev.reports;
  Mesh& out = next.mesh;
  out.vertices = T.vertices;
  for (size_t f = 0; f < nf; ++f) {
    if (fcls[f] == fc_a) {
      rep.band_area += T.signed_area(f);
      continue;
    }
    out.faces.push_back(T.faces[f]);
    out.tags.push_back(f < T.tags.size() ? T.tags[f] : static_cast<uint8_t>(tag_grid));
    next.stage_of.push_back(prev.stage_of[f]);
    next.inside.push_back(fcls[f] == fc_w);
    (fcls[f] == fc_v ? rep.V : rep.W)++;
  }

  std::vector<uint8_t> on_loop(nv, 0);
  for (int c = 0; c < ncomp; ++c) {
    std::vector<int> local(nv, -1), global;
    Mesh sub;
    for (int f : comp_faces[c])
      for (int v : T.faces[f]) local[v] = 0;
    for (size_t v = 0; v < nv; ++v)
      if (local[v] == 0) {
        local[v] = static_cast<int>(global.size());
        global.push_back(static_cast<int>(v));
        sub.vertices.push_back(T.vertices[v]);
      }
    for (int f : comp_faces[c]) {
      const Face& t = T.faces[f];
      sub.faces.push_back({local[t[0]], local[t[1]], local[t[2]]});
    }
    const std::string where = "stage " + std::to_string(n) + " annulus " + std::to_string(c);
    ConformalGridAnnulus ga;
    try {
      ga = make_grid_annulus(sub);
    } catch (const Error& e) {
      dump(cfg, mesh_to_json(sub));
      fail(Status::hypothesis, where + " is not a grid annulus: " + e.what());
    }
    if (ga.thickness < cfg.N) {
      dump(cfg, grid_annulus_to_json(ga));
      fail(Status::hypothesis, where + " has thickness " + std::to_string(ga.thickness) + " < N = " + std::to_string(cfg.N));
    }
    RoundAnnulusModel model;
    AnnulusMesh am;
    try {
      model = discrete_conformal_annulus(ga, cfg.solver);
      am = annulus_triangulate(ga, model, cfg.annulus);
    } catch (const Error& e) {
      dump(cfg, grid_annulus_to_json(ga));
      throw Error(e.code(), where + ": " + e.what());
    }
    for (int v : ga.inner) on_loop[global[v]] = 1;
    for (int v : ga.outer) on_loop[global[v]] = 1;

    AnnulusStageReport ar;
    ArcReport arcs = check_comparable_arcs(model);
    AnnulusMetrics met = annulus_metrics(ga);
    ar.thickness = ga.thickness;
    ar.grid_faces = ga.grid.faces.size();
    ar.mesh_faces = am.mesh.faces.size();
    ar.inner_marked = model.inner_marked.size();
    ar.outer_marked = model.outer_marked.size();
    ar.flux = model.flux;
    ar.delta = model.delta;
    ar.max_adjacent_ratio = arcs.max_adjacent_ratio;
    ar.max_arc_over_delta = arcs.max_arc_over_delta;
    ar.M = am.M;
    ar.inrad = met.inrad;
    ar.gap = met.gap;
    ar.size_ratio_interior = am.size_ratio_interior;
    ar.size_ratio_boundary = am.size_ratio_boundary;
    rep.annuli.push_back(ar);

    std::vector<int> id(am.mesh.vertices.size());
    for (size_t v = 0; v < id.size(); ++v) {
      int g = am.grid_vertex[v];
      if (g >= 0) {
        id[v] = global[g];
      } else {
        id[v] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(am.mesh.vertices[v]);
      }
    }
    for (size_t f = 0; f < am.mesh.faces.size(); ++f) {
      const Face& t = am.mesh.faces[f];
      out.faces.push_back({id[t[0]], id[t[1]], id[t[2]]});
      out.tags.push_back(tag_annulus);
      next.stage_of.push_back(n);
      next.inside.push_back(0);
      if (am.mesh.has_mu(f)) rep.sup_mu = std::max(rep.sup_mu, std::abs(am.mesh.mu[f]));
      ++rep.annulus_faces;
    }
  }
  for (size_t f = 0; f < nf; ++f) {
    if (fcls[f] != fc_w) continue;
    const Face& t = T.faces[f];
    if (!on_loop[t[0]] && !on_loop[t[1]] && !on_loop[t[2]]) continue;
    auto mu = affine_dilatation(T.vertices[t[0]], T.vertices[t[1]], T.vertices[t[2]]).mu;
    rep.w_sup_mu = std::max(rep.w_sup_mu, std::abs(mu));
  }

  // drop the band interiors, keep ids in first-use order of the old numbering
  std::vector<int> remap(out.vertices.size(), -1);
  for (const auto& f : out.faces)
    for (int v : f) remap[v] = 0;
  std::vector<Vec2> verts;
  for (size_t v = 0; v < remap.size(); ++v)
    if (remap[v] == 0) {
      remap[v] = static_cast<int>(verts.size());
      verts.push_back(out.vertices[v]);
    }
  for (auto& f : out.faces)
    for (int& v : f) v = remap[v];
  out.vertices = std::move(verts);
  rep.faces = out.faces.size();
  next.reports.push_back(rep);
  return next;
}

EtaReport verify_eta_bound(const Mesh& mesh, const CompactSet& k, const SizingFn& eta) {
  EtaReport r;
  SetGeometry kg(k);
  std::vector<double> allow(mesh.vertices.size());
  for (size_t v = 0; v < allow.size(); ++v) allow[v] = eta(kg.distance(mesh.vertices[v]));
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const double d = mesh.diameter(f);
    double worst = 0;
    for (int v : mesh.faces[f]) worst = std::max(worst, allow[v] > 0 ? d / allow[v] : kInf);
    ++r.faces_checked;
    if (worst > r.worst_ratio || r.worst_face < 0) {
      r.worst_ratio = worst;
      r.worst_face = static_cast<long>(f);
    }
    if (worst > 1) {
      r.pass = false;
      if (r.failures.size() < 32) r.failures.push_back(f);
    }
  }
  return r;
}

PipelineResult build_triangulation(const CompactSet& k, const SizingFn& eta, const PipelineConfig& cfg) {
  validate_compact_set(k);
  if (cfg.n_max < 0 || cfg.n_max > 6) fail(Status::validation, "n_max must lie in [0, 6]");
  if (cfg.N < 1) fail(Status::validation, "N must be at least 1");
  PipelineResult res;
  res.cost = estimate_cost(k, eta, cfg);
  if (!res.cost.within_budget) fail(Status::hypothesis, res.cost.reason);

  const int nm = cfg.n_max;
  std::vector<StageSchedule> sch(nm + 1);
  std::vector<ContourSet> gam(nm + 1);
  std::vector<ContourGeometry> cg;
  cg.emplace_back(ContourSet{});
  for (int n = 1; n <= nm; ++n) {
    sch[n] = epsilon_schedule(n, eta, cfg.N, cfg.band_shift);
    gam[n] = contours(k, n);
    if (gam[n].components.empty()) fail(Status::hypothesis, "stage " + std::to_string(n) + " has no contour");
    cg.emplace_back(gam[n]);
  }

  const double w = k.window_half.to_double();
  const double base = w / 4;
  int depth = 0;
  if (nm > 0) depth = log2_exact(base) - log2_exact(sch[nm].side) + 3;
  if (depth > 40) fail(Status::hypothesis, "band side " + format_double(sch[nm].side) + " is below the lattice depth limit");
  GradedLattice lat(base, depth);
  lat.cover_box({-w, -w}, {w, w});
  SetGeometry kg(k);
  std::vector<std::vector<Vec2>> corners(nm + 1);
  for (int n = 1; n <= nm; ++n) corners[n] = cg[n].offset_corners(cfg.N * sch[n].eps);
  const double r3 = 1 / std::sqrt(3.0);
  auto split = [&](const LatticeTri& t) {
    const double s = lat.side(t.level);
    const auto c3 = lat.corners(t);
    const Vec2 c = (c3[0] + c3[1] + c3[2]) * (1.0 / 3);
    const double R = s * r3;
    double dlast = 0;
    for (int n = 1; n <= nm; ++n) {
      const double side = sch[n].side;
      double d = cg[n].distance(c);
      if (n == nm) dlast = d;
      if (d - R > cfg.N * sch[n].eps + 3 * side) continue;
      if (s > side) return true;
      // two extra levels at the corners where the potential is singular
      if (s > side / 4)
        for (const Vec2& q : corners[n]) {
          double dc = norm(c - q) - R;
          if (dc <= 4 * side || (s > side / 2 && dc <= 8 * side)) return true;
        }
    }
    if (nm == 0) return false;
    if (dlast - R > cfg.N * sch[nm].eps && cg[nm].inside(c)) return false;
    const double dk = kg.distance(c) - R;
    return dk <= 0 || s > eta(dk);
  };
  lat.refine(split, static_cast<size_t>(2 * cfg.face_budget));
  LatticeMesh lm = lat.extract();

  StageState st;
  st.mesh = std::move(lm.mesh);
  st.mesh.tags.assign(st.mesh.faces.size(), tag_grid);
  st.stage_of.assign(st.mesh.faces.size(), 0);
  st.inside.assign(st.mesh.faces.size(), 0);
  for (int n = 1; n <= nm; ++n) {
    st = build_stage(st, k, eta, cfg, gam[n]);
    if (n > 1)
      st.reports.back().nested = nested_exact(gam[n], gam[n - 1], cfg.N * (sch[n].eps + sch[n - 1].eps));
  }

  Mesh& m = res.mesh;
  m.vertices = std::move(st.mesh.vertices);
  for (size_t f = 0; f < st.mesh.faces.size(); ++f) {
    if (nm > 0 && st.inside[f]) {
      Vec2 a = m.vertices[st.mesh.faces[f][0]], b = m.vertices[st.mesh.faces[f][1]], c = m.vertices[st.mesh.faces[f][2]];
      res.residual_area += 0.5 * orient(a, b, c);
      continue;
    }
    m.faces.push_back(st.mesh.faces[f]);
    m.tags.push_back(st.mesh.tags[f]);
  }
  compact_vertices(m);
  res.stages = std::move(st.reports);

  res.cert = mesh_dilatation_certificate(m, {});
  m.mu = res.cert.mu;
  res.eta = verify_eta_bound(m, k, eta);
  res.gluing = gluing_check(m, {}, {});
  res.conformity = check_conformity(m);
  res.max_degree = degree_stats(m).max_degree;
  res.min_angle_deg = m.faces.empty() ? 0 : min_angle(m);
  if (nm > 0) res.residual_bound = residual_bound_area(kg, 3 * std::pow(16.0, -nm));
  return res;
}

std::string certificate_to_json(const PipelineResult& r, const CompactSet& k, const SizingFn& eta,
                                const PipelineConfig& cfg, const std::string& mesh_json) {
  using nlohmann::json;
  json j;
  j["format"] = "qcmesh-certificate";
  j["mesh_hash"] = fnv1a_hex(mesh_json);
  j["k_hash"] = fnv1a_hex(compact_set_to_json(k));
  j["eta"] = eta.str();
  j["config"] = {{"N", cfg.N},
                 {"n_max", cfg.n_max},
                 {"band_shift", cfg.band_shift},
                 {"faithful", cfg.N >= 20 && cfg.band_shift == 2},
                 {"delta_max", cfg.annulus.delta_max},
                 {"arc_over_delta_max", cfg.annulus.arc_over_delta_max},
                 {"face_budget", cfg.face_budget}};
  j["stages"] = json::array();
  for (const auto& s : r.stages) {
    json a = json::array();
    int thick = 0;
    for (const auto& x : s.annuli) {
      thick = thick == 0 ? x.thickness : std::min(thick, x.thickness);
      a.push_back({{"thickness", x.thickness},
                   {"grid_faces", x.grid_faces},
                   {"mesh_faces", x.mesh_faces},
                   {"inner_marked", x.inner_marked},
                   {"outer_marked", x.outer_marked},
                   {"flux", x.flux},
                   {"delta", x.delta},
                   {"max_adjacent_ratio", x.max_adjacent_ratio},
                   {"max_arc_over_delta", x.max_arc_over_delta},
                   {"M", x.M},
                   {"inrad", x.inrad},
                   {"gap", x.gap},
                   {"size_ratio_interior", x.size_ratio_interior},
                   {"size_ratio_boundary", x.size_ratio_boundary}});
    }
    j["stages"].push_back({{"n", s.n},
                           {"eps", s.schedule.eps},
                           {"delta", s.schedule.delta},
                           {"band_scale", s.schedule.band_scale},
                           {"band_side", s.schedule.side},
                           {"band_half_width", cfg.N * s.schedule.eps},
                           {"band_area", s.band_area},
                           {"sup_mu", s.sup_mu},
                           {"w_sup_mu", s.w_sup_mu},
                           {"thickness", thick},
                           {"contour_components", s.contour_components},
                           {"V", s.V},
                           {"W", s.W},
                           {"annulus_faces", s.annulus_faces},
                           {"faces", s.faces},
                           {"repaired_faces", s.repaired_faces},
                           {"nested", s.nested},
                           {"annuli", a}});
  }
  j["global"] = {{"faces", r.mesh.faces.size()},
                 {"vertices", r.mesh.vertices.size()},
                 {"max_degree", r.max_degree},
                 {"min_angle_deg", r.min_angle_deg},
                 {"sup_mu", r.cert.sup_mu},
                 {"K", r.cert.K},
                 {"mu_support_faces", r.cert.support_faces},
                 {"eta_bound", {{"pass", r.eta.pass},
                                {"worst_ratio", r.eta.worst_ratio},
                                {"worst_face", r.eta.worst_face},
                                {"faces_checked", r.eta.faces_checked}}},
                 {"gluing", {{"pass", r.gluing.ok},
                             {"interior_edges", r.gluing.interior_edges},
                             {"max_rel_discrepancy", r.gluing.max_rel_discrepancy}}},
                 {"conforming", r.conformity.ok},
                 {"residual_area", r.residual_area},
                 {"residual_bound", r.residual_bound},
                 {"estimated_faces", r.cost.total_faces}};
  return j.dump(1) + "\n";
}

}  // namespace qcmesh
