#include "qcmesh/mesh.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <unordered_map>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "qcmesh/error.hpp"

namespace qcmesh {

std::array<Vec2, 3> Mesh::corners(size_t f) const {
  const Face& t = faces[f];
  std::array<Vec2, 3> p{vertices[t[0]], vertices[t[1]], vertices[t[2]]};
  if (period > 0) {
    for (int i = 1; i < 3; ++i) {
      double d = p[i].x - p[0].x;
      p[i].x -= period * std::round(d / period);
    }
  }
  return p;
}

double Mesh::signed_area(size_t f) const {
  auto p = corners(f);
  return 0.5 * orient(p[0], p[1], p[2]);
}

double Mesh::diameter(size_t f) const {
  auto p = corners(f);
  return std::max({norm(p[1] - p[0]), norm(p[2] - p[1]), norm(p[0] - p[2])});
}

namespace {

struct EdgeRec {
  int a, b, he;
};

std::vector<EdgeRec> sorted_edges(const Mesh& mesh) {
  std::vector<EdgeRec> e;
  e.reserve(mesh.faces.size() * 3);
  for (size_t f = 0; f < mesh.faces.size(); ++f)
    for (int i = 0; i < 3; ++i) {
      int a = mesh.faces[f][i], b = mesh.faces[f][(i + 1) % 3];
      e.push_back({std::min(a, b), std::max(a, b), static_cast<int>(3 * f + i)});
    }
  std::sort(e.begin(), e.end(), [](const EdgeRec& l, const EdgeRec& r) {
    return l.a != r.a ? l.a < r.a : (l.b != r.b ? l.b < r.b : l.he < r.he);
  });
  return e;
}

int origin_of(const Mesh& m, int he) { return m.faces[he / 3][he % 3]; }

uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) | static_cast<uint32_t>(b);
}

}  // namespace

HalfEdges build_half_edges(const Mesh& mesh) {
  HalfEdges h;
  h.twin.assign(mesh.faces.size() * 3, -1);
  auto e = sorted_edges(mesh);
  for (size_t i = 0; i < e.size();) {
    size_t j = i;
    while (j < e.size() && e[j].a == e[i].a && e[j].b == e[i].b) ++j;
    if (j - i > 2)
      fail(Status::validation, "edge (" + std::to_string(e[i].a) + "," + std::to_string(e[i].b) +
                                   ") shared by more than two faces");
    if (j - i == 2) {
      int h0 = e[i].he, h1 = e[i + 1].he;
      if (origin_of(mesh, h0) == origin_of(mesh, h1))
        fail(Status::validation, "faces " + std::to_string(h0 / 3) + " and " + std::to_string(h1 / 3) +
                                     " are inconsistently oriented");
      h.twin[h0] = h1;
      h.twin[h1] = h0;
    }
    i = j;
  }
  return h;
}

std::vector<int> topological_boundary(const Mesh& mesh, const HalfEdges& he) {
  std::vector<char> on(mesh.vertices.size(), 0);
  for (size_t i = 0; i < he.twin.size(); ++i)
    if (he.twin[i] < 0) {
      on[origin_of(mesh, static_cast<int>(i))] = 1;
      on[origin_of(mesh, HalfEdges::next(static_cast<int>(i)))] = 1;
    }
  std::vector<int> out;
  for (size_t v = 0; v < on.size(); ++v)
    if (on[v]) out.push_back(static_cast<int>(v));
  return out;
}

ConformityReport check_conformity(const Mesh& mesh) {
  ConformityReport r;
  auto note = [&](const std::string& s) {
    r.ok = false;
    if (r.messages.size() < 20) r.messages.push_back(s);
  };
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& t = mesh.faces[f];
    for (int v : t)
      if (v < 0 || static_cast<size_t>(v) >= mesh.vertices.size()) {
        note("face " + std::to_string(f) + " references missing vertex");
        return r;
      }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      ++r.degenerate_faces;
      note("face " + std::to_string(f) + " repeats a vertex");
      continue;
    }
    double a = mesh.signed_area(f);
    if (a == 0) {
      ++r.degenerate_faces;
      note("face " + std::to_string(f) + " has zero area");
    } else if (a < 0) {
      ++r.negative_faces;
      note("face " + std::to_string(f) + " is negatively oriented");
    }
  }
  if (!r.ok) return r;

  auto e = sorted_edges(mesh);
  std::vector<int> twin(mesh.faces.size() * 3, -1);
  size_t num_edges = 0;
  for (size_t i = 0; i < e.size();) {
    size_t j = i;
    while (j < e.size() && e[j].a == e[i].a && e[j].b == e[i].b) ++j;
    ++num_edges;
    if (j - i > 2) {
      ++r.nonmanifold_edges;
      note("edge (" + std::to_string(e[i].a) + "," + std::to_string(e[i].b) + ") has " +
           std::to_string(j - i) + " faces");
    } else if (j - i == 2) {
      if (origin_of(mesh, e[i].he) == origin_of(mesh, e[i + 1].he)) {
        ++r.orientation_conflicts;
        note("edge (" + std::to_string(e[i].a) + "," + std::to_string(e[i].b) + ") has conflicting orientation");
      } else {
        twin[e[i].he] = e[i + 1].he;
        twin[e[i + 1].he] = e[i].he;
      }
    }
    i = j;
  }
  if (!r.ok) return r;

  // vertex links: each vertex must see a single fan of faces
  const size_t nv = mesh.vertices.size();
  std::vector<int> out_count(nv, 0), any_he(nv, -1);
  for (size_t h = 0; h < twin.size(); ++h) {
    int v = origin_of(mesh, static_cast<int>(h));
    ++out_count[v];
    if (any_he[v] < 0 || twin[h] < 0) any_he[v] = static_cast<int>(h);
  }
  for (size_t v = 0; v < nv; ++v) {
    if (any_he[v] < 0) continue;
    int start = any_he[v], h = start, seen = 0;
    while (true) {
      ++seen;
      int p = twin[HalfEdges::prev(h)];
      if (p < 0 || p == start || seen > out_count[v]) break;
      h = p;
    }
    if (seen != out_count[v]) {
      ++r.pinched_vertices;
      note("vertex " + std::to_string(v) + " has a pinched link");
    }
  }

  // components and Euler characteristic
  std::vector<int> comp(mesh.faces.size(), -1);
  std::vector<size_t> cf, ce2, cb;
  for (size_t f0 = 0; f0 < mesh.faces.size(); ++f0) {
    if (comp[f0] >= 0) continue;
    int c = static_cast<int>(cf.size());
    cf.push_back(0);
    std::vector<int> stack{static_cast<int>(f0)};
    comp[f0] = c;
    while (!stack.empty()) {
      int f = stack.back();
      stack.pop_back();
      ++cf[c];
      for (int i = 0; i < 3; ++i) {
        int t = twin[3 * f + i];
        if (t >= 0 && comp[t / 3] < 0) {
          comp[t / 3] = c;
          stack.push_back(t / 3);
        }
      }
    }
  }
  r.components = cf.size();
  {
    std::vector<long> verts(cf.size(), 0), edges(cf.size(), 0), loops(cf.size(), 0);
    std::vector<int> vcomp(nv, -1);
    for (size_t f = 0; f < mesh.faces.size(); ++f)
      for (int v : mesh.faces[f]) vcomp[v] = comp[f];
    for (size_t v = 0; v < nv; ++v)
      if (vcomp[v] >= 0) ++verts[vcomp[v]];
    for (size_t h = 0; h < twin.size(); ++h) {
      int c = comp[h / 3];
      if (twin[h] < 0)
        edges[c] += 2;
      else
        edges[c] += 1;
    }
    // boundary loops: follow twinless half-edges
    std::vector<int> bnext(nv, -1);
    std::vector<char> used(twin.size(), 0);
    std::unordered_map<int, int> start_he;
    for (size_t h = 0; h < twin.size(); ++h)
      if (twin[h] < 0) start_he[origin_of(mesh, static_cast<int>(h))] = static_cast<int>(h);
    for (size_t h = 0; h < twin.size(); ++h) {
      if (twin[h] >= 0 || used[h]) continue;
      ++loops[comp[h / 3]];
      int cur = static_cast<int>(h);
      while (!used[cur]) {
        used[cur] = 1;
        int to = origin_of(mesh, HalfEdges::next(cur));
        auto it = start_he.find(to);
        if (it == start_he.end()) break;
        cur = it->second;
      }
    }
    for (size_t c = 0; c < cf.size(); ++c) {
      long chi = verts[c] - edges[c] / 2 + static_cast<long>(cf[c]);
      // planar components: chi = 2 - loops; cylinder strips: chi = 0 with two loops
      long expect = mesh.period > 0 ? 0 : 2 - loops[c];
      if (chi != expect) {
        r.euler_ok = false;
        note("component " + std::to_string(c) + " violates Euler relation (chi=" + std::to_string(chi) + ")");
      }
    }
  }

  // hanging vertices: a vertex in the relative interior of a twinless edge
  if (mesh.period == 0) {
    namespace bg = boost::geometry;
    namespace bgi = boost::geometry::index;
    using P = bg::model::point<double, 2, bg::cs::cartesian>;
    using B = bg::model::box<P>;
    std::vector<std::pair<B, int>> boxes;
    std::vector<char> cand(nv, 0);
    for (size_t h = 0; h < twin.size(); ++h) {
      if (twin[h] >= 0) continue;
      int a = origin_of(mesh, static_cast<int>(h)), b = origin_of(mesh, HalfEdges::next(static_cast<int>(h)));
      cand[a] = cand[b] = 1;
      Vec2 pa = mesh.vertices[a], pb = mesh.vertices[b];
      boxes.push_back({B(P(std::min(pa.x, pb.x), std::min(pa.y, pb.y)), P(std::max(pa.x, pb.x), std::max(pa.y, pb.y))),
                       static_cast<int>(h)});
    }
    bgi::rtree<std::pair<B, int>, bgi::quadratic<16>> tree(boxes.begin(), boxes.end());
    std::vector<std::pair<B, int>> hits;
    for (size_t v = 0; v < nv; ++v) {
      if (!cand[v]) continue;
      Vec2 p = mesh.vertices[v];
      hits.clear();
      tree.query(bgi::intersects(P(p.x, p.y)), std::back_inserter(hits));
      for (auto& [box, h] : hits) {
        int a = origin_of(mesh, h), b = origin_of(mesh, HalfEdges::next(h));
        if (a == static_cast<int>(v) || b == static_cast<int>(v)) continue;
        Vec2 pa = mesh.vertices[a], pb = mesh.vertices[b];
        double len = norm(pb - pa);
        if (std::fabs(orient(pa, pb, p)) <= 1e-12 * len * len && dot(p - pa, pb - pa) > 0 && dot(p - pb, pa - pb) > 0) {
          ++r.hanging_vertices;
          note("vertex " + std::to_string(v) + " hangs on boundary edge (" + std::to_string(a) + "," +
               std::to_string(b) + ")");
        }
      }
    }
  }
  return r;
}

namespace {

void require_nondegenerate(const Mesh& mesh) {
  for (size_t f = 0; f < mesh.faces.size(); ++f)
    if (!(mesh.signed_area(f) > 0))
      fail(Status::validation, "face " + std::to_string(f) + " is degenerate or negatively oriented");
}

DyadicPoint exact_mid(const DyadicPoint& a, const DyadicPoint& b) {
  Dyadic half(1, 1);
  return {(a.x + b.x) * half, (a.y + b.y) * half};
}

Vec2 midpoint(const Mesh& m, int a, int b) {
  Vec2 pa = m.vertices[a], pb = m.vertices[b];
  if (m.period > 0) pb.x -= m.period * std::round((pb.x - pa.x) / m.period);
  Vec2 c = (pa + pb) * 0.5;
  if (m.period > 0) c.x -= m.period * std::floor(c.x / m.period);
  return c;
}

}  // namespace

Mesh barycentric_subdivide(const Mesh& mesh) {
  require_nondegenerate(mesh);
  build_half_edges(mesh);
  Mesh out;
  out.period = mesh.period;
  out.vertices = mesh.vertices;
  std::unordered_map<uint64_t, int> mids;
  auto mid = [&](int a, int b) {
    auto [it, fresh] = mids.try_emplace(edge_key(a, b), static_cast<int>(out.vertices.size()));
    if (fresh) out.vertices.push_back(midpoint(mesh, a, b));
    return it->second;
  };
  out.faces.reserve(mesh.faces.size() * 6);
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    auto p = mesh.corners(f);
    Vec2 c = (p[0] + p[1] + p[2]) * (1.0 / 3.0);
    if (mesh.period > 0) c.x -= mesh.period * std::floor(c.x / mesh.period);
    int ci = static_cast<int>(out.vertices.size());
    out.vertices.push_back(c);
    const Face& t = mesh.faces[f];
    for (int i = 0; i < 3; ++i) {
      int a = t[i], b = t[(i + 1) % 3];
      int m = mid(a, b);
      out.faces.push_back({a, m, ci});
      out.faces.push_back({m, b, ci});
    }
  }
  return out;
}

Mesh subdivide4(const Mesh& mesh) {
  require_nondegenerate(mesh);
  build_half_edges(mesh);
  Mesh out;
  out.period = mesh.period;
  out.vertices = mesh.vertices;
  bool exact = mesh.has_exact() && mesh.period == 0;
  if (exact) out.exact = mesh.exact;
  std::unordered_map<uint64_t, int> mids;
  auto mid = [&](int a, int b) {
    auto [it, fresh] = mids.try_emplace(edge_key(a, b), static_cast<int>(out.vertices.size()));
    if (fresh) {
      out.vertices.push_back(midpoint(mesh, a, b));
      if (exact) out.exact.push_back(exact_mid(mesh.exact[a], mesh.exact[b]));
    }
    return it->second;
  };
  out.faces.reserve(mesh.faces.size() * 4);
  for (const Face& t : mesh.faces) {
    int m01 = mid(t[0], t[1]), m12 = mid(t[1], t[2]), m20 = mid(t[2], t[0]);
    out.faces.push_back({t[0], m01, m20});
    out.faces.push_back({m01, t[1], m12});
    out.faces.push_back({m20, m12, t[2]});
    out.faces.push_back({m01, m12, m20});
  }
  return out;
}

std::vector<int> vertex_degrees(const Mesh& mesh) {
  std::vector<int> deg(mesh.vertices.size(), 0);
  auto e = sorted_edges(mesh);
  for (size_t i = 0; i < e.size();) {
    size_t j = i;
    while (j < e.size() && e[j].a == e[i].a && e[j].b == e[i].b) ++j;
    ++deg[e[i].a];
    ++deg[e[i].b];
    i = j;
  }
  return deg;
}

DegreeStats degree_stats(const Mesh& mesh) {
  DegreeStats s;
  auto deg = vertex_degrees(mesh);
  std::vector<char> used(mesh.vertices.size(), 0);
  for (const Face& t : mesh.faces)
    for (int v : t) used[v] = 1;
  for (size_t v = 0; v < deg.size(); ++v) {
    if (!used[v]) continue;
    ++s.histogram[deg[v]];
    s.max_degree = std::max(s.max_degree, deg[v]);
  }
  return s;
}

namespace {

double corner_angle(Vec2 a, Vec2 b, Vec2 c) {
  Vec2 u = b - a, v = c - a;
  return std::atan2(std::fabs(cross(u, v)), dot(u, v));
}

double min_angle_if(const Mesh& mesh, bool skip_walls) {
  double best = M_PI;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    if (skip_walls && f < mesh.tags.size() && mesh.tags[f] == tag_wall) continue;
    auto p = mesh.corners(f);
    for (int i = 0; i < 3; ++i) best = std::min(best, corner_angle(p[i], p[(i + 1) % 3], p[(i + 2) % 3]));
  }
  return best * 180.0 / M_PI;
}

}  // namespace

double min_angle(const Mesh& mesh) { return min_angle_if(mesh, false); }
double min_angle_excluding_walls(const Mesh& mesh) { return min_angle_if(mesh, true); }

ColoringResult three_color(const Mesh& mesh) {
  ColoringResult res;
  HalfEdges he = build_half_edges(mesh);
  const size_t nv = mesh.vertices.size();
  res.colors.assign(nv, -1);
  std::vector<char> done(mesh.faces.size(), 0);
  bool conflict = false;
  for (size_t f0 = 0; f0 < mesh.faces.size() && !conflict; ++f0) {
    if (done[f0]) continue;
    const Face& t0 = mesh.faces[f0];
    int preset = 0;
    for (int v : t0) preset += res.colors[v] >= 0;
    if (preset == 0)
      for (int i = 0; i < 3; ++i) res.colors[t0[i]] = i;
    std::queue<int> q;
    q.push(static_cast<int>(f0));
    done[f0] = 1;
    while (!q.empty() && !conflict) {
      int f = q.front();
      q.pop();
      for (int i = 0; i < 3; ++i) {
        int t = he.twin[3 * f + i];
        if (t < 0) continue;
        int g = t / 3;
        const Face& tg = mesh.faces[g];
        int c = tg[(t % 3 + 2) % 3];
        int want = 3 - res.colors[tg[t % 3]] - res.colors[tg[(t % 3 + 1) % 3]];
        if (res.colors[c] < 0)
          res.colors[c] = want;
        else if (res.colors[c] != want)
          conflict = true;
        if (!done[g]) {
          done[g] = 1;
          q.push(g);
        }
      }
    }
  }
  if (!conflict) {
    res.ok = true;
    return res;
  }
  res.colors.clear();
  // interior vertex of odd degree gives an odd wheel
  std::vector<int> first_out(nv, -1), out_deg(nv, 0);
  std::vector<char> interior(nv, 1);
  for (size_t h = 0; h < he.twin.size(); ++h) {
    int v = origin_of(mesh, static_cast<int>(h));
    ++out_deg[v];
    first_out[v] = static_cast<int>(h);
    if (he.twin[h] < 0) {
      interior[v] = 0;
      interior[origin_of(mesh, HalfEdges::next(static_cast<int>(h)))] = 0;
    }
  }
  for (size_t v = 0; v < nv; ++v) {
    if (!interior[v] || first_out[v] < 0 || out_deg[v] % 2 == 0) continue;
    res.certificate.push_back(static_cast<int>(v));
    int h = first_out[v];
    do {
      res.certificate.push_back(origin_of(mesh, HalfEdges::next(h)));
      h = HalfEdges::next(he.twin[h]);
    } while (h != first_out[v]);
    res.message = "odd wheel at vertex " + std::to_string(v) + " of degree " + std::to_string(out_deg[v]);
    return res;
  }
  res.message = "coloring monodromy around a hole; no odd interior wheel";
  return res;
}

Mesh weld(const Mesh& mesh, double tol) {
  std::vector<int> order(mesh.vertices.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const Vec2 &p = mesh.vertices[a], &q = mesh.vertices[b];
    return p.x != q.x ? p.x < q.x : (p.y != q.y ? p.y < q.y : a < b);
  });
  std::vector<int> rep(mesh.vertices.size(), -1);
  for (size_t i = 0; i < order.size(); ++i) {
    int v = order[i];
    if (rep[v] >= 0) continue;
    rep[v] = v;
    for (size_t j = i + 1; j < order.size(); ++j) {
      int w = order[j];
      if (mesh.vertices[w].x - mesh.vertices[v].x > tol) break;
      if (rep[w] < 0 && norm(mesh.vertices[w] - mesh.vertices[v]) <= tol) rep[w] = v;
    }
  }
  Mesh out;
  out.period = mesh.period;
  std::vector<int> remap(mesh.vertices.size(), -1);
  for (size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (rep[v] != static_cast<int>(v)) continue;
    remap[v] = static_cast<int>(out.vertices.size());
    out.vertices.push_back(mesh.vertices[v]);
    if (mesh.has_exact()) out.exact.push_back(mesh.exact[v]);
  }
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    Face t = mesh.faces[f];
    for (int& v : t) v = remap[rep[v]];
    out.faces.push_back(t);
    if (f < mesh.mu.size()) out.mu.push_back(mesh.mu[f]);
    if (f < mesh.tags.size()) out.tags.push_back(mesh.tags[f]);
  }
  return out;
}

Mesh equilateral_patch(int nx, int ny, double side, Vec2 origin) {
  Mesh m;
  const double h = side * std::sqrt(3.0) / 2.0;
  auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.vertices.push_back({origin.x + side * (i + 0.5 * j), origin.y + h * j});
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
      m.faces.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return m;
}

}  // namespace qcmesh
