#include "qcmesh/annulus.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <unordered_map>

#include "qcmesh/error.hpp"
#include "qcmesh/mesh_io.hpp"
#include "qcmesh/sizing.hpp"
#include "qcmesh/strip.hpp"

namespace qcmesh {

namespace {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;
using BPoint = bg::model::point<double, 2, bg::cs::cartesian>;
using BBox = bg::model::box<BPoint>;
using BSeg = bg::model::segment<BPoint>;

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

struct Loops {
  std::vector<int> inner, outer;
};

double loop_area(const Mesh& m, const std::vector<int>& loop) {
  double a = 0;
  for (size_t k = 0; k < loop.size(); ++k) a += cross(m.vertices[loop[k]], m.vertices[loop[(k + 1) % loop.size()]]);
  return 0.5 * a;
}

Loops trace_loops(const Mesh& m, const HalfEdges& he) {
  std::unordered_map<int, int> out_he;
  for (size_t h = 0; h < he.twin.size(); ++h)
    if (he.twin[h] < 0) {
      int a = m.faces[h / 3][h % 3];
      if (!out_he.emplace(a, static_cast<int>(h)).second)
        fail(Status::validation, "annulus boundary is pinched at vertex " + std::to_string(a));
    }
  std::vector<char> used(he.twin.size(), 0);
  std::vector<std::vector<int>> loops;
  for (size_t h0 = 0; h0 < he.twin.size(); ++h0) {
    if (he.twin[h0] >= 0 || used[h0]) continue;
    std::vector<int> loop;
    int h = static_cast<int>(h0);
    do {
      used[h] = 1;
      loop.push_back(m.faces[h / 3][h % 3]);
      int b = m.faces[h / 3][(h % 3 + 1) % 3];
      h = out_he.at(b);
    } while (h != static_cast<int>(h0));
    loops.push_back(std::move(loop));
  }
  if (loops.size() != 2)
    fail(Status::validation, "region is not doubly connected: " + std::to_string(loops.size()) + " boundary loops");
  double a0 = loop_area(m, loops[0]), a1 = loop_area(m, loops[1]);
  Loops out;
  if (a0 > 0 && a1 < 0) {
    out.outer = loops[0], out.inner = loops[1];
  } else if (a1 > 0 && a0 < 0) {
    out.outer = loops[1], out.inner = loops[0];
  } else {
    fail(Status::validation, "boundary loops do not bound an annulus");
  }
  std::reverse(out.inner.begin(), out.inner.end());
  return out;
}

int face_thickness(const Mesh& m, const HalfEdges& he, const Loops& L) {
  std::vector<char> on_inner(m.vertices.size(), 0), on_outer(m.vertices.size(), 0);
  for (int v : L.inner) on_inner[v] = 1;
  for (int v : L.outer) on_outer[v] = 1;
  std::vector<int> dist(m.faces.size(), -1);
  std::deque<int> q;
  for (size_t f = 0; f < m.faces.size(); ++f)
    for (int v : m.faces[f])
      if (on_inner[v]) {
        dist[f] = 1;
        q.push_back(static_cast<int>(f));
        break;
      }
  while (!q.empty()) {
    int f = q.front();
    q.pop_front();
    for (int v : m.faces[f])
      if (on_outer[v]) return dist[f];
    for (int k = 0; k < 3; ++k) {
      int t = he.twin[3 * f + k];
      if (t < 0) continue;
      int g = t / 3;
      if (dist[g] < 0) {
        dist[g] = dist[f] + 1;
        q.push_back(g);
      }
    }
  }
  fail(Status::validation, "annulus loops are not joined by faces");
}

double longest_edge(const Mesh& m) {
  double e = 0;
  for (const auto& f : m.faces)
    for (int k = 0; k < 3; ++k) e = std::max(e, norm(m.vertices[f[(k + 1) % 3]] - m.vertices[f[k]]));
  return e;
}

// gradients of the three hat functions on a positively oriented face
std::array<Vec2, 3> hat_gradients(const std::array<Vec2, 3>& p, double& area) {
  double twice = orient(p[0], p[1], p[2]);
  area = 0.5 * twice;
  std::array<Vec2, 3> g;
  for (int i = 0; i < 3; ++i) {
    Vec2 e = p[(i + 2) % 3] - p[(i + 1) % 3];
    g[i] = Vec2{-e.y, e.x} * (1 / twice);
  }
  return g;
}

bool inside_polygon(const Mesh& m, const std::vector<int>& loop, Vec2 p) {
  bool in = false;
  for (size_t k = 0, n = loop.size(); k < n; ++k) {
    Vec2 a = m.vertices[loop[k]], b = m.vertices[loop[(k + 1) % n]];
    if ((a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y)) in = !in;
  }
  return in;
}

Vec2 hole_point(const Mesh& m, const std::vector<int>& inner) {
  for (double frac : {0.25, 0.05, 1e-3})
    for (size_t k = 0; k < inner.size(); ++k) {
      Vec2 a = m.vertices[inner[k]], b = m.vertices[inner[(k + 1) % inner.size()]];
      Vec2 e = b - a, c = (a + b) * 0.5 + Vec2{-e.y, e.x} * frac;
      if (inside_polygon(m, inner, c)) return c;
    }
  fail(Status::validation, "could not place a point inside the hole");
}

double quantize(double x) { return std::ldexp(std::round(std::ldexp(x, 40)), -40); }

double wrap_angle(double t) {
  t = std::fmod(t, 2 * M_PI);
  return t < 0 ? t + 2 * M_PI : t;
}

std::vector<double> cyclic_lengths(const std::vector<double>& ang) {
  std::vector<double> out(ang.size());
  for (size_t k = 0; k < ang.size(); ++k) {
    double d = wrap_angle(ang[(k + 1) % ang.size()] - ang[k]);
    out[k] = d;
  }
  return out;
}

std::vector<int> marked_in(const std::vector<int>& loop, const std::vector<uint8_t>& marked) {
  std::vector<int> out;
  for (int v : loop)
    if (marked[v]) out.push_back(v);
  return out;
}

// arcs between consecutive marked vertices along a loop, as vertex lists
std::vector<std::vector<int>> split_arcs(const std::vector<int>& loop, const std::vector<uint8_t>& marked) {
  size_t n = loop.size(), start = 0;
  while (!marked[loop[start]]) ++start;
  std::vector<std::vector<int>> arcs;
  std::vector<int> cur{loop[start]};
  for (size_t k = 1; k <= n; ++k) {
    int v = loop[(start + k) % n];
    cur.push_back(v);
    if (marked[v]) {
      arcs.push_back(cur);
      cur = {v};
    }
  }
  return arcs;
}

double polyline_length(const Mesh& m, const std::vector<int>& arc) {
  double s = 0;
  for (size_t k = 0; k + 1 < arc.size(); ++k) s += norm(m.vertices[arc[k + 1]] - m.vertices[arc[k]]);
  return s;
}

double polyline_diameter(const Mesh& m, const std::vector<int>& arc) {
  double d = 0;
  for (size_t i = 0; i < arc.size(); ++i)
    for (size_t j = i + 1; j < arc.size(); ++j) d = std::max(d, norm(m.vertices[arc[j]] - m.vertices[arc[i]]));
  return d;
}

Eigen::VectorXd solve_spd(const SpMat& A, const Eigen::VectorXd& b, double tol, const char* what, double& residual) {
  Eigen::SimplicialLDLT<SpMat> ldlt(A);
  if (ldlt.info() != Eigen::Success) fail(Status::solver, std::string(what) + ": factorization failed");
  Eigen::VectorXd x = ldlt.solve(b);
  double bn = b.norm();
  residual = (A * x - b).norm() / (bn > 0 ? bn : 1);
  if (!(residual <= tol))
    fail(Status::solver, std::string(what) + ": relative residual " + format_double(residual) + " above tolerance");
  return x;
}

// Moves free vertices of folded faces to the centroid of the kernel of their star, the convex set
// where every incident face is positive. Returns the number of faces still folded.
size_t untangle(Mesh& m, const std::vector<int>& fixed_id, int passes) {
  std::vector<std::vector<int>> star(m.vertices.size());
  for (size_t f = 0; f < m.faces.size(); ++f)
    for (int v : m.faces[f]) star[v].push_back(static_cast<int>(f));
  auto folded = [&] {
    std::vector<int> out;
    for (size_t f = 0; f < m.faces.size(); ++f)
      if (!(m.signed_area(f) > 0)) out.push_back(static_cast<int>(f));
    return out;
  };
  std::vector<int> bad = folded();
  for (int pass = 0; pass < passes && !bad.empty(); ++pass) {
    std::vector<int> verts;
    for (int f : bad)
      for (int v : m.faces[f])
        if (fixed_id[v] < 0) verts.push_back(v);
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    for (int v : verts) {
      double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
      for (int f : star[v])
        for (int u : m.faces[f]) {
          Vec2 p = m.vertices[u];
          x0 = std::min(x0, p.x), y0 = std::min(y0, p.y), x1 = std::max(x1, p.x), y1 = std::max(y1, p.y);
        }
      std::vector<Vec2> poly{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
      for (int f : star[v]) {
        const Face& t = m.faces[f];
        int k = t[0] == v ? 0 : (t[1] == v ? 1 : 2);
        Vec2 a = m.vertices[t[(k + 1) % 3]], b = m.vertices[t[(k + 2) % 3]];
        // keep the open side left of a -> b, pulled in by a relative margin
        double margin = 1e-9 * norm(b - a) * norm(b - a);
        std::vector<Vec2> next;
        for (size_t i = 0; i < poly.size(); ++i) {
          Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
          double sp = orient(a, b, p) - margin, sq = orient(a, b, q) - margin;
          if (sp >= 0) next.push_back(p);
          if ((sp >= 0) != (sq >= 0)) next.push_back(p + (q - p) * (sp / (sp - sq)));
        }
        poly.swap(next);
        if (poly.size() < 3) break;
      }
      if (poly.size() < 3) continue;
      double area = 0;
      Vec2 c{0, 0};
      for (size_t i = 0; i < poly.size(); ++i) {
        Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
        double w = cross(p, q);
        area += w;
        c = c + (p + q) * w;
      }
      if (!(area > 0)) continue;
      m.vertices[v] = c * (1 / (3 * area));
    }
    bad = folded();
  }
  return bad.size();
}

// A fan from a loop vertex b reaches a row of strip vertices at one tiny height. When one of its
// triangles is folded, the inner row vertices are moved onto the segment joining the two ends of
// the row, spaced as in the strip. Kept only if the whole fan comes out positive.
size_t straighten_fans(Mesh& m, const Mesh& strip, const std::vector<int>& fixed_id, double period) {
  auto wrap = [&](double dx) { return dx - period * std::round(dx / period); };
  std::vector<std::vector<int>> star(m.vertices.size());
  for (size_t f = 0; f < m.faces.size(); ++f)
    for (int v : m.faces[f])
      if (fixed_id[v] >= 0) star[v].push_back(static_cast<int>(f));
  std::map<std::pair<int, int>, bool> done;
  size_t moved = 0;
  for (size_t f = 0; f < m.faces.size(); ++f) {
    if (m.signed_area(f) > 0) continue;
    const Face& t = m.faces[f];
    int k = -1, nfixed = 0;
    for (int c = 0; c < 3; ++c)
      if (fixed_id[t[c]] >= 0) ++nfixed, k = c;
    if (nfixed != 1) continue;
    int b = t[k], u = t[(k + 1) % 3], w = t[(k + 2) % 3];
    if (strip.vertices[u].y != strip.vertices[w].y) continue;
    const double xb = strip.vertices[b].x, y = strip.vertices[u].y;
    const int side = wrap(strip.vertices[u].x + strip.vertices[w].x - 2 * xb) > 0 ? 1 : -1;
    if (done.count({b, side})) continue;
    done[{b, side}] = true;

    std::vector<int> fanf;
    std::vector<std::pair<double, int>> row;
    for (int g : star[b]) {
      const Face& s = m.faces[g];
      int c = s[0] == b ? 0 : (s[1] == b ? 1 : 2);
      int p = s[(c + 1) % 3], q = s[(c + 2) % 3];
      if (fixed_id[p] >= 0 || fixed_id[q] >= 0 || strip.vertices[p].y != y || strip.vertices[q].y != y) continue;
      double dp = wrap(strip.vertices[p].x - xb), dq = wrap(strip.vertices[q].x - xb);
      if ((dp + dq) * side <= 0) continue;
      fanf.push_back(g);
      row.emplace_back(dp * side, p);
      row.emplace_back(dq * side, q);
    }
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    if (row.size() < 3) continue;
    std::vector<Vec2> saved;
    for (const auto& r : row) saved.push_back(m.vertices[r.second]);
    const Vec2 p0 = saved.front(), p1 = saved.back();
    const double d0 = row.front().first, span = row.back().first - d0;
    for (size_t i = 1; i + 1 < row.size(); ++i)
      m.vertices[row[i].second] = p0 + (p1 - p0) * ((row[i].first - d0) / span);
    bool ok = true;
    for (int g : fanf) ok = ok && m.signed_area(g) > 0;
    if (!ok)
      for (size_t i = 0; i < row.size(); ++i) m.vertices[row[i].second] = saved[i];
    else
      moved += row.size() - 2;
  }
  return moved;
}

}  // namespace

ConformalGridAnnulus make_grid_annulus(Mesh grid, const std::vector<int>& marked_ids) {
  if (grid.faces.empty()) fail(Status::validation, "annulus mesh has no faces");
  if (grid.period != 0) fail(Status::validation, "annulus mesh must be planar");
  std::vector<char> used(grid.vertices.size(), 0);
  for (size_t f = 0; f < grid.faces.size(); ++f) {
    for (int v : grid.faces[f]) {
      if (v < 0 || static_cast<size_t>(v) >= grid.vertices.size())
        fail(Status::validation, "face " + std::to_string(f) + " references a missing vertex");
      used[v] = 1;
    }
    if (!(grid.signed_area(f) > 0)) fail(Status::validation, "face " + std::to_string(f) + " is not positively oriented");
  }
  for (size_t v = 0; v < used.size(); ++v)
    if (!used[v]) fail(Status::validation, "vertex " + std::to_string(v) + " belongs to no face");
  HalfEdges he = build_half_edges(grid);
  Loops L = trace_loops(grid, he);

  // connected with Euler characteristic 0
  size_t boundary = 0;
  for (int t : he.twin) boundary += t < 0;
  const long V = static_cast<long>(grid.vertices.size()), F = static_cast<long>(grid.faces.size());
  const long E = (3 * F + static_cast<long>(boundary)) / 2;
  if (V - E + F != 0) fail(Status::validation, "region is not an annulus (Euler characteristic " + std::to_string(V - E + F) + ")");
  std::vector<char> seen(grid.faces.size(), 0);
  std::deque<int> q{0};
  seen[0] = 1;
  size_t reached = 1;
  while (!q.empty()) {
    int f = q.front();
    q.pop_front();
    for (int k = 0; k < 3; ++k) {
      int t = he.twin[3 * f + k];
      if (t >= 0 && !seen[t / 3]) seen[t / 3] = 1, ++reached, q.push_back(t / 3);
    }
  }
  if (reached != grid.faces.size()) fail(Status::validation, "annulus mesh is not connected");

  ConformalGridAnnulus a;
  a.marked.assign(grid.vertices.size(), 0);
  std::vector<char> on_loop(grid.vertices.size(), 0);
  for (int v : L.inner) on_loop[v] = 1;
  for (int v : L.outer) on_loop[v] = 1;
  if (marked_ids.empty()) {
    for (size_t v = 0; v < on_loop.size(); ++v) a.marked[v] = on_loop[v];
  } else {
    for (int v : marked_ids) {
      if (v < 0 || static_cast<size_t>(v) >= grid.vertices.size() || !on_loop[v])
        fail(Status::validation, "marked vertex " + std::to_string(v) + " is not on the boundary");
      a.marked[v] = 1;
    }
  }
  if (marked_in(L.inner, a.marked).size() < 4 || marked_in(L.outer, a.marked).size() < 4)
    fail(Status::validation, "each boundary loop needs at least 4 marked vertices");
  a.thickness = face_thickness(grid, he, L);
  a.inner = std::move(L.inner);
  a.outer = std::move(L.outer);
  a.grid = std::move(grid);
  return a;
}

ConformalGridAnnulus grid_annulus_from_json(const std::string& text) {
  Mesh m = mesh_from_json(text);
  std::vector<int> marked = m.boundary_marked;
  m.boundary_marked.clear();
  return make_grid_annulus(std::move(m), marked);
}

std::string grid_annulus_to_json(const ConformalGridAnnulus& a) {
  Mesh m = a.grid;
  m.boundary_marked.clear();
  for (size_t v = 0; v < a.marked.size(); ++v)
    if (a.marked[v]) m.boundary_marked.push_back(static_cast<int>(v));
  return mesh_to_json(m);
}

RoundAnnulusModel discrete_conformal_annulus(const ConformalGridAnnulus& a, const ConformalSolveOptions& opt) {
  RoundAnnulusModel r;
  r.solver = a.grid;
  if (opt.h < 0 || !std::isfinite(opt.h)) fail(Status::validation, "solver resolution must be non-negative");
  if (opt.h > 0)
    while (longest_edge(r.solver) > opt.h * (1 + 1e-12)) {
      if (++r.refinements > 12) fail(Status::validation, "solver resolution needs more than 12 refinements");
      r.solver = subdivide4(r.solver);
    }
  const Mesh& s = r.solver;
  r.h = longest_edge(s);
  HalfEdges he = build_half_edges(s);
  Loops L = trace_loops(s, he);
  int thick = face_thickness(s, he, L);
  if (thick < opt.min_thickness)
    fail(Status::validation, "solver grid is " + std::to_string(thick) + " faces thick; at least " +
                                 std::to_string(opt.min_thickness) + " are needed");

  const int n = static_cast<int>(s.vertices.size());
  const size_t nf = s.faces.size();
  std::vector<std::array<Vec2, 3>> grad(nf);
  std::vector<double> area(nf);
  for (size_t f = 0; f < nf; ++f) grad[f] = hat_gradients(s.corners(f), area[f]);

  // potential: 0 inside, 1 outside
  std::vector<double> fixed(n, std::nan(""));
  for (int v : L.inner) fixed[v] = 0;
  for (int v : L.outer) fixed[v] = 1;
  std::vector<int> idx(n, -1);
  int nu = 0;
  for (int v = 0; v < n; ++v)
    if (std::isnan(fixed[v])) idx[v] = nu++;
  if (nu == 0) fail(Status::validation, "annulus has no interior vertices");
  std::vector<Trip> trips;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(nu);
  for (size_t f = 0; f < nf; ++f)
    for (int i = 0; i < 3; ++i) {
      int vi = s.faces[f][i];
      if (idx[vi] < 0) continue;
      for (int j = 0; j < 3; ++j) {
        int vj = s.faces[f][j];
        double k = area[f] * dot(grad[f][i], grad[f][j]);
        if (idx[vj] >= 0)
          trips.emplace_back(idx[vi], idx[vj], k);
        else
          b[idx[vi]] -= k * fixed[vj];
      }
    }
  SpMat A(nu, nu);
  A.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd x = solve_spd(A, b, opt.tolerance, "potential", r.residual_u);
  r.u.resize(n);
  for (int v = 0; v < n; ++v) r.u[v] = idx[v] >= 0 ? x[idx[v]] : fixed[v];

  double flux = 0;
  std::vector<Vec2> gu(nf);
  for (size_t f = 0; f < nf; ++f) {
    Vec2 g{0, 0};
    for (int i = 0; i < 3; ++i) g = g + grad[f][i] * r.u[s.faces[f][i]];
    gu[f] = g;
    flux += area[f] * dot(g, g);
  }
  if (!(flux > 0) || !std::isfinite(flux)) fail(Status::solver, "potential has no energy");
  r.flux = flux;
  r.modulus = 1 / flux;
  r.delta = std::expm1(2 * M_PI / flux);

  // conjugate: least-squares fit of grad v to the rotated grad u, multivalued by the flux
  const Vec2 c0 = hole_point(s, L.inner);
  r.lift.assign(3 * nf, 0);
  for (size_t f = 0; f < nf; ++f) {
    std::array<double, 3> arg;
    for (int i = 0; i < 3; ++i) {
      Vec2 d = s.vertices[s.faces[f][i]] - c0;
      arg[i] = std::atan2(d.y, d.x);
    }
    if (*std::max_element(arg.begin(), arg.end()) - *std::min_element(arg.begin(), arg.end()) > M_PI)
      for (int i = 0; i < 3; ++i)
        if (arg[i] < 0) r.lift[3 * f + i] = 1;
  }
  const int pin = L.inner.front();
  std::vector<int> vid(n, -1);
  int nv = 0;
  for (int v = 0; v < n; ++v)
    if (v != pin) vid[v] = nv++;
  trips.clear();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv);
  for (size_t f = 0; f < nf; ++f) {
    Vec2 target{-gu[f].y, gu[f].x};
    for (int i = 0; i < 3; ++i) {
      int vi = s.faces[f][i];
      if (vid[vi] < 0) continue;
      rhs[vid[vi]] += area[f] * dot(grad[f][i], target);
      for (int j = 0; j < 3; ++j) {
        int vj = s.faces[f][j];
        double k = area[f] * dot(grad[f][i], grad[f][j]);
        rhs[vid[vi]] -= k * flux * r.lift[3 * f + j];
        if (vid[vj] >= 0) trips.emplace_back(vid[vi], vid[vj], k);
      }
    }
  }
  SpMat B(nv, nv);
  B.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd y = solve_spd(B, rhs, opt.tolerance, "conjugate", r.residual_v);
  r.v.assign(n, 0);
  for (int v = 0; v < n; ++v)
    if (vid[v] >= 0) r.v[v] = y[vid[v]];

  std::vector<uint8_t> marked(n, 0);
  std::copy(a.marked.begin(), a.marked.end(), marked.begin());
  auto angles = [&](const std::vector<int>& loop, std::vector<int>& ids, std::vector<double>& ang, const char* name) {
    ids = marked_in(loop, marked);
    ang.clear();
    for (int v : ids) ang.push_back(wrap_angle(2 * M_PI * r.v[v] / flux));
    double total = 0;
    for (double d : cyclic_lengths(ang)) {
      if (!(d > 0)) fail(Status::solver, std::string("conjugate is not monotone along the ") + name + " boundary");
      total += d;
    }
    if (std::abs(total - 2 * M_PI) > 1e-6)
      fail(Status::solver, std::string("conjugate winds ") + format_double(total / (2 * M_PI)) + " times along the " + name + " boundary");
  };
  angles(L.inner, r.inner_marked, r.inner_angle, "inner");
  angles(L.outer, r.outer_marked, r.outer_angle, "outer");
  return r;
}

ArcReport check_comparable_arcs(const RoundAnnulusModel& m) {
  ArcReport rep;
  rep.inner_lengths = cyclic_lengths(m.inner_angle);
  rep.outer_lengths = cyclic_lengths(m.outer_angle);
  for (double& l : rep.outer_lengths) l *= 1 + m.delta;
  for (const auto* ls : {&rep.inner_lengths, &rep.outer_lengths})
    for (size_t k = 0; k < ls->size(); ++k) {
      double p = (*ls)[k], q = (*ls)[(k + 1) % ls->size()];
      rep.max_adjacent_ratio = std::max(rep.max_adjacent_ratio, std::max(p / q, q / p));
      rep.max_arc = std::max(rep.max_arc, p);
    }
  rep.max_arc_over_delta = rep.max_arc / m.delta;
  return rep;
}

AnnulusMetrics annulus_metrics(const ConformalGridAnnulus& a) {
  AnnulusMetrics out;
  const Mesh& g = a.grid;
  std::vector<std::pair<BSeg, int>> segs;
  for (const auto* loop : {&a.inner, &a.outer}) {
    for (size_t k = 0; k < loop->size(); ++k) {
      Vec2 p = g.vertices[(*loop)[k]], q = g.vertices[(*loop)[(k + 1) % loop->size()]];
      segs.emplace_back(BSeg(BPoint(p.x, p.y), BPoint(q.x, q.y)), static_cast<int>(segs.size()));
    }
    auto& arcs = loop == &a.inner ? out.inner_arcs : out.outer_arcs;
    for (const auto& arc : split_arcs(*loop, a.marked)) {
      arcs.push_back(polyline_length(g, arc));
      out.gap = std::max(out.gap, polyline_diameter(g, arc));
    }
  }
  bgi::rtree<std::pair<BSeg, int>, bgi::quadratic<16>> tree(segs.begin(), segs.end());
  for (const auto& p : g.vertices) {
    BPoint bp(p.x, p.y);
    for (auto it = tree.qbegin(bgi::nearest(bp, 1)); it != tree.qend(); ++it)
      out.inrad = std::max(out.inrad, bg::distance(bp, it->first));
  }
  return out;
}

AnnulusMesh annulus_triangulate(const ConformalGridAnnulus& a, const RoundAnnulusModel& m,
                                const AnnulusTriangulateOptions& opt) {
  if (m.solver.faces.empty() || m.u.size() != m.solver.vertices.size())
    fail(Status::validation, "conformal model does not match its solver mesh");
  ArcReport arcs = check_comparable_arcs(m);
  if (m.delta > opt.delta_max)
    fail(Status::hypothesis, "annulus width delta = " + format_double(m.delta) + " exceeds " + format_double(opt.delta_max));
  if (arcs.max_arc >= opt.arc_over_delta_max * m.delta)
    fail(Status::hypothesis, "sub-arc of length " + format_double(arcs.max_arc) + " is not below " +
                                 format_double(opt.arc_over_delta_max) + " * delta");

  AnnulusMesh out;
  const Mesh& s = m.solver;
  const double L = 2 * m.flux;
  double Lp = std::ceil(2 * L - 1e-9) / 2;
  if (Lp < 1.5) fail(Status::hypothesis, "strip period " + format_double(L) + " is below 3/2");
  const double stretch = Lp / L;
  out.strip_period = Lp;

  auto partition = [&](const std::vector<int>& ids, std::map<double, int>& at) {
    BoundaryPartition p;
    p.period = Lp;
    std::vector<std::pair<double, int>> xs;
    for (int v : ids) {
      double x = quantize(std::fmod(-2 * stretch * m.v[v], Lp));
      if (x < 0) x = quantize(x + Lp);
      if (x >= Lp) x = 0;
      xs.emplace_back(x, v);
    }
    std::vector<std::pair<double, int>> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    // sorted order must be a rotation of the loop order
    size_t start = std::find(xs.begin(), xs.end(), sorted.front()) - xs.begin();
    for (size_t k = 0; k < xs.size(); ++k)
      if (xs[(start + k) % xs.size()] != sorted[k]) fail(Status::solver, "marked vertices are not ordered along the strip");
    for (const auto& [x, v] : sorted) {
      p.x.push_back(x);
      at[x] = v;
    }
    return p;
  };
  std::map<double, int> bottom_at, top_at;
  // the strip keeps the inner loop at the bottom, so x runs clockwise around the hole
  std::vector<int> inner_cw(m.inner_marked.rbegin(), m.inner_marked.rend());
  std::vector<int> outer_cw(m.outer_marked.rbegin(), m.outer_marked.rend());
  BoundaryPartition bottom = partition(inner_cw, bottom_at);
  BoundaryPartition top = partition(outer_cw, top_at);

  double M = 1;
  for (const auto* p : {&bottom, &top}) {
    size_t k = p->x.size();
    for (size_t i = 0; i < k; ++i) {
      double g0 = (i + 1 < k ? p->x[i + 1] : p->x[0] + Lp) - p->x[i];
      size_t j = (i + 1) % k;
      double g1 = (j + 1 < k ? p->x[j + 1] : p->x[0] + Lp) - p->x[j];
      M = std::max(M, std::max(g0 / g1, g1 / g0));
    }
  }
  out.M = M;
  try {
    validate_partition(bottom, M);
    validate_partition(top, M);
  } catch (const Error& e) {
    fail(Status::hypothesis, std::string("strip partition not admissible: ") + e.what());
  }
  out.strip = strip_triangulate(top, bottom, M);
  const Mesh& S = out.strip;

  // solver faces in strip coordinates
  const size_t nf = s.faces.size();
  std::vector<std::array<Vec2, 3>> img(nf);
  std::vector<std::pair<BBox, int>> boxes;
  boxes.reserve(nf);
  for (size_t f = 0; f < nf; ++f) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (int i = 0; i < 3; ++i) {
      int v = s.faces[f][i];
      Vec2 q{-2 * stretch * (m.v[v] + m.flux * m.lift[3 * f + i]), 2 * m.u[v]};
      img[f][i] = q;
      x0 = std::min(x0, q.x), x1 = std::max(x1, q.x), y0 = std::min(y0, q.y), y1 = std::max(y1, q.y);
    }
    if (!(orient(img[f][0], img[f][1], img[f][2]) > 0)) {
      // a face with all corners on one loop collapses onto the strip edge
      if (img[f][0].y == img[f][1].y && img[f][1].y == img[f][2].y) continue;
      fail(Status::solver, "solver face " + std::to_string(f) + " folds in the strip image");
    }
    boxes.emplace_back(BBox(BPoint(x0, y0), BPoint(x1, y1)), static_cast<int>(f));
  }
  bgi::rtree<std::pair<BBox, int>, bgi::rstar<16>> tree(boxes.begin(), boxes.end());
  double xmin = 1e300;
  for (const auto& b : boxes) xmin = std::min(xmin, b.first.min_corner().get<0>());

  out.mesh.vertices.resize(S.vertices.size());
  out.grid_vertex.assign(S.vertices.size(), -1);
  std::vector<std::pair<BBox, int>> hits;
  for (size_t i = 0; i < S.vertices.size(); ++i) {
    Vec2 p = S.vertices[i];
    if (p.y == 0 || p.y == 2) {
      auto& at = p.y == 0 ? bottom_at : top_at;
      auto it = at.find(p.x);
      if (it == at.end()) fail(Status::internal, "strip boundary vertex is not a marked vertex");
      out.grid_vertex[i] = it->second;
      out.mesh.vertices[i] = a.grid.vertices[it->second];
      continue;
    }
    // shift into the range covered by the image
    double x = p.x - std::floor((p.x - xmin) / Lp) * Lp;
    int best = -1;
    double best_min = -1e300;
    std::array<double, 3> best_l{};
    for (double xs : {x, x + Lp, x - Lp}) {
      hits.clear();
      const double eps = 1e-12;
      tree.query(bgi::intersects(BBox(BPoint(xs - eps, p.y - eps), BPoint(xs + eps, p.y + eps))), std::back_inserter(hits));
      for (const auto& h : hits) {
        const auto& t = img[h.second];
        Vec2 q{xs, p.y};
        double d = orient(t[0], t[1], t[2]);
        std::array<double, 3> l{orient(q, t[1], t[2]) / d, orient(t[0], q, t[2]) / d, orient(t[0], t[1], q) / d};
        double mn = std::min({l[0], l[1], l[2]});
        if (mn > best_min) best_min = mn, best = h.second, best_l = l;
      }
    }
    if (best < 0 || best_min < -1e-9)
      fail(Status::solver, "strip vertex (" + format_double(p.x) + ", " + format_double(p.y) + ") lies outside the solver image");
    Vec2 w{0, 0};
    for (int c = 0; c < 3; ++c) w = w + s.vertices[s.faces[best][c]] * best_l[c];
    out.mesh.vertices[i] = w;
  }
  out.mesh.faces = S.faces;
  // straight edges can cross where the solver map bends sharply near boundary corners
  straighten_fans(out.mesh, S, out.grid_vertex, Lp);
  size_t folded = untangle(out.mesh, out.grid_vertex, 8);
  if (folded)
    fail(Status::solver, std::to_string(folded) + " pulled-back faces are not positively oriented");

  auto cert = mesh_dilatation_certificate(out.mesh, {});
  out.mesh.mu = cert.mu;
  out.mesh.tags.assign(out.mesh.faces.size(), tag_annulus);

  AnnulusMetrics met = annulus_metrics(a);
  std::vector<double> arc_diam(a.grid.vertices.size(), 0);
  for (const auto* loop : {&a.inner, &a.outer})
    for (const auto& arc : split_arcs(*loop, a.marked)) {
      double d = polyline_diameter(a.grid, arc);
      arc_diam[arc.front()] = std::max(arc_diam[arc.front()], d);
      arc_diam[arc.back()] = std::max(arc_diam[arc.back()], d);
    }
  for (size_t f = 0; f < out.mesh.faces.size(); ++f) {
    double d = out.mesh.diameter(f), arc = 0;
    for (int v : out.mesh.faces[f])
      if (out.grid_vertex[v] >= 0) arc = std::max(arc, arc_diam[out.grid_vertex[v]]);
    if (arc > 0)
      out.size_ratio_boundary = std::max(out.size_ratio_boundary, d / arc);
    else
      out.size_ratio_interior = std::max(out.size_ratio_interior, d / met.inrad);
  }
  return out;
}

std::vector<EdgeTarget> reparam_boundary(const Mesh& mesh, const std::vector<int>& grid_vertex,
                                         const ConformalGridAnnulus& a, double side) {
  if (!grid_vertex.empty() && grid_vertex.size() != mesh.vertices.size())
    fail(Status::validation, "vertex correspondence has the wrong length");
  auto gid = [&](int v) { return grid_vertex.empty() ? v : grid_vertex[v]; };
  // position of every loop vertex: arc index and arclength from the arc start
  struct Pos {
    int arc = -1;
    double s = 0;
  };
  std::unordered_map<int, std::vector<Pos>> where;
  std::vector<double> arc_len;
  for (const auto* loop : {&a.inner, &a.outer})
    for (const auto& arc : split_arcs(*loop, a.marked)) {
      int id = static_cast<int>(arc_len.size());
      double s = 0;
      for (size_t k = 0; k < arc.size(); ++k) {
        if (k > 0) s += norm(a.grid.vertices[arc[k]] - a.grid.vertices[arc[k - 1]]);
        where[arc[k]].push_back({id, s});
      }
      arc_len.push_back(s);
    }
  HalfEdges he = build_half_edges(mesh);
  std::vector<EdgeTarget> out;
  std::vector<double> covered(arc_len.size(), 0);
  for (size_t h = 0; h < he.twin.size(); ++h) {
    if (he.twin[h] >= 0) continue;
    int va = mesh.faces[h / 3][h % 3], vb = mesh.faces[h / 3][(h % 3 + 1) % 3];
    int ga = gid(va), gb = gid(vb);
    auto ia = where.find(ga), ib = where.find(gb);
    if (ga < 0 || gb < 0 || ia == where.end() || ib == where.end())
      fail(Status::validation, "boundary edge " + std::to_string(va) + "-" + std::to_string(vb) + " is not on the annulus boundary");
    bool found = false;
    for (const auto& pa : ia->second)
      for (const auto& pb : ib->second) {
        if (found || pa.arc != pb.arc) continue;
        double len = std::abs(pb.s - pa.s);
        out.push_back({va, vb, side * len / arc_len[pa.arc]});
        covered[pa.arc] += len;
        found = true;
      }
    if (!found)
      fail(Status::validation, "boundary edge " + std::to_string(va) + "-" + std::to_string(vb) + " spans two sub-arcs");
  }
  for (size_t k = 0; k < arc_len.size(); ++k)
    if (std::abs(covered[k] - arc_len[k]) > 1e-9 * arc_len[k])
      fail(Status::validation, "boundary edges do not cover sub-arc " + std::to_string(k) + " exactly once");
  return out;
}

}  // namespace qcmesh
