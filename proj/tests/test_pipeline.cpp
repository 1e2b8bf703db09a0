#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "qcmesh/error.hpp"
#include "qcmesh/mesh_io.hpp"
#include "qcmesh/pipeline.hpp"

using namespace qcmesh;

namespace {

Status code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Status::ok;
}

PipelineConfig scaled(int n_max) {
  PipelineConfig cfg;
  cfg.N = 4;
  cfg.band_shift = 1;
  cfg.n_max = n_max;
  cfg.annulus.delta_max = 10;
  cfg.annulus.arc_over_delta_max = 10;
  return cfg;
}

// point, eta(t) = t, two stages; shared by the cases below
const PipelineResult& two_stage_run() {
  static const PipelineResult r = build_triangulation(fixtures::point(), parse_eta("pow:c=1,p=1"), scaled(2));
  return r;
}

double edge_ratio(const Mesh& m, size_t f) {
  auto c = m.corners(f);
  double lo = 1e300, hi = 0;
  for (int i = 0; i < 3; ++i) {
    double l = norm(c[(i + 1) % 3] - c[i]);
    lo = std::min(lo, l), hi = std::max(hi, l);
  }
  return hi / lo;
}

}  // namespace

TEST_CASE("epsilon schedule: worked example and binding branch") {
  // 16^-3 / 20 = 1/81920, halved and floored to a power of two
  auto s = epsilon_schedule(1, parse_eta("pow:c=1,p=1"), 20);
  CHECK(s.eps == std::ldexp(1.0, -18));
  CHECK(s.eps <= 1.0 / 163840);
  CHECK(2 * s.eps > 1.0 / 163840);
  CHECK(s.band_scale == std::ldexp(1.0, -12));
  CHECK(s.side == s.eps / 4);
  CHECK(s.delta == epsilon_schedule(2, parse_eta("pow:c=1,p=1"), 20).eps / 4);

  // eta(t) = t: the N-branch always binds, so eps only depends on b / N
  for (int n = 1; n <= 6; ++n) {
    auto a = epsilon_schedule(n, parse_eta("pow:c=1,p=1"), 20);
    auto b = epsilon_schedule(n, parse_eta("pow:c=1000,p=1"), 20);
    CHECK(a.eps == b.eps);
  }
}

TEST_CASE("epsilon schedule decreases and stays a power of two") {
  for (const char* spec : {"pow:c=0.125,p=1", "pow:c=4,p=2", "pow:c=2,p=1.5", "table:[[0,0],[0.001,0.0001],[1,0.5]]"}) {
    auto eta = parse_eta(spec);
    for (int shift : {1, 2}) {
      double prev = 1e300;
      for (int n = 1; n <= 6; ++n) {
        auto s = epsilon_schedule(n, eta, 20, shift);
        CHECK_MESSAGE(s.eps < prev, spec);
        int e = 0;
        CHECK(std::frexp(s.eps, &e) == 0.5);
        CHECK(20 * s.eps < s.band_scale);
        CHECK(s.eps < eta(s.band_scale));
        prev = s.eps;
      }
    }
  }
}

TEST_CASE("epsilon schedule refuses bad input and underflow") {
  auto eta = parse_eta("pow:c=1,p=1");
  CHECK(code_of([&] { epsilon_schedule(0, eta, 20); }) == Status::validation);
  CHECK(code_of([&] { epsilon_schedule(1, eta, 0); }) == Status::validation);
  CHECK(code_of([&] { epsilon_schedule(1, eta, 20, 0); }) == Status::validation);
  // (16^-62)^20 is far below the smallest double
  CHECK(code_of([&] { epsilon_schedule(60, parse_eta("pow:c=1,p=20"), 20); }) == Status::hypothesis);
}

TEST_CASE("the faithful schedule is refused by the cost estimate") {
  PipelineConfig cfg;
  cfg.n_max = 3;
  for (const char* spec : {"pow:c=0.125,p=1", "pow:c=4,p=2"}) {
    auto eta = parse_eta(spec);
    auto c = estimate_cost(fixtures::point(), eta, cfg);
    CHECK_FALSE(c.within_budget);
    CHECK(c.total_faces > 100 * cfg.face_budget);
    CHECK(c.reason.find("budget") != std::string::npos);
    CHECK(code_of([&] { build_triangulation(fixtures::point(), eta, cfg); }) == Status::hypothesis);
  }
}

TEST_CASE("cost estimate grows with N and with a finer eta") {
  auto k = fixtures::point();
  auto a = estimate_cost(k, parse_eta("pow:c=1,p=1"), scaled(2));
  auto b = estimate_cost(k, parse_eta("pow:c=0.125,p=1"), scaled(2));
  auto c = scaled(2);
  c.N = 8;
  auto d = estimate_cost(k, parse_eta("pow:c=1,p=1"), c);
  CHECK(a.within_budget);
  CHECK(a.band_faces.size() == 2);
  CHECK(b.total_faces > a.total_faces);
  CHECK(d.total_faces > a.total_faces);
}

TEST_CASE("n_max = 0 gives the equilateral base frame") {
  auto r = build_triangulation(fixtures::point(), parse_eta("pow:c=1,p=1"), scaled(0));
  CHECK(r.stages.empty());
  CHECK(r.mesh.faces.size() > 0);
  CHECK(r.conformity.ok);
  CHECK(r.cert.sup_mu < 1e-12);
  for (size_t f = 0; f < r.mesh.faces.size(); ++f) CHECK(edge_ratio(r.mesh, f) == doctest::Approx(1).epsilon(1e-12));
  CHECK(r.max_degree == 6);
  CHECK(r.residual_area == 0);
}

TEST_CASE("two-stage run: conforming, eta-adapted, glued") {
  const auto& r = two_stage_run();
  REQUIRE(r.stages.size() == 2);
  CHECK(r.conformity.ok);
  CHECK(r.conformity.components == 1);
  CHECK(r.eta.pass);
  CHECK(r.eta.faces_checked == r.mesh.faces.size());
  CHECK(r.gluing.ok);
  CHECK(r.gluing.interior_edges > 0);
  CHECK(r.gluing.max_rel_discrepancy <= 1e-9);
  CHECK(r.cert.sup_mu < 1);
  for (size_t f = 0; f < r.mesh.faces.size(); ++f) REQUIRE(r.mesh.signed_area(f) > 0);
}

TEST_CASE("two-stage run: stage bookkeeping") {
  const auto& r = two_stage_run();
  for (const auto& s : r.stages) {
    CHECK(s.faces == s.V + s.W + s.annulus_faces);
    size_t sum = 0;
    for (const auto& a : s.annuli) {
      CHECK(a.thickness >= 4);
      CHECK(a.max_adjacent_ratio <= a.M + 1e-9);
      sum += a.mesh_faces;
    }
    CHECK(sum == s.annulus_faces);
    CHECK(s.nested);
    CHECK(s.band_area > 0);
  }
  CHECK(r.stages[1].schedule.eps < r.stages[0].schedule.eps);
  CHECK(r.stages[0].schedule.delta == r.stages[1].schedule.eps / 4);
  // the last stage's inner grid is dropped, the rest of the mesh is kept
  size_t annulus_faces = 0;
  for (uint8_t t : r.mesh.tags) annulus_faces += t == tag_annulus;
  CHECK(annulus_faces == r.stages[0].annulus_faces + r.stages[1].annulus_faces);
  CHECK(r.residual_area > 0);
  CHECK(r.residual_area <= r.residual_bound);
}

TEST_CASE("two-stage run: dilatation sits in the bands and on lattice transition faces") {
  const auto& r = two_stage_run();
  const Mesh& m = r.mesh;
  double band_area = 0;
  for (const auto& s : r.stages) band_area += s.band_area;
  double annulus_support = 0;
  size_t tagged_grid = 0;
  for (size_t f = 0; f < m.faces.size(); ++f) {
    REQUIRE(m.has_mu(f));
    double mu = std::abs(m.mu[f]);
    if (m.tags[f] == tag_annulus) {
      if (mu > 1e-12) annulus_support += m.signed_area(f);
    } else {
      ++tagged_grid;
      // lattice faces are equilateral (mu = 0) or transition halves
      bool equilateral = edge_ratio(m, f) < 1 + 1e-9;
      CHECK(equilateral == (mu < 1e-9));
    }
  }
  CHECK(tagged_grid > 0);
  CHECK(annulus_support <= band_area * (1 + 1e-9));
}

TEST_CASE("two-stage run: degree matches an edge-list recount") {
  const auto& r = two_stage_run();
  std::set<std::pair<int, int>> edges;
  for (const auto& f : r.mesh.faces)
    for (int i = 0; i < 3; ++i) edges.insert({std::min(f[i], f[(i + 1) % 3]), std::max(f[i], f[(i + 1) % 3])});
  std::vector<int> deg(r.mesh.vertices.size(), 0);
  for (const auto& [a, b] : edges) ++deg[a], ++deg[b];
  CHECK(r.max_degree == *std::max_element(deg.begin(), deg.end()));
}

TEST_CASE("eta check: fault injection and monotonicity") {
  const auto& r = two_stage_run();
  auto k = fixtures::point();

  // a looser sizing function passes whenever a tighter one does
  CHECK(verify_eta_bound(r.mesh, k, parse_eta("pow:c=2,p=1")).pass);
  CHECK(verify_eta_bound(r.mesh, k, parse_eta("table:[[0,0],[0.5,0.75],[4,5]]")).pass);

  Mesh bad = r.mesh;
  REQUIRE(r.eta.worst_face >= 0);
  const size_t victim = static_cast<size_t>(r.eta.worst_face);
  auto c = bad.corners(victim);
  Vec2 g = (c[0] + c[1] + c[2]) * (1.0 / 3);
  for (int i = 0; i < 3; ++i) bad.vertices[bad.faces[victim][i]] = g + (c[i] - g) * 10;
  auto rep = verify_eta_bound(bad, k, parse_eta("pow:c=1,p=1"));
  CHECK_FALSE(rep.pass);
  CHECK(std::find(rep.failures.begin(), rep.failures.end(), victim) != rep.failures.end());
  CHECK(rep.worst_ratio > 1);
}

TEST_CASE("identical inputs give byte-identical meshes and certificates") {
  auto k = fixtures::two_points();
  auto eta = parse_eta("pow:c=1,p=1");
  auto cfg = scaled(1);
  auto a = build_triangulation(k, eta, cfg);
  auto b = build_triangulation(k, eta, cfg);
  std::string ma = mesh_to_json(a.mesh), mb = mesh_to_json(b.mesh);
  CHECK(ma == mb);
  CHECK(certificate_to_json(a, k, eta, cfg, ma) == certificate_to_json(b, k, eta, cfg, mb));
  // the two points share one contour until stage 2
  REQUIRE(a.stages.size() == 1);
  CHECK(a.stages[0].contour_components == 1);
}
