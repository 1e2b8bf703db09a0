#include "qcmesh/modulus.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <set>

#include "qcmesh/error.hpp"

namespace qcmesh {

Region Region::poly(std::vector<Vec2> v) {
  Region r;
  r.kind = Kind::polygon;
  r.polygon = std::move(v);
  return r;
}

Region Region::rect(double x0, double y0, double x1, double y1) { return poly({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}); }

Region Region::disk(Vec2 c, double r) {
  Region d;
  d.kind = Kind::disk;
  d.center = c;
  d.radius = r;
  return d;
}

bool Region::contains(Vec2 p) const {
  if (kind == Kind::disk) return norm(p - center) < radius;
  bool in = false;
  for (size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
    const Vec2 &a = polygon[j], &b = polygon[i];
    if ((a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y)) in = !in;
  }
  return in;
}

bool GridDomain::contains(Vec2 p) const {
  bool in = std::any_of(add.begin(), add.end(), [&](const Region& r) { return r.contains(p); });
  return in && std::none_of(subtract.begin(), subtract.end(), [&](const Region& r) { return r.contains(p); });
}

bool BoundarySelector::selects(Vec2 q) const { return region.contains(q) != complement; }

namespace {

struct Box {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  void grow(Vec2 p) {
    x0 = std::min(x0, p.x), y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x), y1 = std::max(y1, p.y);
  }
};

Box bounds(const GridDomain& d) {
  Box b;
  for (auto& r : d.add) {
    if (r.kind == Region::Kind::disk) {
      b.grow(r.center - Vec2{r.radius, r.radius});
      b.grow(r.center + Vec2{r.radius, r.radius});
    } else {
      for (auto& p : r.polygon) b.grow(p);
    }
  }
  return b;
}

double connect_modulus(const PathFamilySpec& s, ModulusResult& out) {
  if (!(s.h > 0)) fail(Status::validation, "modulus: h must be positive");
  if (s.domain.add.empty()) fail(Status::validation, "modulus: empty domain");
  Box b = bounds(s.domain);
  const double h = s.h;
  const long nx = static_cast<long>(std::ceil((b.x1 - b.x0) / h - 1e-9)) + 2;
  const long ny = static_cast<long>(std::ceil((b.y1 - b.y0) / h - 1e-9)) + 2;
  if (nx * ny > 60'000'000) fail(Status::validation, "modulus: grid too large");
  const Vec2 origin{b.x0 - h, b.y0 - h};
  auto center = [&](long i, long j) { return Vec2{origin.x + (i + 0.5) * h, origin.y + (j + 0.5) * h}; };

  std::vector<uint8_t> inside(nx * ny, 0);
  for (long j = 0; j < ny; ++j)
    for (long i = 0; i < nx; ++i) inside[j * nx + i] = s.domain.contains(center(i, j));
  auto in = [&](long i, long j) { return i >= 0 && j >= 0 && i < nx && j < ny && inside[j * nx + i]; };

  // number of E and F sides on each cell
  std::vector<uint8_t> nE(nx * ny, 0), nF(nx * ny, 0);
  std::set<std::pair<long, long>> cornersE, cornersF;
  const long di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
  bool touching = false;
  for (long j = 0; j < ny; ++j)
    for (long i = 0; i < nx; ++i) {
      if (!inside[j * nx + i]) continue;
      for (int k = 0; k < 4; ++k) {
        long a = i + di[k], c = j + dj[k];
        if (in(a, c)) continue;
        Vec2 q = center(a, c);
        bool e = s.E.selects(q), f = s.F.selects(q);
        if (e && f) touching = true;
        // grid vertices at the two ends of this side
        std::pair<long, long> v1, v2;
        if (dj[k] == 0) {
          long x = i + (di[k] > 0);
          v1 = {x, j}, v2 = {x, j + 1};
        } else {
          long y = j + (dj[k] > 0);
          v1 = {i, y}, v2 = {i + 1, y};
        }
        if (e) {
          ++nE[j * nx + i];
          cornersE.insert(v1), cornersE.insert(v2);
        }
        if (f) {
          ++nF[j * nx + i];
          cornersF.insert(v1), cornersF.insert(v2);
        }
      }
    }
  for (auto& v : cornersF) touching = touching || cornersE.count(v);
  if (touching) {
    out.infinite = true;
    return std::numeric_limits<double>::infinity();
  }

  // keep components carrying both potentials
  std::vector<long> comp(nx * ny, -1), stack;
  std::vector<uint8_t> keep_comp;
  long ncomp = 0;
  for (long start = 0; start < nx * ny; ++start) {
    if (!inside[start] || comp[start] >= 0) continue;
    bool hasE = false, hasF = false;
    stack.push_back(start);
    comp[start] = ncomp;
    while (!stack.empty()) {
      long c = stack.back();
      stack.pop_back();
      hasE = hasE || nE[c], hasF = hasF || nF[c];
      long i = c % nx, j = c / nx;
      for (int k = 0; k < 4; ++k) {
        long a = i + di[k], d = j + dj[k];
        if (in(a, d) && comp[d * nx + a] < 0) {
          comp[d * nx + a] = ncomp;
          stack.push_back(d * nx + a);
        }
      }
    }
    keep_comp.push_back(hasE && hasF);
    ++ncomp;
  }
  std::vector<long> id(nx * ny, -1);
  long n = 0;
  for (long c = 0; c < nx * ny; ++c)
    if (inside[c] && keep_comp[comp[c]]) id[c] = n++;
  out.unknowns = static_cast<size_t>(n);
  if (n == 0) return 0;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (long c = 0; c < nx * ny; ++c) {
    if (id[c] < 0) continue;
    long i = c % nx, j = c / nx;
    double diag = 2.0 * (nE[c] + nF[c]);
    for (int k = 0; k < 4; ++k) {
      long a = i + di[k], d = j + dj[k];
      if (!in(a, d)) continue;
      diag += 1;
      trip.emplace_back(id[c], id[d * nx + a], -1.0);
    }
    trip.emplace_back(id[c], id[c], diag);
    rhs[id[c]] = 2.0 * nF[c];
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) fail(Status::solver, "modulus: factorization failed");
  Eigen::VectorXd u = ldlt.solve(rhs);
  out.residual = (A * u - rhs).norm() / std::max(1.0, rhs.norm());
  if (!(out.residual <= 1e-10))
    fail(Status::solver, "modulus: linear solve residual " + std::to_string(out.residual) + " above 1e-10");

  // Dirichlet energy of the discrete potential
  double energy = 0;
  for (long c = 0; c < nx * ny; ++c) {
    if (id[c] < 0) continue;
    long i = c % nx, j = c / nx;
    double uc = u[id[c]];
    energy += 2.0 * nE[c] * uc * uc + 2.0 * nF[c] * (1 - uc) * (1 - uc);
    if (in(i + 1, j)) energy += std::pow(uc - u[id[j * nx + i + 1]], 2);
    if (in(i, j + 1)) energy += std::pow(uc - u[id[(j + 1) * nx + i]], 2);
  }
  return energy;
}

nlohmann::json region_json(const Region& r) {
  if (r.kind == Region::Kind::disk) return {{"disk", {{"center", {r.center.x, r.center.y}}, {"radius", r.radius}}}};
  nlohmann::json pts = nlohmann::json::array();
  for (auto& p : r.polygon) pts.push_back({p.x, p.y});
  return {{"polygon", pts}};
}

Region region_from(const nlohmann::json& j) {
  if (j.contains("disk")) {
    auto& d = j["disk"];
    return Region::disk({d["center"][0].get<double>(), d["center"][1].get<double>()}, d["radius"].get<double>());
  }
  if (j.contains("rect")) {
    auto& r = j["rect"];
    return Region::rect(r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>());
  }
  if (!j.contains("polygon")) fail(Status::validation, "modulus: region needs \"polygon\", \"rect\" or \"disk\"");
  std::vector<Vec2> v;
  for (auto& p : j["polygon"]) v.push_back({p[0].get<double>(), p[1].get<double>()});
  if (v.size() < 3) fail(Status::validation, "modulus: polygon needs at least 3 vertices");
  return Region::poly(v);
}

BoundarySelector selector_from(const nlohmann::json& j) {
  BoundarySelector s;
  s.region = region_from(j.at("region"));
  s.complement = j.value("complement", false);
  return s;
}

}  // namespace

ModulusResult discrete_modulus(const PathFamilySpec& spec) {
  ModulusResult r;
  double c = connect_modulus(spec, r);
  if (spec.kind == FamilyKind::connect) {
    r.value = c;
  } else if (r.infinite) {
    r.infinite = false;
    r.value = 0;
  } else if (c == 0) {
    r.infinite = true;
    r.value = std::numeric_limits<double>::infinity();
  } else {
    r.value = 1 / c;
  }
  return r;
}

std::vector<ConvergenceRow> modulus_convergence(const PathFamilySpec& spec, int levels) {
  std::vector<ConvergenceRow> rows;
  PathFamilySpec s = spec;
  for (int k = 0; k < levels; ++k) {
    rows.push_back({s.h, discrete_modulus(s).value});
    s.h /= 2;
  }
  return rows;
}

ExtensionReport extension_rule_check(const PathFamilySpec& contained, const PathFamilySpec& containing, double rel_tol) {
  ExtensionReport r;
  r.contained = discrete_modulus(contained).value;
  r.containing = discrete_modulus(containing).value;
  r.pass = r.containing <= r.contained * (1 + rel_tol) || std::isinf(r.contained);
  return r;
}

PathFamilySpec family_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(Status::validation, std::string("modulus: invalid JSON: ") + e.what());
  }
  try {
    PathFamilySpec s;
    s.h = j.value("h", s.h);
    std::string kind = j.value("kind", "connect");
    if (kind == "separate")
      s.kind = FamilyKind::separate;
    else if (kind != "connect")
      fail(Status::validation, "modulus: kind must be \"connect\" or \"separate\"");
    for (auto& r : j.at("domain").at("add")) s.domain.add.push_back(region_from(r));
    if (j["domain"].contains("subtract"))
      for (auto& r : j["domain"]["subtract"]) s.domain.subtract.push_back(region_from(r));
    s.E = selector_from(j.at("E"));
    s.F = selector_from(j.at("F"));
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(Status::validation, std::string("modulus: malformed family: ") + e.what());
  }
}

std::string family_to_json(const PathFamilySpec& s) {
  nlohmann::json j;
  j["h"] = s.h;
  j["kind"] = s.kind == FamilyKind::connect ? "connect" : "separate";
  j["domain"]["add"] = nlohmann::json::array();
  j["domain"]["subtract"] = nlohmann::json::array();
  for (auto& r : s.domain.add) j["domain"]["add"].push_back(region_json(r));
  for (auto& r : s.domain.subtract) j["domain"]["subtract"].push_back(region_json(r));
  j["E"] = {{"region", region_json(s.E.region)}, {"complement", s.E.complement}};
  j["F"] = {{"region", region_json(s.F.region)}, {"complement", s.F.complement}};
  return j.dump() + "\n";
}

}  // namespace qcmesh
