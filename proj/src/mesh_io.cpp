#include "qcmesh/mesh_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qcmesh/error.hpp"
#include "qcmesh/sizing.hpp"

namespace qcmesh {

namespace {

void put_dyadic(std::string& s, const Dyadic& d) {
  s += "{\"m\":" + std::to_string(d.m) + ",\"e\":" + std::to_string(d.e) + "}";
}

double read_coord(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_object() && j.contains("m") && j.contains("e"))
    return Dyadic(j["m"].get<int64_t>(), j["e"].get<int32_t>()).to_double();
  fail(Status::validation, "mesh: coordinate must be a number or {m,e}");
}

}  // namespace

std::string mesh_to_json(const Mesh& mesh, bool exact) {
  bool dy = exact && mesh.has_exact();
  std::string s;
  s.reserve(mesh.vertices.size() * 48 + mesh.faces.size() * 40);
  s += "{\"vertices\":[";
  for (size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (v) s += ",";
    s += "[";
    if (dy) {
      put_dyadic(s, mesh.exact[v].x);
      s += ",";
      put_dyadic(s, mesh.exact[v].y);
    } else {
      s += format_double(mesh.vertices[v].x) + "," + format_double(mesh.vertices[v].y);
    }
    s += "]";
  }
  s += "],\"faces\":[";
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    if (f) s += ",";
    const Face& t = mesh.faces[f];
    s += "[" + std::to_string(t[0]) + "," + std::to_string(t[1]) + "," + std::to_string(t[2]) + "]";
  }
  s += "],\"boundary_vertices\":[";
  std::vector<int> bnd = mesh.boundary_marked;
  if (bnd.empty() && !mesh.faces.empty()) bnd = topological_boundary(mesh, build_half_edges(mesh));
  for (size_t i = 0; i < bnd.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(bnd[i]);
  }
  s += "],\"mu\":[";
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    if (f) s += ",";
    if (mesh.has_mu(f))
      s += "[" + format_double(mesh.mu[f].real()) + "," + format_double(mesh.mu[f].imag()) + "]";
    else
      s += "null";
  }
  s += "]";
  if (!mesh.tags.empty()) {
    s += ",\"tags\":[";
    for (size_t f = 0; f < mesh.tags.size(); ++f) {
      if (f) s += ",";
      s += std::to_string(mesh.tags[f]);
    }
    s += "]";
  }
  if (mesh.period > 0) s += ",\"period\":" + format_double(mesh.period);
  if (dy) s += ",\"exact\":true";
  s += "}\n";
  return s;
}

Mesh mesh_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(Status::validation, std::string("mesh: invalid JSON: ") + e.what());
  }
  if (!j.contains("vertices") || !j.contains("faces")) fail(Status::validation, "mesh: missing vertices or faces");
  Mesh m;
  bool exact = false;
  for (auto& v : j["vertices"]) {
    if (!v.is_array() || v.size() != 2) fail(Status::validation, "mesh: vertex must be [x,y]");
    m.vertices.push_back({read_coord(v[0]), read_coord(v[1])});
    if (v[0].is_object()) {
      exact = true;
      m.exact.push_back({Dyadic(v[0]["m"].get<int64_t>(), v[0]["e"].get<int32_t>()),
                         Dyadic(v[1]["m"].get<int64_t>(), v[1]["e"].get<int32_t>())});
    }
  }
  if (exact && m.exact.size() != m.vertices.size()) fail(Status::validation, "mesh: mixed exact and float coordinates");
  for (auto& f : j["faces"]) {
    if (!f.is_array() || f.size() != 3) fail(Status::validation, "mesh: face must be [i,j,k]");
    Face t{f[0].get<int>(), f[1].get<int>(), f[2].get<int>()};
    for (int v : t)
      if (v < 0 || static_cast<size_t>(v) >= m.vertices.size()) fail(Status::validation, "mesh: face index out of range");
    m.faces.push_back(t);
  }
  if (j.contains("boundary_vertices"))
    for (auto& b : j["boundary_vertices"]) m.boundary_marked.push_back(b.get<int>());
  if (j.contains("mu")) {
    if (j["mu"].size() != m.faces.size()) fail(Status::validation, "mesh: mu length differs from face count");
    bool any = false;
    for (auto& u : j["mu"]) any = any || !u.is_null();
    if (any)
      for (auto& u : j["mu"]) m.mu.push_back(u.is_null() ? no_mu() : std::complex<double>(u[0].get<double>(), u[1].get<double>()));
  }
  if (j.contains("tags"))
    for (auto& t : j["tags"]) m.tags.push_back(static_cast<uint8_t>(t.get<int>()));
  if (j.contains("period")) m.period = j["period"].get<double>();
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Status::io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Status::io, "cannot write " + path);
  out << data;
  if (!out) fail(Status::io, "write failed for " + path);
}

}  // namespace qcmesh
