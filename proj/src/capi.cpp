#include "qcmesh/qcmesh.h"

#include <cstdlib>
#include <cstring>
#include <json.hpp>
#include <memory>
#include <new>
#include <random>
#include <string>

#include "qcmesh/annulus.hpp"
#include "qcmesh/dilatation.hpp"
#include "qcmesh/error.hpp"
#include "qcmesh/mesh.hpp"
#include "qcmesh/mesh_io.hpp"
#include "qcmesh/modulus.hpp"
#include "qcmesh/pipeline.hpp"
#include "qcmesh/render.hpp"
#include "qcmesh/sizing.hpp"
#include "qcmesh/strip.hpp"
#include "qcmesh/whitney.hpp"

struct qcm_set {
  qcmesh::CompactSet k;
};

struct qcm_mesh {
  qcmesh::Mesh m;
};

struct qcm_result {
  qcmesh::PipelineResult r;
  qcmesh::CompactSet k;
  qcmesh::SizingFn eta;
  qcmesh::PipelineConfig cfg;
};

namespace {

thread_local std::string g_error;

qcm_status set_error(qcm_status s, const std::string& msg) {
  g_error = msg;
  return s;
}

template <class F>
qcm_status guard(F&& fn) {
  try {
    fn();
    g_error.clear();
    return QCM_OK;
  } catch (const qcmesh::Error& e) {
    return set_error(static_cast<qcm_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return set_error(QCM_ERR_VALIDATION, std::string("malformed JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return set_error(QCM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(QCM_ERR_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

void need(const void* p, const char* what) {
  if (!p) qcmesh::fail(qcmesh::Status::validation, std::string(what) + " is NULL");
}

nlohmann::json mesh_summary(const qcmesh::Mesh& m) {
  using nlohmann::json;
  auto conf = qcmesh::check_conformity(m);
  auto cert = qcmesh::mesh_dilatation_certificate(m, {});
  json j;
  j["vertices"] = m.vertices.size();
  j["faces"] = m.faces.size();
  j["conforming"] = conf.ok;
  j["components"] = conf.components;
  j["messages"] = conf.messages;
  j["max_degree"] = m.faces.empty() ? 0 : qcmesh::degree_stats(m).max_degree;
  j["min_angle_deg"] = m.faces.empty() ? 0.0 : qcmesh::min_angle_excluding_walls(m);
  j["sup_mu"] = cert.sup_mu;
  j["K"] = cert.K;
  j["mu_support_faces"] = cert.support_faces;
  j["mu_support_area"] = cert.support_area;
  return j;
}

}  // namespace

extern "C" {

const char* qcm_last_error(void) { return g_error.c_str(); }

const char* qcm_version(void) { return "0.1.0"; }

void qcm_string_free(char* s) { std::free(s); }

qcm_status qcm_set_from_json(const char* json, qcm_set** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    auto k = qcmesh::compact_set_from_json(json);
    qcmesh::validate_compact_set(k);
    *out = new qcm_set{std::move(k)};
  });
}

qcm_status qcm_set_to_json(const qcm_set* k, char** out) {
  return guard([&] {
    need(k, "set");
    need(out, "out");
    *out = dup(qcmesh::compact_set_to_json(k->k));
  });
}

void qcm_set_free(qcm_set* k) { delete k; }

qcm_status qcm_set_distance(const qcm_set* k, double x, double y, double* out) {
  return guard([&] {
    need(k, "set");
    need(out, "out");
    *out = qcmesh::distance_to_set(k->k, {x, y});
  });
}

qcm_status qcm_contours(const qcm_set* k, int n, char** out_json) {
  return guard([&] {
    need(k, "set");
    need(out_json, "out");
    *out_json = dup(qcmesh::contours_to_json(qcmesh::contours(k->k, n)));
  });
}

qcm_status qcm_eta_eval(const char* spec, double t, double* out) {
  return guard([&] {
    need(spec, "spec");
    need(out, "out");
    *out = qcmesh::parse_eta(spec)(t);
  });
}

qcm_status qcm_eta_normalize(const char* spec, char** out) {
  return guard([&] {
    need(spec, "spec");
    need(out, "out");
    *out = dup(qcmesh::parse_eta(spec).str());
  });
}

qcm_status qcm_mesh_from_json(const char* json, qcm_mesh** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    *out = new qcm_mesh{qcmesh::mesh_from_json(json)};
  });
}

qcm_status qcm_mesh_to_json(const qcm_mesh* m, int exact, char** out) {
  return guard([&] {
    need(m, "mesh");
    need(out, "out");
    *out = dup(qcmesh::mesh_to_json(m->m, exact != 0));
  });
}

void qcm_mesh_free(qcm_mesh* m) { delete m; }

size_t qcm_mesh_vertex_count(const qcm_mesh* m) { return m ? m->m.vertices.size() : 0; }

size_t qcm_mesh_face_count(const qcm_mesh* m) { return m ? m->m.faces.size() : 0; }

qcm_status qcm_mesh_vertex(const qcm_mesh* m, size_t v, double* x, double* y) {
  return guard([&] {
    need(m, "mesh");
    need(x, "x");
    need(y, "y");
    if (v >= m->m.vertices.size()) qcmesh::fail(qcmesh::Status::validation, "vertex index out of range");
    *x = m->m.vertices[v].x;
    *y = m->m.vertices[v].y;
  });
}

qcm_status qcm_mesh_face(const qcm_mesh* m, size_t f, int32_t out[3]) {
  return guard([&] {
    need(m, "mesh");
    need(out, "out");
    if (f >= m->m.faces.size()) qcmesh::fail(qcmesh::Status::validation, "face index out of range");
    for (int c = 0; c < 3; ++c) out[c] = m->m.faces[f][c];
  });
}

qcm_status qcm_mesh_mu(const qcm_mesh* m, size_t f, double* re, double* im, int* has_mu) {
  return guard([&] {
    need(m, "mesh");
    need(re, "re");
    need(im, "im");
    need(has_mu, "has_mu");
    if (f >= m->m.faces.size()) qcmesh::fail(qcmesh::Status::validation, "face index out of range");
    *has_mu = m->m.has_mu(f) ? 1 : 0;
    *re = *has_mu ? m->m.mu[f].real() : 0;
    *im = *has_mu ? m->m.mu[f].imag() : 0;
  });
}

qcm_status qcm_mesh_report(const qcm_mesh* m, char** out_json) {
  return guard([&] {
    need(m, "mesh");
    need(out_json, "out");
    *out_json = dup(mesh_summary(m->m).dump(1) + "\n");
  });
}

qcm_status qcm_strip_mesh(const char* top_json, const char* bottom_json, double M, qcm_mesh** out) {
  return guard([&] {
    need(top_json, "top");
    need(bottom_json, "bottom");
    need(out, "out");
    auto top = qcmesh::partition_from_json(top_json);
    auto bottom = qcmesh::partition_from_json(bottom_json);
    *out = new qcm_mesh{qcmesh::strip_triangulate(top, bottom, M)};
  });
}

qcm_status qcm_random_partition(uint64_t seed, double M, double period, char** out_json) {
  return guard([&] {
    need(out_json, "out");
    std::mt19937_64 rng(seed);
    *out_json = dup(qcmesh::partition_to_json(qcmesh::random_partition(rng, M, period)));
  });
}

void qcm_annulus_options_default(qcm_annulus_options* o) {
  if (!o) return;
  qcmesh::AnnulusTriangulateOptions d;
  o->delta_max = d.delta_max;
  o->arc_over_delta_max = d.arc_over_delta_max;
  o->solver_h = 0;
}

qcm_status qcm_annulus_mesh(const char* grid_json, const qcm_annulus_options* o, qcm_mesh** out,
                            char** report_json) {
  return guard([&] {
    need(grid_json, "grid");
    need(out, "out");
    qcm_annulus_options opt;
    qcm_annulus_options_default(&opt);
    if (o) opt = *o;
    auto a = qcmesh::grid_annulus_from_json(grid_json);
    qcmesh::ConformalSolveOptions so;
    so.h = opt.solver_h;
    auto model = qcmesh::discrete_conformal_annulus(a, so);
    auto arcs = qcmesh::check_comparable_arcs(model);
    qcmesh::AnnulusTriangulateOptions to;
    to.delta_max = opt.delta_max;
    to.arc_over_delta_max = opt.arc_over_delta_max;
    auto am = qcmesh::annulus_triangulate(a, model, to);
    if (report_json) {
      nlohmann::json j = mesh_summary(am.mesh);
      j["thickness"] = a.thickness;
      j["flux"] = model.flux;
      j["modulus"] = model.modulus;
      j["delta"] = model.delta;
      j["max_adjacent_ratio"] = arcs.max_adjacent_ratio;
      j["max_arc"] = arcs.max_arc;
      j["max_arc_over_delta"] = arcs.max_arc_over_delta;
      j["strip_period"] = am.strip_period;
      j["M"] = am.M;
      j["size_ratio_interior"] = am.size_ratio_interior;
      j["size_ratio_boundary"] = am.size_ratio_boundary;
      *report_json = dup(j.dump(1) + "\n");
    }
    *out = new qcm_mesh{std::move(am.mesh)};
  });
}

qcm_status qcm_modulus(const char* family_json, double* value, int* infinite) {
  return guard([&] {
    need(family_json, "family");
    need(value, "value");
    auto r = qcmesh::discrete_modulus(qcmesh::family_from_json(family_json));
    *value = r.value;
    if (infinite) *infinite = r.infinite ? 1 : 0;
  });
}

void qcm_build_options_default(qcm_build_options* o) {
  if (!o) return;
  qcmesh::PipelineConfig d;
  o->n_max = d.n_max;
  o->N = d.N;
  o->band_shift = d.band_shift;
  o->face_budget = d.face_budget;
  o->delta_max = d.annulus.delta_max;
  o->arc_over_delta_max = d.annulus.arc_over_delta_max;
}

qcm_status qcm_build(const qcm_set* k, const char* eta_spec, const qcm_build_options* o, qcm_result** out) {
  return guard([&] {
    need(k, "set");
    need(eta_spec, "eta");
    need(out, "out");
    qcm_build_options opt;
    qcm_build_options_default(&opt);
    if (o) opt = *o;
    auto res = std::make_unique<qcm_result>();
    res->k = k->k;
    res->eta = qcmesh::parse_eta(eta_spec);
    res->cfg.n_max = opt.n_max;
    res->cfg.N = opt.N;
    res->cfg.band_shift = opt.band_shift;
    res->cfg.face_budget = opt.face_budget;
    res->cfg.annulus.delta_max = opt.delta_max;
    res->cfg.annulus.arc_over_delta_max = opt.arc_over_delta_max;
    res->r = qcmesh::build_triangulation(res->k, res->eta, res->cfg);
    *out = res.release();
  });
}

void qcm_result_free(qcm_result* r) { delete r; }

qcm_status qcm_result_mesh(const qcm_result* r, qcm_mesh** out) {
  return guard([&] {
    need(r, "result");
    need(out, "out");
    *out = new qcm_mesh{r->r.mesh};
  });
}

qcm_status qcm_result_certificate(const qcm_result* r, char** out_json) {
  return guard([&] {
    need(r, "result");
    need(out_json, "out");
    *out_json = dup(qcmesh::certificate_to_json(r->r, r->k, r->eta, r->cfg, qcmesh::mesh_to_json(r->r.mesh)));
  });
}

int qcm_result_passed(const qcm_result* r) {
  return r && r->r.eta.pass && r->r.gluing.ok && r->r.conformity.ok ? 1 : 0;
}

qcm_status qcm_verify(const qcm_mesh* m, const qcm_set* k, const char* eta_spec, int* passed, char** report_json) {
  return guard([&] {
    need(m, "mesh");
    need(k, "set");
    need(eta_spec, "eta");
    need(passed, "passed");
    auto eta = qcmesh::parse_eta(eta_spec);
    auto er = qcmesh::verify_eta_bound(m->m, k->k, eta);
    auto glue = qcmesh::gluing_check(m->m, {}, {});
    nlohmann::json j = mesh_summary(m->m);
    j["mesh_hash"] = qcmesh::fnv1a_hex(qcmesh::mesh_to_json(m->m));
    j["k_hash"] = qcmesh::fnv1a_hex(qcmesh::compact_set_to_json(k->k));
    j["eta"] = eta.str();
    j["eta_bound"] = {{"pass", er.pass},
                      {"faces_checked", er.faces_checked},
                      {"worst_face", er.worst_face},
                      {"worst_ratio", er.worst_ratio},
                      {"failures", er.failures}};
    j["gluing"] = {{"pass", glue.ok},
                   {"interior_edges", glue.interior_edges},
                   {"max_rel_discrepancy", glue.max_rel_discrepancy}};
    const bool ok = er.pass && glue.ok && j["conforming"].get<bool>() && j["sup_mu"].get<double>() < 1;
    j["pass"] = ok;
    *passed = ok ? 1 : 0;
    if (report_json) *report_json = dup(j.dump(1) + "\n");
  });
}

void qcm_render_options_default(qcm_render_options* o) {
  if (!o) return;
  qcmesh::RenderOptions d;
  o->width = d.width;
  o->mu_heat = d.mu_heat;
  o->heat_classes = d.heat_classes;
  o->stroke_faces = d.stroke_faces;
}

qcm_status qcm_render_svg(const qcm_mesh* m, const qcm_render_options* o, const qcm_set* k,
                          const int* contour_levels, size_t count, char** out_svg) {
  return guard([&] {
    need(m, "mesh");
    need(out_svg, "out");
    qcm_render_options opt;
    qcm_render_options_default(&opt);
    if (o) opt = *o;
    qcmesh::RenderOptions ro;
    ro.width = opt.width;
    ro.mu_heat = opt.mu_heat != 0;
    ro.heat_classes = opt.heat_classes;
    ro.stroke_faces = opt.stroke_faces != 0;
    if (count > 0) {
      need(k, "set");
      need(contour_levels, "contour_levels");
      for (size_t i = 0; i < count; ++i) ro.contours.push_back(qcmesh::contours(k->k, contour_levels[i]));
    }
    *out_svg = dup(qcmesh::render_svg(m->m, ro));
  });
}

qcm_status qcm_read_file(const char* path, char** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = dup(qcmesh::read_file(path));
  });
}

qcm_status qcm_write_file(const char* path, const char* data) {
  return guard([&] {
    need(path, "path");
    need(data, "data");
    qcmesh::write_file(path, data);
  });
}

}  // extern "C"
