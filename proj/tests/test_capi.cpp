#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <json.hpp>
#include <string>

#include "qcmesh/qcmesh.h"

using nlohmann::json;

namespace {

std::string take(char* p) {
  REQUIRE(p != nullptr);
  std::string s = p;
  qcm_string_free(p);
  return s;
}

// r < |z| < R with k sectors and nr geometric rings
std::string polar_json(double r, double R, int k, int nr) {
  json verts = json::array(), faces = json::array();
  for (int i = 0; i <= nr; ++i) {
    double rad = r * std::pow(R / r, static_cast<double>(i) / nr);
    for (int j = 0; j < k; ++j) verts.push_back({rad * std::cos(2 * M_PI * j / k), rad * std::sin(2 * M_PI * j / k)});
  }
  auto id = [&](int i, int j) { return i * k + (j % k); };
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < k; ++j) {
      faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return json{{"vertices", verts}, {"faces", faces}}.dump();
}

const char* kTriangle = R"({"vertices":[[0,0],[1,0],[0.5,0.8660254037844386]],"faces":[[0,1,2]],"mu":[[0.25,-0.125]]})";

}  // namespace

TEST_CASE("version and error slot") {
  REQUIRE(qcm_version() != nullptr);
  CHECK(std::strlen(qcm_version()) > 0);
  qcm_set* k = nullptr;
  CHECK(qcm_set_from_json("{not json", &k) == QCM_ERR_VALIDATION);
  CHECK(k == nullptr);
  CHECK(std::strlen(qcm_last_error()) > 0);
  CHECK(qcm_set_from_json(R"({"points":[[0,0]]})", &k) == QCM_OK);
  CHECK(std::string(qcm_last_error()).empty());
  qcm_set_free(k);
}

TEST_CASE("NULL arguments are validation errors and frees accept NULL") {
  qcm_set* k = nullptr;
  qcm_mesh* m = nullptr;
  char* s = nullptr;
  double d = 0;
  CHECK(qcm_set_from_json(nullptr, &k) == QCM_ERR_VALIDATION);
  CHECK(std::string(qcm_last_error()).find("NULL") != std::string::npos);
  CHECK(qcm_set_from_json(R"({"points":[[0,0]]})", nullptr) == QCM_ERR_VALIDATION);
  CHECK(qcm_set_distance(nullptr, 0, 0, &d) == QCM_ERR_VALIDATION);
  CHECK(qcm_mesh_to_json(nullptr, 0, &s) == QCM_ERR_VALIDATION);
  CHECK(qcm_contours(nullptr, 1, &s) == QCM_ERR_VALIDATION);
  CHECK(qcm_build(nullptr, "pow:c=1,p=1", nullptr, nullptr) == QCM_ERR_VALIDATION);
  CHECK(qcm_render_svg(m, nullptr, nullptr, nullptr, 0, &s) == QCM_ERR_VALIDATION);
  CHECK(qcm_mesh_vertex_count(nullptr) == 0);
  CHECK(qcm_mesh_face_count(nullptr) == 0);
  CHECK(qcm_result_passed(nullptr) == 0);
  qcm_set_free(nullptr);
  qcm_mesh_free(nullptr);
  qcm_result_free(nullptr);
  qcm_string_free(nullptr);
  qcm_build_options_default(nullptr);
}

TEST_CASE("compact set round trip and distance") {
  qcm_set* k = nullptr;
  REQUIRE(qcm_set_from_json(R"({"points":[[0,0]],"segments":[[[0.03125,0],[0.03125,0.015625]]]})", &k) == QCM_OK);
  char* out = nullptr;
  REQUIRE(qcm_set_to_json(k, &out) == QCM_OK);
  std::string first = take(out);
  qcm_set* k2 = nullptr;
  REQUIRE(qcm_set_from_json(first.c_str(), &k2) == QCM_OK);
  REQUIRE(qcm_set_to_json(k2, &out) == QCM_OK);
  CHECK(take(out) == first);

  double d = -1;
  REQUIRE(qcm_set_distance(k, 0.003, 0.004, &d) == QCM_OK);
  CHECK(d == doctest::Approx(0.005).epsilon(1e-14));
  REQUIRE(qcm_set_distance(k, 0.03125, 0.01, &d) == QCM_OK);
  CHECK(d == 0);
  REQUIRE(qcm_set_distance(k, 0.0625, 0.03125, &d) == QCM_OK);
  CHECK(d == doctest::Approx(std::hypot(0.03125, 0.015625)).epsilon(1e-14));
  qcm_set_free(k);
  qcm_set_free(k2);
}

TEST_CASE("a set outside the unit window is refused") {
  qcm_set* k = nullptr;
  qcm_status s = qcm_set_from_json(R"({"points":[[0.5,0]]})", &k);
  if (s == QCM_OK) {
    char* c = nullptr;
    s = qcm_contours(k, 1, &c);
    qcm_string_free(c);
    qcm_set_free(k);
  }
  CHECK(s == QCM_ERR_VALIDATION);
  CHECK(std::string(qcm_last_error()).find("outside") != std::string::npos);
}

TEST_CASE("contours of a point are one closed square loop per stage") {
  qcm_set* k = nullptr;
  REQUIRE(qcm_set_from_json(R"({"points":[[0,0]]})", &k) == QCM_OK);
  for (int n : {1, 2}) {
    char* out = nullptr;
    REQUIRE(qcm_contours(k, n, &out) == QCM_OK);
    auto j = json::parse(take(out));
    REQUIRE(j.contains("components"));
    CHECK(j["components"].size() == 1);
  }
  char* out = nullptr;
  CHECK(qcm_contours(k, 0, &out) == QCM_ERR_VALIDATION);
  qcm_set_free(k);
}

TEST_CASE("sizing functions evaluate and normalize") {
  double v = 0;
  REQUIRE(qcm_eta_eval("pow:c=0.125,p=1", 0.16, &v) == QCM_OK);
  CHECK(v == doctest::Approx(0.02).epsilon(1e-14));
  REQUIRE(qcm_eta_eval("pow:c=4,p=2", 0.5, &v) == QCM_OK);
  CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
  char* out = nullptr;
  REQUIRE(qcm_eta_normalize("pow:c=4,p=2", &out) == QCM_OK);
  std::string norm = take(out);
  REQUIRE(qcm_eta_eval(norm.c_str(), 0.3, &v) == QCM_OK);
  CHECK(v == doctest::Approx(4 * 0.09).epsilon(1e-14));
  CHECK(qcm_eta_eval("cubic:c=1", 0.1, &v) == QCM_ERR_VALIDATION);
  CHECK(qcm_eta_eval("pow:c=-1,p=1", 0.1, &v) == QCM_ERR_VALIDATION);
}

TEST_CASE("mesh accessors and JSON round trip") {
  qcm_mesh* m = nullptr;
  REQUIRE(qcm_mesh_from_json(kTriangle, &m) == QCM_OK);
  CHECK(qcm_mesh_vertex_count(m) == 3);
  CHECK(qcm_mesh_face_count(m) == 1);
  double x = 0, y = 0;
  REQUIRE(qcm_mesh_vertex(m, 2, &x, &y) == QCM_OK);
  CHECK(x == 0.5);
  CHECK(y == doctest::Approx(std::sqrt(3.0) / 2));
  CHECK(qcm_mesh_vertex(m, 3, &x, &y) == QCM_ERR_VALIDATION);
  int32_t f[3] = {-1, -1, -1};
  REQUIRE(qcm_mesh_face(m, 0, f) == QCM_OK);
  CHECK((f[0] == 0 && f[1] == 1 && f[2] == 2));
  CHECK(qcm_mesh_face(m, 1, f) == QCM_ERR_VALIDATION);
  double re = 0, im = 0;
  int has = 0;
  REQUIRE(qcm_mesh_mu(m, 0, &re, &im, &has) == QCM_OK);
  CHECK(has == 1);
  CHECK(re == 0.25);
  CHECK(im == -0.125);

  char* out = nullptr;
  REQUIRE(qcm_mesh_to_json(m, 0, &out) == QCM_OK);
  std::string a = take(out);
  qcm_mesh* m2 = nullptr;
  REQUIRE(qcm_mesh_from_json(a.c_str(), &m2) == QCM_OK);
  REQUIRE(qcm_mesh_to_json(m2, 0, &out) == QCM_OK);
  CHECK(take(out) == a);

  REQUIRE(qcm_mesh_report(m, &out) == QCM_OK);
  auto r = json::parse(take(out));
  CHECK(r["faces"] == 1);
  CHECK(r["conforming"] == true);
  CHECK(r["max_degree"] == 2);
  CHECK(r["min_angle_deg"].get<double>() == doctest::Approx(60).epsilon(1e-9));
  // the summary measures the geometry of the faces, which here is equilateral
  CHECK(r["sup_mu"].get<double>() < 1e-12);
  qcm_mesh_free(m);
  qcm_mesh_free(m2);

  CHECK(qcm_mesh_from_json(R"({"vertices":[[0,0]],"faces":[[0,1,2]]})", &m) == QCM_ERR_VALIDATION);
  CHECK(qcm_mesh_from_json(R"({"faces":[]})", &m) == QCM_ERR_VALIDATION);
}

TEST_CASE("strip mesh from random partitions") {
  char *top = nullptr, *bottom = nullptr;
  REQUIRE(qcm_random_partition(11, 2, 2, &top) == QCM_OK);
  REQUIRE(qcm_random_partition(12, 2, 2, &bottom) == QCM_OK);
  std::string t = take(top), b = take(bottom);
  // same seed, same partition
  char* again = nullptr;
  REQUIRE(qcm_random_partition(11, 2, 2, &again) == QCM_OK);
  CHECK(take(again) == t);

  qcm_mesh* m = nullptr;
  REQUIRE(qcm_strip_mesh(t.c_str(), b.c_str(), 2, &m) == QCM_OK);
  CHECK(qcm_mesh_face_count(m) > 0);
  char* out = nullptr;
  REQUIRE(qcm_mesh_report(m, &out) == QCM_OK);
  auto r = json::parse(take(out));
  CHECK(r["conforming"] == true);
  CHECK(r["sup_mu"].get<double>() < 1);
  qcm_mesh_free(m);

  // period mismatch and a ratio bound below 1
  char* odd = nullptr;
  REQUIRE(qcm_random_partition(13, 2, 3, &odd) == QCM_OK);
  std::string o = take(odd);
  CHECK(qcm_strip_mesh(t.c_str(), o.c_str(), 2, &m) == QCM_ERR_VALIDATION);
  CHECK(qcm_random_partition(1, 0.5, 2, &odd) == QCM_ERR_VALIDATION);
}

TEST_CASE("annulus mesh of a round annulus") {
  qcm_annulus_options o;
  qcm_annulus_options_default(&o);
  o.delta_max = 10;
  o.arc_over_delta_max = 10;
  qcm_mesh* m = nullptr;
  char* rep = nullptr;
  std::string grid = polar_json(1, 2.2, 256, 32);
  REQUIRE(qcm_annulus_mesh(grid.c_str(), &o, &m, &rep) == QCM_OK);
  auto r = json::parse(take(rep));
  CHECK(r["thickness"].get<int>() >= 4);
  // log(R / r) / 2 pi for the round annulus
  CHECK(r["modulus"].get<double>() == doctest::Approx(std::log(2.2) / (2 * M_PI)).epsilon(0.02));
  CHECK(qcm_mesh_face_count(m) > 0);
  char* out = nullptr;
  REQUIRE(qcm_mesh_report(m, &out) == QCM_OK);
  auto s = json::parse(take(out));
  CHECK(s["conforming"] == true);
  CHECK(s["components"] == 1);
  qcm_mesh_free(m);

  // a disc is not an annulus
  const char* disc = R"({"vertices":[[0,0],[1,0],[0,1]],"faces":[[0,1,2]]})";
  CHECK(qcm_annulus_mesh(disc, &o, &m, &rep) == QCM_ERR_VALIDATION);
}

TEST_CASE("modulus of a rectangle") {
  double v = 0;
  int inf = -1;
  const char* fam = R"({"h":0.0625,"domain":{"add":[{"rect":[0,0,2,1]}]},
    "E":{"region":{"rect":[-9,-9,0,9]}},"F":{"region":{"rect":[2,-9,9,9]}}})";
  REQUIRE(qcm_modulus(fam, &v, &inf) == QCM_OK);
  CHECK(inf == 0);
  // curves joining the short sides of a 2 x 1 rectangle: height / length
  CHECK(v == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(qcm_modulus("{", &v, &inf) == QCM_ERR_VALIDATION);
}

TEST_CASE("build, verify and render through handles") {
  qcm_set* k = nullptr;
  REQUIRE(qcm_set_from_json(R"({"points":[[0,0]]})", &k) == QCM_OK);

  qcm_build_options faithful;
  qcm_build_options_default(&faithful);
  CHECK(faithful.N == 20);
  CHECK(faithful.band_shift == 2);
  faithful.n_max = 3;
  qcm_result* r = nullptr;
  CHECK(qcm_build(k, "pow:c=0.125,p=1", &faithful, &r) == QCM_ERR_HYPOTHESIS);
  CHECK(r == nullptr);
  CHECK(std::string(qcm_last_error()).find("budget") != std::string::npos);

  qcm_build_options o = faithful;
  o.n_max = 0;
  REQUIRE(qcm_build(k, "pow:c=1,p=1", &o, &r) == QCM_OK);
  qcm_mesh* m = nullptr;
  REQUIRE(qcm_result_mesh(r, &m) == QCM_OK);
  CHECK(qcm_mesh_face_count(m) > 0);
  char* cert = nullptr;
  REQUIRE(qcm_result_certificate(r, &cert) == QCM_OK);
  auto c = json::parse(take(cert));
  CHECK(c.is_object());

  // the base frame has faces touching K, where eta vanishes
  int passed = -1;
  char* rep = nullptr;
  REQUIRE(qcm_verify(m, k, "pow:c=1,p=1", &passed, &rep) == QCM_OK);
  auto v = json::parse(take(rep));
  CHECK(passed == qcm_result_passed(r));
  CHECK(passed == 0);
  CHECK(v["eta_bound"]["pass"] == false);
  CHECK(v["gluing"]["pass"] == true);
  CHECK(v["conforming"] == true);
  CHECK(v["pass"] == false);
  CHECK(qcm_verify(m, k, "pow:c=1", &passed, nullptr) == QCM_ERR_VALIDATION);

  qcm_render_options ro;
  qcm_render_options_default(&ro);
  int levels[2] = {1, 2};
  char* svg = nullptr;
  REQUIRE(qcm_render_svg(m, &ro, k, levels, 2, &svg) == QCM_OK);
  std::string s = take(svg);
  CHECK(s.rfind("<?xml", 0) == 0);
  CHECK(s.find("<g id=\"contours\"") != std::string::npos);
  CHECK(s.find("</svg>") != std::string::npos);
  CHECK(qcm_render_svg(m, &ro, nullptr, levels, 2, &svg) == QCM_ERR_VALIDATION);

  qcm_mesh_free(m);
  qcm_result_free(r);
  qcm_set_free(k);
}

TEST_CASE("file helpers") {
  const std::string path = "qcm_capi_file_test.txt";
  REQUIRE(qcm_write_file(path.c_str(), "abc\n") == QCM_OK);
  char* out = nullptr;
  REQUIRE(qcm_read_file(path.c_str(), &out) == QCM_OK);
  CHECK(take(out) == "abc\n");
  std::remove(path.c_str());
  CHECK(qcm_read_file("no/such/file.json", &out) == QCM_ERR_IO);
  CHECK(qcm_write_file("no/such/dir/file.json", "x") == QCM_ERR_IO);
}
