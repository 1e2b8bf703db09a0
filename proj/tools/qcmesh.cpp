#include <CLI11.hpp>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qcmesh/qcmesh.h"

namespace {

// exit codes: 0 success, 2 validation, 3 hypothesis, 4 solver; io and internal errors give 1
int exit_code(qcm_status s) {
  switch (s) {
    case QCM_OK: return 0;
    case QCM_ERR_VALIDATION: return 2;
    case QCM_ERR_HYPOTHESIS: return 3;
    case QCM_ERR_SOLVER: return 4;
    default: return 1;
  }
}

struct Failure {
  qcm_status status;
};

void check(qcm_status s) {
  if (s != QCM_OK) throw Failure{s};
}

std::string take(char* p) {
  std::string s = p ? p : "";
  qcm_string_free(p);
  return s;
}

std::string slurp(const std::string& path) {
  char* p = nullptr;
  check(qcm_read_file(path.c_str(), &p));
  return take(p);
}

void emit(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-") {
    std::fwrite(data.data(), 1, data.size(), stdout);
    return;
  }
  check(qcm_write_file(path.c_str(), data.c_str()));
}

struct Set {
  qcm_set* k = nullptr;
  explicit Set(const std::string& path) { check(qcm_set_from_json(slurp(path).c_str(), &k)); }
  ~Set() { qcm_set_free(k); }
};

struct MeshHandle {
  qcm_mesh* m = nullptr;
  MeshHandle() = default;
  explicit MeshHandle(const std::string& path) { check(qcm_mesh_from_json(slurp(path).c_str(), &m)); }
  ~MeshHandle() { qcm_mesh_free(m); }
  std::string json(bool exact = false) const {
    char* p = nullptr;
    check(qcm_mesh_to_json(m, exact ? 1 : 0, &p));
    return take(p);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Triangulations adapted to a compact set K, with dilatation certificates"};
  app.require_subcommand(1);
  uint64_t seed = 1;

  // contours
  std::string k_path, out_path;
  int n = 1;
  auto* c_contours = app.add_subcommand("contours", "print the contour Gamma_n of K as JSON");
  c_contours->add_option("--k", k_path, "scene JSON")->required();
  c_contours->add_option("--n", n, "stage")->required();
  c_contours->add_option("--out", out_path, "output file (default stdout)");

  // strip-mesh
  std::string top_path, bottom_path, report_path;
  double M = 1, period = 2;
  bool random_input = false, exact = false;
  auto* c_strip = app.add_subcommand("strip-mesh", "triangulate the strip {0 < y < 2} between two partitions");
  c_strip->add_option("--top", top_path, "top partition JSON");
  c_strip->add_option("--bottom", bottom_path, "bottom partition JSON");
  c_strip->add_flag("--random", random_input, "use random periodic partitions drawn from --seed");
  c_strip->add_option("--seed", seed, "seed of the random partitions");
  c_strip->add_option("--period", period, "period of random partitions");
  c_strip->add_option("--M", M, "adjacent gap ratio bound")->required();
  c_strip->add_option("--out", out_path, "mesh JSON (default stdout)");
  c_strip->add_option("--report", report_path, "mesh summary JSON");
  c_strip->add_flag("--exact", exact, "write dyadic coordinates");

  // annulus-mesh
  std::string grid_path;
  qcm_annulus_options aopt;
  qcm_annulus_options_default(&aopt);
  auto* c_ann = app.add_subcommand("annulus-mesh", "mesh a grid annulus through its round model");
  c_ann->add_option("--grid", grid_path, "grid annulus JSON")->required();
  c_ann->add_option("--delta-max", aopt.delta_max, "largest accepted delta");
  c_ann->add_option("--arc-max", aopt.arc_over_delta_max, "largest accepted sub-arc over delta");
  c_ann->add_option("--solver-h", aopt.solver_h, "refine the solver grid to edges <= h");
  c_ann->add_option("--out", out_path, "mesh JSON (default stdout)");
  c_ann->add_option("--report", report_path, "annulus report JSON");

  // modulus
  std::string family_path;
  auto* c_mod = app.add_subcommand("modulus", "discrete modulus of a path family");
  c_mod->add_option("--family", family_path, "path family JSON")->required();

  // build
  std::string eta_spec, cert_path;
  qcm_build_options bopt;
  qcm_build_options_default(&bopt);
  auto* c_build = app.add_subcommand("build", "staged triangulation of the window around K");
  c_build->add_option("--k", k_path, "scene JSON")->required();
  c_build->add_option("--eta", eta_spec, "sizing function, pow:c=..,p=.. or table:[[t,eta],..]")->required();
  c_build->add_option("--n-max", bopt.n_max, "number of stages");
  c_build->add_option("--N", bopt.N, "band width in units of eps_n");
  c_build->add_option("--band-shift", bopt.band_shift, "band scale 16^-(n + shift)");
  c_build->add_option("--budget", bopt.face_budget, "refuse runs estimated above this many faces");
  c_build->add_option("--delta-max", bopt.delta_max, "largest accepted annulus delta");
  c_build->add_option("--arc-max", bopt.arc_over_delta_max, "largest accepted sub-arc over delta");
  c_build->add_option("--out", out_path, "mesh JSON");
  c_build->add_option("--cert", cert_path, "certificate JSON");
  c_build->add_flag("--exact", exact, "write dyadic coordinates where available");

  // verify / certify
  std::string mesh_path;
  auto* c_verify = app.add_subcommand("verify", "check a mesh against K and eta; exit 0 iff every check passes");
  c_verify->add_option("mesh", mesh_path, "mesh JSON")->required();
  c_verify->add_option("--k", k_path, "scene JSON")->required();
  c_verify->add_option("--eta", eta_spec, "sizing function")->required();
  c_verify->add_option("--report", report_path, "report JSON");
  auto* c_certify = app.add_subcommand("certify", "write the check report of a mesh as a certificate");
  c_certify->add_option("mesh", mesh_path, "mesh JSON")->required();
  c_certify->add_option("--k", k_path, "scene JSON")->required();
  c_certify->add_option("--eta", eta_spec, "sizing function")->required();
  c_certify->add_option("--out", out_path, "certificate JSON (default stdout)");

  // render
  qcm_render_options ropt;
  qcm_render_options_default(&ropt);
  std::vector<int> levels;
  bool no_heat = false, no_stroke = false;
  auto* c_render = app.add_subcommand("render", "SVG drawing of a mesh");
  c_render->add_option("mesh", mesh_path, "mesh JSON")->required();
  c_render->add_option("--k", k_path, "scene JSON, needed for --contours");
  c_render->add_option("--contours", levels, "contour stages to overlay")->delimiter(',');
  c_render->add_option("--width", ropt.width, "width in pixels");
  c_render->add_option("--classes", ropt.heat_classes, "number of |mu| classes");
  c_render->add_flag("--no-heat", no_heat, "plain white faces");
  c_render->add_flag("--no-stroke", no_stroke, "do not stroke face edges");
  c_render->add_option("--out", out_path, "SVG file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_contours) {
      Set k(k_path);
      char* p = nullptr;
      check(qcm_contours(k.k, n, &p));
      emit(out_path, take(p));
    } else if (*c_strip) {
      std::string top, bottom;
      if (random_input) {
        char* p = nullptr;
        check(qcm_random_partition(seed, M, period, &p));
        top = take(p);
        check(qcm_random_partition(seed + 1, M, period, &p));
        bottom = take(p);
      } else {
        if (top_path.empty() || bottom_path.empty()) {
          std::fprintf(stderr, "strip-mesh: give --top and --bottom, or --random\n");
          return 2;
        }
        top = slurp(top_path);
        bottom = slurp(bottom_path);
      }
      MeshHandle m;
      check(qcm_strip_mesh(top.c_str(), bottom.c_str(), M, &m.m));
      emit(out_path, m.json(exact));
      if (!report_path.empty()) {
        char* p = nullptr;
        check(qcm_mesh_report(m.m, &p));
        emit(report_path, take(p));
      }
    } else if (*c_ann) {
      MeshHandle m;
      char* rep = nullptr;
      check(qcm_annulus_mesh(slurp(grid_path).c_str(), &aopt, &m.m, &rep));
      std::string r = take(rep);
      emit(out_path, m.json());
      if (!report_path.empty()) emit(report_path, r);
    } else if (*c_mod) {
      double value = 0;
      int infinite = 0;
      check(qcm_modulus(slurp(family_path).c_str(), &value, &infinite));
      if (infinite)
        std::printf("inf\n");
      else
        std::printf("%.17g\n", value);
    } else if (*c_build) {
      Set k(k_path);
      qcm_result* r = nullptr;
      check(qcm_build(k.k, eta_spec.c_str(), &bopt, &r));
      struct Free {
        qcm_result* r;
        ~Free() { qcm_result_free(r); }
      } hold{r};
      MeshHandle m;
      check(qcm_result_mesh(r, &m.m));
      if (!out_path.empty()) emit(out_path, m.json(exact));
      char* cert = nullptr;
      check(qcm_result_certificate(r, &cert));
      std::string c = take(cert);
      if (!cert_path.empty()) emit(cert_path, c);
      if (out_path.empty() && cert_path.empty()) emit("", c);
      if (!qcm_result_passed(r)) {
        std::fprintf(stderr, "build: the output failed its own checks\n");
        return 2;
      }
    } else if (*c_verify || *c_certify) {
      MeshHandle m(mesh_path);
      Set k(k_path);
      int passed = 0;
      char* rep = nullptr;
      check(qcm_verify(m.m, k.k, eta_spec.c_str(), &passed, &rep));
      std::string r = take(rep);
      if (*c_certify) {
        emit(out_path, r);
        return 0;
      }
      if (!report_path.empty()) emit(report_path, r);
      std::printf("%s\n", passed ? "pass" : "fail");
      return passed ? 0 : 2;
    } else if (*c_render) {
      MeshHandle m(mesh_path);
      std::optional<Set> k;
      if (!levels.empty()) {
        if (k_path.empty()) {
          std::fprintf(stderr, "render: --contours needs --k\n");
          return 2;
        }
        k.emplace(k_path);
      }
      ropt.mu_heat = no_heat ? 0 : 1;
      ropt.stroke_faces = no_stroke ? 0 : 1;
      char* svg = nullptr;
      check(qcm_render_svg(m.m, &ropt, k ? k->k : nullptr, levels.data(), levels.size(), &svg));
      emit(out_path, take(svg));
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", qcm_last_error());
    return exit_code(f.status);
  }
  return 0;
}
