#ifndef QCMESH_QCMESH_H
#define QCMESH_QCMESH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define QCM_API __declspec(dllexport)
#else
#define QCM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qcm_status {
  QCM_OK = 0,
  QCM_ERR_IO = 1,
  QCM_ERR_VALIDATION = 2,
  QCM_ERR_HYPOTHESIS = 3,
  QCM_ERR_SOLVER = 4,
  QCM_ERR_INTERNAL = 5
} qcm_status;

typedef struct qcm_set qcm_set;        /* compact set K with its window */
typedef struct qcm_mesh qcm_mesh;      /* triangle mesh with optional per-face mu */
typedef struct qcm_result qcm_result;  /* output of qcm_build */

/* Message of the last failing call on this thread; never NULL. */
QCM_API const char* qcm_last_error(void);
QCM_API const char* qcm_version(void);
/* Strings returned through char** out-parameters are owned by the caller. */
QCM_API void qcm_string_free(char* s);

/* Compact sets (scene JSON). */
QCM_API qcm_status qcm_set_from_json(const char* json, qcm_set** out);
QCM_API qcm_status qcm_set_to_json(const qcm_set* k, char** out);
QCM_API void qcm_set_free(qcm_set* k);
QCM_API qcm_status qcm_set_distance(const qcm_set* k, double x, double y, double* out);

/* Contours Gamma_n as JSON. */
QCM_API qcm_status qcm_contours(const qcm_set* k, int n, char** out_json);

/* Sizing functions: "pow:c=...,p=..." or "table:[[t,eta],...]". */
QCM_API qcm_status qcm_eta_eval(const char* spec, double t, double* out);
QCM_API qcm_status qcm_eta_normalize(const char* spec, char** out);

/* Meshes. */
QCM_API qcm_status qcm_mesh_from_json(const char* json, qcm_mesh** out);
QCM_API qcm_status qcm_mesh_to_json(const qcm_mesh* m, int exact, char** out);
QCM_API void qcm_mesh_free(qcm_mesh* m);
QCM_API size_t qcm_mesh_vertex_count(const qcm_mesh* m);
QCM_API size_t qcm_mesh_face_count(const qcm_mesh* m);
QCM_API qcm_status qcm_mesh_vertex(const qcm_mesh* m, size_t v, double* x, double* y);
QCM_API qcm_status qcm_mesh_face(const qcm_mesh* m, size_t f, int32_t out[3]);
/* Beltrami coefficient of face f; has_mu is 0 when the face carries none. */
QCM_API qcm_status qcm_mesh_mu(const qcm_mesh* m, size_t f, double* re, double* im, int* has_mu);
/* Conformity, degree, angle and dilatation summary as JSON. */
QCM_API qcm_status qcm_mesh_report(const qcm_mesh* m, char** out_json);

/* Strip mesher. Partitions are JSON {"x": [...], "period": L}. */
QCM_API qcm_status qcm_strip_mesh(const char* top_json, const char* bottom_json, double M, qcm_mesh** out);
QCM_API qcm_status qcm_random_partition(uint64_t seed, double M, double period, char** out_json);

/* Annulus mesher: grid annulus JSON in, mesh plus a JSON report out. */
typedef struct qcm_annulus_options {
  double delta_max;
  double arc_over_delta_max;
  double solver_h;  /* 0 keeps the grid */
} qcm_annulus_options;
QCM_API void qcm_annulus_options_default(qcm_annulus_options* o);
QCM_API qcm_status qcm_annulus_mesh(const char* grid_json, const qcm_annulus_options* o, qcm_mesh** out,
                                    char** report_json);

/* Discrete modulus of a path family given as JSON. */
QCM_API qcm_status qcm_modulus(const char* family_json, double* value, int* infinite);

/* Pipeline. */
typedef struct qcm_build_options {
  int n_max;
  int N;
  int band_shift;
  double face_budget;
  double delta_max;
  double arc_over_delta_max;
} qcm_build_options;
/* The faithful schedule: N = 20, band scale 16^-(n+2), strict annulus hypotheses. */
QCM_API void qcm_build_options_default(qcm_build_options* o);
QCM_API qcm_status qcm_build(const qcm_set* k, const char* eta_spec, const qcm_build_options* o, qcm_result** out);
QCM_API void qcm_result_free(qcm_result* r);
/* A copy of the mesh; free it with qcm_mesh_free. */
QCM_API qcm_status qcm_result_mesh(const qcm_result* r, qcm_mesh** out);
QCM_API qcm_status qcm_result_certificate(const qcm_result* r, char** out_json);
/* 1 when the eta bound, gluing and conformity all hold. */
QCM_API int qcm_result_passed(const qcm_result* r);

/* Checks of an existing mesh against K and eta. passed is 1 when every check holds. */
QCM_API qcm_status qcm_verify(const qcm_mesh* m, const qcm_set* k, const char* eta_spec, int* passed,
                              char** report_json);

/* SVG. contour_levels lists the n of the contours to overlay (k may be NULL when count is 0). */
typedef struct qcm_render_options {
  int width;
  int mu_heat;
  int heat_classes;
  int stroke_faces;
} qcm_render_options;
QCM_API void qcm_render_options_default(qcm_render_options* o);
QCM_API qcm_status qcm_render_svg(const qcm_mesh* m, const qcm_render_options* o, const qcm_set* k,
                                  const int* contour_levels, size_t count, char** out_svg);

QCM_API qcm_status qcm_read_file(const char* path, char** out);
QCM_API qcm_status qcm_write_file(const char* path, const char* data);

#ifdef __cplusplus
}
#endif

#endif
