#pragma once

#include <string>
#include <vector>

#include "qcmesh/annulus.hpp"
#include "qcmesh/dilatation.hpp"
#include "qcmesh/mesh.hpp"
#include "qcmesh/sizing.hpp"
#include "qcmesh/whitney.hpp"

namespace qcmesh {

struct PipelineConfig {
  int N = 20;
  int n_max = 3;
  int band_shift = 2;           // band scale b_n = 16^-(n + band_shift)
  double face_budget = 1.2e7;   // estimated faces above this are refused
  AnnulusTriangulateOptions annulus;
  ConformalSolveOptions solver;
  std::string dump_path;        // a failing grid annulus is written here when set
};

struct StageSchedule {
  int n = 0;
  double band_scale = 0;  // b_n
  double eps = 0;         // power of two, <= min(b_n / N, eta(b_n)) / 2
  double delta = 0;       // eps_{n+1} / 4, side of the fine grid inside the band
  double side = 0;        // lattice side along the band: eps / 4
};

// Throws Error(validation) for N < 1 or n < 1, Error(hypothesis) when eta(b_n) underflows.
StageSchedule epsilon_schedule(int n, const SizingFn& eta, int N, int band_shift = 2);

struct CostEstimate {
  std::vector<double> band_faces;  // per stage
  double eta_faces = 0;            // graded lattice outside the bands
  double total_faces = 0;
  bool within_budget = true;
  std::string reason;
};

CostEstimate estimate_cost(const CompactSet& k, const SizingFn& eta, const PipelineConfig& cfg);

struct AnnulusStageReport {
  int thickness = 0;
  size_t grid_faces = 0, mesh_faces = 0;
  size_t inner_marked = 0, outer_marked = 0;
  double flux = 0, delta = 0;
  double max_adjacent_ratio = 0, max_arc_over_delta = 0, M = 0;
  double inrad = 0, gap = 0;
  double size_ratio_interior = 0, size_ratio_boundary = 0;
};

struct StageReport {
  int n = 0;
  StageSchedule schedule;
  size_t contour_components = 0;
  size_t V = 0, W = 0, annulus_faces = 0, faces = 0;
  size_t repaired_faces = 0;  // faces moved into the band to keep every component an annulus
  double band_area = 0;
  double sup_mu = 0;          // over this stage's annulus faces
  double w_sup_mu = 0;        // over the W faces next to the band
  bool nested = true;         // U_n lies in in(U_{n-1}), exact check
  std::vector<AnnulusStageReport> annuli;
};

struct StageState {
  int n = 0;
  Mesh mesh;                    // T_n, faces tagged tag_grid or tag_annulus
  std::vector<int> stage_of;    // per face: 0 for lattice faces, n for faces of the n-th annuli
  std::vector<uint8_t> inside;  // per face: W_n
  std::vector<StageReport> reports;
};

// One induction step: classifies T_{n-1} against U_n, replaces the band by meshed annuli.
// Throws Error(hypothesis) when an annulus is thinner than N or breaks the mesher's hypotheses.
StageState build_stage(const StageState& prev, const CompactSet& k, const SizingFn& eta,
                       const PipelineConfig& cfg, const ContourSet& gamma);

struct EtaReport {
  bool pass = true;
  size_t faces_checked = 0;
  long worst_face = -1;
  double worst_ratio = 0;      // max diam(T) / eta(dist(z, K)) over faces and vertices
  std::vector<size_t> failures;  // first failing faces, at most 32
};

// diam(T) <= eta(dist(z, K)) for every face T and each of its vertices z.
EtaReport verify_eta_bound(const Mesh& mesh, const CompactSet& k, const SizingFn& eta);

struct PipelineResult {
  Mesh mesh;
  std::vector<StageReport> stages;
  CostEstimate cost;
  DilatationCertificate cert;
  EtaReport eta;
  GluingReport gluing;
  ConformityReport conformity;
  int max_degree = 0;
  double min_angle_deg = 0;
  double residual_area = 0;   // area left unmeshed around K
  double residual_bound = 0;  // area of {dist(z, K) <= 3 * 16^-n_max}, sampled
};

// Base frame: lattice covering the window, refined by eta and the band zones, then stages
// 1..n_max. The fine grid inside the last band is dropped and reported as the residual.
PipelineResult build_triangulation(const CompactSet& k, const SizingFn& eta, const PipelineConfig& cfg);

std::string certificate_to_json(const PipelineResult& r, const CompactSet& k, const SizingFn& eta,
                                const PipelineConfig& cfg, const std::string& mesh_json);

double distance_to_set(const CompactSet& k, Vec2 p);

}  // namespace qcmesh
