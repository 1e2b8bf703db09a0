#pragma once

#include <string>
#include <vector>

#include "qcmesh/mesh.hpp"
#include "qcmesh/whitney.hpp"

namespace qcmesh {

struct RenderOptions {
  int width = 800;                    // pixels; height follows the aspect ratio
  bool mu_heat = true;                // fill faces by |mu| class
  int heat_classes = 8;               // |mu| in [0,1) split into this many equal classes
  bool stroke_faces = true;
  std::vector<ContourSet> contours;   // drawn on top
  bool has_view = false;              // otherwise the bounding box of mesh and contours
  double view_x0 = 0, view_y0 = 0, view_x1 = 1, view_y1 = 1;
};

// Faces with no datum or |mu| below 1e-12 fall in class 0.
int mu_class(const Mesh& mesh, size_t f, int classes);

std::string render_svg(const Mesh& mesh, const RenderOptions& opt = {});

}  // namespace qcmesh
