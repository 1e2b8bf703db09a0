#include "qcmesh/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace qcmesh {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::string heat_color(int k, int classes) {
  // white for mu = 0, towards dark red for |mu| near 1
  double t = classes > 1 ? static_cast<double>(k) / (classes - 1) : 0;
  int r = static_cast<int>(std::lround(255 - 80 * t));
  int gb = static_cast<int>(std::lround(255 * (1 - t)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, gb, gb);
  return buf;
}

}  // namespace

int mu_class(const Mesh& mesh, size_t f, int classes) {
  if (!mesh.has_mu(f)) return 0;
  double a = std::abs(mesh.mu[f]);
  if (!(a >= 1e-12)) return 0;
  int k = 1 + static_cast<int>(a * (classes - 1));
  return std::min(k, classes - 1);
}

std::string render_svg(const Mesh& mesh, const RenderOptions& opt) {
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  auto grow = [&](Vec2 p) {
    x0 = std::min(x0, p.x), y0 = std::min(y0, p.y), x1 = std::max(x1, p.x), y1 = std::max(y1, p.y);
  };
  if (opt.has_view) {
    x0 = opt.view_x0, y0 = opt.view_y0, x1 = opt.view_x1, y1 = opt.view_y1;
  } else {
    for (const auto& f : mesh.faces)
      for (int v : f) grow(mesh.vertices[v]);
    for (const auto& c : opt.contours)
      for (const auto& poly : c.components)
        for (const auto& q : poly) grow({q.x.to_double(), q.y.to_double()});
  }
  if (!(x1 > x0) || !(y1 > y0)) x0 = 0, y0 = 0, x1 = 1, y1 = 1;
  const int width = std::max(opt.width, 1);
  const double scale = width / (x1 - x0);
  const int height = std::max(1, static_cast<int>(std::lround((y1 - y0) * scale)));
  auto X = [&](double x) { return num((x - x0) * scale); };
  auto Y = [&](double y) { return num((y1 - y) * scale); };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
       std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) + "\">\n";

  const int classes = std::max(opt.heat_classes, 2);
  std::map<int, std::vector<size_t>> by_class;
  for (size_t f = 0; f < mesh.faces.size(); ++f) by_class[opt.mu_heat ? mu_class(mesh, f, classes) : 0].push_back(f);

  const std::string stroke = opt.stroke_faces ? " stroke=\"#404040\" stroke-width=\"0.2\"" : " stroke=\"none\"";
  s += "<g id=\"faces\"" + stroke + ">\n";
  for (const auto& [k, faces] : by_class) {
    s += "<g class=\"mu-" + std::to_string(k) + "\" fill=\"" + (opt.mu_heat ? heat_color(k, classes) : "#ffffff") + "\">\n";
    for (size_t f : faces) {
      s += "<path d=\"M";
      for (int c = 0; c < 3; ++c) {
        Vec2 p = mesh.vertices[mesh.faces[f][c]];
        s += (c ? " L" : "") + X(p.x) + " " + Y(p.y);
      }
      s += "Z\"/>\n";
    }
    s += "</g>\n";
  }
  s += "</g>\n";

  if (!opt.contours.empty()) {
    s += "<g id=\"contours\" fill=\"none\" stroke=\"#1f4fbf\" stroke-width=\"1\">\n";
    for (const auto& c : opt.contours)
      for (const auto& poly : c.components) {
        s += "<polygon class=\"gamma-" + std::to_string(c.n) + "\" points=\"";
        for (size_t i = 0; i < poly.size(); ++i)
          s += (i ? " " : "") + X(poly[i].x.to_double()) + "," + Y(poly[i].y.to_double());
        s += "\"/>\n";
      }
    s += "</g>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace qcmesh
