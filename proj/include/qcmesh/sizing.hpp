#pragma once

#include <string>
#include <utility>
#include <vector>

namespace qcmesh {

// Sizing function: c*t^p, or a strictly increasing piecewise-linear table through (0,0).
class SizingFn {
public:
  static SizingFn power(double c, double p);
  static SizingFn table(std::vector<std::pair<double, double>> knots);

  double operator()(double t) const;
  std::string str() const;

  bool is_power() const { return power_; }
  double c() const { return c_; }
  double p() const { return p_; }
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }

private:
  bool power_ = true;
  double c_ = 1, p_ = 1;
  std::vector<std::pair<double, double>> knots_;
};

SizingFn parse_eta(const std::string& spec);

std::string format_double(double v);

}  // namespace qcmesh
