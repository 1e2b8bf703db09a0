#include "qcmesh/sizing.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

#include "qcmesh/error.hpp"

namespace qcmesh {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

SizingFn SizingFn::power(double c, double p) {
  if (!(c > 0) || !std::isfinite(c)) fail(Status::validation, "eta: c must be positive");
  if (!(p >= 1) || !std::isfinite(p)) fail(Status::validation, "eta: p must be at least 1");
  SizingFn s;
  s.power_ = true;
  s.c_ = c;
  s.p_ = p;
  return s;
}

SizingFn SizingFn::table(std::vector<std::pair<double, double>> knots) {
  if (knots.size() < 2) fail(Status::validation, "eta table needs at least two knots");
  if (knots[0].first != 0 || knots[0].second != 0) fail(Status::validation, "eta table must start at (0,0)");
  for (size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i].first > knots[i - 1].first)) fail(Status::validation, "eta table knots not strictly increasing in t");
    if (!(knots[i].second > knots[i - 1].second))
      fail(Status::validation, "eta table values not strictly increasing at knot " + std::to_string(i));
  }
  SizingFn s;
  s.power_ = false;
  s.knots_ = std::move(knots);
  return s;
}

double SizingFn::operator()(double t) const {
  if (t <= 0) return 0;
  if (power_) return c_ * std::pow(t, p_);
  size_t i = 1;
  while (i + 1 < knots_.size() && knots_[i].first < t) ++i;
  auto [t0, v0] = knots_[i - 1];
  auto [t1, v1] = knots_[i];
  return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
}

std::string SizingFn::str() const {
  if (power_) return "pow:c=" + format_double(c_) + ",p=" + format_double(p_);
  std::string s = "table:[";
  for (size_t i = 0; i < knots_.size(); ++i) {
    if (i) s += ",";
    s += "[" + format_double(knots_[i].first) + "," + format_double(knots_[i].second) + "]";
  }
  return s + "]";
}

namespace {

double parse_number(const std::string& s, const std::string& what) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(Status::validation, "eta: bad number for " + what);
  return v;
}

}  // namespace

SizingFn parse_eta(const std::string& spec) {
  if (spec.rfind("pow:", 0) == 0) {
    double c = NAN, p = NAN;
    std::string body = spec.substr(4);
    size_t pos = 0;
    while (pos <= body.size()) {
      size_t comma = body.find(',', pos);
      std::string item = body.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      auto eq = item.find('=');
      if (eq == std::string::npos) fail(Status::validation, "eta: expected key=value in '" + item + "'");
      std::string key = item.substr(0, eq), val = item.substr(eq + 1);
      if (key == "c")
        c = parse_number(val, "c");
      else if (key == "p")
        p = parse_number(val, "p");
      else
        fail(Status::validation, "eta: unknown key '" + key + "'");
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (std::isnan(c) || std::isnan(p)) fail(Status::validation, "eta: pow needs c and p");
    return SizingFn::power(c, p);
  }
  if (spec.rfind("table:", 0) == 0) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(spec.substr(6));
    } catch (const std::exception& e) {
      fail(Status::validation, std::string("eta: bad table: ") + e.what());
    }
    std::vector<std::pair<double, double>> knots;
    if (!j.is_array()) fail(Status::validation, "eta: table must be a list of [t,eta] pairs");
    for (auto& k : j) {
      if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number())
        fail(Status::validation, "eta: table entries must be [t,eta]");
      knots.emplace_back(k[0].get<double>(), k[1].get<double>());
    }
    return SizingFn::table(std::move(knots));
  }
  fail(Status::validation, "eta: expected 'pow:c=..,p=..' or 'table:[...]'");
}

}  // namespace qcmesh
