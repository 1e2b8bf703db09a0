#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace qcmesh {

// value = m * 2^-e, with m odd (or m == 0 and e == 0)
struct Dyadic {
  int64_t m = 0;
  int32_t e = 0;

  Dyadic() = default;
  Dyadic(int64_t mantissa, int32_t exponent);
  static Dyadic from_int(int64_t v) { return Dyadic(v, 0); }
  static Dyadic from_double(double v);  // throws unless v is exactly representable
  static Dyadic floor_of(double v, int max_exponent);  // largest dyadic <= v with e <= max_exponent

  double to_double() const;
  bool is_zero() const { return m == 0; }

  // fixed-point mantissa at scale 2^-p; throws if not representable or overflowing
  int64_t at_scale(int p) const;
  static Dyadic from_scaled(int64_t v, int p) { return Dyadic(v, p); }

  Dyadic operator-() const { return Dyadic(-m, e); }
  friend Dyadic operator+(const Dyadic& a, const Dyadic& b);
  friend Dyadic operator-(const Dyadic& a, const Dyadic& b) { return a + (-b); }
  friend Dyadic operator*(const Dyadic& a, const Dyadic& b);
  friend std::strong_ordering operator<=>(const Dyadic& a, const Dyadic& b);
  friend bool operator==(const Dyadic& a, const Dyadic& b) { return a.m == b.m && a.e == b.e; }

  std::string str() const;
};

struct DyadicPoint {
  Dyadic x, y;
  friend bool operator==(const DyadicPoint&, const DyadicPoint&) = default;
};

}  // namespace qcmesh
