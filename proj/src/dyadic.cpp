#include "qcmesh/dyadic.hpp"

#include <cmath>
#include <limits>

#include "qcmesh/error.hpp"

namespace qcmesh {

namespace {

int64_t checked(__int128 v) {
  if (v > std::numeric_limits<int64_t>::max() || v < std::numeric_limits<int64_t>::min())
    fail(Status::validation, "dyadic mantissa overflow");
  return static_cast<int64_t>(v);
}

}  // namespace

Dyadic::Dyadic(int64_t mantissa, int32_t exponent) : m(mantissa), e(exponent) {
  if (m == 0) {
    e = 0;
    return;
  }
  while ((m & 1) == 0) {
    m /= 2;
    --e;
  }
}

Dyadic Dyadic::from_double(double v) {
  if (!std::isfinite(v)) fail(Status::validation, "non-finite coordinate");
  if (v == 0.0) return Dyadic();
  int exp2 = 0;
  double frac = std::frexp(v, &exp2);
  // frac * 2^53 is an integer for every finite double
  auto mant = static_cast<int64_t>(std::ldexp(frac, 53));
  return Dyadic(mant, 53 - exp2);
}

Dyadic Dyadic::floor_of(double v, int max_exponent) {
  double scaled = std::floor(std::ldexp(v, max_exponent));
  if (std::fabs(scaled) > 9.0e18) fail(Status::validation, "dyadic floor out of range");
  return Dyadic(static_cast<int64_t>(scaled), max_exponent);
}

double Dyadic::to_double() const { return std::ldexp(static_cast<double>(m), -e); }

int64_t Dyadic::at_scale(int p) const {
  if (m == 0) return 0;
  int shift = p - e;
  if (shift < 0) fail(Status::validation, "dyadic value finer than working scale 2^-" + std::to_string(p));
  if (shift > 62) fail(Status::validation, "dyadic value too large for working scale");
  return checked(static_cast<__int128>(m) << shift);
}

Dyadic operator+(const Dyadic& a, const Dyadic& b) {
  if (a.m == 0) return b;
  if (b.m == 0) return a;
  int32_t e = std::max(a.e, b.e);
  if (e - std::min(a.e, b.e) > 62) fail(Status::validation, "dyadic exponent spread too large");
  __int128 ma = static_cast<__int128>(a.m) << (e - a.e);
  __int128 mb = static_cast<__int128>(b.m) << (e - b.e);
  __int128 s = ma + mb;
  int32_t ee = e;
  while (s != 0 && (s & 1) == 0) {
    s /= 2;
    --ee;
  }
  return Dyadic(checked(s), ee);
}

Dyadic operator*(const Dyadic& a, const Dyadic& b) {
  return Dyadic(checked(static_cast<__int128>(a.m) * b.m), a.e + b.e);
}

std::strong_ordering operator<=>(const Dyadic& a, const Dyadic& b) {
  Dyadic d = a - b;
  if (d.m < 0) return std::strong_ordering::less;
  if (d.m > 0) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::string Dyadic::str() const { return std::to_string(m) + "*2^-" + std::to_string(e); }

}  // namespace qcmesh
