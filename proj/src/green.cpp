#include "isac/green.hpp"

#include <cmath>
#include <stdexcept>

#include "isac/constants.hpp"

namespace isac {

Cplx scalar_green(const Vec3& r, const Vec3& r_prime, double k_b) {
  const double dist = (r - r_prime).norm();
  if (dist < 1e-12) throw std::domain_error("scalar_green: coincident points");
  const double phase = k_b * dist;
  return Cplx(std::cos(phase), std::sin(phase)) / (4.0 * kPi * dist);
}

Mat3c dyadic_green(const Vec3& r, const Vec3& r_prime, double k_b) {
  const Vec3 d = r - r_prime;
  const double dist = d.norm();
  if (dist < 1e-12) throw std::domain_error("dyadic_green: coincident points");
  const Vec3 rhat = d / dist;
  const double kr = k_b * dist;
  const double inv = 1.0 / kr;
  const double inv2 = inv * inv;
  const Cplx coef_rr(3.0 * inv2 - 1.0, -3.0 * inv);
  const Cplx coef_id(inv2 - 1.0, -inv);
  const Cplx g = scalar_green(r, r_prime, k_b);
  Mat3c out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double rr = rhat[i] * rhat[j];
      Cplx v = coef_rr * rr;
      if (i == j) v -= coef_id;
      out(i, j) = v * g;
    }
  }
  return out;
}

Cplx sphere_green_integral(double k_b, double radius) {
  const double ka = k_b * radius;
  const Cplx e(std::cos(ka), std::sin(ka));
  return (Cplx(1.0, -ka) * e - 1.0) / (k_b * k_b);
}

Cplx vie_self_term(double k_b, double voxel_volume) {
  const double a = std::cbrt(3.0 * voxel_volume / (4.0 * kPi));
  const Cplx sg = sphere_green_integral(k_b, a);
  return (2.0 / 3.0) * sg - 1.0 / (3.0 * k_b * k_b);
}

}  // namespace isac
