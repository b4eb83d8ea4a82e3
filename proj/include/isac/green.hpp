#pragma once

#include "isac/types.hpp"

namespace isac {

// Free-space scalar Green's function exp(j k R)/(4 pi R), e^{-j omega t}
// convention. Throws std::domain_error when the points (nearly) coincide.
Cplx scalar_green(const Vec3& r, const Vec3& r_prime, double k_b);

// Dyadic electric-field Green's function, closed form
//   G = [ (3/(kR)^2 - 3j/(kR) - 1) rr^T - (1/(kR)^2 - j/(kR) - 1) I ] g(R).
// Symmetric and invariant under swapping the two points.
Mat3c dyadic_green(const Vec3& r, const Vec3& r_prime, double k_b);

// Integral of the scalar Green's function over a sphere of radius a centered
// on the observation point: (1/k^2) [ (1 - j k a) e^{j k a} - 1 ].
Cplx sphere_green_integral(double k_b, double radius);

// Weak-form self-cell coefficient of the volume-convolution operator for a
// cubic voxel of volume dv: the equivalent-volume-sphere integral combined
// with the 1/3 depolarization dyad, so that the diagonal contribution to
// k^2 * Conv[u] is k^2 * self * u_v with self = (2/3) S_g - 1/(3 k^2).
Cplx vie_self_term(double k_b, double voxel_volume);

}  // namespace isac
