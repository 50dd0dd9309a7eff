#include "mhd/constitutive.hpp"

#include <cmath>

#include "mhd/errors.hpp"

namespace mhd::constitutive {

void TransportModel::validate(double theta_max) const {
  for (double th : {1e-12, theta_max}) {
    if (!(mu(th) > 0.0)) throw DomainError("mu(theta) must be positive on the admissible range");
    if (eta(th) < 0.0) throw DomainError("eta(theta) must be nonnegative");
    if (!(kappa(th) > 0.0)) throw DomainError("kappa(theta) must be positive");
    if (!(zeta(th) > 0.0)) throw DomainError("zeta(theta) must be positive");
  }
}

Mat3 sym_grad(const Mat3& grad_u) {
  Mat3 d;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d(i, j) = 0.5 * (grad_u(i, j) + grad_u(j, i));
  return d;
}

Mat3 traceless(const Mat3& D) {
  const double t = trace(D) / 3.0;
  Mat3 r = D;
  r(0, 0) -= t;
  r(1, 1) -= t;
  r(2, 2) -= t;
  return r;
}

Mat3 viscous_stress(const TransportModel& tm, const ThermoPoint& pt, const Mat3& D) {
  if (!(pt.rho > 0.0) || !(pt.theta > 0.0))
    throw DomainError("viscous_stress needs a valid thermo point");
  const double mu = tm.mu(pt.theta);
  const double eta = tm.eta(pt.theta);
  const double tr = trace(D);
  Mat3 s = 2.0 * mu * D;
  const double diag = (-2.0 / 3.0 * mu + eta / 3.0) * tr;
  s(0, 0) += diag;
  s(1, 1) += diag;
  s(2, 2) += diag;
  return s;
}

Vec3 heat_flux(const TransportModel& tm, const ThermoPoint& pt, const Vec3& grad_theta) {
  if (!(pt.rho > 0.0) || !(pt.theta > 0.0))
    throw DomainError("heat_flux needs a valid thermo point");
  return -tm.kappa(pt.theta) * grad_theta;
}

double stress_power(const TransportModel& tm, const ThermoPoint& pt, const Mat3& D) {
  const double mu = tm.mu(pt.theta);
  const double eta = tm.eta(pt.theta);
  const double tr = trace(D);
  return 2.0 * mu * frob2(traceless(D)) + (eta / 3.0) * tr * tr;
}

Vec3 discrete_curl(const BNeighborhood& nb) {
  for (const Vec3* v : {&nb.c, &nb.xm, &nb.xp, &nb.ym, &nb.yp, &nb.zm, &nb.zp})
    for (double x : *v)
      if (!std::isfinite(x)) throw StencilError("non-finite B sample in curl stencil");
  auto dx = [&](int k) { return (nb.xp[k] - nb.xm[k]) / (2.0 * nb.hx); };
  auto dy = [&](int k) { return (nb.yp[k] - nb.ym[k]) / (2.0 * nb.hy); };
  auto dz = [&](int k) { return (nb.zp[k] - nb.zm[k]) / (2.0 * nb.hz); };
  return {dy(2) - dz(1), dz(0) - dx(2), dx(1) - dy(0)};
}

Vec3 lorentz_force(const BNeighborhood& nb) { return cross(discrete_curl(nb), nb.c); }

double entropy_production(const TransportModel& tm, const ThermoPoint& pt,
                          const TensorPoint& tensors) {
  if (!(pt.rho > 0.0) || !(pt.theta > 0.0))
    throw DomainError("entropy_production needs a valid thermo point");
  const double sd = stress_power(tm, pt, tensors.D);
  const double heat = tm.kappa(pt.theta) * norm2(tensors.grad_theta) / pt.theta;
  const double ohm = tm.zeta(pt.theta) * norm2(tensors.curl_B);
  return (sd + heat + ohm) / pt.theta;
}

}  // namespace mhd::constitutive
