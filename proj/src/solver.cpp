#include "mhd/solver.hpp"

#include <algorithm>
#include <cmath>

#include "mhd/errors.hpp"

namespace mhd::solver {

using constitutive::stress_power;
using constitutive::traceless;
using eos::ThermoPoint;
using grid::for_extended;
using grid::for_interior;
using grid::MagBc;
using grid::ThetaBc;

void SolverConfig::validate() const {
  if (!(cfl > 0.0) || cfl > 1.0) throw ConfigError("CFL must lie in (0, 1]");
  if (!(t_end > 0.0)) throw ConfigError("end time must be positive");
  if (snapshot_every < 1) throw ConfigError("snapshot cadence must be >= 1");
}

std::pair<FluidState, BoundaryData> make_equilibrium(const Grid& g, const eos::Model& eosm,
                                                     double rho_bar, double theta_bar,
                                                     const Vec3& B_bar) {
  if (!(rho_bar > 0.0) || !(theta_bar > 0.0))
    throw DomainError("equilibrium needs rho_bar > 0, theta_bar > 0");
  g.validate();
  FluidState s(g);
  const double e_bar = eosm.internal_energy({rho_bar, theta_bar});
  for_extended(g, Grid::ng, [&](int i, int j, int k) {
    s.rho.at(g, i, j, k) = rho_bar;
    s.eps.at(g, i, j, k) = rho_bar * e_bar;
    s.bx.at(g, i, j, k) = B_bar[0];
    s.by.at(g, i, j, k) = B_bar[1];
    s.bz.at(g, i, j, k) = B_bar[2];
  });
  BoundaryData bd;
  bd.theta_B = [theta_bar](double, const Vec3&) { return theta_bar; };
  bd.B_B = [B_bar](const Vec3&) { return B_bar; };
  return {std::move(s), bd};
}

// ---------------------------------------------------------------------------
// Ghost-cell boundary enforcement.

namespace {

// Fills the two ghost layers along `axis`/`side`, looping the transverse
// directions over the already-extended range so corners get filled by the
// axis sweep order x -> y -> z.
template <typename FillFn>
void sweep_ghosts(const Grid& g, int axis, FillFn&& fill) {
  const int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
  const int lo1 = (t1 < axis && g.active(t1)) ? -Grid::ng : 0;
  const int hi1 = g.n[t1] + ((t1 < axis && g.active(t1)) ? Grid::ng : 0);
  const int lo2 = (t2 < axis && g.active(t2)) ? -Grid::ng : 0;
  const int hi2 = g.n[t2] + ((t2 < axis && g.active(t2)) ? Grid::ng : 0);
  for (int side = 0; side < 2; ++side)
    for (int layer = 1; layer <= Grid::ng; ++layer)
      for (int c2 = lo2; c2 < hi2; ++c2)
        for (int c1 = lo1; c1 < hi1; ++c1) {
          int idx[3];
          idx[t1] = c1;
          idx[t2] = c2;
          const int gcell = (side == 0) ? -layer : g.n[axis] + layer - 1;
          const int mirror = (side == 0) ? layer - 1 : g.n[axis] - layer;
          idx[axis] = 0;  // placeholder
          fill(axis, side, gcell, mirror, idx);
        }
}

Vec3 face_point(const Grid& g, int axis, int side, const int idx[3]) {
  Vec3 p = g.center(idx[0], idx[1], idx[2]);
  p[axis] = (side == 0) ? 0.0 : g.extent[axis];
  return p;
}

}  // namespace

void apply_boundary(FluidState& s, const BoundaryData& bd, const eos::Model& eosm) {
  const Grid& g = s.g;
  for (int axis = 0; axis < 3; ++axis) {
    if (!g.active(axis)) {
      // Mirror everything; derivatives along inactive axes vanish.
      sweep_ghosts(g, axis, [&](int ax, int, int gc, int mir, int idx[3]) {
        auto copy = [&](Field& f) {
          int gi[3] = {idx[0], idx[1], idx[2]};
          int mi[3] = {idx[0], idx[1], idx[2]};
          gi[ax] = gc;
          mi[ax] = mir;
          f.at(g, gi[0], gi[1], gi[2]) = f.at(g, mi[0], mi[1], mi[2]);
        };
        for (Field* f : {&s.rho, &s.mx, &s.my, &s.mz, &s.eps, &s.bx, &s.by, &s.bz})
          copy(*f);
      });
      continue;
    }
    sweep_ghosts(g, axis, [&](int ax, int side, int gc, int mir, int idx[3]) {
      int gi[3] = {idx[0], idx[1], idx[2]};
      int mi[3] = {idx[0], idx[1], idx[2]};
      gi[ax] = gc;
      mi[ax] = mir;
      const double rho_m = s.rho.at(g, mi[0], mi[1], mi[2]);
      if (!(rho_m > 0.0))
        throw PositivityError("non-positive density at mirror cell during ghost fill");
      const Vec3 u_m = (1.0 / rho_m) * s.momentum(mi[0], mi[1], mi[2]);
      const double e_m = s.eps.at(g, mi[0], mi[1], mi[2]) / rho_m;
      const double theta_m = eosm.invert_temperature(rho_m, e_m);

      int fidx[3] = {idx[0], idx[1], idx[2]};
      fidx[ax] = (side == 0) ? 0 : g.n[ax] - 1;
      const Vec3 fp = face_point(g, ax, side, fidx);

      // Velocity: odd reflection enforces u = 0 at the face.
      const Vec3 u_g = -1.0 * u_m;

      // Temperature per face tag.
      double theta_g;
      if (g.theta_bc[ax][side] == ThetaBc::Dirichlet) {
        const double tb = bd.theta_B(s.t, fp);
        if (!(tb > 0.0)) throw ConfigError("boundary temperature must be positive");
        theta_g = std::max(2.0 * tb - theta_m, 0.01 * tb);
      } else {
        theta_g = theta_m;
      }

      // Magnetic field per face tag; `ax` is the normal direction.
      Vec3 B_m = s.magnetic(mi[0], mi[1], mi[2]);
      Vec3 B_g = B_m;
      const Vec3 B_bnd = bd.B_B(fp);
      if (g.mag_bc[ax][side] == MagBc::DirichletTangential) {
        for (int c = 0; c < 3; ++c)
          if (c != ax) B_g[c] = 2.0 * B_bnd[c] - B_m[c];
      } else {
        B_g[ax] = 2.0 * B_bnd[ax] - B_m[ax];
      }

      const double rho_g = rho_m;
      s.rho.at(g, gi[0], gi[1], gi[2]) = rho_g;
      s.mx.at(g, gi[0], gi[1], gi[2]) = rho_g * u_g[0];
      s.my.at(g, gi[0], gi[1], gi[2]) = rho_g * u_g[1];
      s.mz.at(g, gi[0], gi[1], gi[2]) = rho_g * u_g[2];
      s.eps.at(g, gi[0], gi[1], gi[2]) =
          rho_g * eosm.internal_energy({rho_g, theta_g});
      s.bx.at(g, gi[0], gi[1], gi[2]) = B_g[0];
      s.by.at(g, gi[0], gi[1], gi[2]) = B_g[1];
      s.bz.at(g, gi[0], gi[1], gi[2]) = B_g[2];
    });
  }

  if (s.has_az) {
    // Linear extrapolation of the vector potential, then rebuild the
    // in-plane field so the centered divergence stays at machine zero.
    for (int axis = 0; axis < 2; ++axis) {
      if (!g.active(axis)) {
        sweep_ghosts(g, axis, [&](int ax, int, int gc, int mir, int idx[3]) {
          int gi[3] = {idx[0], idx[1], idx[2]}, mi[3] = {idx[0], idx[1], idx[2]};
          gi[ax] = gc;
          mi[ax] = mir;
          s.az.at(g, gi[0], gi[1], gi[2]) = s.az.at(g, mi[0], mi[1], mi[2]);
        });
        continue;
      }
      sweep_ghosts(g, axis, [&](int ax, int side, int gc, int, int idx[3]) {
        int gi[3] = {idx[0], idx[1], idx[2]};
        int a1[3] = {idx[0], idx[1], idx[2]};
        int a2[3] = {idx[0], idx[1], idx[2]};
        const int dir = (side == 0) ? 1 : -1;
        gi[ax] = gc;
        a1[ax] = gc + dir;
        a2[ax] = gc + 2 * dir;
        s.az.at(g, gi[0], gi[1], gi[2]) =
            2.0 * s.az.at(g, a1[0], a1[1], a1[2]) - s.az.at(g, a2[0], a2[1], a2[2]);
      });
    }
    if (g.active(2)) throw ConfigError("constrained transport is 2D only");
    derive_inplane_B(s);
  }
}

void derive_inplane_B(FluidState& s) {
  const Grid& g = s.g;
  for_extended(g, 1, [&](int i, int j, int k) {
    const double dy = g.active(1)
                          ? (s.az.at(g, i, j + 1, k) - s.az.at(g, i, j - 1, k)) / (2.0 * g.h(1))
                          : 0.0;
    const double dx = g.active(0)
                          ? (s.az.at(g, i + 1, j, k) - s.az.at(g, i - 1, j, k)) / (2.0 * g.h(0))
                          : 0.0;
    s.bx.at(g, i, j, k) = dy;
    s.by.at(g, i, j, k) = -dx;
  });
}

// ---------------------------------------------------------------------------

Primitives compute_primitives(const FluidState& s, const eos::Model& eosm, int halo) {
  const Grid& g = s.g;
  Primitives pr(g);
  for_extended(g, halo, [&](int i, int j, int k) {
    const double rho = s.rho.at(g, i, j, k);
    const double ei = s.eps.at(g, i, j, k);
    if (!(rho > 0.0) || !std::isfinite(rho))
      throw PositivityError("rho <= 0 at cell (" + std::to_string(i) + "," +
                            std::to_string(j) + "," + std::to_string(k) + "), t=" +
                            std::to_string(s.t));
    if (!(ei > 0.0) || !std::isfinite(ei))
      throw PositivityError("internal energy <= 0 at cell (" + std::to_string(i) + "," +
                            std::to_string(j) + "," + std::to_string(k) + "), t=" +
                            std::to_string(s.t));
    const double theta = eosm.invert_temperature(rho, ei / rho);
    pr.ux.at(g, i, j, k) = s.mx.at(g, i, j, k) / rho;
    pr.uy.at(g, i, j, k) = s.my.at(g, i, j, k) / rho;
    pr.uz.at(g, i, j, k) = s.mz.at(g, i, j, k) / rho;
    pr.theta.at(g, i, j, k) = theta;
    pr.p.at(g, i, j, k) = eosm.pressure({rho, theta});
  });
  return pr;
}

Mat3 velocity_gradient(const FluidState& s, const Primitives& pr, int i, int j, int k) {
  const Grid& g = s.g;
  Mat3 grad;  // grad(i,j) = d u_i / d x_j
  const Field* u[3] = {&pr.ux, &pr.uy, &pr.uz};
  for (int c = 0; c < 3; ++c) {
    if (g.active(0))
      grad(c, 0) = (u[c]->at(g, i + 1, j, k) - u[c]->at(g, i - 1, j, k)) / (2.0 * g.h(0));
    if (g.active(1))
      grad(c, 1) = (u[c]->at(g, i, j + 1, k) - u[c]->at(g, i, j - 1, k)) / (2.0 * g.h(1));
    if (g.active(2))
      grad(c, 2) = (u[c]->at(g, i, j, k + 1) - u[c]->at(g, i, j, k - 1)) / (2.0 * g.h(2));
  }
  return grad;
}

Vec3 temperature_gradient(const FluidState& s, const Primitives& pr, int i, int j, int k) {
  const Grid& g = s.g;
  Vec3 gt{0, 0, 0};
  if (g.active(0))
    gt[0] = (pr.theta.at(g, i + 1, j, k) - pr.theta.at(g, i - 1, j, k)) / (2.0 * g.h(0));
  if (g.active(1))
    gt[1] = (pr.theta.at(g, i, j + 1, k) - pr.theta.at(g, i, j - 1, k)) / (2.0 * g.h(1));
  if (g.active(2))
    gt[2] = (pr.theta.at(g, i, j, k + 1) - pr.theta.at(g, i, j, k - 1)) / (2.0 * g.h(2));
  return gt;
}

Vec3 curl_B(const FluidState& s, int i, int j, int k) {
  const Grid& g = s.g;
  auto d = [&](const Field& f, int axis) -> double {
    if (!g.active(axis)) return 0.0;
    const int di = axis == 0, dj = axis == 1, dk = axis == 2;
    return (f.at(g, i + di, j + dj, k + dk) - f.at(g, i - di, j - dj, k - dk)) /
           (2.0 * g.h(axis));
  };
  return {d(s.bz, 1) - d(s.by, 2), d(s.bx, 2) - d(s.bz, 0), d(s.by, 0) - d(s.bx, 1)};
}

double compute_dt(const FluidState& s, const eos::Model& eosm, const TransportModel& tm,
                  const SolverConfig& cfg) {
  const Grid& g = s.g;
  const double hmin = g.min_h();
  double dt_hyp = 1e300, dt_par = 1e300;
  for_interior(g, [&](int i, int j, int k) {
    const double rho = s.rho.at(g, i, j, k);
    const double ei = s.eps.at(g, i, j, k);
    if (!std::isfinite(rho) || !std::isfinite(ei))
      throw DomainError("non-finite state in compute_dt");
    if (!(rho > 0.0) || !(ei > 0.0))
      throw PositivityError("invalid state in compute_dt");
    const double theta = eosm.invert_temperature(rho, ei / rho);
    const Vec3 u = (1.0 / rho) * s.momentum(i, j, k);
    const Vec3 B = s.magnetic(i, j, k);
    const double c_fast = std::sqrt(eosm.sound_speed2({rho, theta}) + norm2(B) / rho);
    dt_hyp = std::min(dt_hyp, hmin / (std::sqrt(norm2(u)) + c_fast));
    const double cv = eosm.partials({rho, theta}).de_dtheta;
    const double nu = std::max({(2.0 * tm.mu(theta) + tm.eta(theta)) / rho,
                                tm.kappa(theta) / (rho * cv), tm.zeta(theta)});
    if (nu > 0.0) dt_par = std::min(dt_par, hmin * hmin / (2.0 * g.dim * nu));
  });
  const double dt = cfg.cfl * std::min(dt_hyp, dt_par);
  if (!(dt > 0.0) || !std::isfinite(dt)) throw CflError("computed dt is not positive");
  return dt;
}

// ---------------------------------------------------------------------------
// Right-hand side of the semi-discrete system.

namespace {

struct Rhs {
  Field rho, mx, my, mz, eps, bx, by, bz, az;
  explicit Rhs(const Grid& g)
      : rho(g), mx(g), my(g), mz(g), eps(g), bx(g), by(g), bz(g), az(g) {}
};

// Conservative 8-vector at a cell: rho, m, eps, B.
struct Cons {
  double rho, m[3], eps, B[3];
};

Rhs eval_rhs(const FluidState& s, const Primitives& pr, const eos::Model& eosm,
             const TransportModel& tm, bool fault_resistive_heating) {
  const Grid& g = s.g;
  Rhs rhs(g);

  // Pointwise stress, heat flux, and current on interior + 1 ghost layer.
  Field sxx(g), sxy(g), sxz(g), syy(g), syz(g), szz(g);
  Field qx(g), qy(g), qz(g);
  Field wx(g), wy(g), wz(g);  // zeta * curl B
  for_extended(g, 1, [&](int i, int j, int k) {
    const double theta = pr.theta.at(g, i, j, k);
    const double rho = s.rho.at(g, i, j, k);
    const Mat3 D = constitutive::sym_grad(velocity_gradient(s, pr, i, j, k));
    const Mat3 S = constitutive::viscous_stress(tm, {rho, theta}, D);
    sxx.at(g, i, j, k) = S(0, 0);
    sxy.at(g, i, j, k) = S(0, 1);
    sxz.at(g, i, j, k) = S(0, 2);
    syy.at(g, i, j, k) = S(1, 1);
    syz.at(g, i, j, k) = S(1, 2);
    szz.at(g, i, j, k) = S(2, 2);
    const Vec3 q = constitutive::heat_flux(tm, {rho, theta},
                                           temperature_gradient(s, pr, i, j, k));
    qx.at(g, i, j, k) = q[0];
    qy.at(g, i, j, k) = q[1];
    qz.at(g, i, j, k) = q[2];
    const Vec3 J = curl_B(s, i, j, k);
    const double zeta = tm.zeta(theta);
    wx.at(g, i, j, k) = zeta * J[0];
    wy.at(g, i, j, k) = zeta * J[1];
    wz.at(g, i, j, k) = zeta * J[2];
  });

  // Rusanov fluxes, one sweep per active axis.
  for (int axis = 0; axis < g.dim; ++axis) {
    const double h = g.h(axis);
    const int di = axis == 0, dj = axis == 1, dk = axis == 2;
    auto cons_at = [&](int i, int j, int k) {
      Cons c;
      c.rho = s.rho.at(g, i, j, k);
      c.m[0] = s.mx.at(g, i, j, k);
      c.m[1] = s.my.at(g, i, j, k);
      c.m[2] = s.mz.at(g, i, j, k);
      c.eps = s.eps.at(g, i, j, k);
      c.B[0] = s.bx.at(g, i, j, k);
      c.B[1] = s.by.at(g, i, j, k);
      c.B[2] = s.bz.at(g, i, j, k);
      return c;
    };
    auto phys_flux = [&](const Cons& c, double un, double p, Cons& f) {
      f.rho = c.rho * un;
      for (int d = 0; d < 3; ++d) f.m[d] = c.m[d] * un;
      f.m[axis] += p;  // gas pressure only; Lorentz force enters as a source
      f.eps = c.eps * un;
      for (int d = 0; d < 3; ++d) f.B[d] = un * c.B[d] - c.B[axis] * (c.m[d] / c.rho);
    };
    // Loop faces: face f sits between cells (f-1) and f along `axis`.
    for (int k = 0; k < g.n[2]; ++k)
      for (int j = 0; j < g.n[1]; ++j)
        for (int i = 0; i < g.n[0]; ++i) {
          // accumulate both faces of each cell: compute flux at the lower
          // face of cell (i,j,k) and scatter with opposite signs.
          for (int face = 0; face < ((axis == 0 && i == g.n[0] - 1) ||
                                             (axis == 1 && j == g.n[1] - 1) ||
                                             (axis == 2 && k == g.n[2] - 1)
                                         ? 2
                                         : 1);
               ++face) {
            const int li = i - di + face * di, lj = j - dj + face * dj,
                      lk = k - dk + face * dk;
            const int ri = li + di, rj = lj + dj, rk = lk + dk;
            const Cons cl = cons_at(li, lj, lk), cr = cons_at(ri, rj, rk);
            const double pl = pr.p.at(g, li, lj, lk), prr = pr.p.at(g, ri, rj, rk);
            const double ul = cl.m[axis] / cl.rho, ur = cr.m[axis] / cr.rho;
            const double tl = pr.theta.at(g, li, lj, lk),
                         tr = pr.theta.at(g, ri, rj, rk);
            const double cfl2 = eosm.sound_speed2({cl.rho, tl}) +
                                (cl.B[0] * cl.B[0] + cl.B[1] * cl.B[1] +
                                 cl.B[2] * cl.B[2]) /
                                    cl.rho;
            const double cfr2 = eosm.sound_speed2({cr.rho, tr}) +
                                (cr.B[0] * cr.B[0] + cr.B[1] * cr.B[1] +
                                 cr.B[2] * cr.B[2]) /
                                    cr.rho;
            const double a =
                std::max(std::abs(ul) + std::sqrt(cfl2), std::abs(ur) + std::sqrt(cfr2));
            Cons fl, fr, fn;
            phys_flux(cl, ul, pl, fl);
            phys_flux(cr, ur, prr, fr);
            fn.rho = 0.5 * (fl.rho + fr.rho) - 0.5 * a * (cr.rho - cl.rho);
            for (int d = 0; d < 3; ++d) {
              fn.m[d] = 0.5 * (fl.m[d] + fr.m[d]) - 0.5 * a * (cr.m[d] - cl.m[d]);
              fn.B[d] = 0.5 * (fl.B[d] + fr.B[d]) - 0.5 * a * (cr.B[d] - cl.B[d]);
            }
            fn.eps = 0.5 * (fl.eps + fr.eps) - 0.5 * a * (cr.eps - cl.eps);
            // Scatter into the two adjacent cells when they are interior.
            auto scatter = [&](int ci, int cj, int ck, double sign) {
              const bool inside = ci >= 0 && ci < g.n[0] && cj >= 0 && cj < g.n[1] &&
                                  ck >= 0 && ck < g.n[2];
              if (!inside) return;
              rhs.rho.at(g, ci, cj, ck) += sign * fn.rho / h;
              rhs.mx.at(g, ci, cj, ck) += sign * fn.m[0] / h;
              rhs.my.at(g, ci, cj, ck) += sign * fn.m[1] / h;
              rhs.mz.at(g, ci, cj, ck) += sign * fn.m[2] / h;
              rhs.eps.at(g, ci, cj, ck) += sign * fn.eps / h;
              rhs.bx.at(g, ci, cj, ck) += sign * fn.B[0] / h;
              rhs.by.at(g, ci, cj, ck) += sign * fn.B[1] / h;
              rhs.bz.at(g, ci, cj, ck) += sign * fn.B[2] / h;
            };
            scatter(li, lj, lk, -1.0);  // outflow through upper face of left cell
            scatter(ri, rj, rk, +1.0);  // inflow through lower face of right cell
          }
        }
  }

  // Sources and diffusive terms at interior cells.
  auto dflux = [&](const Field& f, int axis, int i, int j, int k) -> double {
    if (!g.active(axis)) return 0.0;
    const int di = axis == 0, dj = axis == 1, dk = axis == 2;
    return (f.at(g, i + di, j + dj, k + dk) - f.at(g, i - di, j - dj, k - dk)) /
           (2.0 * g.h(axis));
  };
  for_interior(g, [&](int i, int j, int k) {
    const double rho = s.rho.at(g, i, j, k);
    const double theta = pr.theta.at(g, i, j, k);
    const double p = pr.p.at(g, i, j, k);
    const Mat3 D = constitutive::sym_grad(velocity_gradient(s, pr, i, j, k));
    const Vec3 J = curl_B(s, i, j, k);
    const Vec3 B = s.magnetic(i, j, k);

    // div S
    rhs.mx.at(g, i, j, k) += dflux(sxx, 0, i, j, k) + dflux(sxy, 1, i, j, k) +
                             dflux(sxz, 2, i, j, k);
    rhs.my.at(g, i, j, k) += dflux(sxy, 0, i, j, k) + dflux(syy, 1, i, j, k) +
                             dflux(syz, 2, i, j, k);
    rhs.mz.at(g, i, j, k) += dflux(sxz, 0, i, j, k) + dflux(syz, 1, i, j, k) +
                             dflux(szz, 2, i, j, k);
    // curl B x B
    const Vec3 lorentz = cross(J, B);
    rhs.mx.at(g, i, j, k) += lorentz[0];
    rhs.my.at(g, i, j, k) += lorentz[1];
    rhs.mz.at(g, i, j, k) += lorentz[2];

    // Internal energy: -p div u + S:D + zeta |curl B|^2 - div q
    const double divu = trace(D);
    const double resistive = (fault_resistive_heating ? -1.0 : 1.0) *
                             tm.zeta(theta) * norm2(J);
    const double heating = stress_power(tm, {rho, theta}, D) + resistive;
    const double divq =
        dflux(qx, 0, i, j, k) + dflux(qy, 1, i, j, k) + dflux(qz, 2, i, j, k);
    rhs.eps.at(g, i, j, k) += -p * divu + heating - divq;

    // Resistive induction: -curl(zeta curl B)
    const double cwx = dflux(wz, 1, i, j, k) - dflux(wy, 2, i, j, k);
    const double cwy = dflux(wx, 2, i, j, k) - dflux(wz, 0, i, j, k);
    const double cwz = dflux(wy, 0, i, j, k) - dflux(wx, 1, i, j, k);
    rhs.bx.at(g, i, j, k) -= cwx;
    rhs.by.at(g, i, j, k) -= cwy;
    rhs.bz.at(g, i, j, k) -= cwz;

    if (s.has_az) {
      // dAz/dt = (u x B)_z - zeta (curl B)_z
      const Vec3 u = {pr.ux.at(g, i, j, k), pr.uy.at(g, i, j, k), pr.uz.at(g, i, j, k)};
      rhs.az.at(g, i, j, k) = (u[0] * B[1] - u[1] * B[0]) - tm.zeta(theta) * J[2];
    }
  });
  return rhs;
}

void axpy_interior(FluidState& out, const FluidState& base, const Rhs& k, double dt) {
  const Grid& g = out.g;
  for_interior(g, [&](int i, int j, int k_) {
    out.rho.at(g, i, j, k_) = base.rho.at(g, i, j, k_) + dt * k.rho.at(g, i, j, k_);
    out.mx.at(g, i, j, k_) = base.mx.at(g, i, j, k_) + dt * k.mx.at(g, i, j, k_);
    out.my.at(g, i, j, k_) = base.my.at(g, i, j, k_) + dt * k.my.at(g, i, j, k_);
    out.mz.at(g, i, j, k_) = base.mz.at(g, i, j, k_) + dt * k.mz.at(g, i, j, k_);
    out.eps.at(g, i, j, k_) = base.eps.at(g, i, j, k_) + dt * k.eps.at(g, i, j, k_);
    out.bx.at(g, i, j, k_) = base.bx.at(g, i, j, k_) + dt * k.bx.at(g, i, j, k_);
    out.by.at(g, i, j, k_) = base.by.at(g, i, j, k_) + dt * k.by.at(g, i, j, k_);
    out.bz.at(g, i, j, k_) = base.bz.at(g, i, j, k_) + dt * k.bz.at(g, i, j, k_);
    if (out.has_az)
      out.az.at(g, i, j, k_) = base.az.at(g, i, j, k_) + dt * k.az.at(g, i, j, k_);
  });
}

void check_positivity(const FluidState& s, const eos::Model&) {
  const Grid& g = s.g;
  for_interior(g, [&](int i, int j, int k) {
    const double rho = s.rho.at(g, i, j, k);
    const double ei = s.eps.at(g, i, j, k);
    if (!(rho > 0.0) || !std::isfinite(rho) || !(ei > 0.0) || !std::isfinite(ei))
      throw PositivityError("cell (" + std::to_string(i) + "," + std::to_string(j) + "," +
                            std::to_string(k) + ") at t=" + std::to_string(s.t) +
                            ": rho=" + std::to_string(rho) + " eps=" + std::to_string(ei));
  });
}

}  // namespace

FluidState step_with_dt(const FluidState& s0, const BoundaryData& bd, const eos::Model& eosm,
                        const TransportModel& tm, const SolverConfig& cfg, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw CflError("step rejected dt");
  FluidState u = s0;
  apply_boundary(u, bd, eosm);
  {
    const Primitives pr = compute_primitives(u, eosm, 2);
    const Rhs k1 = eval_rhs(u, pr, eosm, tm, cfg.fault_resistive_heating);
    axpy_interior(u, u, k1, dt);
  }
  u.t = s0.t + dt;
  check_positivity(u, eosm);
  if (u.has_az) derive_inplane_B(u);
  apply_boundary(u, bd, eosm);
  {
    const Primitives pr = compute_primitives(u, eosm, 2);
    const Rhs k2 = eval_rhs(u, pr, eosm, tm, cfg.fault_resistive_heating);
    axpy_interior(u, u, k2, dt);
  }
  // Average the predictor-corrector pair: u_new = (u0 + u2)/2.
  const Grid& g = u.g;
  for_interior(g, [&](int i, int j, int k) {
    auto avg = [&](Field& fu, const Field& f0) {
      fu.at(g, i, j, k) = 0.5 * f0.at(g, i, j, k) + 0.5 * fu.at(g, i, j, k);
    };
    avg(u.rho, s0.rho);
    avg(u.mx, s0.mx);
    avg(u.my, s0.my);
    avg(u.mz, s0.mz);
    avg(u.eps, s0.eps);
    avg(u.bx, s0.bx);
    avg(u.by, s0.by);
    avg(u.bz, s0.bz);
    if (u.has_az) avg(u.az, s0.az);
  });
  u.t = s0.t + dt;
  check_positivity(u, eosm);
  if (u.has_az) {
    derive_inplane_B(u);
  } else if (cfg.div_control == DivControl::Projection) {
    apply_boundary(u, bd, eosm);
    project_divB(u, cfg);
  }
  apply_boundary(u, bd, eosm);
  return u;
}

FluidState step(const FluidState& s, const BoundaryData& bd, const eos::Model& eosm,
                const TransportModel& tm, const SolverConfig& cfg) {
  return step_with_dt(s, bd, eosm, tm, cfg, compute_dt(s, eosm, tm, cfg));
}

// ---------------------------------------------------------------------------
// Divergence cleaning by Poisson projection. The wide (stride-2) Laplacian
// matches div(grad(.)) with the same centered stencils, so the post-projection
// divergence equals the linear-solver residual. Ghost extensions of the
// potential follow the magnetic face tags: even across faces with prescribed
// normal component, odd across tangential-Dirichlet faces.

namespace {

double phi_ghost(const Field& phi, const Grid& g, int i, int j, int k) {
  int c[3] = {i, j, k};
  for (int a = 0; a < 3; ++a) {
    if (!g.active(a)) {
      c[a] = std::clamp(c[a], 0, g.n[a] - 1);
      continue;
    }
  }
  double sign = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (c[a] < 0) {
      if (g.active(a) && g.mag_bc[a][0] == MagBc::DirichletTangential) sign = -sign;
      c[a] = -1 - c[a];
    } else if (c[a] >= g.n[a]) {
      if (g.active(a) && g.mag_bc[a][1] == MagBc::DirichletTangential) sign = -sign;
      c[a] = 2 * g.n[a] - 1 - c[a];
    }
  }
  return sign * phi.at(g, c[0], c[1], c[2]);
}

// -Lap phi with the wide stencil (SPD operator handed to CG).
void neg_laplacian(const Field& phi, const Grid& g, Field& out) {
  for_interior(g, [&](int i, int j, int k) {
    double acc = 0.0;
    for (int a = 0; a < g.dim; ++a) {
      const int di = a == 0 ? 2 : 0, dj = a == 1 ? 2 : 0, dk = a == 2 ? 2 : 0;
      const double hh = 2.0 * g.h(a);
      acc += (phi_ghost(phi, g, i + di, j + dj, k + dk) - 2.0 * phi.at(g, i, j, k) +
              phi_ghost(phi, g, i - di, j - dj, k - dk)) /
             (hh * hh);
    }
    out.at(g, i, j, k) = -acc;
  });
}

bool has_dirichlet_mag_face(const Grid& g) {
  for (int a = 0; a < g.dim; ++a)
    for (int sd = 0; sd < 2; ++sd)
      if (g.mag_bc[a][sd] == MagBc::DirichletTangential) return true;
  return false;
}

void subtract_mean(Field& f, const Grid& g) {
  std::vector<double> vals;
  vals.reserve(g.ncells());
  for_interior(g, [&](int i, int j, int k) { vals.push_back(f.at(g, i, j, k)); });
  const double mean = pairwise_sum(vals) / static_cast<double>(vals.size());
  for_interior(g, [&](int i, int j, int k) { f.at(g, i, j, k) -= mean; });
}

}  // namespace

void project_divB(FluidState& s, const SolverConfig& cfg) {
  if (s.has_az) return;  // constrained transport keeps div B at machine zero
  const Grid& g = s.g;
  Field b(g);
  double bmax = 0.0;
  for_interior(g, [&](int i, int j, int k) {
    const double d = grid::div_B(s, i, j, k);
    b.at(g, i, j, k) = -d;  // solve -Lap phi = -div B  <=>  Lap phi = div B
    bmax = std::max(bmax, std::abs(d));
  });
  if (bmax <= cfg.poisson_tol) return;
  const bool pin_mean = !has_dirichlet_mag_face(g);
  if (pin_mean) subtract_mean(b, g);

  Field phi(g), r(g), p(g), ap(g);
  r = b;  // phi = 0 initially
  p = r;
  auto dot_int = [&](const Field& x, const Field& y) {
    std::vector<double> vals;
    vals.reserve(g.ncells());
    for_interior(g, [&](int i, int j, int k) {
      vals.push_back(x.at(g, i, j, k) * y.at(g, i, j, k));
    });
    return pairwise_sum(vals);
  };
  double rs = dot_int(r, r);
  bool converged = false;
  for (int it = 0; it < cfg.poisson_max_iter; ++it) {
    double rinf = 0.0;
    for_interior(g, [&](int i, int j, int k) {
      rinf = std::max(rinf, std::abs(r.at(g, i, j, k)));
    });
    if (rinf <= cfg.poisson_tol) {
      converged = true;
      break;
    }
    neg_laplacian(p, g, ap);
    const double pap = dot_int(p, ap);
    if (!(pap > 0.0)) throw SolveError("projection CG broke down (non-SPD step)");
    const double alpha = rs / pap;
    for_interior(g, [&](int i, int j, int k) {
      phi.at(g, i, j, k) += alpha * p.at(g, i, j, k);
      r.at(g, i, j, k) -= alpha * ap.at(g, i, j, k);
    });
    if (pin_mean && (it % 50 == 49)) subtract_mean(phi, g);
    const double rs_new = dot_int(r, r);
    const double beta = rs_new / rs;
    rs = rs_new;
    for_interior(g, [&](int i, int j, int k) {
      p.at(g, i, j, k) = r.at(g, i, j, k) + beta * p.at(g, i, j, k);
    });
  }
  if (!converged) {
    double rinf = 0.0;
    for_interior(g, [&](int i, int j, int k) {
      rinf = std::max(rinf, std::abs(r.at(g, i, j, k)));
    });
    if (rinf > cfg.poisson_tol)
      throw SolveError("projection Poisson solve did not reach tolerance " +
                       std::to_string(cfg.poisson_tol) + " (residual " +
                       std::to_string(rinf) + ")");
  }
  // B <- B - grad phi
  for_interior(g, [&](int i, int j, int k) {
    if (g.active(0))
      s.bx.at(g, i, j, k) -= (phi_ghost(phi, g, i + 1, j, k) -
                              phi_ghost(phi, g, i - 1, j, k)) /
                             (2.0 * g.h(0));
    if (g.active(1))
      s.by.at(g, i, j, k) -= (phi_ghost(phi, g, i, j + 1, k) -
                              phi_ghost(phi, g, i, j - 1, k)) /
                             (2.0 * g.h(1));
    if (g.active(2))
      s.bz.at(g, i, j, k) -= (phi_ghost(phi, g, i, j, k + 1) -
                              phi_ghost(phi, g, i, j, k - 1)) /
                             (2.0 * g.h(2));
  });
}

// ---------------------------------------------------------------------------
// Integral diagnostics.

Totals totals(const FluidState& s, const eos::Model& eosm) {
  const Grid& g = s.g;
  const double vol = g.cell_volume();
  std::vector<double> vm, vpx, vpy, vpz, ve, vs;
  const std::size_t nc = g.ncells();
  vm.reserve(nc);
  vpx.reserve(nc);
  vpy.reserve(nc);
  vpz.reserve(nc);
  ve.reserve(nc);
  vs.reserve(nc);
  for_interior(g, [&](int i, int j, int k) {
    const double rho = s.rho.at(g, i, j, k);
    const Vec3 m = s.momentum(i, j, k);
    const Vec3 B = s.magnetic(i, j, k);
    const double theta = eosm.invert_temperature(rho, s.eps.at(g, i, j, k) / rho);
    vm.push_back(rho * vol);
    vpx.push_back(m[0] * vol);
    vpy.push_back(m[1] * vol);
    vpz.push_back(m[2] * vol);
    ve.push_back((0.5 * norm2(m) / rho + s.eps.at(g, i, j, k) + 0.5 * norm2(B)) * vol);
    vs.push_back(rho * eosm.entropy({rho, theta}) * vol);
  });
  Totals t;
  t.mass = pairwise_sum(vm);
  t.momentum = {pairwise_sum(vpx), pairwise_sum(vpy), pairwise_sum(vpz)};
  t.energy = pairwise_sum(ve);
  t.entropy = pairwise_sum(vs);
  return t;
}

double ballistic_energy(const FluidState& s, const eos::Model& eosm,
                        const std::function<double(const Vec3&)>& theta_tilde,
                        const std::function<Vec3(const Vec3&)>& B_tilde,
                        const BoundaryData& bd, double admissibility_tol) {
  const Grid& g = s.g;
  // Admissibility of (theta~, B~): positivity, boundary traces, solenoidality
  // (checked with the same centered operators used everywhere else).
  for_interior(g, [&](int i, int j, int k) {
    const Vec3 x = g.center(i, j, k);
    if (!(theta_tilde(x) > 0.0))
      throw ConstraintError("theta_tilde must be positive");
    double div = 0.0;
    for (int a = 0; a < g.dim; ++a) {
      Vec3 xp = x, xm = x;
      xp[a] += g.h(a);
      xm[a] -= g.h(a);
      div += (B_tilde(xp)[a] - B_tilde(xm)[a]) / (2.0 * g.h(a));
    }
    if (std::abs(div) > admissibility_tol)
      throw ConstraintError("B_tilde is not divergence-free (discrete residual " +
                            std::to_string(div) + ")");
  });
  for (int a = 0; a < g.dim; ++a)
    for (int side = 0; side < 2; ++side) {
      // sample the face through the cell-center lattice
      int idx[3] = {0, 0, 0};
      idx[a] = (side == 0) ? 0 : g.n[a] - 1;
      for (int c1 = 0; c1 < g.n[(a + 1) % 3]; ++c1)
        for (int c2 = 0; c2 < g.n[(a + 2) % 3]; ++c2) {
          idx[(a + 1) % 3] = c1;
          idx[(a + 2) % 3] = c2;
          Vec3 fp = g.center(idx[0], idx[1], idx[2]);
          fp[a] = (side == 0) ? 0.0 : g.extent[a];
          if (g.theta_bc[a][side] == ThetaBc::Dirichlet &&
              std::abs(theta_tilde(fp) - bd.theta_B(s.t, fp)) > admissibility_tol)
            throw ConstraintError("theta_tilde does not match theta_B on a Dirichlet face");
          const Vec3 bt = B_tilde(fp), bb = bd.B_B(fp);
          if (g.mag_bc[a][side] == MagBc::DirichletTangential) {
            for (int c = 0; c < 3; ++c)
              if (c != a && std::abs(bt[c] - bb[c]) > admissibility_tol)
                throw ConstraintError("B_tilde tangential trace mismatch on Dirichlet face");
          } else if (std::abs(bt[a] - bb[a]) > admissibility_tol) {
            throw ConstraintError("B_tilde normal trace mismatch on Neumann face");
          }
        }
    }
  const double vol = g.cell_volume();
  std::vector<double> vals;
  vals.reserve(g.ncells());
  for_interior(g, [&](int i, int j, int k) {
    const double rho = s.rho.at(g, i, j, k);
    const Vec3 m = s.momentum(i, j, k);
    const Vec3 B = s.magnetic(i, j, k);
    const Vec3 x = g.center(i, j, k);
    const double theta = eosm.invert_temperature(rho, s.eps.at(g, i, j, k) / rho);
    const double sE = 0.5 * norm2(m) / rho + s.eps.at(g, i, j, k) + 0.5 * norm2(B);
    vals.push_back((sE - theta_tilde(x) * rho * eosm.entropy({rho, theta}) -
                    dot(B_tilde(x), B)) *
                   vol);
  });
  return pairwise_sum(vals);
}

double min_entropy_production(const FluidState& s, const eos::Model& eosm,
                              const TransportModel& tm) {
  const Grid& g = s.g;
  const Primitives pr = compute_primitives(s, eosm, 1);
  double mn = 1e300;
  for_interior(g, [&](int i, int j, int k) {
    constitutive::TensorPoint tp;
    tp.D = constitutive::sym_grad(velocity_gradient(s, pr, i, j, k));
    tp.grad_theta = temperature_gradient(s, pr, i, j, k);
    tp.curl_B = curl_B(s, i, j, k);
    const ThermoPoint thp{s.rho.at(g, i, j, k), pr.theta.at(g, i, j, k)};
    mn = std::min(mn, constitutive::entropy_production(tm, thp, tp));
  });
  return mn;
}

namespace {

// Instantaneous boundary entropy outflow and interior production of a
// ghost-filled snapshot.
void entropy_rate_terms(const FluidState& s, const eos::Model& eosm,
                        const TransportModel& tm, const BoundaryData& bd,
                        double& boundary_flux, double& production) {
  const Grid& g = s.g;
  const Primitives pr = compute_primitives(s, eosm, 1);
  std::vector<double> prod_vals;
  prod_vals.reserve(g.ncells());
  const double vol = g.cell_volume();
  for_interior(g, [&](int i, int j, int k) {
    constitutive::TensorPoint tp;
    tp.D = constitutive::sym_grad(velocity_gradient(s, pr, i, j, k));
    tp.grad_theta = temperature_gradient(s, pr, i, j, k);
    tp.curl_B = curl_B(s, i, j, k);
    const ThermoPoint thp{s.rho.at(g, i, j, k), pr.theta.at(g, i, j, k)};
    prod_vals.push_back(constitutive::entropy_production(tm, thp, tp) * vol);
  });
  production = pairwise_sum(prod_vals);

  std::vector<double> flux_vals;
  for (int a = 0; a < g.dim; ++a)
    for (int side = 0; side < 2; ++side) {
      if (g.theta_bc[a][side] != ThetaBc::Dirichlet) continue;  // q.n = 0 on Neumann
      const double area = g.cell_volume() / g.h(a);
      const int bi = (side == 0) ? 0 : g.n[a] - 1;
      const int gi = (side == 0) ? -1 : g.n[a];
      for (int c2 = 0; c2 < g.n[(a + 2) % 3]; ++c2)
        for (int c1 = 0; c1 < g.n[(a + 1) % 3]; ++c1) {
          int ci[3], cg[3];
          ci[a] = bi;
          cg[a] = gi;
          ci[(a + 1) % 3] = cg[(a + 1) % 3] = c1;
          ci[(a + 2) % 3] = cg[(a + 2) % 3] = c2;
          Vec3 fp = g.center(ci[0], ci[1], ci[2]);
          fp[a] = (side == 0) ? 0.0 : g.extent[a];
          const double tb = bd.theta_B(s.t, fp);
          const double th_in = pr.theta.at(g, ci[0], ci[1], ci[2]);
          const double th_gh = pr.theta.at(g, cg[0], cg[1], cg[2]);
          // outward normal derivative of theta at the face
          const double dth_dn = (side == 0) ? (th_gh - th_in) / g.h(a)
                                            : (th_gh - th_in) / g.h(a);
          const double qn = -tm.kappa(tb) * dth_dn;  // q . n_outward
          flux_vals.push_back(qn / tb * area);
        }
    }
  boundary_flux = pairwise_sum(flux_vals);
}

}  // namespace

std::vector<EntropyAuditRow> entropy_audit(const Trajectory& traj, const eos::Model& eosm,
                                           const TransportModel& tm, const BoundaryData& bd,
                                           double c_audit) {
  std::vector<EntropyAuditRow> rows;
  if (traj.snaps.size() < 2) return rows;
  const double h = traj.snaps.front().g.min_h();
  const double tol = c_audit * h;
  for (std::size_t n = 0; n + 1 < traj.snaps.size(); ++n) {
    FluidState a = traj.snaps[n];
    FluidState b = traj.snaps[n + 1];
    apply_boundary(a, bd, eosm);
    apply_boundary(b, bd, eosm);
    const double dt = b.t - a.t;
    double fa, pa, fb, pb;
    entropy_rate_terms(a, eosm, tm, bd, fa, pa);
    entropy_rate_terms(b, eosm, tm, bd, fb, pb);
    EntropyAuditRow row;
    row.t0 = a.t;
    row.t1 = b.t;
    row.d_entropy = totals(b, eosm).entropy - totals(a, eosm).entropy;
    row.boundary_flux = 0.5 * dt * (fa + fb);
    row.production = 0.5 * dt * (pa + pb);
    row.residual = row.d_entropy + row.boundary_flux - row.production;
    row.fail = row.residual < -tol;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mhd::solver
