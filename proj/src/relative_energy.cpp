#include "mhd/relative_energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mhd/errors.hpp"

namespace mhd::relent {

using constitutive::sym_grad;
using constitutive::traceless;
using eos::ThermoPoint;
using grid::for_extended;
using grid::for_interior;
using grid::MagBc;
using grid::ThetaBc;

// ---------------------------------------------------------------------------
// Reference solution.

namespace {

// Ghost fill for the comparison fields: r even, Theta per thermal tag,
// U odd (zero trace), H per magnetic tag. Axis sweep order matches the
// solver so corners are consistent.
void fill_ref_ghosts(RefFields& f, const Grid& g, const BoundaryData& bd, double t) {
  for (int axis = 0; axis < 3; ++axis) {
    const int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
    const int lo1 = (t1 < axis && g.active(t1)) ? -Grid::ng : 0;
    const int hi1 = g.n[t1] + ((t1 < axis && g.active(t1)) ? Grid::ng : 0);
    const int lo2 = (t2 < axis && g.active(t2)) ? -Grid::ng : 0;
    const int hi2 = g.n[t2] + ((t2 < axis && g.active(t2)) ? Grid::ng : 0);
    for (int side = 0; side < 2; ++side)
      for (int layer = 1; layer <= Grid::ng; ++layer)
        for (int c2 = lo2; c2 < hi2; ++c2)
          for (int c1 = lo1; c1 < hi1; ++c1) {
            int gi[3], mi[3];
            gi[t1] = mi[t1] = c1;
            gi[t2] = mi[t2] = c2;
            gi[axis] = (side == 0) ? -layer : g.n[axis] + layer - 1;
            mi[axis] = (side == 0) ? layer - 1 : g.n[axis] - layer;
            auto G = [&](Field& fld) -> double& {
              return fld.at(g, gi[0], gi[1], gi[2]);
            };
            auto M = [&](const Field& fld) {
              return fld.at(g, mi[0], mi[1], mi[2]);
            };
            if (!g.active(axis)) {
              for (Field* fl : {&f.r, &f.Theta, &f.Ux, &f.Uy, &f.Uz, &f.Hx, &f.Hy, &f.Hz})
                fl->at(g, gi[0], gi[1], gi[2]) = fl->at(g, mi[0], mi[1], mi[2]);
              continue;
            }
            G(f.r) = M(f.r);
            G(f.Ux) = -M(f.Ux);
            G(f.Uy) = -M(f.Uy);
            G(f.Uz) = -M(f.Uz);
            int bidx[3] = {gi[0], gi[1], gi[2]};
            bidx[axis] = (side == 0) ? 0 : g.n[axis] - 1;
            Vec3 fp = g.center(bidx[0], bidx[1], bidx[2]);
            fp[axis] = (side == 0) ? 0.0 : g.extent[axis];
            if (g.theta_bc[axis][side] == ThetaBc::Dirichlet) {
              const double tb = bd.theta_B(t, fp);
              G(f.Theta) = std::max(2.0 * tb - M(f.Theta), 0.01 * tb);
            } else {
              G(f.Theta) = M(f.Theta);
            }
            const Vec3 bb = bd.B_B(fp);
            Field* hc[3] = {&f.Hx, &f.Hy, &f.Hz};
            if (g.mag_bc[axis][side] == MagBc::DirichletTangential) {
              for (int c = 0; c < 3; ++c)
                G(*hc[c]) = (c == axis) ? M(*hc[c]) : 2.0 * bb[c] - M(*hc[c]);
            } else {
              for (int c = 0; c < 3; ++c)
                G(*hc[c]) = (c == axis) ? 2.0 * bb[c] - M(*hc[c]) : M(*hc[c]);
            }
          }
  }
}

}  // namespace

ReferenceSolution ReferenceSolution::equilibrium(const Grid& g, double r_bar,
                                                 double theta_bar, const Vec3& H_bar) {
  if (!(r_bar > 0.0) || !(theta_bar > 0.0))
    throw DomainError("equilibrium reference needs positive r, Theta");
  ReferenceSolution ref;
  ref.g = g;
  ref.stationary = true;
  ref.times = {0.0};
  RefFields f(g);
  for_extended(g, Grid::ng, [&](int i, int j, int k) {
    f.r.at(g, i, j, k) = r_bar;
    f.Theta.at(g, i, j, k) = theta_bar;
    f.Hx.at(g, i, j, k) = H_bar[0];
    f.Hy.at(g, i, j, k) = H_bar[1];
    f.Hz.at(g, i, j, k) = H_bar[2];
  });
  ref.slices.push_back(std::move(f));
  return ref;
}

ReferenceSolution ReferenceSolution::restrict_trajectory(const solver::Trajectory& fine,
                                                         const Grid& coarse,
                                                         const BoundaryData& bd,
                                                         const eos::Model& eosm) {
  if (fine.snaps.empty()) throw DataError("empty fine trajectory");
  const Grid& gf = fine.snaps.front().g;
  int factor[3] = {1, 1, 1};
  for (int a = 0; a < coarse.dim; ++a) {
    if (gf.n[a] % coarse.n[a] != 0)
      throw GridMismatch("fine grid is not an integer refinement of the coarse grid");
    factor[a] = gf.n[a] / coarse.n[a];
  }
  if (gf.dim != coarse.dim) throw GridMismatch("dimension mismatch in restriction");

  ReferenceSolution ref;
  ref.g = coarse;
  ref.stationary = false;
  for (const FluidState& fs : fine.snaps) {
    RefFields f(coarse);
    const double nb = static_cast<double>(factor[0]) * factor[1] * factor[2];
    for_interior(coarse, [&](int i, int j, int k) {
      double r = 0, th = 0;
      Vec3 U{0, 0, 0}, H{0, 0, 0};
      for (int kk = 0; kk < factor[2]; ++kk)
        for (int jj = 0; jj < factor[1]; ++jj)
          for (int ii = 0; ii < factor[0]; ++ii) {
            const int fi = i * factor[0] + ii, fj = j * factor[1] + jj,
                      fk = k * factor[2] + kk;
            const double rho = fs.rho.at(gf, fi, fj, fk);
            r += rho;
            th += eosm.invert_temperature(rho, fs.eps.at(gf, fi, fj, fk) / rho);
            U = U + (1.0 / rho) * fs.momentum(fi, fj, fk);
            H = H + fs.magnetic(fi, fj, fk);
          }
      f.r.at(coarse, i, j, k) = r / nb;
      f.Theta.at(coarse, i, j, k) = th / nb;
      f.Ux.at(coarse, i, j, k) = U[0] / nb;
      f.Uy.at(coarse, i, j, k) = U[1] / nb;
      f.Uz.at(coarse, i, j, k) = U[2] / nb;
      f.Hx.at(coarse, i, j, k) = H[0] / nb;
      f.Hy.at(coarse, i, j, k) = H[1] / nb;
      f.Hz.at(coarse, i, j, k) = H[2] / nb;
    });
    // Clean the restricted magnetic field: block averaging does not commute
    // with the centered divergence, so project back to the discrete
    // divergence-free space.
    FluidState tmp(coarse);
    for_interior(coarse, [&](int i, int j, int k) {
      tmp.rho.at(coarse, i, j, k) = 1.0;
      tmp.eps.at(coarse, i, j, k) = 1.0;
      tmp.bx.at(coarse, i, j, k) = f.Hx.at(coarse, i, j, k);
      tmp.by.at(coarse, i, j, k) = f.Hy.at(coarse, i, j, k);
      tmp.bz.at(coarse, i, j, k) = f.Hz.at(coarse, i, j, k);
    });
    solver::SolverConfig pcfg;
    pcfg.poisson_tol = 1e-12;
    solver::project_divB(tmp, pcfg);
    for_interior(coarse, [&](int i, int j, int k) {
      f.Hx.at(coarse, i, j, k) = tmp.bx.at(coarse, i, j, k);
      f.Hy.at(coarse, i, j, k) = tmp.by.at(coarse, i, j, k);
      f.Hz.at(coarse, i, j, k) = tmp.bz.at(coarse, i, j, k);
    });
    fill_ref_ghosts(f, coarse, bd, fs.t);
    ref.slices.push_back(std::move(f));
    ref.times.push_back(fs.t);
  }
  return ref;
}

void ReferenceSolution::check_admissible(const BoundaryData& bd, double tol) const {
  for (std::size_t n = 0; n < slices.size(); ++n) {
    const RefFields& f = slices[n];
    const double t = times[std::min(n, times.size() - 1)];
    for_interior(g, [&](int i, int j, int k) {
      if (!(f.r.at(g, i, j, k) > 0.0) || !(f.Theta.at(g, i, j, k) > 0.0))
        throw ConstraintError("reference r, Theta must stay positive");
      // div H with the same centered operator as everywhere else
      double div = 0.0;
      if (g.active(0))
        div += (f.Hx.at(g, i + 1, j, k) - f.Hx.at(g, i - 1, j, k)) / (2.0 * g.h(0));
      if (g.active(1))
        div += (f.Hy.at(g, i, j + 1, k) - f.Hy.at(g, i, j - 1, k)) / (2.0 * g.h(1));
      if (g.active(2))
        div += (f.Hz.at(g, i, j, k + 1) - f.Hz.at(g, i, j, k - 1)) / (2.0 * g.h(2));
      if (std::abs(div) > tol)
        throw ConstraintError("reference H is not divergence-free (|div H| = " +
                              std::to_string(std::abs(div)) + ")");
    });
    // Traces through the ghost-interpolated face values.
    for (int a = 0; a < g.dim; ++a)
      for (int side = 0; side < 2; ++side) {
        const int bi = (side == 0) ? 0 : g.n[a] - 1;
        const int gi = (side == 0) ? -1 : g.n[a];
        for (int c2 = 0; c2 < g.n[(a + 2) % 3]; ++c2)
          for (int c1 = 0; c1 < g.n[(a + 1) % 3]; ++c1) {
            int ci[3], cg[3];
            ci[a] = bi;
            cg[a] = gi;
            ci[(a + 1) % 3] = cg[(a + 1) % 3] = c1;
            ci[(a + 2) % 3] = cg[(a + 2) % 3] = c2;
            auto face = [&](const Field& fl) {
              return 0.5 * (fl.at(g, ci[0], ci[1], ci[2]) + fl.at(g, cg[0], cg[1], cg[2]));
            };
            if (std::abs(face(f.Ux)) > tol || std::abs(face(f.Uy)) > tol ||
                std::abs(face(f.Uz)) > tol)
              throw ConstraintError("reference U does not vanish on the boundary");
            if (g.theta_bc[a][side] == ThetaBc::Dirichlet) {
              Vec3 fp = g.center(ci[0], ci[1], ci[2]);
              fp[a] = (side == 0) ? 0.0 : g.extent[a];
              if (std::abs(face(f.Theta) - bd.theta_B(t, fp)) > tol)
                throw ConstraintError("reference Theta trace mismatch on a Dirichlet face");
            }
          }
      }
  }
}

std::size_t ReferenceSolution::slice_for(double t) const {
  if (stationary) return 0;
  std::size_t best = 0;
  double dbest = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < times.size(); ++n) {
    const double d = std::abs(times[n] - t);
    if (d < dbest) {
      dbest = d;
      best = n;
    }
  }
  if (dbest > 1e-9 * std::max(1.0, std::abs(t)))
    throw AlignmentError("no reference slice at t = " + std::to_string(t));
  return best;
}

RefPoint ReferenceSolution::at(std::size_t slice, int i, int j, int k) const {
  const RefFields& f = slices[stationary ? 0 : slice];
  RefPoint p;
  p.v.r = f.r.at(g, i, j, k);
  p.v.Theta = f.Theta.at(g, i, j, k);
  p.v.U = {f.Ux.at(g, i, j, k), f.Uy.at(g, i, j, k), f.Uz.at(g, i, j, k)};
  p.v.H = {f.Hx.at(g, i, j, k), f.Hy.at(g, i, j, k), f.Hz.at(g, i, j, k)};
  if (stationary) return p;  // all derivatives vanish

  auto d = [&](const Field& fl, int axis) -> double {
    if (!g.active(axis)) return 0.0;
    const int di = axis == 0, dj = axis == 1, dk = axis == 2;
    return (fl.at(g, i + di, j + dj, k + dk) - fl.at(g, i - di, j - dj, k - dk)) /
           (2.0 * g.h(axis));
  };
  p.grad_Theta = {d(f.Theta, 0), d(f.Theta, 1), d(f.Theta, 2)};
  Mat3 gradU;
  const Field* uc[3] = {&f.Ux, &f.Uy, &f.Uz};
  for (int c = 0; c < 3; ++c)
    for (int a = 0; a < 3; ++a) gradU(c, a) = d(*uc[c], a);
  p.DU = sym_grad(gradU);
  p.divU = trace(p.DU);
  p.curlH = {d(f.Hz, 1) - d(f.Hy, 2), d(f.Hx, 2) - d(f.Hz, 0),
             d(f.Hy, 0) - d(f.Hx, 1)};
  if (slices.size() > 1) {
    const std::size_t n0 = (slice == 0) ? 0 : slice - 1;
    const std::size_t n1 = std::min(slice + 1, slices.size() - 1);
    p.dTheta_dt = (slices[n1].Theta.at(g, i, j, k) - slices[n0].Theta.at(g, i, j, k)) /
                  (times[n1] - times[n0]);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Relative energy.

double rel_energy_density(const StatePoint& pt, const RefStatePoint& ref,
                          const eos::Model& eosm) {
  if (pt.rho < 0.0 || !(pt.theta > 0.0) || !(ref.r > 0.0) || !(ref.Theta > 0.0))
    throw DomainError("rel_energy_density needs rho >= 0, theta > 0, r > 0, Theta > 0");
  double rho_e = 0.0, rho_s = 0.0;
  if (pt.rho > 0.0) {
    const ThermoPoint tp{pt.rho, pt.theta};
    rho_e = pt.rho * eosm.internal_energy(tp);
    rho_s = pt.rho * eosm.entropy(tp);
  }
  const ThermoPoint rp{ref.r, ref.Theta};
  const double s_ref = eosm.entropy(rp);
  const double e_ref = eosm.internal_energy(rp);
  const double gibbs = eosm.gibbs_free_energy(rp);
  return 0.5 * pt.rho * norm2(pt.u - ref.U) + 0.5 * norm2(pt.B - ref.H) + rho_e -
         ref.Theta * (rho_s - ref.r * s_ref) - gibbs * (pt.rho - ref.r) - ref.r * e_ref;
}

double rel_energy_total(const FluidState& s, const eos::Model& eosm,
                        const ReferenceSolution& ref, std::size_t slice) {
  if (!s.g.same_layout(ref.g)) throw GridMismatch("state and reference grids differ");
  const Grid& g = s.g;
  const double vol = g.cell_volume();
  std::vector<double> vals;
  vals.reserve(g.ncells());
  for_interior(g, [&](int i, int j, int k) {
    const double rho = s.rho.at(g, i, j, k);
    StatePoint pt;
    pt.rho = rho;
    pt.theta = eosm.invert_temperature(rho, s.eps.at(g, i, j, k) / rho);
    pt.u = (1.0 / rho) * s.momentum(i, j, k);
    pt.B = s.magnetic(i, j, k);
    vals.push_back(rel_energy_density(pt, ref.at(slice, i, j, k).v, eosm) * vol);
  });
  return pairwise_sum(vals);
}

// ---------------------------------------------------------------------------
// Cut-off.

void CutoffSpec::validate() const {
  if (!(delta > 0.0) || !(delta < 1.0)) throw ConfigError("cutoff delta must lie in (0, 1)");
}

namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double ramp(double x, double delta) {
  const double lo0 = 0.5 * delta, lo1 = delta;
  const double hi1 = 1.0 / delta, hi0 = 2.0 / delta;
  if (x <= lo0 || x >= hi0) return 0.0;
  if (x < lo1) return smoothstep((x - lo0) / (lo1 - lo0));
  if (x <= hi1) return 1.0;
  return 1.0 - smoothstep((x - hi1) / (hi0 - hi1));
}

}  // namespace

double cutoff_weight(const CutoffSpec& spec, const ThermoPoint& pt) {
  spec.validate();
  return ramp(pt.rho, spec.delta) * ramp(pt.theta, spec.delta);
}

// ---------------------------------------------------------------------------
// Lower bound (empirical coercivity constant).

LowerBoundReport lower_bound_check(
    const std::vector<std::pair<StatePoint, RefStatePoint>>& samples,
    const CutoffSpec& spec, const eos::Model& eosm) {
  spec.validate();
  LowerBoundReport rep;
  rep.c_delta = std::numeric_limits<double>::infinity();
  for (const auto& [pt, ref] : samples) {
    if (ref.r < spec.delta || ref.r > 1.0 / spec.delta || ref.Theta < spec.delta ||
        ref.Theta > 1.0 / spec.delta)
      throw DomainError("reference value outside the essential window");
    const double psi = cutoff_weight(spec, {std::max(pt.rho, 0.0), pt.theta});
    const double res = 1.0 - psi;
    double rho_s_abs = 0.0, rho_e = 0.0;
    if (pt.rho > 0.0) {
      const ThermoPoint tp{pt.rho, pt.theta};
      rho_s_abs = pt.rho * std::abs(eosm.entropy(tp));
      rho_e = pt.rho * eosm.internal_energy(tp);
    }
    const double dr = pt.rho - ref.r, dth = pt.theta - ref.Theta;
    const double bracket =
        psi * psi * (dr * dr + dth * dth + norm2(pt.u - ref.U) + norm2(pt.B - ref.H)) +
        res * (1.0 + pt.rho + rho_s_abs + rho_e + pt.rho * norm2(pt.u) + norm2(pt.B));
    if (bracket < 1e-14) continue;
    const double ratio = rel_energy_density(pt, ref, eosm) / bracket;
    rep.c_delta = std::min(rep.c_delta, ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    ++rep.used;
  }
  rep.vacuous = (rep.used == 0);
  if (rep.vacuous) rep.c_delta = 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Both sides of the final inequality, Dirac case.

std::vector<ReiRow> rei_sides(const solver::Trajectory& traj, const ReferenceSolution& ref,
                              const eos::Model& eosm, const TransportModel& tm,
                              const CutoffSpec& spec, double c) {
  spec.validate();
  if (traj.snaps.empty()) throw DataError("empty trajectory");
  if (!traj.snaps.front().g.same_layout(ref.g))
    throw GridMismatch("trajectory and reference grids differ");
  const Grid& g = ref.g;
  const double vol = g.cell_volume();

  struct Rates {
    double q_mu = 0, x_mu = 0, q_eta = 0, x_eta = 0, q_kappa = 0, x_kappa = 0,
           q_zeta = 0, x_zeta = 0, residual = 0, H = 0;
  };
  std::vector<Rates> inst(traj.snaps.size());
  for (std::size_t n = 0; n < traj.snaps.size(); ++n) {
    const FluidState& s = traj.snaps[n];
    const std::size_t slice = ref.slice_for(s.t);
    const solver::Primitives pr = solver::compute_primitives(s, eosm, 1);
    std::vector<double> vq_mu, vx_mu, vq_eta, vx_eta, vq_ka, vx_ka, vq_ze, vx_ze, vres;
    for_interior(g, [&](int i, int j, int k) {
      const double rho = s.rho.at(g, i, j, k);
      const double th = pr.theta.at(g, i, j, k);
      const RefPoint rp = ref.at(slice, i, j, k);
      const double Th = rp.v.Theta;
      const Mat3 Du = sym_grad(solver::velocity_gradient(s, pr, i, j, k));
      const Vec3 Dth = solver::temperature_gradient(s, pr, i, j, k);
      const Vec3 Cb = solver::curl_B(s, i, j, k);
      const double rt = std::sqrt(Th / th), rt_inv = std::sqrt(th / Th);

      const Mat3 Tu = traceless(Du), TU = traceless(rp.DU);
      const Mat3 dT = rt * Tu - rt_inv * TU;
      const double mu_t = tm.mu(th), mu_T = tm.mu(Th);
      vq_mu.push_back(0.5 * mu_t * frob2(dT) * vol);
      vx_mu.push_back(0.5 * (mu_t - mu_T) *
                      ddot(TU, (th / Th) * TU - Tu) * vol);

      const double trDu = trace(Du);
      const double deta = rt * trDu - rt_inv * rp.divU;
      const double eta_t = tm.eta(th), eta_T = tm.eta(Th);
      vq_eta.push_back(eta_t * deta * deta * vol);
      vx_eta.push_back(rp.divU * (eta_t - eta_T) * ((th / Th) * rp.divU - trDu) * vol);

      const Vec3 gq = (1.0 / th) * Dth - (1.0 / Th) * rp.grad_Theta;
      const double ka_t = tm.kappa(th), ka_T = tm.kappa(Th);
      vq_ka.push_back((Th * ka_t * norm2(gq) +
                       ka_T * dot((1.0 / Th) * rp.grad_Theta,
                                  (th - Th) * ((1.0 / Th) * rp.grad_Theta -
                                               (1.0 / th) * Dth))) *
                      vol);
      vx_ka.push_back(dot(rp.grad_Theta,
                          (ka_t - ka_T) * ((1.0 / Th) * rp.grad_Theta -
                                           (1.0 / th) * Dth)) *
                      vol);

      const Vec3 dz = rt * Cb - rt_inv * rp.curlH;
      const double ze_t = tm.zeta(th), ze_T = tm.zeta(Th);
      vq_ze.push_back(ze_t * norm2(dz) * vol);
      vx_ze.push_back(dot(rp.curlH, (ze_t - ze_T) * ((th / Th) * rp.curlH - Cb)) * vol);

      const Vec3 u = {pr.ux.at(g, i, j, k), pr.uy.at(g, i, j, k), pr.uz.at(g, i, j, k)};
      const Vec3 B = s.magnetic(i, j, k);
      const double psi = cutoff_weight(spec, {rho, th});
      const double sabs = std::abs(eosm.entropy({rho, th}));
      const double du = std::sqrt(norm2(u - rp.v.U));
      vres.push_back((1.0 - psi) *
                     (th + std::abs(pr.p.at(g, i, j, k)) + du +
                      rho * sabs * std::sqrt(norm2(u)) + std::sqrt(norm2(B)) * du) *
                     vol);
    });
    Rates& r = inst[n];
    r.q_mu = pairwise_sum(vq_mu);
    r.x_mu = pairwise_sum(vx_mu);
    r.q_eta = pairwise_sum(vq_eta);
    r.x_eta = pairwise_sum(vx_eta);
    r.q_kappa = pairwise_sum(vq_ka);
    r.x_kappa = pairwise_sum(vx_ka);
    r.q_zeta = pairwise_sum(vq_ze);
    r.x_zeta = pairwise_sum(vx_ze);
    r.residual = pairwise_sum(vres);
    r.H = rel_energy_total(s, eosm, ref, slice);
  }

  // Cumulative trapezoid in time.
  std::vector<ReiRow> rows(traj.snaps.size());
  double iH = 0;
  ReiRow acc;
  for (std::size_t n = 0; n < traj.snaps.size(); ++n) {
    if (n > 0) {
      const double dt = traj.snaps[n].t - traj.snaps[n - 1].t;
      if (!(dt > 0.0)) throw AlignmentError("trajectory times must be increasing");
      const Rates &a = inst[n - 1], &b = inst[n];
      auto tz = [dt](double x, double y) { return 0.5 * dt * (x + y); };
      acc.q_mu += tz(a.q_mu, b.q_mu);
      acc.x_mu += tz(a.x_mu, b.x_mu);
      acc.q_eta += tz(a.q_eta, b.q_eta);
      acc.x_eta += tz(a.x_eta, b.x_eta);
      acc.q_kappa += tz(a.q_kappa, b.q_kappa);
      acc.x_kappa += tz(a.x_kappa, b.x_kappa);
      acc.q_zeta += tz(a.q_zeta, b.q_zeta);
      acc.x_zeta += tz(a.x_zeta, b.x_zeta);
      acc.residual += tz(a.residual, b.residual);
      iH += tz(a.H, b.H);
    }
    ReiRow& row = rows[n];
    row = acc;
    row.tau = traj.snaps[n].t;
    row.H = inst[n].H;
    row.lhs = row.H + acc.q_mu - acc.x_mu + acc.q_eta - acc.x_eta + acc.q_kappa -
              acc.x_kappa + acc.q_zeta - acc.x_zeta;
    row.rhs = inst[0].H + c * iH + acc.residual;
    row.margin = row.rhs - row.lhs;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Gronwall envelope fit.

GronwallFit gronwall_fit(const std::vector<double>& times, const std::vector<double>& H) {
  if (times.size() != H.size() || H.empty())
    throw DataError("gronwall_fit needs matching nonempty series");
  std::vector<double> h = H;
  for (double& v : h) {
    if (v < -1e-12) throw DataError("negative relative energy in gronwall_fit");
    v = std::max(v, 0.0);
  }
  GronwallFit fit;
  const double h0 = h.front();
  bool all_zero = true;
  for (double v : h)
    if (v > 0.0) all_zero = false;
  if (h0 == 0.0) {
    fit.c_fit = all_zero ? 0.0 : std::numeric_limits<double>::infinity();
    fit.max_violation = all_zero ? 0.0 : std::numeric_limits<double>::infinity();
    return fit;
  }
  auto ok = [&](double c) {
    for (std::size_t n = 0; n < h.size(); ++n) {
      const double env = h0 * std::exp(c * (times[n] - times[0])) * (1.0 + 1e-9);
      if (h[n] > env) return false;
    }
    return true;
  };
  if (ok(0.0)) {
    fit.c_fit = 0.0;
  } else {
    double hi = 1.0;
    int guard = 0;
    while (!ok(hi) && guard++ < 80) hi *= 2.0;
    if (!ok(hi)) {
      fit.c_fit = std::numeric_limits<double>::infinity();
      fit.max_violation = std::numeric_limits<double>::infinity();
      return fit;
    }
    double lo = 0.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? hi : lo) = mid;
    }
    fit.c_fit = hi;
  }
  for (std::size_t n = 0; n < h.size(); ++n) {
    const double env = h0 * std::exp(fit.c_fit * (times[n] - times[0]));
    fit.max_violation = std::max(fit.max_violation, h[n] / env - 1.0);
  }
  fit.max_violation = std::max(fit.max_violation, 0.0);
  return fit;
}

// ---------------------------------------------------------------------------
// Discrete Korn-Poincare ratio.

KPResult korn_poincare_ratio(const VecField& u, const VecField& u_ref, const Grid& g) {
  // Boundary trace through ghost-interpolated face values.
  for (const VecField* f : {&u, &u_ref})
    for (int a = 0; a < g.dim; ++a)
      for (int side = 0; side < 2; ++side) {
        const int bi = (side == 0) ? 0 : g.n[a] - 1;
        const int gi = (side == 0) ? -1 : g.n[a];
        for (int c2 = 0; c2 < g.n[(a + 2) % 3]; ++c2)
          for (int c1 = 0; c1 < g.n[(a + 1) % 3]; ++c1) {
            int ci[3], cg[3];
            ci[a] = bi;
            cg[a] = gi;
            ci[(a + 1) % 3] = cg[(a + 1) % 3] = c1;
            ci[(a + 2) % 3] = cg[(a + 2) % 3] = c2;
            for (const Field* comp : {&f->x, &f->y, &f->z}) {
              const double tr = 0.5 * (comp->at(g, ci[0], ci[1], ci[2]) +
                                       comp->at(g, cg[0], cg[1], cg[2]));
              if (std::abs(tr) > 1e-10)
                throw ConstraintError("velocity field has nonzero boundary trace");
            }
          }
      }

  const double vol = g.cell_volume();
  std::vector<double> vnum, vden;
  vnum.reserve(g.ncells());
  vden.reserve(g.ncells());
  auto diff = [&](const Field& a, const Field& b, int i, int j, int k) {
    return a.at(g, i, j, k) - b.at(g, i, j, k);
  };
  for_interior(g, [&](int i, int j, int k) {
    const Vec3 d = {diff(u.x, u_ref.x, i, j, k), diff(u.y, u_ref.y, i, j, k),
                    diff(u.z, u_ref.z, i, j, k)};
    vnum.push_back(norm2(d) * vol);
    Mat3 gradd;
    const Field* uc[3] = {&u.x, &u.y, &u.z};
    const Field* rc[3] = {&u_ref.x, &u_ref.y, &u_ref.z};
    for (int c = 0; c < 3; ++c)
      for (int a = 0; a < 3; ++a) {
        if (!g.active(a)) {
          gradd(c, a) = 0.0;
          continue;
        }
        const int di = a == 0, dj = a == 1, dk = a == 2;
        gradd(c, a) = (diff(*uc[c], *rc[c], i + di, j + dj, k + dk) -
                       diff(*uc[c], *rc[c], i - di, j - dj, k - dk)) /
                      (2.0 * g.h(a));
      }
    vden.push_back(frob2(traceless(sym_grad(gradd))) * vol);
  });
  const double num = pairwise_sum(vnum), den = pairwise_sum(vden);
  KPResult res;
  if (num < 1e-14 && den < 1e-14) {
    res.identical = true;
    return res;
  }
  if (den <= 1e-14)
    throw DegenerateError("vanishing T[D] norm with nonzero velocity difference");
  res.ratio = num / den;
  return res;
}

}  // namespace mhd::relent
