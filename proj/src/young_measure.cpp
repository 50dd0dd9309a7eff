#include "mhd/young_measure.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mhd/errors.hpp"

namespace mhd::ym {

using constitutive::stress_power;
using constitutive::viscous_stress;
using eos::ThermoPoint;
using grid::for_interior;

// ---------------------------------------------------------------------------
// Measures.

void Atom::validate() const {
  auto fin = [](double x) { return std::isfinite(x); };
  bool ok = fin(rho) && fin(theta) && rho >= 0.0 && theta >= 0.0;
  for (int c = 0; c < 3; ++c)
    ok = ok && fin(u[c]) && fin(B[c]) && fin(D_theta[c]) && fin(C_B[c]);
  for (int c = 0; c < 9; ++c) ok = ok && fin(D_u.m[c]);
  if (!ok) throw DomainError("atom outside the phase space (non-finite or negative)");
}

void EmpiricalYoungMeasure::validate() const {
  for (const auto& cell : cells) {
    if (cell.empty()) throw WeightError("cell carries no atoms");
    double sum = 0.0;
    for (const auto& [w, atom] : cell) {
      if (!(w >= 0.0)) throw WeightError("negative atom weight");
      atom.validate();
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw WeightError("cell weights sum to " + std::to_string(sum));
  }
}

EymSequence from_ensemble(const std::vector<solver::Trajectory>& trajectories,
                          const std::vector<double>& weights, const eos::Model& eosm) {
  if (trajectories.empty()) throw DataError("from_ensemble needs at least one trajectory");
  if (weights.size() != trajectories.size())
    throw WeightError("one weight per trajectory required");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw WeightError("negative ensemble weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-12) throw WeightError("ensemble weights must sum to 1");

  const Grid& g = trajectories.front().snaps.front().g;
  const std::size_t nframes = trajectories.front().snaps.size();
  for (const auto& tr : trajectories) {
    if (tr.snaps.size() != nframes) throw AlignmentError("trajectories differ in length");
    for (std::size_t n = 0; n < nframes; ++n) {
      if (!tr.snaps[n].g.same_layout(g)) throw GridMismatch("ensemble grids differ");
      if (std::abs(tr.snaps[n].t - trajectories.front().snaps[n].t) > 1e-12)
        throw AlignmentError("ensemble snapshot times differ");
    }
  }

  EymSequence seq;
  for (std::size_t n = 0; n < nframes; ++n) {
    EmpiricalYoungMeasure m(g);
    m.t = trajectories.front().snaps[n].t;
    for (std::size_t q = 0; q < trajectories.size(); ++q) {
      const FluidState& s = trajectories[q].snaps[n];
      const solver::Primitives pr = solver::compute_primitives(s, eosm, 1);
      for_interior(g, [&](int i, int j, int k) {
        Atom a;
        a.rho = s.rho.at(g, i, j, k);
        a.u = {pr.ux.at(g, i, j, k), pr.uy.at(g, i, j, k), pr.uz.at(g, i, j, k)};
        a.theta = pr.theta.at(g, i, j, k);
        a.B = s.magnetic(i, j, k);
        a.D_u = constitutive::sym_grad(solver::velocity_gradient(s, pr, i, j, k));
        a.D_theta = solver::temperature_gradient(s, pr, i, j, k);
        a.C_B = solver::curl_B(s, i, j, k);
        m.cells[m.cell_index(i, j, k)].emplace_back(weights[q], a);
      });
    }
    m.validate();
    seq.frames.push_back(std::move(m));
  }
  return seq;
}

Field expectation(const EmpiricalYoungMeasure& eym,
                  const std::function<double(const Atom&)>& observable) {
  Field f(eym.g);
  for_interior(eym.g, [&](int i, int j, int k) {
    double acc = 0.0;
    for (const auto& [w, a] : eym.cells[eym.cell_index(i, j, k)])
      acc += w * observable(a);
    f.at(eym.g, i, j, k) = acc;
  });
  return f;
}

// ---------------------------------------------------------------------------
// Atom-level observables with phase-space boundary conventions: rho- and
// theta-weighted thermodynamic quantities extend by 0 to the vacuum edge.

namespace {

double rho_s(const Atom& a, const eos::Model& eosm) {
  if (a.rho <= 0.0 || a.theta <= 0.0) return 0.0;
  return a.rho * eosm.entropy({a.rho, a.theta});
}

double rho_e(const Atom& a, const eos::Model& eosm) {
  if (a.rho <= 0.0 || a.theta <= 0.0) return 0.0;
  return a.rho * eosm.internal_energy({a.rho, a.theta});
}

double pres(const Atom& a, const eos::Model& eosm) {
  if (a.rho <= 0.0 || a.theta <= 0.0) return 0.0;
  return eosm.pressure({a.rho, a.theta});
}

// (S : D_u + kappa |D_theta|^2 / theta + zeta |C_B|^2) / theta
double production_over_theta(const Atom& a, const TransportModel& tm) {
  const bool slots_zero = frob2(a.D_u) == 0.0 && norm2(a.D_theta) == 0.0 &&
                          norm2(a.C_B) == 0.0;
  if (a.theta <= 0.0) {
    if (slots_zero) return 0.0;
    throw DomainError("entropy production undefined at theta = 0 with active gradients");
  }
  const ThermoPoint tp{a.rho, a.theta};
  return (stress_power(tm, tp, a.D_u) +
          tm.kappa(a.theta) * norm2(a.D_theta) / a.theta +
          tm.zeta(a.theta) * norm2(a.C_B)) /
         a.theta;
}

Vec3 heat_term(const Atom& a, const TransportModel& tm) {
  // kappa(theta) D_theta / theta
  if (a.theta <= 0.0) return {0, 0, 0};
  return (tm.kappa(a.theta) / a.theta) * a.D_theta;
}

// Generic space integral at one frame: sum over cells of
// expectation(per-atom value) evaluated against a per-cell weight.
template <typename PerAtom>
double frame_int(const EmpiricalYoungMeasure& m, PerAtom&& value) {
  const Grid& g = m.g;
  const double vol = g.cell_volume();
  std::vector<double> vals;
  vals.reserve(g.ncells());
  for_interior(g, [&](int i, int j, int k) {
    const Vec3 x = g.center(i, j, k);
    double acc = 0.0;
    for (const auto& [w, a] : m.cells[m.cell_index(i, j, k)])
      acc += w * value(a, m.t, x);
    vals.push_back(acc * vol);
  });
  return pairwise_sum(vals);
}

// Trapezoid in time of per-frame space integrals.
template <typename PerAtom>
double spacetime_int(const EymSequence& seq, PerAtom&& value) {
  double acc = 0.0, prev = 0.0;
  for (std::size_t n = 0; n < seq.frames.size(); ++n) {
    const double cur = frame_int(seq.frames[n], value);
    if (n > 0) {
      const double dt = seq.frames[n].t - seq.frames[n - 1].t;
      acc += 0.5 * dt * (prev + cur);
    }
    prev = cur;
  }
  return acc;
}

void check_seq(const EymSequence& seq) {
  if (seq.frames.size() < 2) throw DataError("audit needs at least two frames");
  for (std::size_t n = 1; n < seq.frames.size(); ++n)
    if (!(seq.frames[n].t > seq.frames[n - 1].t))
      throw AlignmentError("frame times must increase");
}

double sup_grad_frob(const EymSequence& seq, const VectorST& phi) {
  double m = 0.0;
  for (const auto& fr : seq.frames)
    for_interior(fr.g, [&](int i, int j, int k) {
      m = std::max(m, std::sqrt(frob2(phi.grad(fr.t, fr.g.center(i, j, k)))));
    });
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Weak-form residuals.

double weak_residual_continuity(const EymSequence& seq, const ScalarST& phi) {
  check_seq(seq);
  auto boundary_term = [&](const EmpiricalYoungMeasure& m) {
    return frame_int(m, [&](const Atom& a, double t, const Vec3& x) {
      return a.rho * phi.f(t, x);
    });
  };
  const double lhs = boundary_term(seq.frames.back()) - boundary_term(seq.frames.front());
  const double rhs = spacetime_int(seq, [&](const Atom& a, double t, const Vec3& x) {
    return a.rho * phi.ft(t, x) + a.rho * dot(a.u, phi.grad(t, x));
  });
  return std::abs(lhs - rhs);
}

MomentumResidual weak_residual_momentum(const EymSequence& seq, const VectorST& phi,
                                        const TransportModel& tm, const eos::Model& eosm,
                                        double defect_budget) {
  check_seq(seq);
  auto boundary_term = [&](const EmpiricalYoungMeasure& m) {
    return frame_int(m, [&](const Atom& a, double t, const Vec3& x) {
      return a.rho * dot(a.u, phi.f(t, x));
    });
  };
  const double lhs = boundary_term(seq.frames.back()) - boundary_term(seq.frames.front());
  const double rhs = spacetime_int(seq, [&](const Atom& a, double t, const Vec3& x) {
    const Mat3 gp = phi.grad(t, x);
    double v = a.rho * dot(a.u, phi.ft(t, x));
    if (a.theta > 0.0 && a.rho > 0.0)
      v -= ddot(viscous_stress(tm, {a.rho, a.theta}, a.D_u), gp);
    // rho u (x) u - B (x) B  :  grad phi
    for (int c = 0; c < 3; ++c)
      for (int d = 0; d < 3; ++d)
        v += (a.rho * a.u[c] * a.u[d] - a.B[c] * a.B[d]) * gp(c, d);
    v += (pres(a, eosm) + 0.5 * norm2(a.B)) * div_of(gp);
    return v;
  });
  MomentumResidual res;
  res.residual = std::abs(lhs - rhs);
  res.defect_bound_used = sup_grad_frob(seq, phi) * defect_budget;
  return res;
}

double weak_residual_induction(const EymSequence& seq, const VectorST& phi,
                               const TransportModel& tm) {
  check_seq(seq);
  auto boundary_term = [&](const EmpiricalYoungMeasure& m) {
    return frame_int(m, [&](const Atom& a, double t, const Vec3& x) {
      return dot(a.B, phi.f(t, x));
    });
  };
  const double lhs = boundary_term(seq.frames.back()) - boundary_term(seq.frames.front());
  const double rhs = spacetime_int(seq, [&](const Atom& a, double t, const Vec3& x) {
    const Vec3 zc = (a.theta > 0.0) ? tm.zeta(a.theta) * a.C_B : Vec3{0, 0, 0};
    return dot(a.B, phi.ft(t, x)) -
           dot(cross(a.B, a.u) + zc, curl_of(phi.grad(t, x)));
  });
  return std::abs(lhs - rhs);
}

double weak_divB(const EymSequence& seq, const ScalarST& chi) {
  check_seq(seq);
  return std::abs(spacetime_int(seq, [&](const Atom& a, double t, const Vec3& x) {
    return dot(a.B, chi.grad(t, x));
  }));
}

double entropy_inequality_margin(const EymSequence& seq, const ScalarST& phi,
                                 const TransportModel& tm, const eos::Model& eosm) {
  check_seq(seq);
  auto boundary_term = [&](const EmpiricalYoungMeasure& m) {
    return frame_int(m, [&](const Atom& a, double t, const Vec3& x) {
      return rho_s(a, eosm) * phi.f(t, x);
    });
  };
  const double lhs_bt =
      boundary_term(seq.frames.back()) - boundary_term(seq.frames.front());
  const double lhs_prod = spacetime_int(seq, [&](const Atom& a, double t, const Vec3& x) {
    return production_over_theta(a, tm) * phi.f(t, x);
  });
  const double rhs = spacetime_int(seq, [&](const Atom& a, double t, const Vec3& x) {
    return rho_s(a, eosm) * phi.ft(t, x) +
           dot(rho_s(a, eosm) * a.u - heat_term(a, tm), phi.grad(t, x));
  });
  return (lhs_bt - lhs_prod) - rhs;
}

BallisticAudit ballistic_inequality_audit(const EymSequence& seq, const BallisticPair& pair,
                                          const TransportModel& tm, const eos::Model& eosm) {
  check_seq(seq);
  BallisticAudit audit;
  audit.pair_id = pair.theta_t.id + "|" + pair.B_t.id;

  auto ball_energy = [&](const EmpiricalYoungMeasure& m) {
    return frame_int(m, [&](const Atom& a, double t, const Vec3& x) {
      return 0.5 * a.rho * norm2(a.u) + rho_e(a, eosm) + 0.5 * norm2(a.B) -
             pair.theta_t.f(t, x) * rho_s(a, eosm) - dot(pair.B_t.f(t, x), a.B);
    });
  };
  auto prod_rate = [&](const EmpiricalYoungMeasure& m) {
    return frame_int(m, [&](const Atom& a, double t, const Vec3& x) {
      return production_over_theta(a, tm) * pair.theta_t.f(t, x);
    });
  };
  auto rhs_rate = [&](const EmpiricalYoungMeasure& m) {
    return frame_int(m, [&](const Atom& a, double t, const Vec3& x) {
      const Vec3 zc = (a.theta > 0.0) ? tm.zeta(a.theta) * a.C_B : Vec3{0, 0, 0};
      return -(rho_s(a, eosm) * pair.theta_t.ft(t, x) +
               dot(rho_s(a, eosm) * a.u - heat_term(a, tm), pair.theta_t.grad(t, x))) -
             (dot(a.B, pair.B_t.ft(t, x)) -
              dot(cross(a.B, a.u) + zc, curl_of(pair.B_t.grad(t, x))));
    });
  };

  const double e0 = ball_energy(seq.frames.front());
  double iprod = 0.0, irhs = 0.0;
  double prev_p = prod_rate(seq.frames.front()), prev_r = rhs_rate(seq.frames.front());
  audit.tau.push_back(seq.frames.front().t);
  audit.margin.push_back(0.0);
  audit.defect.push_back(0.0);
  for (std::size_t n = 1; n < seq.frames.size(); ++n) {
    const double dt = seq.frames[n].t - seq.frames[n - 1].t;
    const double cur_p = prod_rate(seq.frames[n]), cur_r = rhs_rate(seq.frames[n]);
    iprod += 0.5 * dt * (prev_p + cur_p);
    irhs += 0.5 * dt * (prev_r + cur_r);
    prev_p = cur_p;
    prev_r = cur_r;
    const double lhs_wo = (ball_energy(seq.frames[n]) - e0) + iprod;
    audit.tau.push_back(seq.frames[n].t);
    audit.margin.push_back(irhs - lhs_wo);
    audit.defect.push_back(std::max(0.0, lhs_wo - irhs));
  }
  return audit;
}

double defect_budget(const EymSequence& seq, const std::vector<BallisticPair>& pairs,
                     const TransportModel& tm, const eos::Model& eosm, double c_defect) {
  double worst = 0.0;
  for (const auto& pair : pairs) {
    const BallisticAudit a = ballistic_inequality_audit(seq, pair, tm, eosm);
    double integral = 0.0;
    for (std::size_t n = 1; n < a.tau.size(); ++n)
      integral += 0.5 * (a.tau[n] - a.tau[n - 1]) * (a.defect[n] + a.defect[n - 1]);
    worst = std::max(worst, integral);
  }
  return c_defect * worst;
}

CompatibilityResiduals compatibility_audit(const EymSequence& seq,
                                           const TestFunctionDictionary& dict) {
  check_seq(seq);
  CompatibilityResiduals out;
  for (const TensorST& Z : dict.cc_S_tests) {
    const double lhs = spacetime_int(seq, [&](const Atom& a, double t, const Vec3& x) {
      return -dot(a.u, Z.div(t, x));
    });
    const double rhs = spacetime_int(seq, [&](const Atom& a, double t, const Vec3& x) {
      return ddot(a.D_u, Z.f(t, x));
    });
    const double r = std::abs(lhs - rhs);
    if (r > out.cc_S) {
      out.cc_S = r;
      out.worst_S_id = Z.id;
    }
  }
  for (const auto& [psi, tht] : dict.cc_t_tests) {
    const double lhs = spacetime_int(seq, [&](const Atom& a, double t, const Vec3& x) {
      return -(a.theta - tht.f(t, x)) * div_of(psi.grad(t, x));
    });
    const double rhs = spacetime_int(seq, [&](const Atom& a, double t, const Vec3& x) {
      return dot(a.D_theta - tht.grad(t, x), psi.f(t, x));
    });
    const double r = std::abs(lhs - rhs);
    if (r > out.cc_t) {
      out.cc_t = r;
      out.worst_t_id = psi.id + "|" + tht.id;
    }
  }
  for (const auto& [Bt, G] : dict.cc_B_tests) {
    const double lhs = spacetime_int(seq, [&](const Atom& a, double t, const Vec3& x) {
      return dot(a.B - Bt.f(t, x), curl_of(G.grad(t, x)));
    });
    const double rhs = spacetime_int(seq, [&](const Atom& a, double t, const Vec3& x) {
      return dot(G.f(t, x), a.C_B - curl_of(Bt.grad(t, x)));
    });
    const double r = std::abs(lhs - rhs);
    if (r > out.cc_B) {
      out.cc_B = r;
      out.worst_B_id = Bt.id + "|" + G.id;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dictionary construction.

namespace {

struct Wave {
  double kx = 0.0, ky = 0.0, om = 0.0;  // spatial wave numbers and time frequency
};

// C1 compact-support bump on [a, b], zero outside, peak 1 at the midpoint.
struct Bump {
  double a, b;
  double operator()(double x) const {
    if (x <= a || x >= b) return 0.0;
    const double s = 0.5 * (b - a);
    return (x - a) * (x - a) * (b - x) * (b - x) / (s * s * s * s);
  }
  double d(double x) const {
    if (x <= a || x >= b) return 0.0;
    const double s = 0.5 * (b - a);
    return 2.0 * (x - a) * (b - x) * ((b - x) - (x - a)) / (s * s * s * s);
  }
};

}  // namespace

TestFunctionDictionary TestFunctionDictionary::make_default(const Grid& g, double theta_bar,
                                                            const Vec3& B_bar, int members) {
  if (members < 1) throw ConfigError("dictionary needs at least one member per family");
  const double Lx = g.extent[0], Ly = g.extent[1];
  const bool two_d = g.active(1);
  const double pi = 3.14159265358979323846;

  auto wave_for = [&](int m) {
    Wave w;
    w.kx = pi * (1 + m % 3) / Lx;
    w.ky = two_d ? pi * (1 + (m / 3) % 3) / Ly : 0.0;
    w.om = 0.4 + 0.3 * (m % 5);
    return w;
  };

  TestFunctionDictionary dict;

  for (int m = 0; m < members; ++m) {
    const Wave w = wave_for(m);
    // continuity: free C1 scalars
    dict.continuity.push_back(ScalarST{
        "ce_" + std::to_string(m),
        [=](double t, const Vec3& x) {
          return std::cos(w.om * t) * std::cos(w.kx * x[0]) * std::cos(w.ky * x[1]);
        },
        [=](double t, const Vec3& x) {
          return -w.om * std::sin(w.om * t) * std::cos(w.kx * x[0]) *
                 std::cos(w.ky * x[1]);
        },
        [=](double t, const Vec3& x) {
          const double T = std::cos(w.om * t);
          return Vec3{-T * w.kx * std::sin(w.kx * x[0]) * std::cos(w.ky * x[1]),
                      -T * w.ky * std::cos(w.kx * x[0]) * std::sin(w.ky * x[1]), 0.0};
        }});

    // momentum: vanish on every active face; sin factors per active axis
    {
      const int dir = m % 3;
      const double sy_k = two_d ? pi * (1 + (m / 3) % 2) / Ly : 0.0;
      auto sx = [=](double x) { return std::sin(w.kx * x); };
      auto dsx = [=](double x) { return w.kx * std::cos(w.kx * x); };
      auto sy = [=](double y) { return two_d ? std::sin(sy_k * y) : 1.0; };
      auto dsy = [=](double y) { return two_d ? sy_k * std::cos(sy_k * y) : 0.0; };
      dict.momentum.push_back(VectorST{
          "me_" + std::to_string(m),
          [=](double t, const Vec3& x) {
            Vec3 v{0, 0, 0};
            v[dir] = std::cos(w.om * t) * sx(x[0]) * sy(x[1]);
            return v;
          },
          [=](double t, const Vec3& x) {
            Vec3 v{0, 0, 0};
            v[dir] = -w.om * std::sin(w.om * t) * sx(x[0]) * sy(x[1]);
            return v;
          },
          [=](double t, const Vec3& x) {
            Mat3 gr;
            const double T = std::cos(w.om * t);
            gr(dir, 0) = T * dsx(x[0]) * sy(x[1]);
            gr(dir, 1) = T * sx(x[0]) * dsy(x[1]);
            return gr;
          }});
    }

    // induction: alternate between out-of-plane and stream-function fields
    if (m % 2 == 0 || !two_d) {
      // (0, 0, psi): divergence-free in 2.5D; tangential trace on the
      // in-plane Dirichlet faces vanishes via the sin factor in y
      const double ky = two_d ? pi * (1 + (m / 2) % 3) / Ly : 0.0;
      auto px = [=](double x) { return std::cos(w.kx * x); };
      auto dpx = [=](double x) { return -w.kx * std::sin(w.kx * x); };
      auto py = [=](double y) { return two_d ? std::sin(ky * y) : 1.0; };
      auto dpy = [=](double y) { return two_d ? ky * std::cos(ky * y) : 0.0; };
      dict.induction.push_back(VectorST{
          "ie_z_" + std::to_string(m),
          [=](double t, const Vec3& x) {
            return Vec3{0, 0, std::cos(w.om * t) * px(x[0]) * py(x[1])};
          },
          [=](double t, const Vec3& x) {
            return Vec3{0, 0, -w.om * std::sin(w.om * t) * px(x[0]) * py(x[1])};
          },
          [=](double t, const Vec3& x) {
            Mat3 gr;
            const double T = std::cos(w.om * t);
            gr(2, 0) = T * dpx(x[0]) * py(x[1]);
            gr(2, 1) = T * px(x[0]) * dpy(x[1]);
            return gr;
          }});
    } else {
      // curl of (0, 0, chi), chi = sin(kx x) cos(ky y): in-plane, div-free
      const double ky = pi * (1 + (m / 2) % 3) / Ly;
      dict.induction.push_back(VectorST{
          "ie_xy_" + std::to_string(m),
          [=](double t, const Vec3& x) {
            const double T = std::cos(w.om * t);
            return Vec3{-T * ky * std::sin(w.kx * x[0]) * std::sin(ky * x[1]),
                        -T * w.kx * std::cos(w.kx * x[0]) * std::cos(ky * x[1]), 0.0};
          },
          [=](double t, const Vec3& x) {
            const double T = -w.om * std::sin(w.om * t);
            return Vec3{-T * ky * std::sin(w.kx * x[0]) * std::sin(ky * x[1]),
                        -T * w.kx * std::cos(w.kx * x[0]) * std::cos(ky * x[1]), 0.0};
          },
          [=](double t, const Vec3& x) {
            Mat3 gr;
            const double T = std::cos(w.om * t);
            gr(0, 0) = -T * ky * w.kx * std::cos(w.kx * x[0]) * std::sin(ky * x[1]);
            gr(0, 1) = -T * ky * ky * std::sin(w.kx * x[0]) * std::cos(ky * x[1]);
            gr(1, 0) = T * w.kx * w.kx * std::sin(w.kx * x[0]) * std::cos(ky * x[1]);
            gr(1, 1) = T * w.kx * ky * std::cos(w.kx * x[0]) * std::sin(ky * x[1]);
            return gr;
          }});
    }

    // weak div B: compactly supported scalars
    {
      const Bump bx{0.1 * Lx + 0.02 * Lx * (m % 4), 0.9 * Lx - 0.02 * Lx * (m % 3)};
      const Bump by{0.1 * Ly, 0.9 * Ly};
      auto fy = [=](double y) { return two_d ? by(y) : 1.0; };
      auto dfy = [=](double y) { return two_d ? by.d(y) : 0.0; };
      dict.div_tests.push_back(ScalarST{
          "divb_" + std::to_string(m),
          [=](double t, const Vec3& x) {
            return std::cos(w.om * t) * bx(x[0]) * fy(x[1]);
          },
          [=](double t, const Vec3& x) {
            return -w.om * std::sin(w.om * t) * bx(x[0]) * fy(x[1]);
          },
          [=](double t, const Vec3& x) {
            const double T = std::cos(w.om * t);
            return Vec3{T * bx.d(x[0]) * fy(x[1]), T * bx(x[0]) * dfy(x[1]), 0.0};
          }});
    }

    // entropy: nonnegative, supported away from the thermal Dirichlet faces
    {
      const Bump bx{0.15 * Lx, 0.85 * Lx};
      const double ky = two_d ? pi * (1 + m % 2) / Ly : 0.0;
      auto ry = [=](double y) { return two_d ? 0.55 + 0.45 * std::cos(ky * y) : 1.0; };
      auto dry = [=](double y) { return two_d ? -0.45 * ky * std::sin(ky * y) : 0.0; };
      auto rt = [=](double t) { return 0.55 + 0.45 * std::cos(w.om * t); };
      auto drt = [=](double t) { return -0.45 * w.om * std::sin(w.om * t); };
      dict.entropy.push_back(ScalarST{
          "ei_" + std::to_string(m),
          [=](double t, const Vec3& x) { return rt(t) * bx(x[0]) * ry(x[1]); },
          [=](double t, const Vec3& x) { return drt(t) * bx(x[0]) * ry(x[1]); },
          [=](double t, const Vec3& x) {
            return Vec3{rt(t) * bx.d(x[0]) * ry(x[1]), rt(t) * bx(x[0]) * dry(x[1]), 0.0};
          }});
    }

    // ballistic pair: theta-tilde matches theta_B on Dirichlet faces, B-tilde
    // is B_bar plus a trace-free divergence-free perturbation
    {
      const double amp = 0.1 * theta_bar / (1 + m % 3);
      ScalarST tht{
          "bt_th_" + std::to_string(m),
          [=](double t, const Vec3& x) {
            return theta_bar + amp * std::cos(w.om * t) * std::sin(w.kx * x[0]) *
                                   std::cos(w.ky * x[1]);
          },
          [=](double t, const Vec3& x) {
            return -amp * w.om * std::sin(w.om * t) * std::sin(w.kx * x[0]) *
                   std::cos(w.ky * x[1]);
          },
          [=](double t, const Vec3& x) {
            const double T = amp * std::cos(w.om * t);
            return Vec3{T * w.kx * std::cos(w.kx * x[0]) * std::cos(w.ky * x[1]),
                        -T * w.ky * std::sin(w.kx * x[0]) * std::sin(w.ky * x[1]), 0.0};
          }};
      const double ky = two_d ? pi * (1 + m % 3) / Ly : 0.0;
      const double bamp = 0.2 / (1 + m % 4);
      auto py = [=](double y) { return two_d ? std::sin(ky * y) : 1.0; };
      auto dpy = [=](double y) { return two_d ? ky * std::cos(ky * y) : 0.0; };
      VectorST bt{
          "bt_B_" + std::to_string(m),
          [=](double t, const Vec3& x) {
            return B_bar + Vec3{0, 0,
                                bamp * std::cos(w.om * t) * std::cos(w.kx * x[0]) *
                                    py(x[1])};
          },
          [=](double t, const Vec3& x) {
            return Vec3{0, 0,
                        -bamp * w.om * std::sin(w.om * t) * std::cos(w.kx * x[0]) *
                            py(x[1])};
          },
          [=](double t, const Vec3& x) {
            Mat3 gr;
            const double T = bamp * std::cos(w.om * t);
            gr(2, 0) = -T * w.kx * std::sin(w.kx * x[0]) * py(x[1]);
            gr(2, 1) = T * std::cos(w.kx * x[0]) * dpy(x[1]);
            return gr;
          }};
      dict.ballistic.push_back(BallisticPair{tht, bt});

      // cc_t: psi with vanishing normal component on the thermal Neumann faces
      auto syv = [=](double y) { return two_d ? std::sin(ky * y) : 1.0; };
      auto dsyv = [=](double y) { return two_d ? ky * std::cos(ky * y) : 0.0; };
      VectorST psi{
          "cct_psi_" + std::to_string(m),
          [=](double t, const Vec3& x) {
            const double T = std::cos(w.om * t);
            return Vec3{T * std::cos(w.kx * x[0]) * std::cos(w.ky * x[1]),
                        T * std::sin(w.kx * x[0]) * syv(x[1]), 0.0};
          },
          [=](double t, const Vec3& x) {
            const double T = -w.om * std::sin(w.om * t);
            return Vec3{T * std::cos(w.kx * x[0]) * std::cos(w.ky * x[1]),
                        T * std::sin(w.kx * x[0]) * syv(x[1]), 0.0};
          },
          [=](double t, const Vec3& x) {
            Mat3 gr;
            const double T = std::cos(w.om * t);
            gr(0, 0) = -T * w.kx * std::sin(w.kx * x[0]) * std::cos(w.ky * x[1]);
            gr(0, 1) = -T * w.ky * std::cos(w.kx * x[0]) * std::sin(w.ky * x[1]);
            gr(1, 0) = T * w.kx * std::cos(w.kx * x[0]) * syv(x[1]);
            gr(1, 1) = T * std::sin(w.kx * x[0]) * dsyv(x[1]);
            return gr;
          }};
      dict.cc_t_tests.emplace_back(psi, tht);

      // cc_B: G vanishing entirely on the magnetic Neumann faces (x faces)
      Vec3 gdir{0.3 + 0.1 * (m % 3), -0.2, 0.5 - 0.1 * (m % 2)};
      VectorST G{
          "ccb_G_" + std::to_string(m),
          [=](double t, const Vec3& x) {
            return (std::cos(w.om * t) * std::sin(w.kx * x[0]) *
                    std::cos(w.ky * x[1])) *
                   gdir;
          },
          [=](double t, const Vec3& x) {
            return (-w.om * std::sin(w.om * t) * std::sin(w.kx * x[0]) *
                    std::cos(w.ky * x[1])) *
                   gdir;
          },
          [=](double t, const Vec3& x) {
            Mat3 gr;
            const double T = std::cos(w.om * t);
            const double gx = T * w.kx * std::cos(w.kx * x[0]) * std::cos(w.ky * x[1]);
            const double gy = -T * w.ky * std::sin(w.kx * x[0]) * std::sin(w.ky * x[1]);
            for (int c = 0; c < 3; ++c) {
              gr(c, 0) = gdir[c] * gx;
              gr(c, 1) = gdir[c] * gy;
            }
            return gr;
          }};
      dict.cc_B_tests.emplace_back(bt, G);
    }

    // cc_S: scalar envelope times a constant symmetric matrix
    {
      Mat3 M;
      M(0, 0) = 1.0 + 0.2 * (m % 3);
      M(1, 1) = -0.5;
      M(2, 2) = 0.3;
      M(0, 1) = M(1, 0) = 0.4 - 0.1 * (m % 4);
      M(0, 2) = M(2, 0) = 0.15;
      M(1, 2) = M(2, 1) = -0.25;
      dict.cc_S_tests.push_back(TensorST{
          "ccs_" + std::to_string(m),
          [=](double t, const Vec3& x) {
            return (std::cos(w.om * t) * std::cos(w.kx * x[0]) *
                    std::cos(w.ky * x[1])) *
                   M;
          },
          [=](double t, const Vec3& x) {
            const double T = std::cos(w.om * t);
            const Vec3 grad{-T * w.kx * std::sin(w.kx * x[0]) * std::cos(w.ky * x[1]),
                            -T * w.ky * std::cos(w.kx * x[0]) * std::sin(w.ky * x[1]),
                            0.0};
            Vec3 dv{0, 0, 0};
            for (int c = 0; c < 3; ++c)
              for (int d = 0; d < 3; ++d) dv[c] += M(c, d) * grad[d];
            return dv;
          }});
    }
  }

  dict.verify(g, theta_bar, B_bar);
  return dict;
}

namespace {

// finite-difference consistency of the supplied derivatives
void fd_check(const std::string& id, const std::function<double(double, const Vec3&)>& f,
              double ft, const Vec3& grad, double t, const Vec3& x) {
  const double h = 1e-5;
  const double ft_fd = (f(t + h, x) - f(t - h, x)) / (2 * h);
  if (std::abs(ft_fd - ft) > 1e-5 * (1.0 + std::abs(ft)))
    throw ConstraintError("test " + id + ": time derivative mismatch");
  for (int a = 0; a < 3; ++a) {
    Vec3 xp = x, xm = x;
    xp[a] += h;
    xm[a] -= h;
    const double g_fd = (f(t, xp) - f(t, xm)) / (2 * h);
    if (std::abs(g_fd - grad[a]) > 1e-5 * (1.0 + std::abs(grad[a])))
      throw ConstraintError("test " + id + ": gradient mismatch");
  }
}

}  // namespace

void TestFunctionDictionary::verify(const Grid& g, double theta_bar,
                                    const Vec3& B_bar) const {
  std::mt19937 rng(911);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  auto rand_pt = [&](Vec3& x, double& t) {
    t = ut(rng);
    for (int a = 0; a < 3; ++a) x[a] = ut(rng) * g.extent[a];
  };
  // sample points on each active face
  std::vector<std::pair<int, Vec3>> face_pts;  // (axis, point)
  for (int a = 0; a < g.dim; ++a)
    for (int side = 0; side < 2; ++side)
      for (int s = 0; s < 8; ++s) {
        Vec3 x{0.5 * g.extent[0], 0.5 * g.extent[1], 0.5 * g.extent[2]};
        for (int c = 0; c < g.dim; ++c)
          if (c != a) x[c] = (s + 0.5) / 8.0 * g.extent[c];
        x[a] = (side == 0) ? 0.0 : g.extent[a];
        face_pts.emplace_back(a, x);
      }

  const int nsamp = 16;
  for (const ScalarST& s : continuity)
    for (int q = 0; q < nsamp; ++q) {
      Vec3 x;
      double t;
      rand_pt(x, t);
      fd_check(s.id, s.f, s.ft(t, x), s.grad(t, x), t, x);
    }
  for (const VectorST& v : momentum) {
    for (double tt : {0.0, 0.37, 0.9})
      for (const auto& [a, x] : face_pts)
        if (std::sqrt(norm2(v.f(tt, x))) > 1e-8)
          throw ConstraintError("momentum test " + v.id + " has nonzero boundary trace");
  }
  for (const VectorST& v : induction) {
    for (int q = 0; q < nsamp; ++q) {
      Vec3 x;
      double t;
      rand_pt(x, t);
      if (std::abs(div_of(v.grad(t, x))) > 1e-8)
        throw ConstraintError("induction test " + v.id + " is not divergence-free");
    }
    for (double tt : {0.0, 0.37, 0.9})
      for (const auto& [a, x] : face_pts) {
        const Vec3 val = v.f(tt, x);
        if (g.mag_bc[a][x[a] > 0.5 * g.extent[a] ? 1 : 0] == grid::MagBc::NeumannNormal) {
          if (std::abs(val[a]) > 1e-8)
            throw ConstraintError("induction test " + v.id + " has nonzero normal trace");
        } else {
          for (int c = 0; c < 3; ++c)
            if (c != a && std::abs(val[c]) > 1e-8)
              throw ConstraintError("induction test " + v.id +
                                    " has nonzero tangential trace");
        }
      }
  }
  for (const ScalarST& s : entropy) {
    for (int q = 0; q < nsamp; ++q) {
      Vec3 x;
      double t;
      rand_pt(x, t);
      if (s.f(t, x) < 0.0)
        throw ConstraintError("entropy test " + s.id + " is negative");
    }
    for (double tt : {0.0, 0.37, 0.9})
      for (const auto& [a, x] : face_pts)
        if (g.theta_bc[a][x[a] > 0.5 * g.extent[a] ? 1 : 0] == grid::ThetaBc::Dirichlet &&
            std::abs(s.f(tt, x)) > 1e-8)
          throw ConstraintError("entropy test " + s.id + " nonzero on a Dirichlet face");
  }
  for (const BallisticPair& p : ballistic) {
    for (int q = 0; q < nsamp; ++q) {
      Vec3 x;
      double t;
      rand_pt(x, t);
      if (!(p.theta_t.f(t, x) > 0.0))
        throw ConstraintError("ballistic theta-tilde " + p.theta_t.id + " not positive");
      if (std::abs(div_of(p.B_t.grad(t, x))) > 1e-8)
        throw ConstraintError("ballistic B-tilde " + p.B_t.id + " not divergence-free");
    }
    for (double tt : {0.0, 0.37, 0.9})
      for (const auto& [a, x] : face_pts) {
        const int side = x[a] > 0.5 * g.extent[a] ? 1 : 0;
        if (g.theta_bc[a][side] == grid::ThetaBc::Dirichlet &&
            std::abs(p.theta_t.f(tt, x) - theta_bar) > 1e-8)
          throw ConstraintError("ballistic theta-tilde " + p.theta_t.id +
                                " trace mismatch");
        const Vec3 val = p.B_t.f(tt, x);
        if (g.mag_bc[a][side] == grid::MagBc::NeumannNormal) {
          if (std::abs(val[a] - B_bar[a]) > 1e-8)
            throw ConstraintError("ballistic B-tilde " + p.B_t.id +
                                  " normal trace mismatch");
        } else {
          for (int c = 0; c < 3; ++c)
            if (c != a && std::abs(val[c] - B_bar[c]) > 1e-8)
              throw ConstraintError("ballistic B-tilde " + p.B_t.id +
                                    " tangential trace mismatch");
        }
      }
  }
  for (const auto& [psi, tht] : cc_t_tests)
    for (double tt : {0.0, 0.37, 0.9})
      for (const auto& [a, x] : face_pts)
        if (g.theta_bc[a][x[a] > 0.5 * g.extent[a] ? 1 : 0] == grid::ThetaBc::Neumann &&
            std::abs(psi.f(tt, x)[a]) > 1e-8)
          throw ConstraintError("cc_t test " + psi.id + " normal trace nonzero");
  for (const auto& [bt, G] : cc_B_tests)
    for (double tt : {0.0, 0.37, 0.9})
      for (const auto& [a, x] : face_pts)
        if (g.mag_bc[a][x[a] > 0.5 * g.extent[a] ? 1 : 0] == grid::MagBc::NeumannNormal &&
            std::sqrt(norm2(G.f(tt, x))) > 1e-8)
          throw ConstraintError("cc_B test " + G.id + " nonzero on a Neumann face");
}

// ---------------------------------------------------------------------------
// Full audit.

std::vector<AuditReport> full_audit(const EymSequence& seq,
                                    const TestFunctionDictionary& dict,
                                    const TransportModel& tm, const eos::Model& eosm,
                                    double c_audit, double c_defect) {
  check_seq(seq);
  const Grid& g = seq.frames.front().g;
  double dt_max = 0.0;
  for (std::size_t n = 1; n < seq.frames.size(); ++n)
    dt_max = std::max(dt_max, seq.frames[n].t - seq.frames[n - 1].t);
  const double tol = c_audit * (g.min_h() + dt_max);

  std::vector<AuditReport> reports;
  auto finalize = [&](AuditReport& r) {
    for (const AuditEntry& e : r.entries) {
      if (e.residual > r.worst) {
        r.worst = e.residual;
        r.worst_id = e.test_id;
      }
      if (!e.pass) r.pass = false;
    }
    reports.push_back(std::move(r));
  };

  {
    AuditReport r;
    r.identity = "mvs_ce";
    for (const ScalarST& phi : dict.continuity) {
      const double res = weak_residual_continuity(seq, phi);
      r.entries.push_back({phi.id, res, tol, res <= tol});
    }
    finalize(r);
  }
  {
    AuditReport r;
    r.identity = "mvs_me";
    const double budget = defect_budget(seq, dict.ballistic, tm, eosm, c_defect);
    for (const VectorST& phi : dict.momentum) {
      const MomentumResidual mr = weak_residual_momentum(seq, phi, tm, eosm, budget);
      const double tol_m = tol + mr.defect_bound_used;
      r.entries.push_back({phi.id, mr.residual, tol_m, mr.residual <= tol_m});
    }
    finalize(r);
  }
  {
    AuditReport r;
    r.identity = "mvs_ie";
    for (const VectorST& phi : dict.induction) {
      const double res = weak_residual_induction(seq, phi, tm);
      r.entries.push_back({phi.id, res, tol, res <= tol});
    }
    finalize(r);
  }
  {
    AuditReport r;
    r.identity = "mvs_me_div";
    for (const ScalarST& chi : dict.div_tests) {
      const double res = weak_divB(seq, chi);
      r.entries.push_back({chi.id, res, tol, res <= tol});
    }
    finalize(r);
  }
  {
    AuditReport r;
    r.identity = "mvs_ei";
    for (const ScalarST& phi : dict.entropy) {
      const double margin = entropy_inequality_margin(seq, phi, tm, eosm);
      const double viol = std::max(0.0, -margin);
      r.entries.push_back({phi.id, viol, tol, viol <= tol});
    }
    finalize(r);
  }
  {
    AuditReport r;
    r.identity = "mvs_bei";
    for (const BallisticPair& p : dict.ballistic) {
      const BallisticAudit a = ballistic_inequality_audit(seq, p, tm, eosm);
      double worst_defect = 0.0;
      for (double d : a.defect) worst_defect = std::max(worst_defect, d);
      r.entries.push_back({a.pair_id, worst_defect, tol, worst_defect <= tol});
    }
    finalize(r);
  }
  {
    AuditReport r;
    r.identity = "compatibility";
    const CompatibilityResiduals cr = compatibility_audit(seq, dict);
    r.entries.push_back({"cc_S:" + cr.worst_S_id, cr.cc_S, tol, cr.cc_S <= tol});
    r.entries.push_back({"cc_t:" + cr.worst_t_id, cr.cc_t, tol, cr.cc_t <= tol});
    r.entries.push_back({"cc_B:" + cr.worst_B_id, cr.cc_B, tol, cr.cc_B <= tol});
    finalize(r);
  }
  return reports;
}

}  // namespace mhd::ym
