#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mhd/eos.hpp"
#include "mhd/util.hpp"

namespace mhd::grid {

enum class ThetaBc { Dirichlet, Neumann };
enum class MagBc { DirichletTangential, NeumannNormal };

// Structured box grid. Tensors are always embedded in 3D ("2.5D"): inactive
// axes carry a single cell whose ghosts mirror the interior, so derivatives
// in those directions vanish identically.
struct Grid {
  static constexpr int ng = 2;

  int dim = 1;
  std::array<int, 3> n{64, 1, 1};
  std::array<double, 3> extent{1.0, 1.0, 1.0};
  ThetaBc theta_bc[3][2] = {{ThetaBc::Dirichlet, ThetaBc::Dirichlet},
                            {ThetaBc::Neumann, ThetaBc::Neumann},
                            {ThetaBc::Neumann, ThetaBc::Neumann}};
  MagBc mag_bc[3][2] = {{MagBc::NeumannNormal, MagBc::NeumannNormal},
                        {MagBc::DirichletTangential, MagBc::DirichletTangential},
                        {MagBc::DirichletTangential, MagBc::DirichletTangential}};

  bool active(int axis) const { return axis < dim; }
  double h(int axis) const { return extent[axis] / n[axis]; }
  double min_h() const;
  double cell_volume() const { return h(0) * h(1) * h(2); }
  std::size_t ncells() const {
    return static_cast<std::size_t>(n[0]) * n[1] * n[2];
  }
  int ntot(int axis) const { return n[axis] + 2 * ng; }
  std::size_t nalloc() const {
    return static_cast<std::size_t>(ntot(0)) * ntot(1) * ntot(2);
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i + ng) +
           static_cast<std::size_t>(ntot(0)) *
               (static_cast<std::size_t>(j + ng) +
                static_cast<std::size_t>(ntot(1)) * static_cast<std::size_t>(k + ng));
  }
  Vec3 center(int i, int j, int k) const {
    return {(i + 0.5) * h(0), (j + 0.5) * h(1), (k + 0.5) * h(2)};
  }
  void validate() const;
  bool same_layout(const Grid& o) const {
    return dim == o.dim && n == o.n && extent == o.extent;
  }
};

struct Field {
  Field() = default;
  explicit Field(const Grid& g) : v(g.nalloc(), 0.0) {}
  std::vector<double> v;
  double& at(const Grid& g, int i, int j, int k) { return v[g.index(i, j, k)]; }
  double at(const Grid& g, int i, int j, int k) const { return v[g.index(i, j, k)]; }
};

// Visits interior cells in a fixed deterministic order.
template <typename F>
void for_interior(const Grid& g, F&& f) {
  for (int k = 0; k < g.n[2]; ++k)
    for (int j = 0; j < g.n[1]; ++j)
      for (int i = 0; i < g.n[0]; ++i) f(i, j, k);
}

// Interior plus `halo` ghost layers along active axes.
template <typename F>
void for_extended(const Grid& g, int halo, F&& f) {
  const int hx = g.active(0) ? halo : 0;
  const int hy = g.active(1) ? halo : 0;
  const int hz = g.active(2) ? halo : 0;
  for (int k = -hz; k < g.n[2] + hz; ++k)
    for (int j = -hy; j < g.n[1] + hy; ++j)
      for (int i = -hx; i < g.n[0] + hx; ++i) f(i, j, k);
}

struct BoundaryData {
  // theta_B(t, x) > 0; defaults to a constant.
  std::function<double(double, const Vec3&)> theta_B = [](double, const Vec3&) {
    return 1.0;
  };
  // Stationary harmonic extension supplying b_tau and b_nu; defaults constant.
  std::function<Vec3(const Vec3&)> B_B = [](const Vec3&) { return Vec3{0, 0, 0}; };
};

enum class DivControl { Projection, ConstrainedTransport };

struct FluidState {
  Grid g;
  Field rho, mx, my, mz, eps, bx, by, bz;
  Field az;  // in-plane vector potential, used only in constrained-transport mode
  bool has_az = false;
  double t = 0.0;

  explicit FluidState(const Grid& grid)
      : g(grid), rho(grid), mx(grid), my(grid), mz(grid), eps(grid), bx(grid),
        by(grid), bz(grid), az(grid) {}

  Vec3 momentum(int i, int j, int k) const {
    return {mx.at(g, i, j, k), my.at(g, i, j, k), mz.at(g, i, j, k)};
  }
  Vec3 magnetic(int i, int j, int k) const {
    return {bx.at(g, i, j, k), by.at(g, i, j, k), bz.at(g, i, j, k)};
  }
};

// Centered discrete divergence of (bx, by, bz) at an interior cell.
double div_B(const FluidState& s, int i, int j, int k);
double max_div_B(const FluidState& s);

// Snapshot file: "MHDSNAP1\n", text header, field names, then row-major
// little-endian float64 blocks per field.
void write_snapshot(const std::string& path, const FluidState& s);
FluidState read_snapshot(const std::string& path);

}  // namespace mhd::grid
