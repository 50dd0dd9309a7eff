#include "mhd/grid.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mhd/errors.hpp"

namespace mhd::grid {

double Grid::min_h() const {
  double m = h(0);
  for (int a = 1; a < dim; ++a) m = std::min(m, h(a));
  return m;
}

void Grid::validate() const {
  if (dim < 1 || dim > 3) throw ConfigError("grid dim must be 1, 2, or 3");
  for (int a = 0; a < 3; ++a) {
    if (n[a] < 1) throw ConfigError("cell counts must be >= 1");
    if (!(extent[a] > 0.0)) throw ConfigError("extents must be positive");
  }
  for (int a = dim; a < 3; ++a)
    if (n[a] != 1) throw ConfigError("inactive axes must carry exactly one cell");
  bool theta_dirichlet = false;
  for (int a = 0; a < dim; ++a)
    for (int side = 0; side < 2; ++side)
      if (theta_bc[a][side] == ThetaBc::Dirichlet) theta_dirichlet = true;
  if (!theta_dirichlet)
    throw ConfigError("at least one face must carry a temperature Dirichlet condition");
}

double div_B(const FluidState& s, int i, int j, int k) {
  const Grid& g = s.g;
  double d = 0.0;
  if (g.active(0))
    d += (s.bx.at(g, i + 1, j, k) - s.bx.at(g, i - 1, j, k)) / (2.0 * g.h(0));
  if (g.active(1))
    d += (s.by.at(g, i, j + 1, k) - s.by.at(g, i, j - 1, k)) / (2.0 * g.h(1));
  if (g.active(2))
    d += (s.bz.at(g, i, j, k + 1) - s.bz.at(g, i, j, k - 1)) / (2.0 * g.h(2));
  return d;
}

double max_div_B(const FluidState& s) {
  double m = 0.0;
  for_interior(s.g, [&](int i, int j, int k) {
    m = std::max(m, std::abs(div_B(s, i, j, k)));
  });
  return m;
}

namespace {

constexpr const char* kFieldNames[8] = {"rho", "mx", "my", "mz",
                                        "eps", "bx", "by", "bz"};

void write_block(std::ofstream& out, const FluidState& s, const Field& f) {
  static_assert(std::endian::native == std::endian::little,
                "snapshot writer assumes a little-endian host");
  const Grid& g = s.g;
  std::vector<double> buf;
  buf.reserve(g.ncells());
  for_interior(g, [&](int i, int j, int k) { buf.push_back(f.at(g, i, j, k)); });
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
}

}  // namespace

void write_snapshot(const std::string& path, const FluidState& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open snapshot file for writing: " + path);
  out << "MHDSNAP1\n";
  out << s.g.dim << ' ' << s.g.n[0] << ' ' << s.g.n[1] << ' ' << s.g.n[2] << ' ';
  char tbuf[32];
  std::snprintf(tbuf, sizeof tbuf, "%.17g", s.t);
  out << tbuf << ' ' << 8 << '\n';
  for (const char* name : kFieldNames) out << name << '\n';
  const Field* fields[8] = {&s.rho, &s.mx, &s.my, &s.mz, &s.eps, &s.bx, &s.by, &s.bz};
  for (const Field* f : fields) write_block(out, s, *f);
  if (!out) throw DataError("snapshot write failed: " + path);
}

FluidState read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open snapshot file: " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != "MHDSNAP1") throw DataError("bad snapshot magic in " + path);
  Grid g;
  int nfields = 0;
  double t = 0.0;
  in >> g.dim >> g.n[0] >> g.n[1] >> g.n[2] >> t >> nfields;
  in.ignore();
  if (nfields != 8) throw DataError("unexpected field count in snapshot");
  std::vector<std::string> names(nfields);
  for (auto& nm : names) std::getline(in, nm);
  for (int f = 0; f < 8; ++f)
    if (names[f] != kFieldNames[f]) throw DataError("unexpected field name " + names[f]);
  FluidState s(g);
  s.t = t;
  Field* fields[8] = {&s.rho, &s.mx, &s.my, &s.mz, &s.eps, &s.bx, &s.by, &s.bz};
  for (Field* f : fields) {
    std::vector<double> buf(g.ncells());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
    if (!in) throw DataError("truncated snapshot: " + path);
    std::size_t p = 0;
    for_interior(g, [&](int i, int j, int k) { f->at(g, i, j, k) = buf[p++]; });
  }
  return s;
}

}  // namespace mhd::grid
