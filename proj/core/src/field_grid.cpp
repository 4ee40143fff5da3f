#include "ulfemi/field_grid.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace ulfemi {

std::vector<double> AxisSamples::linspace(double lo, double hi, std::size_t n) {
  if (n == 0) {
    return {};
  }
  if (n == 1) {
    return {0.5 * (lo + hi)};
  }
  std::vector<double> v(n);
  double const d = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = lo * static_cast<double>(n - 1 - i) / d + hi * static_cast<double>(i) / d;
  }
  v.front() = lo;
  v.back() = hi;
  return v;
}

VectorFieldGrid::VectorFieldGrid(AxisSamples axes, std::string source)
  : axes_(std::move(axes)), source_(std::move(source)) {
  std::size_t const n = axes_.size();
  hx.assign(n, cx{});
  hy.assign(n, cx{});
  hz.assign(n, cx{});
}

CVec3 VectorFieldGrid::at(std::size_t i, std::size_t j, std::size_t k) const {
  std::size_t const n = index(i, j, k);
  return {hx[n], hy[n], hz[n]};
}

void VectorFieldGrid::set(std::size_t i, std::size_t j, std::size_t k, CVec3 const &h) {
  std::size_t const n = index(i, j, k);
  hx[n] = h.x();
  hy[n] = h.y();
  hz[n] = h.z();
}

namespace {

bool axis_contains(std::vector<double> const &a, double v) {
  constexpr double tol = 1e-12;
  return !a.empty() && v >= a.front() - tol && v <= a.back() + tol;
}

// Lower cell index and fractional weight along one axis.
std::pair<std::size_t, double> locate(std::vector<double> const &a, double v) {
  if (a.size() == 1) {
    return {0, 0.0};
  }
  auto it = std::upper_bound(a.begin(), a.end(), v);
  std::size_t hi = static_cast<std::size_t>(std::distance(a.begin(), it));
  hi = std::clamp<std::size_t>(hi, 1, a.size() - 1);
  std::size_t const lo = hi - 1;
  double t = (v - a[lo]) / (a[hi] - a[lo]);
  t = std::clamp(t, 0.0, 1.0);
  return {lo, t};
}

} // namespace

bool VectorFieldGrid::contains(Vec3 const &p) const {
  return axis_contains(axes_.x, p.x()) && axis_contains(axes_.y, p.y()) && axis_contains(axes_.z, p.z());
}

CVec3 VectorFieldGrid::interpolate(Vec3 const &p) const {
  if (!contains(p)) {
    throw OutOfDomainError(fmt::format("point ({:.6g}, {:.6g}, {:.6g}) m lies outside the field grid", p.x(), p.y(), p.z()));
  }
  auto const [i0, tx] = locate(axes_.x, p.x());
  auto const [j0, ty] = locate(axes_.y, p.y());
  auto const [k0, tz] = locate(axes_.z, p.z());
  std::size_t const i1 = std::min(i0 + 1, nx() - 1);
  std::size_t const j1 = std::min(j0 + 1, ny() - 1);
  std::size_t const k1 = std::min(k0 + 1, nz() - 1);

  CVec3 h = CVec3::Zero();
  for (int c = 0; c < 8; ++c) {
    double const wx = (c & 1) ? tx : 1.0 - tx;
    double const wy = (c & 2) ? ty : 1.0 - ty;
    double const wz = (c & 4) ? tz : 1.0 - tz;
    double const w = wx * wy * wz;
    if (w == 0.0) {
      continue;
    }
    h += w * at((c & 1) ? i1 : i0, (c & 2) ? j1 : j0, (c & 4) ? k1 : k0);
  }
  return h;
}

void VectorFieldGrid::validate() const {
  std::size_t const n = axes_.size();
  if (hx.size() != n || hy.size() != n || hz.size() != n) {
    throw InvalidInputError("field grid component lattices do not match the axis shape");
  }
  for (auto const *axis : {&axes_.x, &axes_.y, &axes_.z}) {
    if (axis->empty()) {
      throw InvalidInputError("field grid axis has no samples");
    }
    if (!std::is_sorted(axis->begin(), axis->end()) ||
        std::adjacent_find(axis->begin(), axis->end()) != axis->end()) {
      throw InvalidInputError("field grid axis samples must be strictly increasing");
    }
  }
  for (auto const *comp : {&hx, &hy, &hz}) {
    for (cx const &v : *comp) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        throw InvalidInputError("field grid contains non-finite values");
      }
    }
  }
}

void write_field_csv(std::ostream &os, VectorFieldGrid const &grid) {
  os << "x,y,z,hx_re,hx_im,hy_re,hy_im,hz_re,hz_im\n";
  for (std::size_t k = 0; k < grid.nz(); ++k) {
    for (std::size_t j = 0; j < grid.ny(); ++j) {
      for (std::size_t i = 0; i < grid.nx(); ++i) {
        Vec3 const p = grid.position(i, j, k);
        CVec3 const h = grid.at(i, j, k);
        os << fmt::format("{:.9g},{:.9g},{:.9g},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n", p.x(), p.y(),
                          p.z(), h.x().real(), h.x().imag(), h.y().real(), h.y().imag(), h.z().real(),
                          h.z().imag());
      }
    }
  }
}

} // namespace ulfemi
