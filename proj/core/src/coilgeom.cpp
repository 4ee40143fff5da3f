#include "ulfemi/coilgeom.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "ulfemi/field_grid.hpp"
#include "ulfemi/quadrature.hpp"

namespace ulfemi {

Pose Pose::axis_x(Vec3 const &translation) {
  Pose p;
  p.rotation.col(0) = Vec3::UnitY();
  p.rotation.col(1) = Vec3::UnitZ();
  p.rotation.col(2) = Vec3::UnitX();
  p.translation = translation;
  return p;
}

Pose Pose::axis_y(Vec3 const &translation) {
  Pose p;
  p.rotation.col(0) = Vec3::UnitX();
  p.rotation.col(1) = -Vec3::UnitZ();
  p.rotation.col(2) = Vec3::UnitY();
  p.translation = translation;
  return p;
}

Pose Pose::axis_z(Vec3 const &translation) {
  Pose p;
  p.translation = translation;
  return p;
}

std::string to_string(CoilKind kind) {
  switch (kind) {
  case CoilKind::Solenoid: return "solenoid";
  case CoilKind::Saddle: return "saddle";
  case CoilKind::DetectionLoop: return "detection_loop";
  case CoilKind::CancellationPair: return "cancellation_pair";
  }
  return "unknown";
}

int CoilSpec::turns() const {
  return std::visit([](auto const &p) { return p.turns; }, params);
}

namespace {

void require_positive(double v, char const *what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidSpecError(fmt::format("coil parameter '{}' must be positive (got {})", what, v));
  }
}

void require_turns(int turns) {
  if (turns < 1) {
    throw InvalidSpecError(fmt::format("coil turn count must be >= 1 (got {})", turns));
  }
}

} // namespace

void CoilSpec::validate() const {
  std::visit(
    [](auto const &p) {
      using P = std::decay_t<decltype(p)>;
      require_turns(p.turns);
      if constexpr (std::is_same_v<P, SolenoidParams>) {
        require_positive(p.radius, "radius");
        require_positive(p.length, "length");
      } else if constexpr (std::is_same_v<P, SaddleParams>) {
        require_positive(p.radius, "radius");
        require_positive(p.length, "length");
        if (!(p.arc_deg > 0.0 && p.arc_deg <= 180.0)) {
          throw InvalidSpecError(fmt::format("saddle arc angle must lie in (0, 180] degrees (got {})", p.arc_deg));
        }
      } else if constexpr (std::is_same_v<P, DetectionLoopParams>) {
        require_positive(p.radius, "radius");
      } else {
        require_positive(p.outer_width, "outer_width");
        require_positive(p.outer_height, "outer_height");
        require_positive(p.inner_width, "inner_width");
        require_positive(p.inner_height, "inner_height");
        require_positive(p.separation, "separation");
        require_positive(p.density_ratio, "density_ratio");
        if (p.inner_width > p.outer_width || p.inner_height > p.outer_height) {
          throw InvalidSpecError("cancellation winding inner rectangle must fit inside the outer rectangle");
        }
      }
    },
    params);
  Mat3 const rtr = pose.rotation.transpose() * pose.rotation;
  if (!rtr.isIdentity(1e-9) || pose.rotation.determinant() < 0.0) {
    throw InvalidSpecError(fmt::format("coil '{}' pose rotation is not a proper rotation", name));
  }
}

std::pair<std::size_t, std::size_t> WindingPath::turn_range(std::size_t turn) const {
  std::size_t const begin = turn_offsets.at(turn);
  std::size_t const end = (turn + 1 < turn_offsets.size()) ? turn_offsets[turn + 1] : segments.size();
  return {begin, end};
}

void WindingPath::validate() const {
  constexpr double tol = 1e-9;
  if (segments.empty()) {
    throw InvalidSpecError("winding path has no segments");
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (segments[s].length() <= kMinSegmentLength) {
      throw InvalidSpecError(fmt::format("winding segment {} is shorter than {} m", s, kMinSegmentLength));
    }
  }
  for (std::size_t t = 0; t < turn_count(); ++t) {
    auto const [begin, end] = turn_range(t);
    if (begin >= end) {
      throw InvalidSpecError(fmt::format("winding turn {} is empty", t));
    }
    for (std::size_t s = begin + 1; s < end; ++s) {
      if ((segments[s].a - segments[s - 1].b).norm() > tol) {
        throw InvalidSpecError(fmt::format("winding segments {} and {} are not connected", s - 1, s));
      }
    }
    if (closed && (segments[end - 1].b - segments[begin].a).norm() > tol) {
      throw InvalidSpecError(fmt::format("winding turn {} is flagged closed but does not close", t));
    }
  }
}

std::vector<double> cancellation_turn_positions(int turns, double density_ratio) {
  require_turns(turns);
  if (turns == 1) {
    return {1.0};
  }
  // Density rho(u) = 1 + (r - 1) u on u in [0, 1]; turn k sits where the
  // cumulative density reaches k / (turns - 1) of the total.
  double const r = density_ratio;
  std::vector<double> u(turns);
  for (int k = 0; k < turns; ++k) {
    double const q = static_cast<double>(k) / (turns - 1);
    if (std::abs(r - 1.0) < 1e-12) {
      u[k] = q;
    } else {
      double const disc = 1.0 + (r - 1.0) * (r + 1.0) * q;
      u[k] = (std::sqrt(disc) - 1.0) / (r - 1.0);
    }
  }
  u.front() = 0.0;
  u.back() = 1.0;
  return u;
}

namespace {

// Vertex radius of an M-gon (or arc step `step` radians) whose chords enclose
// the same area as the true circular arc.
double equal_area_radius(double radius, double step) {
  return radius * std::sqrt(step / std::sin(step));
}

void append_polyline(WindingPath &path, std::vector<Vec3> const &vertices, Pose const &pose) {
  path.turn_offsets.push_back(path.segments.size());
  for (std::size_t v = 0; v + 1 < vertices.size(); ++v) {
    path.segments.push_back({pose.apply(vertices[v]), pose.apply(vertices[v + 1])});
  }
}

std::vector<Vec3> circle_vertices(double radius, double z, int m) {
  double const step = 2.0 * kPi / m;
  double const rv = equal_area_radius(radius, step);
  std::vector<Vec3> v;
  v.reserve(m + 1);
  for (int i = 0; i < m; ++i) {
    double const th = step * i;
    v.emplace_back(rv * std::cos(th), rv * std::sin(th), z);
  }
  v.push_back(v.front());
  return v;
}

// Window centred on local +x, normal +x (counter-clockwise seen from +x).
std::vector<Vec3> saddle_window(SaddleParams const &p, int arc_segments) {
  double const a = deg2rad(p.arc_deg);
  double const step = a / arc_segments;
  double const rv = equal_area_radius(p.radius, step);
  double const hz = 0.5 * p.length;
  auto phi = [&](int j) { return (static_cast<double>(2 * j - arc_segments) * a) / (2.0 * arc_segments); };
  std::vector<Vec3> v;
  for (int j = 0; j <= arc_segments; ++j) {
    v.emplace_back(rv * std::cos(phi(j)), rv * std::sin(phi(j)), -hz);
  }
  for (int j = arc_segments; j >= 0; --j) {
    v.emplace_back(rv * std::cos(phi(j)), rv * std::sin(phi(j)), hz);
  }
  v.push_back(v.front());
  return v;
}

std::vector<Vec3> rectangle_vertices(double w, double h, double z, int per_side) {
  Vec3 const corners[4] = {{-0.5 * w, -0.5 * h, z}, {0.5 * w, -0.5 * h, z}, {0.5 * w, 0.5 * h, z}, {-0.5 * w, 0.5 * h, z}};
  std::vector<Vec3> v;
  for (int c = 0; c < 4; ++c) {
    Vec3 const &a = corners[c];
    Vec3 const &b = corners[(c + 1) % 4];
    for (int s = 0; s < per_side; ++s) {
      double const t = static_cast<double>(s) / per_side;
      v.push_back(a + t * (b - a));
    }
  }
  v.push_back(v.front());
  return v;
}

} // namespace

WindingPath realize_coil(CoilSpec const &spec, int segments_per_turn) {
  if (segments_per_turn < 8) {
    throw InvalidSpecError(fmt::format("segments_per_turn must be >= 8 (got {})", segments_per_turn));
  }
  spec.validate();
  WindingPath path;
  path.closed = true;
  std::visit(
    [&](auto const &p) {
      using P = std::decay_t<decltype(p)>;
      if constexpr (std::is_same_v<P, SolenoidParams>) {
        for (int k = 0; k < p.turns; ++k) {
          double const z = -0.5 * p.length + (k + 0.5) * p.length / p.turns;
          append_polyline(path, circle_vertices(p.radius, z, segments_per_turn), spec.pose);
        }
      } else if constexpr (std::is_same_v<P, DetectionLoopParams>) {
        for (int k = 0; k < p.turns; ++k) {
          append_polyline(path, circle_vertices(p.radius, 0.0, segments_per_turn), spec.pose);
        }
      } else if constexpr (std::is_same_v<P, SaddleParams>) {
        // each window is one closed turn: two arcs plus two axial runs
        int const arc_segments = std::max(1, (segments_per_turn - 2) / 2);
        std::vector<Vec3> const a = saddle_window(p, arc_segments);
        // Second window: rotate by pi about local z, then reverse so that its
        // area vector also points along +x.
        std::vector<Vec3> b;
        for (auto it = a.rbegin(); it != a.rend(); ++it) {
          b.emplace_back(-it->x(), -it->y(), it->z());
        }
        for (int k = 0; k < p.turns; ++k) {
          append_polyline(path, a, spec.pose);
          append_polyline(path, b, spec.pose);
        }
      } else {
        std::vector<double> const u = cancellation_turn_positions(p.turns, p.density_ratio);
        int const per_side = std::max(1, segments_per_turn / 4);
        for (double const side : {0.5, -0.5}) {
          for (int k = 0; k < p.turns; ++k) {
            double const w = p.inner_width + u[k] * (p.outer_width - p.inner_width);
            double const h = p.inner_height + u[k] * (p.outer_height - p.inner_height);
            append_polyline(path, rectangle_vertices(w, h, side * p.separation, per_side), spec.pose);
          }
        }
      }
    },
    spec.params);
  path.validate();
  return path;
}

namespace {

// Unit-current Biot-Savart kernel of one straight segment (A/m per A).
Vec3 segment_kernel(Segment const &s, Vec3 const &p) {
  Vec3 const d = s.b - s.a;
  Vec3 const r1 = p - s.a;
  double const t = std::clamp(r1.dot(d) / d.squaredNorm(), 0.0, 1.0);
  if ((r1 - t * d).norm() < kSingularDistance) {
    throw SingularityError(fmt::format("field point ({:.6g}, {:.6g}, {:.6g}) m lies within {} m of a winding segment",
                                       p.x(), p.y(), p.z(), kSingularDistance));
  }
  Vec3 const r2 = p - s.b;
  double const n1 = r1.norm();
  double const n2 = r2.norm();
  double const denom = n1 * n2 * (n1 * n2 + r1.dot(r2));
  return ((n1 + n2) / denom) * r1.cross(r2);
}

} // namespace

CVec3 field_at(WindingPath const &path, Vec3 const &point) {
  Vec3 acc = Vec3::Zero();
  for (Segment const &s : path.segments) {
    acc += segment_kernel(s, point);
  }
  acc /= 4.0 * kPi;
  return path.current * acc.cast<cx>();
}

CVec3 field_at(std::vector<WindingPath> const &paths, Vec3 const &point) {
  CVec3 h = CVec3::Zero();
  for (WindingPath const &p : paths) {
    h += field_at(p, point);
  }
  return h;
}

namespace {

int even_order(int q) {
  if (q < 1) {
    throw InvalidSpecError(fmt::format("quadrature order must be >= 1 (got {})", q));
  }
  return q + (q % 2);
}

// Nodes are emitted in groups of four mirror images (+x+y, -x+y, +x-y, -x-y
// in the local frame) so that pairwise summation cancels odd integrands
// exactly.
TurnSurface disc_surface(double radius, double z, int q, Pose const &pose) {
  GaussRule const radial = gauss_legendre(q, 0.0, radius);
  int const per_quadrant = q;
  int const m = 4 * per_quadrant;
  double const dth = 2.0 * kPi / m;
  TurnSurface nodes;
  nodes.reserve(static_cast<std::size_t>(q) * m);
  for (int ir = 0; ir < q; ++ir) {
    double const r = radial.nodes[ir];
    double const w = radial.weights[ir] * r * dth;
    Vec3 const n = pose.rotate(Vec3(0.0, 0.0, w));
    for (int ia = 0; ia < per_quadrant; ++ia) {
      double const th = (ia + 0.5) * dth;
      double const c = r * std::cos(th);
      double const s = r * std::sin(th);
      for (Vec3 const &loc : {Vec3(c, s, z), Vec3(-c, s, z), Vec3(c, -s, z), Vec3(-c, -s, z)}) {
        nodes.push_back({pose.apply(loc), n});
      }
    }
  }
  return nodes;
}

TurnSurface rect_surface(double w, double h, double z, int q, Pose const &pose) {
  GaussRule const gx = gauss_legendre(q, -0.5 * w, 0.5 * w);
  GaussRule const gy = gauss_legendre(q, -0.5 * h, 0.5 * h);
  TurnSurface nodes;
  int const half = q / 2;
  for (int i = 0; i < half; ++i) {
    for (int j = 0; j < half; ++j) {
      double const x = gx.nodes[q - 1 - i];
      double const y = gy.nodes[q - 1 - j];
      Vec3 const n = pose.rotate(Vec3(0.0, 0.0, gx.weights[i] * gy.weights[j]));
      for (Vec3 const &loc : {Vec3(x, y, z), Vec3(-x, y, z), Vec3(x, -y, z), Vec3(-x, -y, z)}) {
        nodes.push_back({pose.apply(loc), n});
      }
    }
  }
  return nodes;
}

// Cylindrical patch of a saddle window centred on local angle 0 (sign = +1)
// or pi (sign = -1). Area normals point along +x for both windows.
TurnSurface saddle_surface(SaddleParams const &p, double inset, int q, double sign, Pose const &pose) {
  double const half_arc = 0.5 * deg2rad(p.arc_deg) - inset / p.radius;
  double const hz = 0.5 * p.length - inset;
  if (half_arc <= 0.0 || hz <= 0.0) {
    throw InvalidSpecError("saddle window too small for the requested inset");
  }
  GaussRule const gphi = gauss_legendre(q, -half_arc, half_arc);
  GaussRule const gz = gauss_legendre(q, -hz, hz);
  TurnSurface nodes;
  int const half = q / 2;
  for (int i = 0; i < half; ++i) {
    double const phi = gphi.nodes[q - 1 - i];
    double const c = std::cos(phi);
    double const s = std::sin(phi);
    for (int j = 0; j < half; ++j) {
      double const z = gz.nodes[q - 1 - j];
      double const w = gphi.weights[i] * gz.weights[j] * p.radius;
      double const x = sign * p.radius * c;
      double const y = sign * p.radius * s;
      Vec3 const n_up = pose.rotate(Vec3(w * c, w * s, 0.0));
      Vec3 const n_dn = pose.rotate(Vec3(w * c, -w * s, 0.0));
      nodes.push_back({pose.apply(Vec3(x, y, z)), n_up});
      nodes.push_back({pose.apply(Vec3(x, -y, z)), n_dn});
      nodes.push_back({pose.apply(Vec3(x, y, -z)), n_up});
      nodes.push_back({pose.apply(Vec3(x, -y, -z)), n_dn});
    }
  }
  return nodes;
}

cx pairwise_sum(std::vector<cx> v) {
  if (v.empty()) {
    return {};
  }
  while (v.size() > 1) {
    std::size_t const n = v.size();
    std::size_t const half = (n + 1) / 2;
    for (std::size_t i = 0; i < n / 2; ++i) {
      v[i] = v[2 * i] + v[2 * i + 1];
    }
    if (n % 2 == 1) {
      v[n / 2] = v[n - 1];
    }
    v.resize(half);
  }
  return v.front();
}

} // namespace

std::vector<TurnSurface> sensing_surface(CoilSpec const &spec, int quadrature_order, double inset) {
  spec.validate();
  int const q = even_order(quadrature_order);
  std::vector<TurnSurface> surfaces;
  std::visit(
    [&](auto const &p) {
      using P = std::decay_t<decltype(p)>;
      if constexpr (std::is_same_v<P, SolenoidParams>) {
        for (int k = 0; k < p.turns; ++k) {
          double const z = -0.5 * p.length + (k + 0.5) * p.length / p.turns;
          surfaces.push_back(disc_surface(p.radius - inset, z, q, spec.pose));
        }
      } else if constexpr (std::is_same_v<P, DetectionLoopParams>) {
        for (int k = 0; k < p.turns; ++k) {
          surfaces.push_back(disc_surface(p.radius - inset, 0.0, q, spec.pose));
        }
      } else if constexpr (std::is_same_v<P, SaddleParams>) {
        for (int k = 0; k < p.turns; ++k) {
          surfaces.push_back(saddle_surface(p, inset, q, +1.0, spec.pose));
          surfaces.push_back(saddle_surface(p, inset, q, -1.0, spec.pose));
        }
      } else {
        std::vector<double> const u = cancellation_turn_positions(p.turns, p.density_ratio);
        for (double const side : {0.5, -0.5}) {
          for (int k = 0; k < p.turns; ++k) {
            double const w = p.inner_width + u[k] * (p.outer_width - p.inner_width) - 2.0 * inset;
            double const h = p.inner_height + u[k] * (p.outer_height - p.inner_height) - 2.0 * inset;
            surfaces.push_back(rect_surface(w, h, side * p.separation, q, spec.pose));
          }
        }
      }
    },
    spec.params);
  return surfaces;
}

FluxResult flux_through(FieldFunction const &field, CoilSpec const &coil, int quadrature_order) {
  std::vector<TurnSurface> const surfaces = sensing_surface(coil, quadrature_order);
  FluxResult result;
  result.per_turn.reserve(surfaces.size());
  std::vector<cx> contrib;
  for (TurnSurface const &surface : surfaces) {
    contrib.clear();
    contrib.reserve(surface.size());
    for (SurfaceNode const &node : surface) {
      CVec3 const h = field(node.point);
      contrib.push_back(kMu0 * (h.x() * node.area_normal.x() + h.y() * node.area_normal.y() +
                                h.z() * node.area_normal.z()));
    }
    result.per_turn.push_back(pairwise_sum(contrib));
  }
  result.flux = pairwise_sum(result.per_turn);
  return result;
}

FluxResult flux_through(VectorFieldGrid const &grid, CoilSpec const &coil, int quadrature_order) {
  return flux_through([&grid](Vec3 const &p) { return grid.interpolate(p); }, coil, quadrature_order);
}

namespace {

bool same_params(CoilSpec const &a, CoilSpec const &b) {
  if (a.params.index() != b.params.index()) {
    return false;
  }
  auto close = [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(x)); };
  return std::visit(
    [&](auto const &pa) {
      using P = std::decay_t<decltype(pa)>;
      auto const &pb = std::get<P>(b.params);
      if (pa.turns != pb.turns) {
        return false;
      }
      if constexpr (std::is_same_v<P, SolenoidParams>) {
        return close(pa.radius, pb.radius) && close(pa.length, pb.length);
      } else if constexpr (std::is_same_v<P, SaddleParams>) {
        return close(pa.radius, pb.radius) && close(pa.length, pb.length) && close(pa.arc_deg, pb.arc_deg);
      } else if constexpr (std::is_same_v<P, DetectionLoopParams>) {
        return close(pa.radius, pb.radius);
      } else {
        return close(pa.outer_width, pb.outer_width) && close(pa.outer_height, pb.outer_height) &&
               close(pa.inner_width, pb.inner_width) && close(pa.inner_height, pb.inner_height) &&
               close(pa.separation, pb.separation) && close(pa.density_ratio, pb.density_ratio);
      }
    },
    a.params);
}

bool same_coil(CoilSpec const &a, CoilSpec const &b) {
  return same_params(a, b) && a.pose.rotation.isApprox(b.pose.rotation, 1e-12) &&
         (a.pose.translation - b.pose.translation).norm() <= 1e-12;
}

} // namespace

Eigen::MatrixXcd mutual_coupling_matrix(std::vector<CoilSpec> const &coils, CouplingOptions const &options) {
  if (coils.size() < 2) {
    throw InvalidInputError("mutual coupling needs at least two coils");
  }
  for (std::size_t i = 0; i < coils.size(); ++i) {
    for (std::size_t j = i + 1; j < coils.size(); ++j) {
      if (same_coil(coils[i], coils[j])) {
        throw InvalidSpecError(fmt::format("coils {} and {} are identical windings at the same pose", i, j));
      }
    }
  }
  std::vector<WindingPath> paths;
  paths.reserve(coils.size());
  for (CoilSpec const &c : coils) {
    paths.push_back(realize_coil(c, options.segments_per_turn));
  }
  std::size_t const n = coils.size();
  Eigen::MatrixXcd m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      WindingPath const &src = paths[j];
      auto field = [&src](Vec3 const &p) { return field_at(src, p); };
      if (i == j) {
        std::vector<TurnSurface> const surfaces = sensing_surface(coils[i], options.quadrature_order, options.wire_radius);
        std::vector<cx> contrib;
        for (TurnSurface const &s : surfaces) {
          for (SurfaceNode const &node : s) {
            CVec3 const h = field(node.point);
            contrib.push_back(kMu0 * (h.x() * node.area_normal.x() + h.y() * node.area_normal.y() +
                                      h.z() * node.area_normal.z()));
          }
        }
        m(i, j) = pairwise_sum(std::move(contrib));
      } else {
        m(i, j) = flux_through(field, coils[i], options.quadrature_order).flux;
      }
    }
  }
  return m;
}

void write_winding_csv(std::ostream &os, WindingPath const &path) {
  os << "turn,x0,y0,z0,x1,y1,z1\n";
  for (std::size_t t = 0; t < path.turn_count(); ++t) {
    auto const [begin, end] = path.turn_range(t);
    for (std::size_t s = begin; s < end; ++s) {
      Segment const &seg = path.segments[s];
      os << fmt::format("{},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g}\n", t, seg.a.x(), seg.a.y(), seg.a.z(),
                        seg.b.x(), seg.b.y(), seg.b.z());
    }
  }
}

} // namespace ulfemi
