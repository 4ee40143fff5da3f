#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "ulfemi/coilgeom.hpp"
#include "ulfemi/quadrature.hpp"

using namespace ulfemi;

namespace {

CoilSpec loop(double radius, int turns, Pose pose = Pose::identity(), std::string name = "loop") {
  return {std::move(name), DetectionLoopParams{radius, turns}, pose};
}

// On-axis field of a circular current loop, A/m.
double loop_axis_field(double current, double radius, double z) {
  return current * radius * radius / (2.0 * std::pow(radius * radius + z * z, 1.5));
}

// Neumann mutual inductance of two coaxial circles via complete elliptic integrals.
double coaxial_mutual(double r1, double r2, double d) {
  double const k2 = 4.0 * r1 * r2 / ((r1 + r2) * (r1 + r2) + d * d);
  double const k = std::sqrt(k2);
  return kMu0 * std::sqrt(r1 * r2) * ((2.0 / k - k) * std::comp_ellint_1(k) - (2.0 / k) * std::comp_ellint_2(k));
}

} // namespace

TEST(Quadrature, NodesMirrorExactly) {
  for (int n : {1, 2, 5, 12, 13}) {
    GaussRule const g = gauss_legendre(n);
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      EXPECT_EQ(g.nodes[i], -g.nodes[n - 1 - i]);
      wsum += g.weights[i];
    }
    EXPECT_NEAR(wsum, 2.0, 1e-14);
  }
  // integrates x^(2n-1) exactly
  GaussRule const g = gauss_legendre(6, 0.0, 2.0);
  double s = 0.0;
  for (int i = 0; i < 6; ++i) s += g.weights[i] * std::pow(g.nodes[i], 11);
  EXPECT_NEAR(s, std::pow(2.0, 12) / 12.0, 1e-9);
}

TEST(RealizeCoil, SolenoidSegmentCount) {
  CoilSpec const s{"sol", SolenoidParams{0.1, 0.2, 10}, Pose::identity()};
  WindingPath const p = realize_coil(s, 64);
  EXPECT_EQ(p.segments.size(), 640u);
  ASSERT_EQ(p.turn_count(), 10u);
  for (std::size_t t = 0; t < p.turn_count(); ++t) {
    auto const [b, e] = p.turn_range(t);
    EXPECT_EQ(e - b, 64u);
    EXPECT_LT((p.segments[e - 1].b - p.segments[b].a).norm(), 1e-12);
  }
}

TEST(RealizeCoil, SaddleMirrorSymmetricInY) {
  CoilSpec const s{"saddle", SaddleParams{0.1, 0.2, 120.0, 2}, Pose::identity()};
  WindingPath const p = realize_coil(s, 64);
  auto key = [](Vec3 const &v) {
    return std::tuple<long, long, long>(std::lround(v.x() * 1e9), std::lround(v.y() * 1e9), std::lround(v.z() * 1e9));
  };
  std::set<std::tuple<long, long, long>> pts;
  for (Segment const &s2 : p.segments) {
    pts.insert(key(s2.a));
    pts.insert(key(s2.b));
  }
  for (Segment const &s2 : p.segments) {
    EXPECT_TRUE(pts.count(key(Vec3(s2.a.x(), -s2.a.y(), s2.a.z()))));
  }
}

TEST(RealizeCoil, CancellationTurnsDenserOutside) {
  std::vector<double> const u = cancellation_turn_positions(12, 3.0);
  ASSERT_EQ(u.size(), 12u);
  for (std::size_t i = 2; i < u.size(); ++i) {
    EXPECT_LT(u[i] - u[i - 1], u[i - 1] - u[i - 2]);
  }
  EXPECT_NEAR(u.front(), 0.0, 1e-15);
  EXPECT_NEAR(u.back(), 1.0, 1e-15);
}

TEST(RealizeCoil, RejectsBadSpecs) {
  EXPECT_THROW(realize_coil({"s", SolenoidParams{-0.1, 0.2, 3}, Pose::identity()}), InvalidSpecError);
  EXPECT_THROW(realize_coil({"s", SaddleParams{0.1, 0.2, 200.0, 1}, Pose::identity()}), InvalidSpecError);
  EXPECT_THROW(realize_coil({"s", DetectionLoopParams{0.1, 0}, Pose::identity()}), InvalidSpecError);
}

TEST(FieldAt, LoopCentre) {
  WindingPath const p = realize_coil(loop(0.1, 1), 64);
  CVec3 const h = field_at(p, Vec3::Zero());
  EXPECT_NEAR(std::abs(h.z()), 5.0, 5.0 * 0.005);
  EXPECT_LT(std::abs(h.x()) + std::abs(h.y()), 1e-12);
}

TEST(FieldAt, LoopAxisMatchesAnalytic) {
  WindingPath const p = realize_coil(loop(0.1, 1), 256);
  for (double z : {0.02, 0.05, 0.1, 0.3}) {
    double const ref = loop_axis_field(1.0, 0.1, z);
    EXPECT_NEAR(std::abs(field_at(p, Vec3(0, 0, z)).z()), ref, ref * 1e-3) << "z=" << z;
  }
}

TEST(FieldAt, ZeroCurrentGivesZero) {
  WindingPath p = realize_coil(loop(0.1, 3), 64);
  p.current = 0.0;
  CVec3 const h = field_at(p, Vec3(0.03, -0.02, 0.05));
  EXPECT_EQ(h.norm(), 0.0);
}

TEST(FieldAt, MirrorAcrossLoopPlane) {
  WindingPath const p = realize_coil(loop(0.1, 1), 64);
  for (Vec3 q : {Vec3(0.02, 0.03, 0.04), Vec3(-0.15, 0.01, 0.2)}) {
    CVec3 const a = field_at(p, q);
    CVec3 const b = field_at(p, Vec3(q.x(), q.y(), -q.z()));
    double const s = a.norm();
    EXPECT_NEAR(std::abs(a.z() - b.z()), 0.0, 1e-12 * s);
    EXPECT_NEAR(std::abs(a.x() + b.x()), 0.0, 1e-12 * s);
    EXPECT_NEAR(std::abs(a.y() + b.y()), 0.0, 1e-12 * s);
  }
}

TEST(FieldAt, LinearityAndSuperposition) {
  WindingPath a = realize_coil(loop(0.1, 2), 64);
  WindingPath b = realize_coil({"sol", SolenoidParams{0.05, 0.1, 4}, Pose::axis_x(Vec3(0.3, 0, 0))}, 48);
  Vec3 const q(0.05, 0.07, -0.02);
  CVec3 const ha = field_at(a, q);
  CVec3 const hb = field_at(b, q);
  a.current = cx(2.5, -1.0);
  EXPECT_LE((field_at(a, q) - cx(2.5, -1.0) * ha).norm(), 1e-12 * ha.norm() * 3.0);
  a.current = 1.0;
  CVec3 const sum = field_at(std::vector<WindingPath>{a, b}, q);
  EXPECT_LE((sum - ha - hb).norm(), 1e-12 * (ha.norm() + hb.norm()));
}

TEST(FieldAt, FarFieldConvergesWithSegmentLength) {
  CoilSpec const s{"saddle", SaddleParams{0.1, 0.2, 120.0, 1}, Pose::identity()};
  WindingPath const coarse = realize_coil(s, 64);
  WindingPath const fine = realize_coil(s, 128);
  for (Vec3 q : {Vec3(0.25, 0.0, 0.0), Vec3(0.0, 0.2, 0.1), Vec3(0.15, 0.15, 0.3)}) {
    CVec3 const a = field_at(coarse, q);
    CVec3 const b = field_at(fine, q);
    EXPECT_LT((a - b).norm() / b.norm(), 1e-3);
  }
}

TEST(FieldAt, SingularNearWire) {
  WindingPath const p = realize_coil(loop(0.1, 1), 64);
  EXPECT_THROW(field_at(p, p.segments[3].a), SingularityError);
}

TEST(Flux, UniformFieldThroughSquareTurn) {
  CancellationPairParams sq;
  sq.outer_width = sq.inner_width = 0.1;
  sq.outer_height = sq.inner_height = 0.1;
  sq.turns = 1;
  sq.separation = 0.2;
  CoilSpec const c{"square", sq, Pose::axis_y()};
  FieldFunction const f = [](Vec3 const &) { return CVec3(0.0, 1.0, 0.0); };
  FluxResult const r = flux_through(f, c);
  ASSERT_EQ(r.per_turn.size(), 2u);
  for (cx v : r.per_turn) EXPECT_NEAR(std::abs(v - kMu0 * 0.01), 0.0, 1e-15 * kMu0);
}

TEST(Flux, AntisymmetricFieldCancelsInSymmetricCoil) {
  CoilSpec const sol{"sol", SolenoidParams{0.1, 0.2, 20}, Pose::axis_x()};
  FieldFunction const odd = [](Vec3 const &p) {
    return CVec3(cx(p.y() * (1.0 + p.x()) + std::pow(p.y(), 3), 0.2 * p.y()), 0.0, 0.0);
  };
  FieldFunction const rect = [&](Vec3 const &p) { return CVec3(std::abs(odd(p).x()), 0.0, 0.0); };
  double const net = std::abs(flux_through(odd, sol).flux);
  double const mag = std::abs(flux_through(rect, sol).flux);
  ASSERT_GT(mag, 0.0);
  EXPECT_LT(net, 1e-10 * mag);
}

TEST(Flux, CancellationPairLeavesSolenoidEmpty) {
  CoilSpec const pair{"pair", CancellationPairParams{}, Pose::axis_y()};
  CoilSpec const sol{"sol", SolenoidParams{0.1, 0.2, 20}, Pose::axis_x()};
  WindingPath const w = realize_coil(pair);
  FieldFunction const f = [&](Vec3 const &p) { return field_at(w, p); };
  FieldFunction const rect = [&](Vec3 const &p) { return CVec3(std::abs(field_at(w, p).x()), 0.0, 0.0); };
  double const net = std::abs(flux_through(f, sol).flux);
  double const mag = std::abs(flux_through(rect, sol).flux);
  ASSERT_GT(mag, 0.0);
  EXPECT_LT(net, 1e-10 * mag);
}

TEST(MutualCoupling, CoaxialLoopsMatchNeumann) {
  double const r = 0.05;
  for (double d : {0.05, 0.1, 0.2}) {
    std::vector<CoilSpec> coils{loop(r, 1, Pose::identity(), "a"), loop(r, 1, Pose::axis_z(Vec3(0, 0, d)), "b")};
    CouplingOptions opt;
    opt.segments_per_turn = 256;
    opt.quadrature_order = 24;
    Eigen::MatrixXcd const m = mutual_coupling_matrix(coils, opt);
    double const ref = coaxial_mutual(r, r, d);
    EXPECT_NEAR(m(0, 1).real(), ref, 2e-3 * ref) << "d=" << d;
    EXPECT_NEAR(m(1, 0).real(), ref, 2e-3 * ref) << "d=" << d;
  }
}

TEST(MutualCoupling, FarLoopsDecouple) {
  double const r = 0.05;
  std::vector<CoilSpec> coils{loop(r, 1, Pose::identity(), "a"), loop(r, 1, Pose::axis_z(Vec3(0, 0, 10 * r)), "b")};
  Eigen::MatrixXcd const m = mutual_coupling_matrix(coils);
  double const self = std::sqrt(std::abs(m(0, 0)) * std::abs(m(1, 1)));
  EXPECT_LT(std::abs(m(0, 1)) / self, 2e-3);
}

TEST(MutualCoupling, Reciprocity) {
  std::vector<CoilSpec> coils{
    {"saddle", SaddleParams{0.12, 0.25, 120.0, 2}, Pose::axis_x()},
    {"det", DetectionLoopParams{0.04, 3}, Pose::axis_y(Vec3(0.35, 0.0, 0.0))},
    {"loop", DetectionLoopParams{0.05, 2}, Pose::axis_y(Vec3(0.0, 0.25, 0.02))},
  };
  Eigen::MatrixXcd const m = mutual_coupling_matrix(coils);
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      EXPECT_LT(std::abs(m(i, j) - m(j, i)) / std::abs(m(i, j)), 1e-3) << i << "," << j;
    }
  }
}

TEST(MutualCoupling, RejectsDuplicateCoil) {
  CoilSpec const a = loop(0.05, 2);
  EXPECT_THROW(mutual_coupling_matrix({a, a}), InvalidSpecError);
  EXPECT_THROW(mutual_coupling_matrix({a}), InvalidInputError);
}
