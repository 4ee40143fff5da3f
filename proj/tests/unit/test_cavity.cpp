#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "ulfemi/cavity.hpp"
#include "ulfemi/field_grid.hpp"

using namespace ulfemi;

namespace {

AxisSamples box_grid(CavitySpec const &c, std::size_t n) {
  AxisSamples g;
  g.x = AxisSamples::linspace(-0.45 * c.lx, 0.45 * c.lx, n);
  g.y = AxisSamples::linspace(-0.45 * c.ly, 0.45 * c.ly, n);
  g.z = AxisSamples::linspace(-0.45 * c.lz, 0.45 * c.lz, 5);
  return g;
}

} // namespace

TEST(Cavity, DecayConstantFromClosedForm) {
  CavitySpec const c;
  double const k = 2.0 * kPi * 2.23e6 / kSpeedOfLight;
  double const alpha = std::sqrt(std::pow(kPi / 0.59, 2) - k * k);
  EXPECT_NEAR(c.decay_constant(), alpha, 1e-12);
  EXPECT_NEAR(c.decay_constant(), 5.32, 0.01);
  EXPECT_NEAR(std::exp(-alpha * 0.2), 0.345, 1e-3);
  EXPECT_TRUE(c.quasi_static());
}

TEST(Cavity, AboveCutoffIsRejected) {
  CavitySpec c;
  c.f0 = 1e9;
  EXPECT_THROW(c.decay_constant(), ModelInvalidError);
}

TEST(Cavity, HxVanishesOnCentrePlane) {
  CavitySpec const c;
  IncidenceSpec const inc;
  for (double x : {-0.4, -0.1, 0.0, 0.3, 0.43}) {
    EXPECT_EQ(std::abs(emi_field_at(c, inc, Vec3(x, 0.0, 0.0)).x()), 0.0);
  }
}

TEST(Cavity, CentrePeakRatio) {
  CavitySpec const c;
  IncidenceSpec const inc;
  double const h0 = std::abs(emi_field_at(c, inc, Vec3(0, 0, 0)).y());
  double const h1 = std::abs(emi_field_at(c, inc, Vec3(0, 0.45 * c.ly, 0)).y());
  EXPECT_NEAR(h0 / h1, 1.0 / std::cos(0.45 * kPi), 1e-9);
  EXPECT_NEAR(h0 / h1, 6.39, 0.01);
}

TEST(Cavity, SymmetryExact) {
  CavitySpec const c;
  IncidenceSpec const inc{RotationAxis::AboutE, 20.0, 1.3};
  VectorFieldGrid const g = emi_field(c, inc, box_grid(c, 21));
  std::size_t const ny = g.ny();
  for (std::size_t k = 0; k < g.nz(); ++k) {
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < g.nx(); ++i) {
        EXPECT_EQ(g.at(i, j, k).x(), -g.at(i, ny - 1 - j, k).x());
        EXPECT_EQ(g.at(i, j, k).y(), g.at(i, ny - 1 - j, k).y());
      }
    }
  }
}

TEST(Cavity, DepthDecayRatio) {
  CavitySpec const c;
  IncidenceSpec const inc;
  AxisSamples g;
  g.x = AxisSamples::linspace(-0.4, 0.4, 17);
  g.y = {0.1};
  g.z = {0.05};
  VectorFieldGrid const f = emi_field(c, inc, g);
  double const a = c.decay_constant();
  for (std::size_t i = 1; i < g.x.size(); ++i) {
    double const r = f.at(i - 1, 0, 0).norm() / f.at(i, 0, 0).norm();
    EXPECT_LT(f.at(i - 1, 0, 0).norm(), f.at(i, 0, 0).norm());
    EXPECT_NEAR(r, std::exp(-a * (g.x[i] - g.x[i - 1])), 1e-12);
  }
}

TEST(Cavity, HyDominatesNearCentre) {
  CavitySpec const c;
  IncidenceSpec const inc;
  double const bound = std::atan(1.0 / c.longitudinal_ratio) / kPi;  // |y| / Ly
  EXPECT_NEAR(bound, 0.352, 1e-3);
  for (double u : {0.0, 0.1, 0.2, 0.3, 0.35}) {
    CVec3 const h = emi_field_at(c, inc, Vec3(0.1, u * c.ly, 0.0));
    EXPECT_GT(std::abs(h.y()), std::abs(h.x())) << u;
  }
  CVec3 const h = emi_field_at(c, inc, Vec3(0.1, 0.4 * c.ly, 0.0));
  EXPECT_LT(std::abs(h.y()), std::abs(h.x()));
}

TEST(Cavity, OutsidePointIsRejected) {
  CavitySpec const c;
  EXPECT_THROW(emi_field_at(c, IncidenceSpec{}, Vec3(0.5, 0, 0)), OutOfDomainError);
}

TEST(Coupling, CosineLaw) {
  EXPECT_DOUBLE_EQ(coupling_scale({RotationAxis::AboutE, 0.0, 1.0}), 1.0);
  EXPECT_EQ(coupling_scale({RotationAxis::AboutE, 90.0, 1.0}), 0.0);
  EXPECT_NEAR(coupling_scale({RotationAxis::AboutE, 60.0, 1.0}), 0.5, 1e-15);
  EXPECT_THROW(coupling_scale({RotationAxis::AboutE, 95.0, 1.0}), InvalidSpecError);
}

TEST(Coupling, AngleMonotoneShapeInvariant) {
  CavitySpec const c;
  AxisSamples g;
  g.x = {0.2};
  g.y = AxisSamples::linspace(-0.25, 0.25, 41);
  g.z = {0.0};
  for (RotationAxis ax : {RotationAxis::AboutE, RotationAxis::AboutH}) {
    VectorFieldGrid const base = emi_field(c, {ax, 0.0, 1.0}, g);
    double prev = 2.0;
    for (int t = 0; t <= 90; t += 15) {
      IncidenceSpec const inc{ax, static_cast<double>(t), 1.0};
      double const s = coupling_scale(inc);
      EXPECT_LT(s, prev);
      prev = s;
      if (t == 90) continue;
      VectorFieldGrid const f = emi_field(c, inc, g);
      double const n0 = std::abs(base.at(0, 20, 0).y());
      double const n1 = std::abs(f.at(0, 20, 0).y());
      for (std::size_t j = 0; j < g.y.size(); ++j) {
        EXPECT_NEAR(std::abs(f.at(0, j, 0).y()) / n1, std::abs(base.at(0, j, 0).y()) / n0, 1e-12);
      }
    }
  }
}

TEST(Mapping, NoDriftIsExact) {
  CavitySpec const c;
  IncidenceSpec const inc;
  MappingCampaign const m = run_mapping_campaign(c, inc, CampaignSpec::standard(), DriftModel{0.0, 0.0}, 3);
  ASSERT_EQ(m.positions.size(), 225u);
  for (std::size_t p = 0; p < m.positions.size(); ++p) {
    CVec3 const truth = emi_field_at(c, inc, m.positions[p]);
    EXPECT_LE((m.normalized[p] * m.nominal_reference - truth).norm(), 1e-15 * (1.0 + truth.norm()));
  }
}

TEST(Mapping, DriftIsNormalizedAway) {
  CavitySpec const c;
  IncidenceSpec const inc;
  CampaignSpec const spec = CampaignSpec::standard();
  MappingCampaign const clean = run_mapping_campaign(c, inc, spec, DriftModel{0.0, 0.0}, 3);
  MappingCampaign const drift = run_mapping_campaign(c, inc, spec, DriftModel{0.2, 0.05}, 3);
  double worst = 0.0;
  bool moved = false;
  for (std::size_t p = 0; p < clean.positions.size(); ++p) {
    double const ref = clean.estimate[p].norm();
    if (ref == 0.0) continue;
    worst = std::max(worst, (drift.estimate[p] - clean.estimate[p]).norm() / ref);
    for (double r : drift.reference[p]) moved = moved || std::abs(r - drift.nominal_reference) > 1e-3;
  }
  EXPECT_TRUE(moved);
  EXPECT_LT(worst, 5e-3);
}

TEST(Mapping, ReproducesProfileShape) {
  CavitySpec const c;
  MappingCampaign const m = run_mapping_campaign(c, IncidenceSpec{}, CampaignSpec::standard(), DriftModel{}, 11);
  // x = 0.3 column at z = 0: 5 points across y
  std::vector<CVec3> col;
  for (std::size_t p = 0; p < m.positions.size(); ++p) {
    if (m.positions[p].x() == 0.3 && m.positions[p].z() == 0.0) col.push_back(m.estimate[p]);
  }
  ASSERT_EQ(col.size(), 5u);
  EXPECT_EQ(std::abs(col[2].x()), 0.0);
  EXPECT_GT(std::abs(col[2].y()), std::abs(col[1].y()));
  EXPECT_GT(std::abs(col[1].y()), std::abs(col[0].y()));
  EXPECT_GT(std::abs(col[0].x()), std::abs(col[1].x()));
}

TEST(FieldGrid, TrilinearExactForLinearField) {
  AxisSamples a;
  a.x = AxisSamples::linspace(-1, 1, 5);
  a.y = AxisSamples::linspace(-1, 1, 4);
  a.z = AxisSamples::linspace(0, 1, 3);
  VectorFieldGrid g(a, "linear");
  for (std::size_t k = 0; k < g.nz(); ++k)
    for (std::size_t j = 0; j < g.ny(); ++j)
      for (std::size_t i = 0; i < g.nx(); ++i) {
        Vec3 const p = g.position(i, j, k);
        g.set(i, j, k, CVec3(cx(p.x() + 2 * p.y()), cx(0, p.z()), cx(1.0)));
      }
  Vec3 const q(0.3, -0.71, 0.4);
  CVec3 const h = g.interpolate(q);
  EXPECT_NEAR(std::abs(h.x() - cx(q.x() + 2 * q.y())), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(h.y() - cx(0, q.z())), 0.0, 1e-14);
  EXPECT_THROW(g.interpolate(Vec3(1.5, 0, 0.5)), OutOfDomainError);
  std::ostringstream os;
  write_field_csv(os, g);
  std::string const csv = os.str();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(g.nx() * g.ny() * g.nz() + 1));
}
