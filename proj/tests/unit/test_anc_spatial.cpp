#include <cmath>

#include <gtest/gtest.h>

#include "ulfemi/acquisition.hpp"
#include "ulfemi/anc_spatial.hpp"
#include "ulfemi/pipeline.hpp"
#include "ulfemi/scenario.hpp"

using namespace ulfemi;

TEST(DetectVoltage, LeadsFluxByQuarterTurn) {
  cx const v = detect_voltage(cx(1e-9, 0.0), 2.23e6);
  EXPECT_NEAR(v.real(), 0.0, 1e-18);
  EXPECT_NEAR(v.imag(), 2.0 * kPi * 2.23e6 * 1e-9, 1e-15);
  EXPECT_NEAR(v.imag(), 0.01401, 1e-5);
  EXPECT_NEAR(rad2deg(std::arg(v)), 90.0, 1e-12);
  EXPECT_EQ(detect_voltage(cx{}, 2.23e6), cx{});
  cx const v2 = detect_voltage(cx(1e-9, 0.0), 4.46e6);
  EXPECT_NEAR(std::abs(v2), 2.0 * std::abs(v), 1e-15);
  EXPECT_NEAR(std::arg(v2), std::arg(v), 1e-15);
}

TEST(DriveCurrent, PhaseChain) {
  cx const i = drive_current(std::polar(1.0, deg2rad(90.0)), ControlChain{1.0, 270.0, 0.0});
  EXPECT_NEAR(std::abs(i - cx(-1.0, 0.0)), 0.0, 1e-15);
  EXPECT_EQ(drive_current(cx(2.0, 1.0), ControlChain{0.0, 45.0, 0.0}), cx{});
  EXPECT_EQ(drive_current(cx(2.0, 1.0), ControlChain{3.0, 0.0, 0.0}), cx(6.0, 3.0));
  EXPECT_THROW(drive_current(cx(1.0), ControlChain{1.0, 360.0, 0.0}), InvalidSpecError);
}

TEST(OptimizeDrive, ExactScalarCancellation) {
  cx const emi(3e-9, 4e-9);
  DriveSolution const s = optimize_drive(emi, cx(1e-6), cx(1e-9, 0.0), 2.23e6);
  EXPECT_NEAR(std::abs(s.drive - cx(-3e-3, -4e-3)), 0.0, 1e-18);
  EXPECT_EQ(s.residual_ratio, 0.0);
  // the chain reproduces the drive from the detection coil
  cx const i = drive_current(detect_voltage(cx(1e-9, 0.0), 2.23e6), s.chain);
  EXPECT_LE(std::abs(i - s.drive), 1e-12 * std::abs(s.drive));
}

TEST(OptimizeDrive, PhaseAndGainErrors) {
  cx const emi(2e-9, -1e-9);
  cx const c1(5e-7, 2e-7);
  DriveSolution const s = optimize_drive(emi, c1, cx(1e-9), 2.23e6);
  double const r10 = residual_ratio(emi, c1 * std::polar(1.0, deg2rad(10.0)), s.drive);
  EXPECT_NEAR(r10, std::abs(1.0 - std::polar(1.0, deg2rad(10.0))), 1e-12);
  EXPECT_NEAR(r10, 0.1743, 1e-4);
  EXPECT_NEAR(residual_ratio(emi, c1, 1.2 * s.drive), 0.2, 1e-12);
  EXPECT_THROW(optimize_drive(emi, cx{}, cx(1e-9), 2.23e6), UncancelableError);
}

TEST(OptimizeDrive, ResidualMonotoneInErrors) {
  cx const emi(1e-9, 2e-9);
  cx const c1(3e-7, -1e-7);
  DriveSolution const s = optimize_drive(emi, c1, cx(1e-9), 2.23e6);
  double prev = -1.0;
  for (int d = 0; d <= 180; d += 5) {
    double const r = residual_ratio(emi, c1, s.drive * std::polar(1.0, deg2rad(d)));
    EXPECT_GT(r, prev);
    prev = r;
  }
  prev = -1.0;
  for (double g : {1.0, 1.1, 1.3, 2.0, 4.0}) {
    double const up = residual_ratio(emi, c1, s.drive * g);
    double const down = residual_ratio(emi, c1, s.drive / g);
    EXPECT_GT(up, prev);
    EXPECT_GE(up, down - 1e-15);
    prev = up;
  }
}

TEST(OptimizeDrive, PhaseIdentityForRealPositiveCouplings) {
  // real-positive fluxes: detection leads by 90, the chain adds 270, so the
  // drive comes out anti-phase with the EMI
  cx const emi(2e-9);
  cx const c1(4e-7);
  cx const det(1e-9);
  DriveSolution const s = optimize_drive(emi, c1, det, 2.23e6);
  EXPECT_NEAR(s.chain.phase_deg, 270.0, 1e-9);
  double const omega = 2.0 * kPi * 2.23e6;
  EXPECT_NEAR(s.chain.gain, std::abs(emi) / (omega * std::abs(det) * std::abs(c1)), 1e-12 * s.chain.gain);
  EXPECT_NEAR(std::arg(s.drive * c1), kPi, 1e-12);
}

TEST(Propagation, QuasiStaticDelay) {
  EXPECT_NEAR(propagation_phase_deg(1.0, 2.23e6), 360.0 / 134.436, 1e-3);
  EXPECT_LT(propagation_phase_deg(1.0, 2.23e6), 2.7);
}

class SpatialDefault : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    cfg = new ScenarioConfig(default_scenario(42));
    channels = new ChannelSet(build_channels(*cfg));
    summary = new SpatialAncSummary(tune_spatial_anc(*cfg, *channels));
  }
  static void TearDownTestSuite() {
    delete summary;
    delete channels;
    delete cfg;
  }
  static ScenarioConfig *cfg;
  static ChannelSet *channels;
  static SpatialAncSummary *summary;
};

ScenarioConfig *SpatialDefault::cfg = nullptr;
ChannelSet *SpatialDefault::channels = nullptr;
SpatialAncSummary *SpatialDefault::summary = nullptr;

TEST_F(SpatialDefault, ZeroDriveChangesNothing) {
  SpatialCancellationReport const r =
    spatial_cancellation_report(cfg->cavity, cfg->incidence, cfg->cancellation, cfg->saddle, cfg->anc.region, cx{});
  EXPECT_EQ(r.flux_reduction, 0.0);
  EXPECT_EQ(r.field_reduction, 0.0);
  ChannelSet const same = apply_spatial_anc(*channels, cx{}, channels->provenance);
  for (std::size_t c = 0; c < same.receive.size(); ++c) {
    EXPECT_EQ(same.coupling(same.receive[c], CouplingPath::Environmental),
              channels->coupling(channels->receive[c], CouplingPath::Environmental));
  }
}

TEST_F(SpatialDefault, OptimalDriveNullsFluxNotField) {
  SpatialCancellationReport const r = spatial_cancellation_report(
    cfg->cavity, cfg->incidence, cfg->cancellation, cfg->saddle, cfg->anc.region, summary->optimal.drive);
  EXPECT_LE(std::abs(r.saddle_flux_after), 1e-12 * std::abs(r.saddle_flux_before));
  EXPECT_GT(r.after.max, 1e-3 * r.before.max);
}

TEST_F(SpatialDefault, AppliedDriveMeetsTargets) {
  EXPECT_GE(summary->applied_flux_reduction, 0.80);
  EXPECT_GE(summary->saddle_coupling_reduction, 0.76);
  EXPECT_LT(summary->solenoid_perturbation, 1e-6);
}

TEST_F(SpatialDefault, MismatchedProvenanceIsRejected) {
  EXPECT_THROW(apply_spatial_anc(*channels, summary->applied_drive, channels->provenance + 1), ProvenanceError);
}
