#pragma once

#include <cstdint>
#include <vector>

#include "ulfemi/cavity.hpp"
#include "ulfemi/coilgeom.hpp"
#include "ulfemi/common.hpp"

namespace ulfemi {

/// Narrowband analog chain between the detection coil and the cancellation
/// winding: i = gain * v * exp(-j * phase_deg).
struct ControlChain {
  double gain = 0.0;        // A/V
  double phase_deg = 0.0;   // delay at f0, [0, 360)
  double noise_density = 0.0;  // A/sqrt(Hz) added at the output

  void validate() const;
};

/// Flux bookkeeping through the target (saddle) coil.
struct CancellationState {
  cx emi_flux;            // Phi_EM, Wb
  cx flux_per_ampere;     // Phi_C1, Wb/A
  cx drive;               // A
  cx residual_flux;       // Phi_EM + drive * Phi_C1

  static CancellationState make(cx emi_flux, cx flux_per_ampere, cx drive);
};

/// Pickup voltage V = j * omega * Phi (leads the flux by 90 degrees).
cx detect_voltage(cx flux, double f0);

cx drive_current(cx voltage, ControlChain const &chain);

struct DriveSolution {
  cx drive;                  // i* = -Phi_EM / Phi_C1
  ControlChain chain;        // (g, phase) reproducing i* from the detection coil
  double residual_ratio = 0; // |Phi_EM + i* Phi_C1| / |Phi_EM|
  std::uint64_t provenance = 0;
};

/// Complex drive nulling the target-coil flux, decomposed into a control
/// chain fed by a detection coil of flux `detection_flux` (Wb per unit EMI).
DriveSolution optimize_drive(cx emi_flux, cx flux_per_ampere, cx detection_flux, double f0);

/// |Phi_EM + drive Phi_C1| / |Phi_EM|.
double residual_ratio(cx emi_flux, cx flux_per_ampere, cx drive);

/// Spatial phase accumulated over `distance` at f0, in degrees.
double propagation_phase_deg(double distance, double f0);

struct TargetRegion {
  Vec3 center = Vec3::Zero();
  double radius = 0.1;
  int samples_per_axis = 11;
};

struct FieldStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

struct SpatialCancellationReport {
  std::vector<Vec3> points;
  std::vector<double> hy_before;  // |Hy| A/m
  std::vector<double> hy_after;
  FieldStats before;
  FieldStats after;
  cx saddle_flux_before;
  cx saddle_flux_after;
  double flux_reduction = 0.0;    // 1 - |Phi_res| / |Phi_EM|
  double field_reduction = 0.0;   // 1 - mean|Hy|_after / mean|Hy|_before
};

/// Evaluates the cavity field and the driven cancellation winding over the
/// target sphere and through the saddle coil.
SpatialCancellationReport spatial_cancellation_report(CavitySpec const &cavity, IncidenceSpec const &incidence,
                                                      CoilSpec const &cancellation, CoilSpec const &saddle,
                                                      TargetRegion const &region, cx drive,
                                                      int quadrature_order = kDefaultQuadratureOrder,
                                                      int segments_per_turn = kDefaultSegmentsPerTurn);

} // namespace ulfemi
