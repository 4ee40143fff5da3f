#pragma once

#include <cstdint>
#include <vector>

#include "ulfemi/coilgeom.hpp"
#include "ulfemi/common.hpp"
#include "ulfemi/field_grid.hpp"

namespace ulfemi {

/// Single-side-open rectangular cavity centred on the origin. The opening is
/// the x = +lx/2 face.
struct CavitySpec {
  double lx = 0.88;
  double ly = 0.59;
  double lz = 0.48;
  double f0 = 2.23e6;               // Hz
  double longitudinal_ratio = 0.5;  // |Hx| : |Hy| amplitude ratio of the aperture mode

  void validate() const;
  double wavelength() const { return kSpeedOfLight / f0; }
  double free_space_wavenumber() const { return 2.0 * kPi * f0 / kSpeedOfLight; }
  /// wavelength / max dimension > 10
  bool quasi_static() const;
  /// Evanescent decay constant (1/m) of the below-cutoff aperture mode.
  /// Throws ModelInvalidError above cutoff.
  double decay_constant() const;
  bool contains(Vec3 const &p) const;
};

enum class RotationAxis { AboutE, AboutH };

/// Plane-wave incidence. At theta = 0: k along -x, H along y, E along z.
struct IncidenceSpec {
  RotationAxis axis = RotationAxis::AboutE;
  double theta_deg = 0.0;
  double h0 = 1.0;  // A/m

  void validate() const;
};

/// Fraction of the incident amplitude that couples into the aperture mode.
/// cos(theta) for both rotation axes; exactly 0 at 90 degrees.
double coupling_scale(IncidenceSpec const &incidence);

/// Incident (external, uniform) H phasor.
CVec3 incident_field(IncidenceSpec const &incidence);

/// Aperture-mode phasor at one interior point.
CVec3 emi_field_at(CavitySpec const &cavity, IncidenceSpec const &incidence, Vec3 const &p);

/// Callable view of the cavity field (checks the interior on every call).
FieldFunction cavity_field_function(CavitySpec const &cavity, IncidenceSpec const &incidence);

/// Identifies the field model; couplings and drives derived from the same
/// field share it.
std::uint64_t field_provenance(CavitySpec const &cavity, IncidenceSpec const &incidence);

VectorFieldGrid emi_field(CavitySpec const &cavity, IncidenceSpec const &incidence, AxisSamples const &grid);

// ---------------------------------------------------------------------------
// Virtual mapping campaign.

struct CampaignSpec {
  AxisSamples probes;
  int repeats = 5;
  double probe_noise = 0.0;  // additive complex noise std, relative to h0

  /// 9 x 5 x 5 = 225 points in a 0.60 x 0.50 x 0.20 m box about the origin.
  static CampaignSpec standard();
};

/// Multiplicative slow random walk on the source amplitude, confined to
/// [1 - amplitude, 1 + amplitude].
struct DriftModel {
  double amplitude = 0.2;
  double step = 0.05;
};

struct MappingCampaign {
  std::vector<Vec3> positions;
  std::vector<std::vector<CVec3>> raw;          // [point][repeat], A/m
  std::vector<std::vector<double>> reference;   // [point][repeat], external |H| reading, A/m
  std::vector<CVec3> normalized;                // mean of raw / reference, dimensionless
  std::vector<CVec3> estimate;                  // normalized x nominal reference, A/m
  double nominal_reference = 0.0;
};

MappingCampaign run_mapping_campaign(CavitySpec const &cavity, IncidenceSpec const &incidence,
                                     CampaignSpec const &campaign, DriftModel const &drift, std::uint64_t seed);

} // namespace ulfemi
