#include "ulfemi/anc_spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace ulfemi {

void ControlChain::validate() const {
  if (!(gain >= 0.0) || !std::isfinite(gain)) {
    throw InvalidSpecError(fmt::format("control chain gain must be >= 0 (got {})", gain));
  }
  if (!(phase_deg >= 0.0 && phase_deg < 360.0)) {
    throw InvalidSpecError(fmt::format("control chain phase must lie in [0, 360) degrees (got {})", phase_deg));
  }
  if (!(noise_density >= 0.0)) {
    throw InvalidSpecError("control chain noise density must be >= 0");
  }
}

CancellationState CancellationState::make(cx emi_flux, cx flux_per_ampere, cx drive) {
  return {emi_flux, flux_per_ampere, drive, emi_flux + drive * flux_per_ampere};
}

cx detect_voltage(cx flux, double f0) {
  if (!(f0 > 0.0)) {
    throw InvalidSpecError("working frequency must be positive");
  }
  return cx(0.0, 2.0 * kPi * f0) * flux;
}

namespace {

// exp(-j * deg) with exact values on the quarter turns.
cx phase_rotation(double deg) {
  if (deg == 0.0) return {1.0, 0.0};
  if (deg == 90.0) return {0.0, -1.0};
  if (deg == 180.0) return {-1.0, 0.0};
  if (deg == 270.0) return {0.0, 1.0};
  return std::polar(1.0, -deg2rad(deg));
}

} // namespace

cx drive_current(cx voltage, ControlChain const &chain) {
  chain.validate();
  if (chain.gain == 0.0) {
    return {0.0, 0.0};
  }
  return chain.gain * voltage * phase_rotation(chain.phase_deg);
}

double residual_ratio(cx emi_flux, cx flux_per_ampere, cx drive) {
  if (std::abs(emi_flux) == 0.0) {
    throw DegenerateError("EMI flux is zero; residual ratio undefined");
  }
  return std::abs(emi_flux + drive * flux_per_ampere) / std::abs(emi_flux);
}

DriveSolution optimize_drive(cx emi_flux, cx flux_per_ampere, cx detection_flux, double f0) {
  if (std::abs(flux_per_ampere) == 0.0) {
    throw UncancelableError("cancellation winding couples no flux into the target coil");
  }
  DriveSolution sol;
  sol.drive = -emi_flux / flux_per_ampere;
  sol.residual_ratio = std::abs(emi_flux) > 0.0 ? residual_ratio(emi_flux, flux_per_ampere, sol.drive) : 0.0;
  cx const v = detect_voltage(detection_flux, f0);
  if (std::abs(v) == 0.0) {
    throw UncancelableError("detection coil sees no EMI flux; cannot derive a control chain");
  }
  cx const transfer = sol.drive / v;  // = g * exp(-j phi)
  sol.chain.gain = std::abs(transfer);
  double phi = -rad2deg(std::arg(transfer));
  phi = std::fmod(phi, 360.0);
  if (phi < 0.0) {
    phi += 360.0;
  }
  if (phi >= 360.0) {
    phi = 0.0;
  }
  sol.chain.phase_deg = phi;
  return sol;
}

double propagation_phase_deg(double distance, double f0) {
  return 360.0 * distance * f0 / kSpeedOfLight;
}

namespace {

FieldStats stats_of(std::vector<double> const &v) {
  FieldStats s;
  if (v.empty()) {
    return s;
  }
  auto const [mn, mx] = std::minmax_element(v.begin(), v.end());
  s.min = *mn;
  s.max = *mx;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return s;
}

} // namespace

SpatialCancellationReport spatial_cancellation_report(CavitySpec const &cavity, IncidenceSpec const &incidence,
                                                      CoilSpec const &cancellation, CoilSpec const &saddle,
                                                      TargetRegion const &region, cx drive, int quadrature_order,
                                                      int segments_per_turn) {
  if (region.samples_per_axis < 2 || !(region.radius > 0.0)) {
    throw InvalidSpecError("target region needs a positive radius and >= 2 samples per axis");
  }
  FieldFunction const emi = cavity_field_function(cavity, incidence);
  WindingPath path = realize_coil(cancellation, segments_per_turn);
  path.current = drive;

  SpatialCancellationReport rep;
  std::vector<double> const axis = AxisSamples::linspace(-region.radius, region.radius, region.samples_per_axis);
  for (double const dz : axis) {
    for (double const dy : axis) {
      for (double const dx : axis) {
        Vec3 const off(dx, dy, dz);
        if (off.norm() > region.radius + 1e-12) {
          continue;
        }
        Vec3 const p = region.center + off;
        if (!cavity.contains(p)) {
          throw OutOfDomainError(
            fmt::format("target region point ({:.6g}, {:.6g}, {:.6g}) m exits the cavity", p.x(), p.y(), p.z()));
        }
        cx const before = emi(p).y();
        cx const after = before + (drive == cx{} ? cx{} : field_at(path, p).y());
        rep.points.push_back(p);
        rep.hy_before.push_back(std::abs(before));
        rep.hy_after.push_back(std::abs(after));
      }
    }
  }
  rep.before = stats_of(rep.hy_before);
  rep.after = stats_of(rep.hy_after);

  rep.saddle_flux_before = flux_through(emi, saddle, quadrature_order).flux;
  if (drive == cx{}) {
    rep.saddle_flux_after = rep.saddle_flux_before;
  } else {
    auto total = [&](Vec3 const &p) -> CVec3 { return emi(p) + field_at(path, p); };
    rep.saddle_flux_after = flux_through(total, saddle, quadrature_order).flux;
  }
  rep.flux_reduction = 1.0 - std::abs(rep.saddle_flux_after) / std::abs(rep.saddle_flux_before);
  rep.field_reduction = rep.before.mean > 0.0 ? 1.0 - rep.after.mean / rep.before.mean : 0.0;
  return rep;
}

} // namespace ulfemi
