#include "ulfemi/cavity.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace ulfemi {

void CavitySpec::validate() const {
  for (double const v : {lx, ly, lz, f0}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidSpecError("cavity dimensions and working frequency must be positive");
    }
  }
  if (!(longitudinal_ratio > 0.0 && longitudinal_ratio < 1.0)) {
    throw InvalidSpecError(fmt::format("longitudinal ratio must lie in (0, 1) (got {})", longitudinal_ratio));
  }
}

bool CavitySpec::quasi_static() const {
  return wavelength() / std::max({lx, ly, lz}) > 10.0;
}

double CavitySpec::decay_constant() const {
  double const kc = kPi / ly;
  double const k = free_space_wavenumber();
  double const a2 = kc * kc - k * k;
  if (!(a2 > 0.0)) {
    throw ModelInvalidError(fmt::format("working frequency {:.6g} Hz is above the aperture-mode cutoff", f0));
  }
  return std::sqrt(a2);
}

bool CavitySpec::contains(Vec3 const &p) const {
  constexpr double tol = 1e-12;
  return std::abs(p.x()) <= 0.5 * lx + tol && std::abs(p.y()) <= 0.5 * ly + tol && std::abs(p.z()) <= 0.5 * lz + tol;
}

void IncidenceSpec::validate() const {
  if (!(theta_deg >= 0.0 && theta_deg <= 90.0)) {
    throw InvalidSpecError(fmt::format("incidence angle must lie in [0, 90] degrees (got {})", theta_deg));
  }
  if (!(h0 >= 0.0) || !std::isfinite(h0)) {
    throw InvalidSpecError(fmt::format("incident amplitude must be >= 0 (got {})", h0));
  }
}

double coupling_scale(IncidenceSpec const &incidence) {
  incidence.validate();
  if (incidence.theta_deg == 90.0) {
    return 0.0;
  }
  // Same projection law for both axes: AboutE tilts H out of y, AboutH tilts
  // k away from the aperture normal.
  return std::cos(deg2rad(incidence.theta_deg));
}

CVec3 incident_field(IncidenceSpec const &incidence) {
  incidence.validate();
  double const th = deg2rad(incidence.theta_deg);
  double const c = incidence.theta_deg == 90.0 ? 0.0 : std::cos(th);
  if (incidence.axis == RotationAxis::AboutE) {
    return CVec3(cx(-incidence.h0 * std::sin(th)), cx(incidence.h0 * c), cx(0.0));
  }
  return CVec3(cx(0.0), cx(incidence.h0), cx(0.0));
}

namespace {

struct ModeConstants {
  double amplitude;
  double alpha;
  double half_lx;
  double ky;
  double kz;
  double r_long;
};

ModeConstants mode_constants(CavitySpec const &cavity, IncidenceSpec const &incidence) {
  cavity.validate();
  return {incidence.h0 * coupling_scale(incidence), cavity.decay_constant(), 0.5 * cavity.lx, kPi / cavity.ly,
          kPi / cavity.lz, cavity.longitudinal_ratio};
}

CVec3 eval_mode(ModeConstants const &m, Vec3 const &p) {
  double const depth = std::exp(-m.alpha * (m.half_lx - p.x()));
  double const zenv = std::cos(m.kz * p.z());
  double const hy = m.amplitude * std::cos(m.ky * p.y()) * depth * zenv;
  double const hx = m.amplitude * m.r_long * std::sin(m.ky * p.y()) * depth * zenv;
  return CVec3(cx(hx), cx(hy), cx(0.0));
}

} // namespace

CVec3 emi_field_at(CavitySpec const &cavity, IncidenceSpec const &incidence, Vec3 const &p) {
  if (!cavity.contains(p)) {
    throw OutOfDomainError(
      fmt::format("point ({:.6g}, {:.6g}, {:.6g}) m lies outside the cavity interior", p.x(), p.y(), p.z()));
  }
  return eval_mode(mode_constants(cavity, incidence), p);
}

FieldFunction cavity_field_function(CavitySpec const &cavity, IncidenceSpec const &incidence) {
  ModeConstants const m = mode_constants(cavity, incidence);
  return [m, cavity](Vec3 const &p) {
    if (!cavity.contains(p)) {
      throw OutOfDomainError(
        fmt::format("point ({:.6g}, {:.6g}, {:.6g}) m lies outside the cavity interior", p.x(), p.y(), p.z()));
    }
    return eval_mode(m, p);
  };
}

std::uint64_t field_provenance(CavitySpec const &cavity, IncidenceSpec const &incidence) {
  std::string const key =
    fmt::format("cavity:{:.17g},{:.17g},{:.17g},{:.17g},{:.17g};incidence:{},{:.17g},{:.17g}", cavity.lx, cavity.ly,
                cavity.lz, cavity.f0, cavity.longitudinal_ratio, static_cast<int>(incidence.axis),
                incidence.theta_deg, incidence.h0);
  return fnv1a(key);
}

VectorFieldGrid emi_field(CavitySpec const &cavity, IncidenceSpec const &incidence, AxisSamples const &grid) {
  ModeConstants const m = mode_constants(cavity, incidence);
  VectorFieldGrid out(grid, fmt::format("aperture-mode f0={:.6g}Hz theta={}deg axis={}", cavity.f0,
                                        incidence.theta_deg,
                                        incidence.axis == RotationAxis::AboutE ? "E" : "H"));
  out.set_provenance(field_provenance(cavity, incidence));
  for (std::size_t k = 0; k < grid.z.size(); ++k) {
    for (std::size_t j = 0; j < grid.y.size(); ++j) {
      for (std::size_t i = 0; i < grid.x.size(); ++i) {
        Vec3 const p = out.position(i, j, k);
        if (!cavity.contains(p)) {
          throw OutOfDomainError(fmt::format("grid point ({:.6g}, {:.6g}, {:.6g}) m lies outside the cavity interior",
                                             p.x(), p.y(), p.z()));
        }
        out.set(i, j, k, eval_mode(m, p));
      }
    }
  }
  return out;
}

CampaignSpec CampaignSpec::standard() {
  CampaignSpec c;
  c.probes.x = AxisSamples::linspace(-0.30, 0.30, 9);
  c.probes.y = AxisSamples::linspace(-0.25, 0.25, 5);
  c.probes.z = AxisSamples::linspace(-0.10, 0.10, 5);
  return c;
}

MappingCampaign run_mapping_campaign(CavitySpec const &cavity, IncidenceSpec const &incidence,
                                     CampaignSpec const &campaign, DriftModel const &drift, std::uint64_t seed) {
  if (campaign.repeats < 1) {
    throw InvalidSpecError("mapping campaign needs at least one repeat per point");
  }
  if (!(drift.amplitude >= 0.0 && drift.amplitude < 1.0) || !(drift.step >= 0.0)) {
    throw InvalidSpecError("drift amplitude must lie in [0, 1) and step must be >= 0");
  }
  ModeConstants const m = mode_constants(cavity, incidence);
  CVec3 const inc = incident_field(incidence);
  double const nominal = std::sqrt(std::norm(inc.x()) + std::norm(inc.y()) + std::norm(inc.z()));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double level = 1.0;
  double const lo = 1.0 - drift.amplitude;
  double const hi = 1.0 + drift.amplitude;
  double const noise = campaign.probe_noise * incidence.h0 / std::sqrt(2.0);

  MappingCampaign out;
  out.nominal_reference = nominal;
  AxisSamples const &g = campaign.probes;
  for (std::size_t k = 0; k < g.z.size(); ++k) {
    for (std::size_t j = 0; j < g.y.size(); ++j) {
      for (std::size_t i = 0; i < g.x.size(); ++i) {
        Vec3 const p(g.x[i], g.y[j], g.z[k]);
        if (!cavity.contains(p)) {
          throw OutOfDomainError(fmt::format("probe position ({:.6g}, {:.6g}, {:.6g}) m lies outside the cavity",
                                             p.x(), p.y(), p.z()));
        }
        CVec3 const truth = eval_mode(m, p);
        std::vector<CVec3> raw;
        std::vector<double> ref;
        CVec3 acc = CVec3::Zero();
        for (int r = 0; r < campaign.repeats; ++r) {
          if (drift.amplitude > 0.0) {
            level = std::clamp(level * std::exp(drift.step * gauss(rng)), lo, hi);
          }
          CVec3 sample = level * truth;
          if (noise > 0.0) {
            for (int c = 0; c < 3; ++c) {
              double const re = gauss(rng);
              double const im = gauss(rng);
              sample(c) += noise * cx(re, im);
            }
          }
          double const reading = level * nominal;
          if (reading == 0.0) {
            throw DegenerateError(
              fmt::format("external reference reading is zero at probe point {}; cannot normalize", out.positions.size()));
          }
          raw.push_back(sample);
          ref.push_back(reading);
          acc += sample / reading;
        }
        CVec3 const normalized = acc / static_cast<double>(campaign.repeats);
        out.positions.push_back(p);
        out.raw.push_back(std::move(raw));
        out.reference.push_back(std::move(ref));
        out.normalized.push_back(normalized);
        out.estimate.push_back(normalized * nominal);
      }
    }
  }
  return out;
}

} // namespace ulfemi
