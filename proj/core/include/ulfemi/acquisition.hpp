#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ulfemi/cavity.hpp"
#include "ulfemi/coilgeom.hpp"
#include "ulfemi/common.hpp"
#include "ulfemi/kspace.hpp"

namespace ulfemi {

/// Real, non-negative image. Rows run along the phase-encode direction,
/// columns along the readout.
struct Phantom {
  RMatrix image;
  double pixel_spacing = 2e-3;  // m

  void validate() const;

  /// Water-phantom stand-in: a large ellipse with a few inserts of
  /// different intensity, confined to the central 70% of the field of view.
  static Phantom ellipses(int n_read, int n_phase);
  static Phantom uniform(int n_read, int n_phase, double value);
};

/// Smooth receive sensitivity: scale * (1 - falloff * r^2), r being the
/// radius normalized to the half field of view.
struct ChannelSensitivity {
  cx scale{1.0, 0.0};
  double falloff = 0.0;

  CMatrix map(Eigen::Index rows, Eigen::Index cols) const;
};

struct SequenceParams {
  int n_read = 128;
  int n_phase = 128;
  double dwell = 40e-6;  // s
  double tr = 0.02;      // s, start-to-start spacing of phase encodes
  int averages = 3;

  void validate() const;
  double readout_bandwidth() const { return 1.0 / dwell; }
  double readout_duration() const { return n_read * dwell; }
  double row_start(int average, int row) const;
  /// End of the last readout of the last average.
  double duration() const;
};

KSpaceMatrix simulate_clean_kspace(Phantom const &phantom, ChannelSensitivity const &sensitivity,
                                   SequenceParams const &seq, std::string channel = {});

// ---------------------------------------------------------------------------
// Interference.

enum class InterfererKind { Tone, HarmonicComb, BandNoise };
enum class CouplingPath { Environmental, Conducted };

std::string to_string(InterfererKind kind);
std::string to_string(CouplingPath path);

/// One interference source. The waveform is a sum of complex exponentials
/// at baseband offsets from f0 with total RMS |amplitude|.
struct InterfererSpec {
  std::string name;
  InterfererKind kind = InterfererKind::Tone;
  CouplingPath path = CouplingPath::Environmental;
  cx amplitude{1.0, 0.0};
  double phase_deg = 0.0;
  double frequency = 0.0;  // tone frequency or first comb line, Hz
  double spacing = 0.0;    // comb line spacing, Hz
  int lines = 1;           // comb line count
  double band_lo = 0.0;    // band-noise edges, Hz
  double band_hi = 0.0;
  int components = 512;    // band-noise sinusoid count; also per line when linewidth > 0
  double linewidth = 0.0;  // Hz; > 0 spreads each tone or comb line over a narrow band
  std::uint64_t seed = 0;  // 0: derived from the timeline seed and the name

  void validate() const;
};

struct WaveComponent {
  double frequency;
  cx amplitude;
};

class EMITimeline {
public:
  EMITimeline(std::vector<InterfererSpec> interferers, double duration, std::uint64_t seed);

  std::vector<InterfererSpec> const &interferers() const { return specs_; }
  std::vector<WaveComponent> const &components(std::size_t k) const { return components_.at(k); }
  double duration() const { return duration_; }
  std::uint64_t seed() const { return seed_; }

  cx sample(std::size_t k, double t) const;
  /// out[n] = waveform k at t0 + n * dt.
  void sample_row(std::size_t k, double t0, double dt, std::span<cx> out) const;

private:
  std::vector<InterfererSpec> specs_;
  std::vector<std::vector<WaveComponent>> components_;
  double duration_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Channels.

enum class ChannelRole { Receive, Reference };

struct Channel {
  std::string name;
  ChannelRole role = ChannelRole::Receive;
  cx env_flux;                 // Wb per unit environmental waveform
  cx cancel_flux_per_ampere;   // Wb/A from the cancellation winding
  cx conducted;                // k-space units per unit conducted waveform
  std::vector<cx> coloration;  // per band over equal readout-bin bands; empty = flat
  double thermal_sigma = 0.0;  // complex std per k-space sample
};

struct ChannelSet {
  std::vector<Channel> receive;
  std::vector<Channel> reference;
  double receiver_gain = 1.0;  // k-space units per volt of pickup EMF
  double f0 = 2.23e6;
  cx anc_drive;                // cancellation current per unit environmental waveform, A
  std::uint64_t provenance = 0;

  void validate() const;
  /// Complex coupling of channel `c` to an interferer on `path`.
  cx coupling(Channel const &c, CouplingPath path) const;
  Channel const &find(std::string const &name) const;
};

struct ColorationSpec {
  int bands = 8;
  double magnitude_spread = 0.2;  // std of log-magnitude steps
  double phase_step_deg = 30.0;   // std of phase steps between adjacent bands
};

/// Smooth random per-band factors (random walk in log-magnitude and phase),
/// scaled to unit mean power.
std::vector<cx> random_coloration(ColorationSpec const &spec, std::uint64_t seed);

struct ChannelGeometry {
  std::string name;
  CoilSpec coil;
  cx conducted;
  double thermal_sigma = 0.0;
  bool colored = true;
};

struct ChannelModelSpec {
  std::vector<ChannelGeometry> receive;
  std::vector<ChannelGeometry> reference;
  CoilSpec cancellation;
  double receiver_gain = 1.0;
  ColorationSpec coloration;
  bool coloration_enabled = true;
  int quadrature_order = kDefaultQuadratureOrder;
  int segments_per_turn = kDefaultSegmentsPerTurn;
};

/// Receive couplings come from the flux of the cavity field through each
/// coil, reference couplings from the flux of the incident field (reference
/// detectors sit outside the cavity).
ChannelSet derive_channels(CavitySpec const &cavity, IncidenceSpec const &incidence, ChannelModelSpec const &spec,
                           std::uint64_t seed);

/// One average of contaminated data: receive k-spaces (clean + EMI) and
/// EMI-only reference k-spaces. Thermal noise is added separately.
struct ChannelData {
  std::vector<KSpaceMatrix> receive;
  std::vector<KSpaceMatrix> reference;
};

ChannelData inject_emi(std::vector<KSpaceMatrix> const &clean, EMITimeline const &timeline,
                       ChannelSet const &channels, SequenceParams const &seq, int average);

void add_thermal_noise(KSpaceMatrix &k, double sigma, std::mt19937_64 &rng);

/// Replaces receive couplings by their residuals under the cancellation
/// drive (current per unit environmental waveform).
ChannelSet apply_spatial_anc(ChannelSet const &channels, cx drive, std::uint64_t drive_provenance);

} // namespace ulfemi
