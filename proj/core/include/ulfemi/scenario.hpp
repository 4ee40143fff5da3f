#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ulfemi/acquisition.hpp"
#include "ulfemi/anc_post.hpp"
#include "ulfemi/anc_spatial.hpp"
#include "ulfemi/cavity.hpp"
#include "ulfemi/coilgeom.hpp"
#include "ulfemi/fusion.hpp"

namespace ulfemi {

struct ReferenceEntry {
  std::string name;
  CoilSpec coil;
  cx conducted;
  double noise_sigma = 0.0;
};

/// Hardware imperfection of the front-end canceller relative to the
/// optimized chain: gain multiplied by gain_factor, phase offset added.
struct AncSettings {
  double gain_factor = 0.9;
  double phase_error_deg = 8.0;
  TargetRegion region;
  int quadrature_order = kDefaultQuadratureOrder;
  int segments_per_turn = kDefaultSegmentsPerTurn;
};

struct PipelineToggles {
  bool spatial_anc = true;
  bool post_anc = true;
  bool fusion = true;
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "run";
  std::string preset = "default";

  CavitySpec cavity;
  IncidenceSpec incidence;

  CoilSpec saddle;
  CoilSpec solenoid;
  CoilSpec cancellation;
  CoilSpec detection;
  std::vector<ReferenceEntry> references;

  double receiver_gain = 1.0;
  double thermal_sigma = 1.0;
  cx saddle_conducted;
  cx solenoid_conducted;
  ChannelSensitivity saddle_sensitivity;
  ChannelSensitivity solenoid_sensitivity;
  bool coloration_enabled = true;
  ColorationSpec coloration;

  std::vector<InterfererSpec> interferers;
  SequenceParams sequence;
  std::string phantom_file;  // empty: built-in ellipse phantom
  double pixel_spacing = 2e-3;

  AncSettings anc;
  PostConfig post;
  PipelineToggles toggles;
  Roi signal_roi;
  Roi noise_roi;

  void validate() const;
};

/// Environmental amplitude multiplier of the strong-emi preset.
inline constexpr double kStrongEmiScale = 1.30;

ScenarioConfig default_scenario(std::uint64_t seed = 42);
ScenarioConfig preset_scenario(std::string const &name, std::uint64_t seed = 42);

/// Strict parse: every key must be known, `seed` is mandatory; values not
/// given keep the defaults of the named preset (`preset` key, default
/// "default"). Throws ConfigError with the offending path.
ScenarioConfig parse_scenario(std::string const &json_text);

/// Canonical JSON (fixed key order, full precision).
std::string to_json(ScenarioConfig const &config);

/// FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(ScenarioConfig const &config);

/// Default ROIs for an n_phase x n_read image: signal inside the phantom
/// body, noise in the top and bottom background strips.
Roi default_signal_roi(int n_read, int n_phase);
Roi default_noise_roi(int n_read, int n_phase);

} // namespace ulfemi
