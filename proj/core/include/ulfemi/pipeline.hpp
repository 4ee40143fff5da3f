#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ulfemi/acquisition.hpp"
#include "ulfemi/anc_spatial.hpp"
#include "ulfemi/fusion.hpp"
#include "ulfemi/scenario.hpp"

namespace ulfemi {

/// One of the four front-end/back-end combinations.
struct ConditionSpec {
  std::string name;  // raw, post, spatial, combined
  bool spatial = false;
  bool post = false;
};

std::vector<ConditionSpec> conditions_for(PipelineToggles const &toggles);

struct SpatialAncSummary {
  cx detection_flux;
  DriveSolution optimal;
  ControlChain applied_chain;
  cx applied_drive;
  double optimal_flux_reduction = 0.0;
  double applied_flux_reduction = 0.0;
  double field_reduction = 0.0;
  double solenoid_perturbation = 0.0;  // |coupling change| / |coupling| of the solenoid channel
  double saddle_coupling_reduction = 0.0;
};

/// Everything a report needs; produced by simulate() or read back from a
/// run directory.
struct RunData {
  ScenarioConfig config;
  std::string config_hash;
  std::vector<std::string> receive_names;
  std::vector<KSpaceMatrix> clean;     // per receive channel
  std::vector<KSpaceMatrix> emi_only;  // raw EMI of the first average, no signal or thermal noise
  std::map<std::string, std::vector<KSpaceMatrix>> conditions;  // averaged receive k-spaces
  std::vector<std::string> condition_order;
  std::optional<SpatialAncSummary> anc;
  std::vector<std::string> warnings;
};

/// Builds the channel model (couplings from the configured geometry).
ChannelSet build_channels(ScenarioConfig const &config);

/// Front-end canceller derived from the configured geometry and imperfection.
SpatialAncSummary tune_spatial_anc(ScenarioConfig const &config, ChannelSet const &channels);

RunData simulate(ScenarioConfig const &config);

/// Writes config.json, manifest.json and the k-space files.
void write_run(RunData const &run, std::filesystem::path const &dir);

/// Reads a run directory; MissingInputsError lists every absent file.
RunData load_run(std::filesystem::path const &dir);

struct ChannelMetrics {
  std::string channel;
  SNRReport snr;
  double sigma = 0.0;         // complex noise level in the noise ROI
  double residual_rms = 0.0;  // RMS of (k - clean)
  std::vector<double> trace;  // per-row RMS of (k - clean)
};

struct FusionMetrics {
  SNRReport snr;
  FusionWeights weights;
  double gain_linear = 0.0;  // fused linear SNR / best single-channel linear SNR
};

struct ConditionMetrics {
  std::string name;
  std::vector<ChannelMetrics> channels;
  std::optional<FusionMetrics> fused;
  ChannelMetrics const &channel(std::string const &name) const;
};

struct Metrics {
  std::vector<ConditionMetrics> conditions;
  double emi_ratio = 0.0;  // saddle : solenoid EMI row-RMS over the raw EMI
  std::optional<double> post_residual_ratio;   // saddle : solenoid residual RMS, post only
  std::optional<double> convergence_ratio;     // combined saddle : post solenoid trace RMS
  std::map<std::string, double> post_suppression;  // channel -> 1 - residual / raw residual
  ConditionMetrics const *find(std::string const &name) const;
};

Metrics compute_metrics(RunData const &run);

/// metrics.json text (deterministic).
std::string metrics_json(RunData const &run, Metrics const &m);

/// Writes metrics.json, images/ (PGM + CSV) and profiles/ into `dir`.
Metrics write_report(RunData const &run, std::filesystem::path const &dir);

} // namespace ulfemi
