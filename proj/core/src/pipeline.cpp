#include "ulfemi/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ulfemi/anc_post.hpp"
#include "ulfemi/io.hpp"

namespace ulfemi {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::vector<ConditionSpec> conditions_for(PipelineToggles const &t) {
  std::vector<ConditionSpec> out{{"raw", false, false}};
  if (t.post_anc) out.push_back({"post", false, true});
  if (t.spatial_anc) out.push_back({"spatial", true, false});
  if (t.spatial_anc && t.post_anc) out.push_back({"combined", true, true});
  return out;
}

ChannelSet build_channels(ScenarioConfig const &config) {
  ChannelModelSpec spec;
  spec.receive = {{"saddle", config.saddle, config.saddle_conducted, config.thermal_sigma, true},
                  {"solenoid", config.solenoid, config.solenoid_conducted, config.thermal_sigma, true}};
  for (ReferenceEntry const &r : config.references) {
    spec.reference.push_back({r.name, r.coil, r.conducted, r.noise_sigma, true});
  }
  spec.cancellation = config.cancellation;
  spec.receiver_gain = config.receiver_gain;
  spec.coloration = config.coloration;
  spec.coloration_enabled = config.coloration_enabled;
  spec.quadrature_order = config.anc.quadrature_order;
  spec.segments_per_turn = config.anc.segments_per_turn;
  return derive_channels(config.cavity, config.incidence, spec, config.seed);
}

SpatialAncSummary tune_spatial_anc(ScenarioConfig const &config, ChannelSet const &channels) {
  SpatialAncSummary s;
  FieldFunction const field = cavity_field_function(config.cavity, config.incidence);
  s.detection_flux = flux_through(field, config.detection, config.anc.quadrature_order).flux;
  Channel const &saddle = channels.find("saddle");
  Channel const &solenoid = channels.find("solenoid");
  s.optimal = optimize_drive(saddle.env_flux, saddle.cancel_flux_per_ampere, s.detection_flux, config.cavity.f0);
  s.optimal.provenance = channels.provenance;

  s.applied_chain.gain = s.optimal.chain.gain * config.anc.gain_factor;
  double phase = std::fmod(s.optimal.chain.phase_deg + config.anc.phase_error_deg, 360.0);
  if (phase < 0.0) phase += 360.0;
  s.applied_chain.phase_deg = phase >= 360.0 ? 0.0 : phase;
  s.applied_drive = drive_current(detect_voltage(s.detection_flux, config.cavity.f0), s.applied_chain);

  SpatialCancellationReport const rep =
    spatial_cancellation_report(config.cavity, config.incidence, config.cancellation, config.saddle, config.anc.region,
                                s.applied_drive, config.anc.quadrature_order, config.anc.segments_per_turn);
  s.applied_flux_reduction = rep.flux_reduction;
  s.field_reduction = rep.field_reduction;
  s.optimal_flux_reduction = 1.0 - s.optimal.residual_ratio;

  ChannelSet const after = apply_spatial_anc(channels, s.applied_drive, s.optimal.provenance);
  cx const sad0 = channels.coupling(saddle, CouplingPath::Environmental);
  cx const sad1 = after.coupling(after.find("saddle"), CouplingPath::Environmental);
  s.saddle_coupling_reduction = 1.0 - std::abs(sad1) / std::abs(sad0);
  Eigen::Vector2cd const sol0(channels.coupling(solenoid, CouplingPath::Environmental),
                              channels.coupling(solenoid, CouplingPath::Conducted));
  Channel const &sol_after = after.find("solenoid");
  Eigen::Vector2cd const sol1(after.coupling(sol_after, CouplingPath::Environmental),
                              after.coupling(sol_after, CouplingPath::Conducted));
  // Relative to the geometric coupling scale when the solenoid has no other path.
  double const scale = sol0.norm() > 0.0 ? sol0.norm() : std::abs(sad0);
  s.solenoid_perturbation = (sol1 - sol0).norm() / scale;
  return s;
}

namespace {

Phantom load_or_build_phantom(ScenarioConfig const &config) {
  if (config.phantom_file.empty()) {
    Phantom p = Phantom::ellipses(config.sequence.n_read, config.sequence.n_phase);
    p.pixel_spacing = config.pixel_spacing;
    return p;
  }
  return load_phantom(config.phantom_file, config.pixel_spacing);
}

} // namespace

RunData simulate(ScenarioConfig const &config) {
  config.validate();
  SequenceParams const &seq = config.sequence;
  RunData run;
  run.config = config;
  run.config_hash = config_hash(config);
  run.receive_names = {"saddle", "solenoid"};

  Phantom const phantom = load_or_build_phantom(config);
  run.clean = {simulate_clean_kspace(phantom, config.saddle_sensitivity, seq, "saddle"),
               simulate_clean_kspace(phantom, config.solenoid_sensitivity, seq, "solenoid")};

  ChannelSet const channels = build_channels(config);
  EMITimeline const timeline(config.interferers, seq.duration(), derive_seed(config.seed, "timeline"));

  std::vector<KSpaceMatrix> zero;
  for (KSpaceMatrix const &k : run.clean) {
    zero.push_back({CMatrix::Zero(k.n_phase(), k.n_read()), k.dwell, k.channel});
  }
  run.emi_only = inject_emi(zero, timeline, channels, seq, 0).receive;

  ChannelSet anc_channels = channels;
  if (config.toggles.spatial_anc) {
    run.anc = tune_spatial_anc(config, channels);
    anc_channels = apply_spatial_anc(channels, run.anc->applied_drive, run.anc->optimal.provenance);
  }

  std::vector<ConditionSpec> const conds = conditions_for(config.toggles);
  for (ConditionSpec const &c : conds) run.condition_order.push_back(c.name);

  for (bool const spatial : {false, true}) {
    if (spatial && !config.toggles.spatial_anc) continue;
    ChannelSet const &chs = spatial ? anc_channels : channels;
    std::string const plain = spatial ? "spatial" : "raw";
    std::string const post = spatial ? "combined" : "post";
    bool const do_post = config.toggles.post_anc;

    std::vector<KSpaceMatrix> sum_plain;
    std::vector<KSpaceMatrix> sum_post;
    for (int a = 0; a < seq.averages; ++a) {
      ChannelData data = inject_emi(run.clean, timeline, chs, seq, a);
      for (std::size_t c = 0; c < data.receive.size(); ++c) {
        std::mt19937_64 rng(derive_seed(config.seed, fmt::format("thermal:{}:{}", a, chs.receive[c].name)));
        add_thermal_noise(data.receive[c], chs.receive[c].thermal_sigma, rng);
      }
      for (std::size_t r = 0; r < data.reference.size(); ++r) {
        std::mt19937_64 rng(derive_seed(config.seed, fmt::format("reference:{}:{}", a, chs.reference[r].name)));
        add_thermal_noise(data.reference[r], chs.reference[r].thermal_sigma, rng);
      }
      for (std::size_t c = 0; c < data.receive.size(); ++c) {
        if (a == 0) {
          sum_plain.push_back(data.receive[c]);
        } else {
          sum_plain[c].data += data.receive[c].data;
        }
        if (!do_post) continue;
        PostResult const res = post_process(data.receive[c], data.reference, config.post);
        for (int b : res.model.degenerate_bands) {
          run.warnings.push_back(
            fmt::format("{}: degenerate band {} for channel {} in average {}", post, b, chs.receive[c].name, a));
        }
        if (a == 0) {
          sum_post.push_back(res.cleaned);
        } else {
          sum_post[c].data += res.cleaned.data;
        }
      }
    }
    double const inv = 1.0 / seq.averages;
    for (KSpaceMatrix &k : sum_plain) k.data *= inv;
    for (KSpaceMatrix &k : sum_post) k.data *= inv;
    run.conditions[plain] = std::move(sum_plain);
    if (do_post) run.conditions[post] = std::move(sum_post);
  }
  return run;
}

// ---------------------------------------------------------------------------
// Run directory.

namespace {

std::string kspace_path(std::string const &group, std::string const &channel) {
  return group + "/" + channel + ".ksp";
}

ojson anc_json(SpatialAncSummary const &s) {
  ojson j;
  j["detection_flux_wb"] = {s.detection_flux.real(), s.detection_flux.imag()};
  j["optimal_drive_a"] = {s.optimal.drive.real(), s.optimal.drive.imag()};
  j["optimal_gain_a_per_v"] = s.optimal.chain.gain;
  j["optimal_phase_deg"] = s.optimal.chain.phase_deg;
  j["applied_gain_a_per_v"] = s.applied_chain.gain;
  j["applied_phase_deg"] = s.applied_chain.phase_deg;
  j["applied_drive_a"] = {s.applied_drive.real(), s.applied_drive.imag()};
  j["optimal_flux_reduction"] = s.optimal_flux_reduction;
  j["applied_flux_reduction"] = s.applied_flux_reduction;
  j["target_field_reduction"] = s.field_reduction;
  j["saddle_coupling_reduction"] = s.saddle_coupling_reduction;
  j["solenoid_perturbation"] = s.solenoid_perturbation;
  j["field_provenance"] = fmt::format("{:016x}", s.optimal.provenance);
  return j;
}

SpatialAncSummary anc_from_json(nlohmann::json const &j) {
  SpatialAncSummary s;
  auto c = [&](char const *k) { return cx(j.at(k).at(0).get<double>(), j.at(k).at(1).get<double>()); };
  s.detection_flux = c("detection_flux_wb");
  s.optimal.drive = c("optimal_drive_a");
  s.optimal.chain.gain = j.at("optimal_gain_a_per_v").get<double>();
  s.optimal.chain.phase_deg = j.at("optimal_phase_deg").get<double>();
  s.applied_chain.gain = j.at("applied_gain_a_per_v").get<double>();
  s.applied_chain.phase_deg = j.at("applied_phase_deg").get<double>();
  s.applied_drive = c("applied_drive_a");
  s.optimal_flux_reduction = j.at("optimal_flux_reduction").get<double>();
  s.optimal.residual_ratio = 1.0 - s.optimal_flux_reduction;
  s.applied_flux_reduction = j.at("applied_flux_reduction").get<double>();
  s.field_reduction = j.at("target_field_reduction").get<double>();
  s.saddle_coupling_reduction = j.at("saddle_coupling_reduction").get<double>();
  s.solenoid_perturbation = j.at("solenoid_perturbation").get<double>();
  s.optimal.provenance = std::stoull(j.at("field_provenance").get<std::string>(), nullptr, 16);
  return s;
}

} // namespace

void write_run(RunData const &run, fs::path const &dir) {
  KSpaceHeader h;
  h.seed = run.config.seed;
  h.config_hash = run.config_hash;

  ojson files = ojson::array();
  auto put = [&](std::string const &rel, KSpaceMatrix const &k) {
    write_kspace(dir / rel, k, h);
    files.push_back(rel);
  };
  for (KSpaceMatrix const &k : run.clean) put(kspace_path("clean", k.channel), k);
  for (KSpaceMatrix const &k : run.emi_only) put(kspace_path("emi", k.channel), k);
  ojson conds = ojson::array();
  for (std::string const &name : run.condition_order) {
    ojson cf = ojson::array();
    for (KSpaceMatrix const &k : run.conditions.at(name)) {
      std::string const rel = kspace_path(name, k.channel);
      write_kspace(dir / rel, k, h);
      cf.push_back(rel);
    }
    conds.push_back({{"name", name}, {"files", cf}});
  }

  ojson m;
  m["format_version"] = 1;
  m["config_hash"] = run.config_hash;
  m["seed"] = run.config.seed;
  m["preset"] = run.config.preset;
  m["receive_channels"] = run.receive_names;
  m["clean"] = ojson::array();
  m["emi"] = ojson::array();
  for (KSpaceMatrix const &k : run.clean) m["clean"].push_back(kspace_path("clean", k.channel));
  for (KSpaceMatrix const &k : run.emi_only) m["emi"].push_back(kspace_path("emi", k.channel));
  m["conditions"] = conds;
  if (run.anc) m["spatial_anc"] = anc_json(*run.anc);
  m["warnings"] = run.warnings;
  write_text_file(dir / "config.json", to_json(run.config) + "\n");
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

RunData load_run(fs::path const &dir) {
  std::vector<std::string> missing;
  for (char const *f : {"manifest.json", "config.json"}) {
    if (!fs::is_regular_file(dir / f)) missing.push_back((dir / f).string());
  }
  if (!missing.empty()) {
    throw MissingInputsError(fmt::format("run directory is incomplete; missing: {}", fmt::join(missing, ", ")));
  }
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  } catch (nlohmann::json::exception const &e) {
    throw InvalidInputError(fmt::format("manifest.json is not valid JSON: {}", e.what()));
  }
  RunData run;
  run.config = parse_scenario(read_text_file(dir / "config.json"));
  run.config_hash = config_hash(run.config);
  if (m.value("config_hash", std::string{}) != run.config_hash) {
    throw ProvenanceError("config.json does not match the config hash recorded in manifest.json");
  }
  try {
    run.receive_names = m.at("receive_channels").get<std::vector<std::string>>();
    std::vector<std::string> wanted;
    for (auto const &f : m.at("clean")) wanted.push_back(f.get<std::string>());
    for (auto const &f : m.at("emi")) wanted.push_back(f.get<std::string>());
    for (auto const &c : m.at("conditions")) {
      for (auto const &f : c.at("files")) wanted.push_back(f.get<std::string>());
    }
    for (std::string const &f : wanted) {
      if (!fs::is_regular_file(dir / f)) missing.push_back((dir / f).string());
    }
    if (!missing.empty()) {
      throw MissingInputsError(fmt::format("run directory is incomplete; missing: {}", fmt::join(missing, ", ")));
    }
    for (auto const &f : m.at("clean")) run.clean.push_back(read_kspace(dir / f.get<std::string>()));
    for (auto const &f : m.at("emi")) run.emi_only.push_back(read_kspace(dir / f.get<std::string>()));
    for (auto const &c : m.at("conditions")) {
      std::string const name = c.at("name").get<std::string>();
      run.condition_order.push_back(name);
      for (auto const &f : c.at("files")) run.conditions[name].push_back(read_kspace(dir / f.get<std::string>()));
    }
    if (m.contains("spatial_anc")) run.anc = anc_from_json(m.at("spatial_anc"));
    run.warnings = m.value("warnings", std::vector<std::string>{});
  } catch (nlohmann::json::exception const &e) {
    throw InvalidInputError(fmt::format("manifest.json is malformed: {}", e.what()));
  }
  return run;
}

// ---------------------------------------------------------------------------
// Metrics.

ChannelMetrics const &ConditionMetrics::channel(std::string const &name) const {
  for (ChannelMetrics const &c : channels) {
    if (c.channel == name) return c;
  }
  throw InvalidInputError(fmt::format("condition '{}' has no channel '{}'", this->name, name));
}

ConditionMetrics const *Metrics::find(std::string const &name) const {
  for (ConditionMetrics const &c : conditions) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

double linear(double db) { return std::pow(10.0, db / 20.0); }

double trace_rms(std::vector<double> const &t) {
  double acc = 0.0;
  for (double const v : t) acc += v * v;
  return t.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(t.size()));
}

} // namespace

Metrics compute_metrics(RunData const &run) {
  Metrics m;
  ScenarioConfig const &cfg = run.config;
  auto clean_of = [&](std::string const &ch) -> KSpaceMatrix const & {
    for (KSpaceMatrix const &k : run.clean) {
      if (k.channel == ch) return k;
    }
    throw InvalidInputError(fmt::format("no clean k-space for channel '{}'", ch));
  };
  for (std::string const &name : run.condition_order) {
    ConditionMetrics cm;
    cm.name = name;
    std::vector<ReconImage> images;
    std::vector<double> sigmas;
    for (KSpaceMatrix const &k : run.conditions.at(name)) {
      ChannelMetrics ch;
      ch.channel = k.channel;
      ReconImage const img = reconstruct(k, {name});
      ch.snr = snr_db(img, cfg.signal_roi, cfg.noise_roi);
      ch.sigma = estimate_noise_sigma(img, cfg.noise_roi);
      CMatrix const resid = k.data - clean_of(k.channel).data;
      ch.residual_rms = rms(resid);
      ch.trace = noise_profile_1d(resid);
      images.push_back(img);
      sigmas.push_back(ch.sigma);
      cm.channels.push_back(std::move(ch));
    }
    if (cfg.toggles.fusion && images.size() >= 2) {
      FusionResult const f = fuse(images, sigmas);
      FusionMetrics fm;
      fm.snr = snr_db(f.image, cfg.signal_roi, cfg.noise_roi);
      fm.weights = f.weights;
      double best = 0.0;
      for (ChannelMetrics const &c : cm.channels) best = std::max(best, linear(c.snr.snr_db));
      fm.gain_linear = linear(fm.snr.snr_db) / best;
      cm.fused = fm;
    }
    m.conditions.push_back(std::move(cm));
  }

  double es = 0.0;
  double en = 0.0;
  for (KSpaceMatrix const &k : run.emi_only) {
    if (k.channel == "saddle") es = rms(k.data);
    if (k.channel == "solenoid") en = rms(k.data);
  }
  m.emi_ratio = en > 0.0 ? es / en : std::numeric_limits<double>::infinity();

  ConditionMetrics const *raw = m.find("raw");
  ConditionMetrics const *post = m.find("post");
  ConditionMetrics const *comb = m.find("combined");
  if (post) {
    m.post_residual_ratio = post->channel("saddle").residual_rms / post->channel("solenoid").residual_rms;
    for (ChannelMetrics const &c : post->channels) {
      m.post_suppression[c.channel] = 1.0 - c.residual_rms / raw->channel(c.channel).residual_rms;
    }
  }
  if (post && comb) {
    m.convergence_ratio = trace_rms(comb->channel("saddle").trace) / trace_rms(post->channel("solenoid").trace);
  }
  return m;
}

std::string metrics_json(RunData const &run, Metrics const &m) {
  ojson j;
  j["config_hash"] = run.config_hash;
  j["seed"] = run.config.seed;
  j["snr_definition"] = "20*log10(mean |img| over signal ROI / std |img| over noise ROI)";
  ojson conds = ojson::array();
  for (ConditionMetrics const &c : m.conditions) {
    ojson cj;
    cj["name"] = c.name;
    ojson chans = ojson::object();
    for (ChannelMetrics const &ch : c.channels) {
      chans[ch.channel] = {{"snr_db", ch.snr.snr_db},
                           {"mu_signal", ch.snr.mu_signal},
                           {"sigma_noise", ch.snr.sigma_noise},
                           {"sigma_complex", ch.sigma},
                           {"residual_rms", ch.residual_rms}};
    }
    cj["channels"] = chans;
    if (c.fused) {
      cj["fused"] = {{"snr_db", c.fused->snr.snr_db},
                     {"gain_linear", c.fused->gain_linear},
                     {"weights", c.fused->weights.weights}};
    }
    conds.push_back(cj);
  }
  j["conditions"] = conds;
  j["emi_ratio_saddle_solenoid"] = m.emi_ratio;
  if (m.post_residual_ratio) j["post_residual_ratio_saddle_solenoid"] = *m.post_residual_ratio;
  if (m.convergence_ratio) j["convergence_ratio_combined_saddle_post_solenoid"] = *m.convergence_ratio;
  ojson sup = ojson::object();
  for (auto const &[k, v] : m.post_suppression) sup[k] = v;
  j["post_suppression"] = sup;
  if (run.anc) j["spatial_anc"] = anc_json(*run.anc);
  j["warnings"] = run.warnings;
  return j.dump(2) + "\n";
}

Metrics write_report(RunData const &run, fs::path const &dir) {
  Metrics const m = compute_metrics(run);
  write_text_file(dir / "metrics.json", metrics_json(run, m));

  ScenarioConfig const &cfg = run.config;
  for (std::string const &name : run.condition_order) {
    std::vector<ReconImage> images;
    std::vector<double> sigmas;
    for (KSpaceMatrix const &k : run.conditions.at(name)) {
      ReconImage const img = reconstruct(k, {name});
      std::ostringstream pgm;
      write_pgm(pgm, img.magnitude());
      write_text_file(dir / "images" / fmt::format("{}_{}.pgm", name, k.channel), pgm.str());
      std::ostringstream csv;
      write_complex_csv(csv, img.data);
      write_text_file(dir / "images" / fmt::format("{}_{}.csv", name, k.channel), csv.str());
      sigmas.push_back(estimate_noise_sigma(img, cfg.noise_roi));
      images.push_back(img);
    }
    if (cfg.toggles.fusion && images.size() >= 2) {
      FusionResult const f = fuse(images, sigmas);
      std::ostringstream pgm;
      write_pgm(pgm, f.image.magnitude());
      write_text_file(dir / "images" / fmt::format("{}_fused.pgm", name), pgm.str());
    }
  }

  for (ConditionMetrics const &c : m.conditions) {
    std::string csv = "row";
    for (ChannelMetrics const &ch : c.channels) csv += "," + ch.channel;
    csv += "\n";
    for (std::size_t r = 0; r < c.channels.front().trace.size(); ++r) {
      csv += std::to_string(r);
      for (ChannelMetrics const &ch : c.channels) csv += fmt::format(",{:.17g}", ch.trace[r]);
      csv += "\n";
    }
    write_text_file(dir / "profiles" / (c.name + ".csv"), csv);
  }

  // Side-by-side traces of the four strategies compared in the noise analysis.
  std::vector<std::pair<std::string, std::vector<double> const *>> cols;
  if (ConditionMetrics const *raw = m.find("raw")) {
    cols.emplace_back("raw_saddle", &raw->channel("saddle").trace);
    cols.emplace_back("raw_solenoid", &raw->channel("solenoid").trace);
  }
  if (ConditionMetrics const *post = m.find("post")) {
    cols.emplace_back("post_saddle", &post->channel("saddle").trace);
    cols.emplace_back("post_solenoid", &post->channel("solenoid").trace);
  }
  if (ConditionMetrics const *comb = m.find("combined")) {
    cols.emplace_back("dual_mode_saddle", &comb->channel("saddle").trace);
  }
  std::string csv = "row";
  for (auto const &[name, t] : cols) csv += "," + name;
  csv += "\n";
  for (std::size_t r = 0; !cols.empty() && r < cols.front().second->size(); ++r) {
    csv += std::to_string(r);
    for (auto const &[name, t] : cols) csv += fmt::format(",{:.17g}", (*t)[r]);
    csv += "\n";
  }
  write_text_file(dir / "profiles" / "comparison.csv", csv);
  return m;
}

} // namespace ulfemi
