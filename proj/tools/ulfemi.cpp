// ulfemi: command-line front end for the EMI-cancellation lab.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "ulfemi/anc_post.hpp"
#include "ulfemi/cavity.hpp"
#include "ulfemi/io.hpp"
#include "ulfemi/pipeline.hpp"
#include "ulfemi/scenario.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace ulfemi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;

struct ConfigOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string preset;
};

void add_config_options(CLI::App *cmd, ConfigOptions &o) {
  cmd->add_option("--config", o.config, "scenario JSON");
  cmd->add_option("--seed", o.seed, "override the master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--preset", o.preset, "default or strong-emi");
}

ScenarioConfig resolve_config(ConfigOptions const &o) {
  if (!o.config.empty() && !o.preset.empty()) {
    throw ConfigError("--config and --preset are mutually exclusive (set 'preset' inside the file instead)");
  }
  ScenarioConfig c;
  if (!o.config.empty()) {
    if (!fs::is_regular_file(o.config)) {
      throw MissingInputsError(fmt::format("config file not found: {}", o.config));
    }
    c = parse_scenario(read_text_file(o.config));
  } else {
    c = preset_scenario(o.preset.empty() ? "default" : o.preset, o.seed.value_or(42));
  }
  if (o.seed) c.seed = *o.seed;
  try {
    c.validate();
  } catch (Error const &e) {
    throw ConfigError(e.what());
  }
  return c;
}

fs::path out_dir(ConfigOptions const &o, ScenarioConfig const &c) {
  return o.out.empty() ? fs::path(c.output_dir) : fs::path(o.out);
}

ojson cx_json(cx v) { return ojson::array({v.real(), v.imag()}); }

// Field along one lab axis through the cavity centre.
struct Profile {
  std::vector<double> pos;
  std::vector<CVec3> h;
};

Profile field_line(CavitySpec const &cav, IncidenceSpec const &inc, int axis, int n) {
  double const half = 0.45 * (axis == 0 ? cav.lx : cav.ly);
  std::vector<double> const s = AxisSamples::linspace(-half, half, static_cast<std::size_t>(n));
  AxisSamples g;
  g.x = axis == 0 ? s : std::vector<double>{0.0};
  g.y = axis == 1 ? s : std::vector<double>{0.0};
  g.z = {0.0};
  VectorFieldGrid const grid = emi_field(cav, inc, g);
  Profile p;
  p.pos = s;
  for (std::size_t i = 0; i < s.size(); ++i) {
    p.h.push_back(axis == 0 ? grid.at(i, 0, 0) : grid.at(0, i, 0));
  }
  return p;
}

std::string profile_csv(Profile const &p, char const *coord) {
  std::string s = fmt::format("{},hx_re,hx_im,hy_re,hy_im,hz_re,hz_im,hx_abs,hy_abs\n", coord);
  for (std::size_t i = 0; i < p.pos.size(); ++i) {
    CVec3 const &h = p.h[i];
    s += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", p.pos[i],
                     h.x().real(), h.x().imag(), h.y().real(), h.y().imag(), h.z().real(), h.z().imag(),
                     std::abs(h.x()), std::abs(h.y()));
  }
  return s;
}

double max_abs(Profile const &p, int comp) {
  double m = 0.0;
  for (CVec3 const &h : p.h) m = std::max(m, std::abs(h(comp)));
  return m;
}

constexpr int kProfileSamples = 61;

int cmd_map_field(ConfigOptions const &o, bool sweep) {
  ScenarioConfig const c = resolve_config(o);
  fs::path const dir = out_dir(o, c);
  if (!c.cavity.quasi_static()) {
    std::fprintf(stderr, "warning: cavity is not quasi-static at f0; the aperture-mode model may not hold\n");
  }
  ojson summary;
  summary["config_hash"] = config_hash(c);
  summary["decay_constant"] = c.cavity.decay_constant();
  summary["wavelength"] = c.cavity.wavelength();
  summary["quasi_static"] = c.cavity.quasi_static();
  summary["provenance"] = fmt::format("{:016x}", field_provenance(c.cavity, c.incidence));

  std::vector<std::pair<fs::path, std::string>> files;
  if (!sweep) {
    Profile const py = field_line(c.cavity, c.incidence, 1, kProfileSamples);
    Profile const px = field_line(c.cavity, c.incidence, 0, kProfileSamples);
    files.emplace_back(dir / "profile_y.csv", profile_csv(py, "y"));
    files.emplace_back(dir / "profile_x.csv", profile_csv(px, "x"));
    summary["theta_deg"] = c.incidence.theta_deg;
    summary["coupling_scale"] = coupling_scale(c.incidence);
    summary["max_abs_hx_on_y0"] = max_abs(px, 0);
    summary["max_abs_hy_on_x_axis"] = max_abs(px, 1);
    summary["center_abs_hy"] = std::abs(py.h[kProfileSamples / 2].y());
  } else {
    ojson angles = ojson::array();
    for (int t = 0; t <= 90; t += 15) {
      IncidenceSpec inc = c.incidence;
      inc.theta_deg = t;
      Profile const py = field_line(c.cavity, inc, 1, kProfileSamples);
      files.emplace_back(dir / fmt::format("profile_y_theta{:02d}.csv", t), profile_csv(py, "y"));
      angles.push_back({{"theta_deg", t}, {"coupling_scale", coupling_scale(inc)}, {"peak_abs_hy", max_abs(py, 1)}});
    }
    summary["sweep"] = angles;
  }
  files.emplace_back(dir / "field_summary.json", summary.dump(2) + "\n");
  for (auto const &[path, text] : files) write_text_file(path, text);
  std::printf("map-field: wrote %zu files to %s\n", files.size(), dir.string().c_str());
  return kExitOk;
}

int cmd_sweep_angle(ConfigOptions const &o, double step) {
  ScenarioConfig const c = resolve_config(o);
  if (!(step > 0.0) || step > 90.0) throw ConfigError("--step must lie in (0, 90]");
  fs::path const dir = out_dir(o, c);
  IncidenceSpec inc0 = c.incidence;
  inc0.theta_deg = 0.0;
  Profile const base = field_line(c.cavity, inc0, 1, kProfileSamples);
  double const peak0 = max_abs(base, 1);

  std::string csv = "theta_deg,coupling_scale,peak_abs_hy,profile_deviation\n";
  for (int i = 0;; ++i) {
    double const t = std::min(90.0, i * step);
    IncidenceSpec inc = c.incidence;
    inc.theta_deg = t;
    Profile const p = field_line(c.cavity, inc, 1, kProfileSamples);
    double const peak = max_abs(p, 1);
    // shape of |Hy| relative to normal incidence, after normalizing both
    double dev = 0.0;
    if (peak > 0.0) {
      for (std::size_t k = 0; k < p.h.size(); ++k) {
        dev = std::max(dev, std::abs(std::abs(p.h[k].y()) / peak - std::abs(base.h[k].y()) / peak0));
      }
    }
    csv += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", t, coupling_scale(inc), peak, dev);
    if (t >= 90.0) break;
  }
  write_text_file(dir / "angle_sweep.csv", csv);
  std::fputs(csv.c_str(), stdout);
  return kExitOk;
}

int cmd_simulate(ConfigOptions const &o) {
  ScenarioConfig const c = resolve_config(o);
  fs::path const dir = out_dir(o, c);
  RunData const run = simulate(c);
  write_run(run, dir);
  for (std::string const &w : run.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("simulate: %zu conditions, config %s -> %s\n", run.condition_order.size(), run.config_hash.c_str(),
              dir.string().c_str());
  return kExitOk;
}

int cmd_anc_tune(ConfigOptions const &o) {
  ScenarioConfig const c = resolve_config(o);
  fs::path const dir = out_dir(o, c);
  ChannelSet const channels = build_channels(c);
  SpatialAncSummary const s = tune_spatial_anc(c, channels);
  SpatialCancellationReport const rep =
    spatial_cancellation_report(c.cavity, c.incidence, c.cancellation, c.saddle, c.anc.region, s.applied_drive,
                                c.anc.quadrature_order, c.anc.segments_per_turn);
  ojson j;
  j["config_hash"] = config_hash(c);
  j["detection_flux"] = cx_json(s.detection_flux);
  j["optimal"] = {{"drive", cx_json(s.optimal.drive)},
                  {"gain", s.optimal.chain.gain},
                  {"phase_deg", s.optimal.chain.phase_deg},
                  {"flux_reduction", s.optimal_flux_reduction}};
  j["applied"] = {{"drive", cx_json(s.applied_drive)},
                  {"gain", s.applied_chain.gain},
                  {"phase_deg", s.applied_chain.phase_deg},
                  {"flux_reduction", s.applied_flux_reduction}};
  j["saddle_flux_before"] = cx_json(rep.saddle_flux_before);
  j["saddle_flux_after"] = cx_json(rep.saddle_flux_after);
  j["hy_before"] = {{"min", rep.before.min}, {"max", rep.before.max}, {"mean", rep.before.mean}};
  j["hy_after"] = {{"min", rep.after.min}, {"max", rep.after.max}, {"mean", rep.after.mean}};
  j["field_reduction"] = s.field_reduction;
  j["saddle_coupling_reduction"] = s.saddle_coupling_reduction;
  j["solenoid_perturbation"] = s.solenoid_perturbation;
  write_text_file(dir / "anc.json", j.dump(2) + "\n");
  std::printf("anc-tune: flux reduction %.4f (optimal %.4f), solenoid perturbation %.3g\n", s.applied_flux_reduction,
              s.optimal_flux_reduction, s.solenoid_perturbation);
  return kExitOk;
}

struct DenoiseOptions {
  std::string rf;
  std::vector<std::string> refs;
  std::string out = "denoised";
  int bands = 8;
  int periphery = 1;
  bool outer = false;
  std::optional<double> ridge;
};

int cmd_denoise(DenoiseOptions const &o) {
  std::vector<std::string> missing;
  if (!fs::is_regular_file(o.rf)) missing.push_back(o.rf);
  for (std::string const &r : o.refs) {
    if (!fs::is_regular_file(r)) missing.push_back(r);
  }
  if (!missing.empty()) throw MissingInputsError(fmt::format("missing: {}", fmt::join(missing, ", ")));

  KSpaceHeader h;
  KSpaceMatrix const rf = read_kspace(fs::path(o.rf), &h);
  std::vector<KSpaceMatrix> refs;
  for (std::string const &r : o.refs) refs.push_back(read_kspace(fs::path(r)));
  PostConfig pc;
  pc.bands = o.bands;
  pc.periphery = o.outer ? PeripheryPolicy::outer_phase_encodes(o.periphery) : PeripheryPolicy::first_rows(o.periphery);
  pc.ridge_absolute = o.ridge;
  PostResult const res = post_process(rf, refs, pc);

  fs::path const dir(o.out);
  std::ostringstream ks;
  write_kspace(ks, res.cleaned, h);
  write_text_file(dir / fmt::format("{}.ksp", rf.channel.empty() ? "cleaned" : rf.channel), ks.str());
  write_text_file(dir / "transfer.json", res.model.to_json() + "\n");
  for (int b : res.model.degenerate_bands) std::fprintf(stderr, "warning: degenerate band %d\n", b);
  std::printf("denoise: %d bands, %d references, %zu periphery rows\n", res.model.partition.bands(),
              res.model.references(), res.model.periphery_rows.size());
  return kExitOk;
}

int cmd_fuse(std::string const &in, std::string const &condition, std::string out) {
  RunData const run = load_run(in);
  auto it = run.conditions.find(condition);
  if (it == run.conditions.end()) {
    throw MissingInputsError(fmt::format("condition '{}' not present in {}", condition, in));
  }
  ScenarioConfig const &c = run.config;
  std::vector<ReconImage> images;
  std::vector<double> sigmas;
  ojson chans = ojson::array();
  for (KSpaceMatrix const &k : it->second) {
    ReconImage img = reconstruct(k, {condition});
    img.channel = k.channel;
    sigmas.push_back(estimate_noise_sigma(img, c.noise_roi));
    SNRReport const r = snr_db(img, c.signal_roi, c.noise_roi);
    chans.push_back({{"channel", k.channel}, {"sigma", sigmas.back()}, {"snr_db", r.snr_db}});
    images.push_back(std::move(img));
  }
  FusionResult const f = fuse(images, sigmas);
  SNRReport const fr = snr_db(f.image, c.signal_roi, c.noise_roi);
  if (out.empty()) out = in;
  fs::path const dir(out);
  std::ostringstream pgm, csv;
  write_pgm(pgm, f.image.magnitude());
  write_complex_csv(csv, f.image.data);
  write_text_file(dir / fmt::format("{}_fused.pgm", condition), pgm.str());
  write_text_file(dir / fmt::format("{}_fused.csv", condition), csv.str());
  ojson j;
  j["condition"] = condition;
  j["channels"] = chans;
  j["weights"] = f.weights.weights;
  j["fused_snr_db"] = fr.snr_db;
  write_text_file(dir / fmt::format("{}_fusion.json", condition), j.dump(2) + "\n");
  std::printf("fuse: %s fused SNR %.2f dB\n", condition.c_str(), fr.snr_db);
  return kExitOk;
}

int cmd_report(std::string const &in, std::string out) {
  RunData const run = load_run(in);
  if (out.empty()) out = in;
  Metrics const m = write_report(run, out);
  for (ConditionMetrics const &c : m.conditions) {
    std::printf("%-9s", c.name.c_str());
    for (ChannelMetrics const &ch : c.channels) std::printf("  %s %.2f dB", ch.channel.c_str(), ch.snr.snr_db);
    if (c.fused) std::printf("  fused %.2f dB", c.fused->snr.snr_db);
    std::printf("\n");
  }
  return kExitOk;
}

int cmd_show_config(ConfigOptions const &o) {
  ScenarioConfig const c = resolve_config(o);
  std::printf("%s\n", to_json(c).c_str());
  return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Ultra-low-field MRI EMI cancellation lab"};
  app.require_subcommand(1);

  ConfigOptions co;
  bool sweep = false;
  double step = 15.0;
  DenoiseOptions dn;
  std::string in_dir, condition = "combined", out;

  CLI::App *map = app.add_subcommand("map-field", "Hx/Hy profiles through the cavity centre");
  add_config_options(map, co);
  map->add_flag("--sweep", sweep, "profiles for incidence angles 0..90 in 15 degree steps");

  CLI::App *angle = app.add_subcommand("sweep-angle", "coupling scale and profile shape against incidence angle");
  add_config_options(angle, co);
  angle->add_option("--step", step, "angle step in degrees");

  CLI::App *sim = app.add_subcommand("simulate", "acquire all pipeline conditions and write k-space files");
  add_config_options(sim, co);

  CLI::App *anc = app.add_subcommand("anc-tune", "optimize the front-end canceller");
  add_config_options(anc, co);

  CLI::App *den = app.add_subcommand("denoise", "reference-based cancellation of one k-space file");
  den->add_option("--rf", dn.rf, "receive k-space file")->required();
  den->add_option("--ref", dn.refs, "reference k-space file (repeatable)")->required();
  den->add_option("--out", dn.out, "output directory");
  den->add_option("--bands", dn.bands, "frequency bands");
  den->add_option("--periphery", dn.periphery, "periphery rows");
  den->add_flag("--outer", dn.outer, "use the outer phase encodes instead of the first rows");
  den->add_option("--ridge", dn.ridge, "absolute ridge");

  CLI::App *fz = app.add_subcommand("fuse", "inverse-variance fusion of one condition of a run");
  fz->add_option("--in", in_dir, "run directory")->required();
  fz->add_option("--condition", condition, "raw, post, spatial or combined");
  fz->add_option("--out", out, "output directory (default: the run directory)");

  CLI::App *rep = app.add_subcommand("report", "metrics, images and noise profiles of a run");
  rep->add_option("run", in_dir, "run directory")->required();
  rep->add_option("--out", out, "output directory (default: the run directory)");

  CLI::App *show = app.add_subcommand("show-config", "print the resolved scenario");
  add_config_options(show, co);

  try {
    app.parse(argc, argv);
  } catch (CLI::CallForHelp const &e) {
    return app.exit(e);
  } catch (CLI::ParseError const &e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (map->parsed()) return cmd_map_field(co, sweep);
    if (angle->parsed()) return cmd_sweep_angle(co, step);
    if (sim->parsed()) return cmd_simulate(co);
    if (anc->parsed()) return cmd_anc_tune(co);
    if (den->parsed()) return cmd_denoise(dn);
    if (fz->parsed()) return cmd_fuse(in_dir, condition, out);
    if (rep->parsed()) return cmd_report(in_dir, out);
    if (show->parsed()) return cmd_show_config(co);
  } catch (ConfigError const &e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (InvalidSpecError const &e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (MissingInputsError const &e) {
    std::fprintf(stderr, "missing inputs: %s\n", e.what());
    return kExitMissing;
  } catch (Error const &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  } catch (std::exception const &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
