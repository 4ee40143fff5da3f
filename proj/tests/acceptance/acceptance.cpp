// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ulfemi/anc_post.hpp"
#include "ulfemi/cavity.hpp"
#include "ulfemi/io.hpp"
#include "ulfemi/pipeline.hpp"
#include "ulfemi/scenario.hpp"

using namespace ulfemi;
namespace fs = std::filesystem;

namespace tol {
// field structure
constexpr double kAntisymmetry = 1e-15;  // relative to the profile maximum
constexpr double kDecayRatio = 1e-12;
constexpr double kProfileShape = 1e-12;
// channel imbalance
constexpr double kDefaultImbalanceMin = 3.0;
constexpr double kStrongImbalance = 4.5;
constexpr double kStrongImbalanceTol = 0.5;
// spatial canceller
constexpr double kFluxReductionMin = 0.80;
constexpr double kSolenoidPerturbationMax = 1e-6;
constexpr double kExactMatchResidual = 1e-12;
// post-processing
constexpr double kRecovery = 1e-10;
constexpr double kColoredResidualDb = -40.0;
// residual asymmetry and convergence
constexpr double kAsymmetryLo = 1.5;
constexpr double kAsymmetryHi = 2.5;
constexpr double kConvergence = 0.25;
// fusion
constexpr double kFusionSlackDb = 0.1;
constexpr double kEqualGainDb = 3.0103;
constexpr double kEqualGainTolDb = 0.3;
constexpr int kEqualTrials = 64;
constexpr double kFusedGainMin = 1.15;
// SNR ordering: "comparable" means within this many dB
constexpr double kComparableDb = 3.0;
// runtime budgets, s
constexpr double kBudget[11] = {0, 1, 1, 10, 10, 10, 20, 20, 60, 120, 120};
} // namespace tol

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

void report(int id, std::string const &title, std::function<Outcome()> const &check, double extra_seconds = 0.0) {
  Clock::time_point const t0 = Clock::now();
  Outcome r;
  try {
    r = check();
  } catch (std::exception const &e) {
    r = {false, fmt::format("threw: {}", e.what())};
  }
  double const t = seconds_since(t0) + extra_seconds;
  bool const in_time = t < tol::kBudget[id];
  bool const ok = r.ok && in_time;
  if (!ok) ++failures;
  fmt::print("{} [{:2d}] {}: {}; {:.2f} s (budget {:.0f} s){}\n", ok ? "PASS" : "FAIL", id, title, r.detail, t,
             tol::kBudget[id], in_time ? "" : " over budget");
  std::fflush(stdout);
}

Outcome field_structure() {
  CavitySpec const c;
  IncidenceSpec const inc;
  AxisSamples g;
  g.x = AxisSamples::linspace(-0.45 * c.lx, 0.45 * c.lx, 19);
  g.y = AxisSamples::linspace(-0.45 * c.ly, 0.45 * c.ly, 41);
  g.z = AxisSamples::linspace(-0.4 * c.lz, 0.4 * c.lz, 5);
  VectorFieldGrid const f = emi_field(c, inc, g);
  std::size_t const ny = g.y.size();
  double hmax = 0.0, anti = 0.0, sym = 0.0;
  bool peaked = true, hx_min_centre = true, decays = true;
  double decay_err = 0.0;
  double const alpha = c.decay_constant();
  for (std::size_t k = 0; k < g.z.size(); ++k) {
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      double const centre_hy = std::abs(f.at(i, ny / 2, k).y());
      double const centre_hx = std::abs(f.at(i, ny / 2, k).x());
      for (std::size_t j = 0; j < ny; ++j) {
        CVec3 const a = f.at(i, j, k);
        CVec3 const b = f.at(i, ny - 1 - j, k);
        hmax = std::max(hmax, a.norm());
        anti = std::max(anti, std::abs(a.x() + b.x()));
        sym = std::max(sym, std::abs(a.y() - b.y()));
        if (j != ny / 2 && std::abs(a.y()) >= centre_hy) peaked = false;
        if (std::abs(a.x()) < centre_hx) hx_min_centre = false;
      }
      if (i > 0) {
        double const r = f.at(i - 1, ny / 3, k).norm() / f.at(i, ny / 3, k).norm();
        decay_err = std::max(decay_err, std::abs(r - std::exp(-alpha * (g.x[i] - g.x[i - 1]))));
        decays = decays && r < 1.0;
      }
    }
  }
  bool const ok = anti <= tol::kAntisymmetry * hmax && sym <= tol::kAntisymmetry * hmax && peaked && hx_min_centre &&
                  decays && decay_err <= tol::kDecayRatio;
  return {ok, fmt::format("Hx antisym {:.1e}, Hy sym {:.1e} (rel), Hy centre-peaked {}, Hx minimal at centre {}, "
                          "decay-ratio error {:.1e}",
                          anti / hmax, sym / hmax, peaked, hx_min_centre, decay_err)};
}

Outcome angle_sweep() {
  CavitySpec const c;
  AxisSamples g;
  g.x = {0.2};
  g.y = AxisSamples::linspace(-0.45 * c.ly, 0.45 * c.ly, 61);
  g.z = {0.0};
  bool monotone = true;
  double shape = 0.0;
  for (RotationAxis ax : {RotationAxis::AboutE, RotationAxis::AboutH}) {
    std::vector<double> ref;
    double prev = INFINITY;
    for (int t = 0; t <= 90; t += 15) {
      IncidenceSpec const inc{ax, static_cast<double>(t), 1.0};
      double const s = coupling_scale(inc);
      monotone = monotone && s < prev;
      prev = s;
      if (s == 0.0) continue;
      VectorFieldGrid const f = emi_field(c, inc, g);
      std::vector<double> prof;
      double peak = 0.0;
      for (std::size_t j = 0; j < g.y.size(); ++j) {
        prof.push_back(f.at(0, j, 0).norm());
        peak = std::max(peak, prof.back());
      }
      for (double &v : prof) v /= peak;
      if (ref.empty()) ref = prof;
      for (std::size_t j = 0; j < prof.size(); ++j) shape = std::max(shape, std::abs(prof[j] - ref[j]));
    }
  }
  return {monotone && shape <= tol::kProfileShape,
          fmt::format("coupling strictly decreasing {}, max normalized profile deviation {:.1e}", monotone, shape)};
}

Outcome channel_imbalance() {
  Metrics const d = compute_metrics(simulate(default_scenario(42)));
  Metrics const s = compute_metrics(simulate(preset_scenario("strong-emi", 42)));
  bool const ok = d.emi_ratio >= tol::kDefaultImbalanceMin &&
                  std::abs(s.emi_ratio - tol::kStrongImbalance) <= tol::kStrongImbalanceTol;
  return {ok, fmt::format("saddle:solenoid EMI ratio default {:.3f} (>= {}), strong-emi {:.3f} ({} +/- {})",
                          d.emi_ratio, tol::kDefaultImbalanceMin, s.emi_ratio, tol::kStrongImbalance,
                          tol::kStrongImbalanceTol)};
}

Outcome spatial_anc() {
  ScenarioConfig const cfg = default_scenario(42);
  ChannelSet const ch = build_channels(cfg);
  SpatialAncSummary const s = tune_spatial_anc(cfg, ch);
  SpatialCancellationReport const exact = spatial_cancellation_report(
    cfg.cavity, cfg.incidence, cfg.cancellation, cfg.saddle, cfg.anc.region, s.optimal.drive,
    cfg.anc.quadrature_order, cfg.anc.segments_per_turn);
  double const exact_rel = std::abs(exact.saddle_flux_after) / std::abs(exact.saddle_flux_before);
  bool const ok = s.applied_flux_reduction >= tol::kFluxReductionMin &&
                  s.solenoid_perturbation < tol::kSolenoidPerturbationMax &&
                  exact_rel <= tol::kExactMatchResidual && s.optimal.residual_ratio <= tol::kExactMatchResidual;
  return {ok, fmt::format("applied flux reduction {:.2f}% (>= {:.0f}%), solenoid perturbation {:.1e}, "
                          "exact-match residual {:.1e}",
                          100.0 * s.applied_flux_reduction, 100.0 * tol::kFluxReductionMin, s.solenoid_perturbation,
                          exact_rel)};
}

CMatrix white(Eigen::Index rows, Eigen::Index cols, std::mt19937_64 &rng) {
  std::normal_distribution<double> g;
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = cx(g(rng), g(rng));
  return m;
}

Outcome post_oracle() {
  double worst = 0.0;
  for (int bands : {1, 4, 8, 16}) {
    for (int nref : {1, 2}) {
      std::mt19937_64 rng(derive_seed(static_cast<std::uint64_t>(bands * 10 + nref), "acceptance"));
      std::uniform_real_distribution<double> u(-2.0, 2.0);
      BandPartition const part = BandPartition::equal(128, bands);
      std::vector<CMatrix> refs;
      Eigen::MatrixXcd truth(bands, nref);
      CMatrix rf = CMatrix::Zero(1, 128);
      for (int i = 0; i < nref; ++i) {
        refs.push_back(white(1, 128, rng));
        for (int b = 0; b < bands; ++b) truth(b, i) = cx(u(rng), u(rng));
        std::vector<cx> spec = fft({refs.back().data(), 128});
        for (int k = 0; k < 128; ++k) spec[k] *= truth(part.band_of(k), i);
        std::vector<cx> const row = ifft(spec);
        for (int k = 0; k < 128; ++k) rf(0, k) += row[k];
      }
      TransferModel const m = estimate_transfer(rf, refs, part, 0.0);
      worst = std::max(worst, (m.factors - truth).cwiseAbs().maxCoeff());
    }
  }

  // full channel model, band-colored couplings, thermal and reference noise off
  ScenarioConfig cfg = default_scenario(42);
  cfg.thermal_sigma = 0.0;
  for (ReferenceEntry &r : cfg.references) r.noise_sigma = 0.0;
  cfg.sequence.averages = 1;
  ChannelSet const ch = build_channels(cfg);
  Phantom const ph = Phantom::ellipses(cfg.sequence.n_read, cfg.sequence.n_phase);
  std::vector<KSpaceMatrix> clean{simulate_clean_kspace(ph, cfg.saddle_sensitivity, cfg.sequence, "saddle"),
                                  simulate_clean_kspace(ph, cfg.solenoid_sensitivity, cfg.sequence, "solenoid")};
  EMITimeline const tl(cfg.interferers, cfg.sequence.duration(), derive_seed(cfg.seed, "timeline"));
  ChannelData const d = inject_emi(clean, tl, ch, cfg.sequence, 0);
  double colored = -INFINITY;
  for (std::size_t c = 0; c < clean.size(); ++c) {
    PostResult const p = post_process(d.receive[c], d.reference, cfg.post);
    colored = std::max(colored, emi_suppression_metric(d.receive[c], p.cleaned, clean[c]).residual_db);
  }
  bool const ok = worst <= tol::kRecovery && colored <= tol::kColoredResidualDb;
  return {ok, fmt::format("max factor error over B in {{1,4,8,16}} x {{1,2}} refs {:.1e}, colored-coupling residual "
                          "{:.1f} dB (<= {} dB)",
                          worst, colored, tol::kColoredResidualDb)};
}

Outcome equal_channel_fusion(double &gain_db, double &worst_margin) {
  Roi const signal{{Rect{24, 16, 16, 32}}};
  Roi const noise{{Rect{0, 0, 12, 64}, Rect{52, 0, 12, 64}}};
  CMatrix base = CMatrix::Zero(64, 64);
  base.block(20, 12, 24, 40).setConstant(10.0);
  auto noisy = [&](double sigma, std::mt19937_64 &rng) {
    std::normal_distribution<double> g(0.0, sigma / std::sqrt(2.0));
    ReconImage img{base, "c", {}};
    for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data.data()[i] += cx(g(rng), g(rng));
    return img;
  };
  gain_db = 0.0;
  worst_margin = INFINITY;
  for (int t = 0; t < tol::kEqualTrials; ++t) {
    std::mt19937_64 rng(derive_seed(static_cast<std::uint64_t>(t), "equal-channel"));
    ReconImage const a = noisy(1.0, rng);
    ReconImage const b = noisy(1.0, rng);
    double const sa = snr_db(a, signal, noise).snr_db;
    double const sb = snr_db(b, signal, noise).snr_db;
    double const sf = snr_db(fuse({a, b}, {1.0, 1.0}).image, signal, noise).snr_db;
    gain_db += sf - 0.5 * (sa + sb);
    worst_margin = std::min(worst_margin, sf - std::max(sa, sb));
  }
  gain_db /= tol::kEqualTrials;
  return {};
}

struct Demo {
  RunData run;
  Metrics metrics;
  double seconds = 0.0;
};

Outcome fusion(Demo const &demo) {
  double gain_db = 0.0, margin = 0.0;
  equal_channel_fusion(gain_db, margin);
  for (ConditionMetrics const &c : demo.metrics.conditions) {
    if (!c.fused) continue;
    double best = -INFINITY;
    for (ChannelMetrics const &ch : c.channels) best = std::max(best, ch.snr.snr_db);
    margin = std::min(margin, c.fused->snr.snr_db - best);
  }
  ConditionMetrics const *comb = demo.metrics.find("combined");
  double const demo_gain = comb && comb->fused ? comb->fused->gain_linear : 0.0;
  bool const ok = margin >= -tol::kFusionSlackDb && std::abs(gain_db - tol::kEqualGainDb) <= tol::kEqualGainTolDb &&
                  demo_gain >= tol::kFusedGainMin;
  return {ok, fmt::format("worst fused-minus-best {:+.2f} dB, equal-channel gain {:.2f} dB over {} trials, demo "
                          "fused/best linear SNR {:.3f} (>= {})",
                          margin, gain_db, tol::kEqualTrials, demo_gain, tol::kFusedGainMin)};
}

std::vector<std::pair<std::string, std::string>> tree(fs::path const &root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto const &e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), root).string(), read_text_file(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism() {
  fs::path const root = fs::temp_directory_path() / fmt::format("ulfemi_acceptance_{}", std::random_device{}());
  ScenarioConfig const cfg = default_scenario(42);
  for (char const *tag : {"a", "b"}) {
    RunData const run = simulate(cfg);
    write_run(run, root / tag / "run");
    write_report(run, root / tag / "report");
  }
  auto const a = tree(root / "a");
  auto const b = tree(root / "b");
  std::size_t bytes = 0;
  for (auto const &[name, data] : a) bytes += data.size();
  fs::remove_all(root);
  return {!a.empty() && a == b, fmt::format("{} files, {} bytes, identical {}", a.size(), bytes, a == b)};
}

Outcome snr_ordering(Demo const &demo) {
  Metrics const &m = demo.metrics;
  double const rs = m.find("raw")->channel("saddle").snr.snr_db;
  double const rn = m.find("raw")->channel("solenoid").snr.snr_db;
  double const ps = m.find("post")->channel("saddle").snr.snr_db;
  double const pn = m.find("post")->channel("solenoid").snr.snr_db;
  double const cs = m.find("combined")->channel("saddle").snr.snr_db;
  bool const ok = rs < rn && std::abs(ps - rn) <= tol::kComparableDb && std::max(rn, ps) < cs &&
                  std::abs(cs - pn) <= tol::kComparableDb;
  return {ok, fmt::format("raw saddle {:.2f} < raw solenoid {:.2f} ~ post saddle {:.2f} < combined saddle {:.2f} ~ "
                          "post solenoid {:.2f} dB (~ = within {} dB)",
                          rs, rn, ps, cs, pn, tol::kComparableDb)};
}

} // namespace

int main() {
  report(1, "field structure", field_structure);
  report(2, "angle sweep", angle_sweep);
  report(3, "channel imbalance", channel_imbalance);
  report(4, "spatial cancellation", spatial_anc);
  report(5, "post-processing oracle", post_oracle);

  Demo demo;
  {
    Clock::time_point const t0 = Clock::now();
    demo.run = simulate(default_scenario(42));
    demo.metrics = compute_metrics(demo.run);
    demo.seconds = seconds_since(t0);
  }
  report(6, "residual asymmetry", [&] {
    double const r = demo.metrics.post_residual_ratio.value_or(0.0);
    return Outcome{r >= tol::kAsymmetryLo && r <= tol::kAsymmetryHi,
                   fmt::format("post-only saddle:solenoid residual {:.3f} (in [{}, {}])", r, tol::kAsymmetryLo,
                               tol::kAsymmetryHi)};
  }, demo.seconds);
  report(7, "channel convergence", [&] {
    double const r = demo.metrics.convergence_ratio.value_or(0.0);
    return Outcome{std::abs(r - 1.0) <= tol::kConvergence,
                   fmt::format("combined saddle : post solenoid trace RMS {:.3f} (within {:.0f}%)", r,
                               100.0 * tol::kConvergence)};
  }, demo.seconds);
  report(8, "fusion", [&] { return fusion(demo); }, demo.seconds);
  report(9, "determinism", determinism);
  report(10, "SNR ordering", [&] { return snr_ordering(demo); }, demo.seconds);

  fmt::print("{} of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
