#include "ulfemi/acquisition.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ulfemi/anc_spatial.hpp"

namespace ulfemi {

void Phantom::validate() const {
  if (image.rows() <= 0 || image.cols() <= 0) {
    throw InvalidInputError("phantom image is empty");
  }
  if (!image.allFinite() || (image.array() < 0.0).any()) {
    throw InvalidInputError("phantom values must be finite and non-negative");
  }
  if (!(pixel_spacing > 0.0)) {
    throw InvalidInputError("phantom pixel spacing must be positive");
  }
}

namespace {

void paint_ellipse(RMatrix &img, double cr, double cc, double ar, double ac, double value) {
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      double const u = (static_cast<double>(r) - cr) / ar;
      double const v = (static_cast<double>(c) - cc) / ac;
      if (u * u + v * v <= 1.0) {
        img(r, c) = value;
      }
    }
  }
}

// Separable Gaussian blur with zero padding. Soft edges keep the MR energy
// at the k-space periphery below the noise floor.
RMatrix blur(RMatrix const &img, double sigma) {
  int const half = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    k[static_cast<std::size_t>(i + half)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + half)];
  }
  for (double &v : k) v /= sum;
  auto pass = [&](RMatrix const &in, bool along_rows) {
    RMatrix out = RMatrix::Zero(in.rows(), in.cols());
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
      for (Eigen::Index c = 0; c < in.cols(); ++c) {
        double acc = 0.0;
        for (int i = -half; i <= half; ++i) {
          Eigen::Index const rr = along_rows ? r + i : r;
          Eigen::Index const cc = along_rows ? c : c + i;
          if (rr < 0 || cc < 0 || rr >= in.rows() || cc >= in.cols()) continue;
          acc += k[static_cast<std::size_t>(i + half)] * in(rr, cc);
        }
        out(r, c) = acc;
      }
    }
    return out;
  };
  return pass(pass(img, true), false);
}

} // namespace

Phantom Phantom::ellipses(int n_read, int n_phase) {
  if (n_read < 8 || n_phase < 8) {
    throw InvalidSpecError("phantom needs at least 8 x 8 pixels");
  }
  Phantom p;
  p.image = RMatrix::Zero(n_phase, n_read);
  double const nr = n_phase;
  double const nc = n_read;
  paint_ellipse(p.image, 0.5 * nr, 0.5 * nc, 0.30 * nr, 0.34 * nc, 1.0);
  paint_ellipse(p.image, 0.35 * nr, 0.5 * nc, 0.06 * nr, 0.06 * nc, 0.5);
  paint_ellipse(p.image, 0.65 * nr, 0.5 * nc, 0.06 * nr, 0.06 * nc, 1.5);
  p.image = blur(p.image, 1.5);
  return p;
}

Phantom Phantom::uniform(int n_read, int n_phase, double value) {
  Phantom p;
  p.image = RMatrix::Constant(n_phase, n_read, value);
  return p;
}

CMatrix ChannelSensitivity::map(Eigen::Index rows, Eigen::Index cols) const {
  CMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double const y = (static_cast<double>(r) - 0.5 * static_cast<double>(rows)) / (0.5 * static_cast<double>(rows));
      double const x = (static_cast<double>(c) - 0.5 * static_cast<double>(cols)) / (0.5 * static_cast<double>(cols));
      m(r, c) = scale * (1.0 - falloff * (x * x + y * y));
    }
  }
  return m;
}

void SequenceParams::validate() const {
  if (!is_power_of_two(n_read) || !is_power_of_two(n_phase)) {
    throw InvalidSpecError(fmt::format("matrix size must be powers of two (got {} x {})", n_read, n_phase));
  }
  if (!(dwell > 0.0)) {
    throw InvalidSpecError("dwell time must be positive");
  }
  if (!(tr >= readout_duration())) {
    throw InvalidSpecError(fmt::format("TR {:.6g} s is shorter than the readout ({:.6g} s)", tr, readout_duration()));
  }
  if (averages < 1) {
    throw InvalidSpecError("averages must be >= 1");
  }
}

double SequenceParams::row_start(int average, int row) const {
  return (static_cast<double>(average) * n_phase + row) * tr;
}

double SequenceParams::duration() const {
  return row_start(averages - 1, n_phase - 1) + readout_duration();
}

KSpaceMatrix simulate_clean_kspace(Phantom const &phantom, ChannelSensitivity const &sensitivity,
                                   SequenceParams const &seq, std::string channel) {
  seq.validate();
  phantom.validate();
  if (phantom.image.rows() != seq.n_phase || phantom.image.cols() != seq.n_read) {
    throw InvalidInputError(fmt::format("phantom is {} x {} but the sequence matrix is {} x {}", phantom.image.rows(),
                                        phantom.image.cols(), seq.n_phase, seq.n_read));
  }
  CMatrix const weighted = sensitivity.map(seq.n_phase, seq.n_read).cwiseProduct(phantom.image.cast<cx>());
  return {fft2c(weighted), seq.dwell, std::move(channel)};
}

// ---------------------------------------------------------------------------

std::string to_string(InterfererKind kind) {
  switch (kind) {
  case InterfererKind::Tone: return "tone";
  case InterfererKind::HarmonicComb: return "harmonic-comb";
  case InterfererKind::BandNoise: return "band-limited-noise";
  }
  return "?";
}

std::string to_string(CouplingPath path) {
  return path == CouplingPath::Environmental ? "environmental" : "conducted";
}

void InterfererSpec::validate() const {
  if (!std::isfinite(amplitude.real()) || !std::isfinite(amplitude.imag())) {
    throw InvalidSpecError(fmt::format("interferer '{}' has a non-finite amplitude", name));
  }
  if (!(linewidth >= 0.0) || (linewidth > 0.0 && components < 1)) {
    throw InvalidSpecError(fmt::format("interferer '{}' needs linewidth >= 0 and components >= 1", name));
  }
  switch (kind) {
  case InterfererKind::Tone:
    break;
  case InterfererKind::HarmonicComb:
    if (lines < 1 || !(spacing > 0.0)) {
      throw InvalidSpecError(fmt::format("comb '{}' needs lines >= 1 and spacing > 0", name));
    }
    break;
  case InterfererKind::BandNoise:
    if (!(band_hi > band_lo) || components < 1) {
      throw InvalidSpecError(fmt::format("band noise '{}' needs band_hi > band_lo and components >= 1", name));
    }
    break;
  }
}

EMITimeline::EMITimeline(std::vector<InterfererSpec> interferers, double duration, std::uint64_t seed)
    : specs_(std::move(interferers)), duration_(duration), seed_(seed) {
  if (!(duration > 0.0)) {
    throw InvalidSpecError("timeline duration must be positive");
  }
  for (std::size_t k = 0; k < specs_.size(); ++k) {
    InterfererSpec const &s = specs_[k];
    s.validate();
    std::uint64_t const sub = s.seed != 0 ? s.seed : derive_seed(seed, fmt::format("interferer:{}:{}", k, s.name));
    std::mt19937_64 rng(sub);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    cx const a0 = s.amplitude * std::polar(1.0, deg2rad(s.phase_deg));
    std::vector<WaveComponent> comps;
    // A line of finite width is a narrow band of random-phase sinusoids; its
    // phase decorrelates between phase encodes, as a drifting carrier does.
    auto add_line = [&](double f, cx a) {
      if (s.linewidth <= 0.0) {
        comps.push_back({f, a});
        return;
      }
      double const each = 1.0 / std::sqrt(static_cast<double>(s.components));
      for (int m = 0; m < s.components; ++m) {
        double const fm = f + s.linewidth * (uni(rng) - 0.5);
        comps.push_back({fm, a * each * std::polar(1.0, 2.0 * kPi * uni(rng))});
      }
    };
    switch (s.kind) {
    case InterfererKind::Tone:
      add_line(s.frequency, a0);
      break;
    case InterfererKind::HarmonicComb: {
      double const each = 1.0 / std::sqrt(static_cast<double>(s.lines));
      for (int h = 0; h < s.lines; ++h) {
        add_line(s.frequency + h * s.spacing, a0 * each * std::polar(1.0, 2.0 * kPi * uni(rng)));
      }
      break;
    }
    case InterfererKind::BandNoise: {
      double const each = 1.0 / std::sqrt(static_cast<double>(s.components));
      for (int m = 0; m < s.components; ++m) {
        double const f = s.band_lo + (s.band_hi - s.band_lo) * uni(rng);
        comps.push_back({f, a0 * each * std::polar(1.0, 2.0 * kPi * uni(rng))});
      }
      break;
    }
    }
    components_.push_back(std::move(comps));
  }
}

cx EMITimeline::sample(std::size_t k, double t) const {
  cx acc{};
  for (WaveComponent const &c : components_.at(k)) {
    acc += c.amplitude * std::polar(1.0, 2.0 * kPi * std::fmod(c.frequency * t, 1.0));
  }
  return acc;
}

void EMITimeline::sample_row(std::size_t k, double t0, double dt, std::span<cx> out) const {
  std::fill(out.begin(), out.end(), cx{});
  for (WaveComponent const &c : components_.at(k)) {
    cx z = c.amplitude * std::polar(1.0, 2.0 * kPi * std::fmod(c.frequency * t0, 1.0));
    cx const step = std::polar(1.0, 2.0 * kPi * c.frequency * dt);
    for (cx &o : out) {
      o += z;
      z *= step;
    }
  }
}

// ---------------------------------------------------------------------------

void ChannelSet::validate() const {
  auto check = [](Channel const &c) {
    for (cx const v : {c.env_flux, c.cancel_flux_per_ampere, c.conducted}) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        throw InvalidSpecError(fmt::format("channel '{}' has a non-finite coupling", c.name));
      }
    }
    if (!(c.thermal_sigma >= 0.0)) {
      throw InvalidSpecError(fmt::format("channel '{}' has a negative noise level", c.name));
    }
  };
  for (Channel const &c : receive) check(c);
  for (Channel const &c : reference) check(c);
}

cx ChannelSet::coupling(Channel const &c, CouplingPath path) const {
  if (path == CouplingPath::Conducted) {
    return c.conducted;
  }
  cx flux = c.env_flux;
  if (c.role == ChannelRole::Receive && anc_drive != cx{}) {
    flux += anc_drive * c.cancel_flux_per_ampere;
  }
  return receiver_gain * detect_voltage(flux, f0);
}

Channel const &ChannelSet::find(std::string const &name) const {
  for (auto const *list : {&receive, &reference}) {
    for (Channel const &c : *list) {
      if (c.name == name) return c;
    }
  }
  throw InvalidInputError(fmt::format("unknown channel '{}'", name));
}

std::vector<cx> random_coloration(ColorationSpec const &spec, std::uint64_t seed) {
  if (spec.bands < 1) {
    throw InvalidSpecError("coloration needs at least one band");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<cx> out;
  double logmag = spec.magnitude_spread * gauss(rng);
  double phase = 2.0 * kPi * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (int b = 0; b < spec.bands; ++b) {
    if (b > 0) {
      logmag = 0.5 * logmag + spec.magnitude_spread * gauss(rng);
      phase += deg2rad(spec.phase_step_deg) * gauss(rng);
    }
    out.push_back(std::polar(std::exp(logmag), phase));
  }
  // unit mean power, so coloration shapes the spectrum without changing the level
  double p = 0.0;
  for (cx v : out) p += std::norm(v);
  double const norm = std::sqrt(p / static_cast<double>(out.size()));
  for (cx &v : out) v /= norm;
  return out;
}

ChannelSet derive_channels(CavitySpec const &cavity, IncidenceSpec const &incidence, ChannelModelSpec const &spec,
                           std::uint64_t seed) {
  ChannelSet set;
  set.receiver_gain = spec.receiver_gain;
  set.f0 = cavity.f0;
  set.provenance = field_provenance(cavity, incidence);

  FieldFunction const inside = cavity_field_function(cavity, incidence);
  CVec3 const inc = incident_field(incidence);
  FieldFunction const outside = [inc](Vec3 const &) { return inc; };

  WindingPath const cancel = realize_coil(spec.cancellation, spec.segments_per_turn);
  FieldFunction const cancel_field = [&cancel](Vec3 const &p) { return field_at(cancel, p); };

  auto build = [&](ChannelGeometry const &g, ChannelRole role) {
    Channel c;
    c.name = g.name;
    c.role = role;
    c.conducted = g.conducted;
    c.thermal_sigma = g.thermal_sigma;
    if (role == ChannelRole::Receive) {
      c.env_flux = flux_through(inside, g.coil, spec.quadrature_order).flux;
      c.cancel_flux_per_ampere = flux_through(cancel_field, g.coil, spec.quadrature_order).flux;
    } else {
      c.env_flux = flux_through(outside, g.coil, spec.quadrature_order).flux;
    }
    if (spec.coloration_enabled && g.colored) {
      c.coloration = random_coloration(spec.coloration, derive_seed(seed, "coloration:" + g.name));
    }
    return c;
  };
  for (ChannelGeometry const &g : spec.receive) set.receive.push_back(build(g, ChannelRole::Receive));
  for (ChannelGeometry const &g : spec.reference) set.reference.push_back(build(g, ChannelRole::Reference));
  set.validate();
  return set;
}

namespace {

void synthesize_row(ChannelSet const &set, Channel const &ch, std::vector<std::vector<cx>> const &waves,
                    EMITimeline const &timeline, std::span<cx> out) {
  std::size_t const n = out.size();
  std::vector<cx> row(n, cx{});
  for (std::size_t k = 0; k < waves.size(); ++k) {
    cx const c = set.coupling(ch, timeline.interferers()[k].path);
    if (c == cx{}) continue;
    for (std::size_t i = 0; i < n; ++i) {
      row[i] += c * waves[k][i];
    }
  }
  if (!ch.coloration.empty()) {
    std::vector<cx> spec = fft(row);
    std::size_t const bands = ch.coloration.size();
    for (std::size_t i = 0; i < n; ++i) {
      spec[i] *= ch.coloration[std::min(bands - 1, i * bands / n)];
    }
    row = ifft(spec);
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] += row[i];
  }
}

} // namespace

ChannelData inject_emi(std::vector<KSpaceMatrix> const &clean, EMITimeline const &timeline,
                       ChannelSet const &channels, SequenceParams const &seq, int average) {
  seq.validate();
  if (clean.size() != channels.receive.size()) {
    throw InvalidInputError(
      fmt::format("{} clean k-spaces supplied for {} receive channels", clean.size(), channels.receive.size()));
  }
  if (average < 0 || average >= seq.averages) {
    throw InvalidInputError(fmt::format("average index {} outside [0, {})", average, seq.averages));
  }
  for (KSpaceMatrix const &k : clean) {
    if (k.n_phase() != seq.n_phase || k.n_read() != seq.n_read) {
      throw InvalidInputError(fmt::format("clean k-space '{}' does not match the sequence matrix", k.channel));
    }
  }
  for (int p = 0; p < seq.n_phase; ++p) {
    double const end = seq.row_start(average, p) + seq.readout_duration();
    if (end > timeline.duration() * (1.0 + 1e-12)) {
      throw CoverageError(fmt::format("timeline ends at {:.6g} s but phase-encode row {} of average {} ends at {:.6g} s",
                                      timeline.duration(), p, average, end));
    }
  }

  ChannelData out;
  for (std::size_t c = 0; c < clean.size(); ++c) {
    out.receive.push_back(clean[c]);
    out.receive.back().channel = channels.receive[c].name;
  }
  for (Channel const &r : channels.reference) {
    out.reference.push_back({CMatrix::Zero(seq.n_phase, seq.n_read), seq.dwell, r.name});
  }

  std::size_t const n = static_cast<std::size_t>(seq.n_read);
  std::vector<std::vector<cx>> waves(timeline.interferers().size(), std::vector<cx>(n));
  for (int p = 0; p < seq.n_phase; ++p) {
    double const t0 = seq.row_start(average, p);
    for (std::size_t k = 0; k < waves.size(); ++k) {
      timeline.sample_row(k, t0, seq.dwell, waves[k]);
    }
    for (std::size_t c = 0; c < channels.receive.size(); ++c) {
      synthesize_row(channels, channels.receive[c], waves, timeline, {out.receive[c].data.row(p).data(), n});
    }
    for (std::size_t r = 0; r < channels.reference.size(); ++r) {
      synthesize_row(channels, channels.reference[r], waves, timeline, {out.reference[r].data.row(p).data(), n});
    }
  }
  return out;
}

void add_thermal_noise(KSpaceMatrix &k, double sigma, std::mt19937_64 &rng) {
  if (!(sigma >= 0.0)) {
    throw InvalidSpecError("noise level must be >= 0");
  }
  if (sigma == 0.0) return;
  std::normal_distribution<double> gauss(0.0, sigma / std::sqrt(2.0));
  for (Eigen::Index i = 0; i < k.data.size(); ++i) {
    double const re = gauss(rng);
    double const im = gauss(rng);
    k.data.data()[i] += cx(re, im);
  }
}

ChannelSet apply_spatial_anc(ChannelSet const &channels, cx drive, std::uint64_t drive_provenance) {
  if (drive_provenance != channels.provenance) {
    throw ProvenanceError(fmt::format("cancellation drive was derived from field {:016x} but the couplings from {:016x}",
                                      drive_provenance, channels.provenance));
  }
  ChannelSet out = channels;
  out.anc_drive = drive;
  return out;
}

} // namespace ulfemi
