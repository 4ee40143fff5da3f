#include "ulfemi/scenario.hpp"

#include <set>

#include <fmt/format.h>
#include <json.hpp>

namespace ulfemi {

using ojson = nlohmann::ordered_json;
using njson = nlohmann::json;

// ---------------------------------------------------------------------------
// Defaults.

Roi default_signal_roi(int n_read, int n_phase) {
  int const r0 = static_cast<int>(0.45 * n_phase);
  int const r1 = static_cast<int>(0.55 * n_phase);
  int const c0 = static_cast<int>(0.30 * n_read);
  int const c1 = static_cast<int>(0.70 * n_read);
  return Roi{{Rect{r0, c0, std::max(1, r1 - r0), std::max(1, c1 - c0)}}};
}

Roi default_noise_roi(int n_read, int n_phase) {
  int const h = std::max(1, n_phase / 8);
  return Roi{{Rect{0, 0, h, n_read}, Rect{n_phase - h, 0, h, n_read}}};
}

ScenarioConfig default_scenario(std::uint64_t seed) {
  ScenarioConfig c;
  c.seed = seed;

  c.saddle = {"saddle", SaddleParams{0.12, 0.25, 120.0, 8}, Pose::axis_x()};
  c.solenoid = {"solenoid", SolenoidParams{0.10, 0.20, 20}, Pose::axis_x()};
  c.cancellation = {"cancellation", CancellationPairParams{}, Pose::axis_y()};
  c.detection = {"detection", DetectionLoopParams{0.04, 10}, Pose::axis_y(Vec3(0.35, 0.0, 0.0))};
  c.references = {
    {"ref_y", {"ref_y", DetectionLoopParams{0.05, 10}, Pose::axis_y(Vec3(1.2, 0.0, 0.0))}, cx{}, 2.5},
    {"ref_x", {"ref_x", DetectionLoopParams{0.05, 10}, Pose::axis_x(Vec3(1.2, 0.3, 0.0))}, std::polar(3.0, 0.3),
     0.5},
  };

  c.receiver_gain = 4.9;
  c.thermal_sigma = 1.0;
  c.saddle_conducted = std::polar(1.95, 1.0);
  c.solenoid_conducted = std::polar(1.95, -0.5);
  c.saddle_sensitivity = {cx{0.0, 0.11}, 0.1};
  c.solenoid_sensitivity = {cx{0.11, 0.0}, 0.1};

  InterfererSpec wide;
  wide.name = "wideband";
  wide.kind = InterfererKind::BandNoise;
  wide.path = CouplingPath::Environmental;
  wide.band_lo = -10e3;
  wide.band_hi = 10e3;
  InterfererSpec tone;
  tone.name = "carrier";
  tone.kind = InterfererKind::Tone;
  tone.path = CouplingPath::Environmental;
  tone.amplitude = 0.5;
  tone.frequency = 3.1e3;
  tone.linewidth = 120.0;
  tone.components = 64;
  InterfererSpec comb;
  comb.name = "harmonics";
  comb.kind = InterfererKind::HarmonicComb;
  comb.path = CouplingPath::Environmental;
  comb.amplitude = 0.4;
  comb.frequency = -7.0e3;
  comb.spacing = 1.5e3;
  comb.lines = 10;
  comb.linewidth = 120.0;
  comb.components = 32;
  InterfererSpec line;
  line.name = "line-noise";
  line.kind = InterfererKind::BandNoise;
  line.path = CouplingPath::Conducted;
  line.band_lo = -12e3;
  line.band_hi = 12e3;
  InterfererSpec spur;
  spur.name = "line-spur";
  spur.kind = InterfererKind::Tone;
  spur.path = CouplingPath::Conducted;
  spur.amplitude = 0.3;
  spur.frequency = -4.2e3;
  spur.linewidth = 120.0;
  spur.components = 64;
  c.interferers = {wide, tone, comb, line, spur};

  c.signal_roi = default_signal_roi(c.sequence.n_read, c.sequence.n_phase);
  c.noise_roi = default_noise_roi(c.sequence.n_read, c.sequence.n_phase);
  return c;
}

ScenarioConfig preset_scenario(std::string const &name, std::uint64_t seed) {
  ScenarioConfig c = default_scenario(seed);
  if (name == "default") {
    return c;
  }
  if (name == "strong-emi") {
    c.preset = name;
    for (InterfererSpec &s : c.interferers) {
      if (s.path == CouplingPath::Environmental) s.amplitude *= kStrongEmiScale;
    }
    return c;
  }
  throw ConfigError(fmt::format("unknown preset '{}' (expected default or strong-emi)", name));
}

void ScenarioConfig::validate() const {
  cavity.validate();
  incidence.validate();
  for (CoilSpec const *s : {&saddle, &solenoid, &cancellation, &detection}) s->validate();
  if (saddle.kind() != CoilKind::Saddle || solenoid.kind() != CoilKind::Solenoid ||
      cancellation.kind() != CoilKind::CancellationPair) {
    throw InvalidSpecError("coils.saddle, coils.solenoid and coils.cancellation must have matching kinds");
  }
  std::set<std::string> names{"saddle", "solenoid"};
  for (ReferenceEntry const &r : references) {
    r.coil.validate();
    if (!names.insert(r.name).second) {
      throw InvalidSpecError(fmt::format("duplicate channel name '{}'", r.name));
    }
    if (!(r.noise_sigma >= 0.0)) {
      throw InvalidSpecError(fmt::format("reference '{}' noise must be >= 0", r.name));
    }
  }
  if (!(thermal_sigma >= 0.0) || !(receiver_gain > 0.0)) {
    throw InvalidSpecError("thermal_sigma must be >= 0 and receiver_gain > 0");
  }
  for (InterfererSpec const &s : interferers) s.validate();
  sequence.validate();
  if (post.bands < 1 || post.bands > sequence.n_read) {
    throw InvalidSpecError(fmt::format("post.bands must lie in [1, {}]", sequence.n_read));
  }
  if (!(anc.gain_factor >= 0.0) || !std::isfinite(anc.phase_error_deg)) {
    throw InvalidSpecError("anc.gain_factor must be >= 0 and anc.phase_error_deg finite");
  }
  signal_roi.validate(sequence.n_phase, sequence.n_read);
  noise_roi.validate(sequence.n_phase, sequence.n_read);
}

// ---------------------------------------------------------------------------
// Serialization.

namespace {

ojson cx_json(cx v) { return ojson::array({v.real(), v.imag()}); }
ojson vec_json(Vec3 const &v) { return ojson::array({v.x(), v.y(), v.z()}); }

std::string axis_name(Pose const &p) {
  if (p.rotation == Pose::axis_x().rotation) return "x";
  if (p.rotation == Pose::axis_y().rotation) return "y";
  if (p.rotation == Pose::axis_z().rotation) return "z";
  throw InvalidSpecError("coil pose is not one of the axis-aligned frames");
}

ojson coil_json(CoilSpec const &c) {
  ojson j;
  std::visit(
    [&](auto const &p) {
      using T = std::decay_t<decltype(p)>;
      if constexpr (std::is_same_v<T, SolenoidParams>) {
        j["kind"] = "solenoid";
        j["radius"] = p.radius;
        j["length"] = p.length;
        j["turns"] = p.turns;
      } else if constexpr (std::is_same_v<T, SaddleParams>) {
        j["kind"] = "saddle";
        j["radius"] = p.radius;
        j["length"] = p.length;
        j["arc_deg"] = p.arc_deg;
        j["turns"] = p.turns;
      } else if constexpr (std::is_same_v<T, DetectionLoopParams>) {
        j["kind"] = "detection-loop";
        j["radius"] = p.radius;
        j["turns"] = p.turns;
      } else {
        j["kind"] = "cancellation-pair";
        j["outer_width"] = p.outer_width;
        j["outer_height"] = p.outer_height;
        j["inner_width"] = p.inner_width;
        j["inner_height"] = p.inner_height;
        j["separation"] = p.separation;
        j["turns"] = p.turns;
        j["density_ratio"] = p.density_ratio;
      }
    },
    c.params);
  j["axis"] = axis_name(c.pose);
  j["position"] = vec_json(c.pose.translation);
  return j;
}

ojson roi_json(Roi const &r) {
  ojson a = ojson::array();
  for (Rect const &q : r.rects) a.push_back({q.row, q.col, q.rows, q.cols});
  return a;
}

ojson interferer_json(InterfererSpec const &s) {
  ojson j;
  j["name"] = s.name;
  j["kind"] = to_string(s.kind);
  j["path"] = to_string(s.path);
  j["amplitude"] = cx_json(s.amplitude);
  j["phase_deg"] = s.phase_deg;
  j["frequency_hz"] = s.frequency;
  j["spacing_hz"] = s.spacing;
  j["lines"] = s.lines;
  j["band_hz"] = {s.band_lo, s.band_hi};
  j["components"] = s.components;
  j["linewidth_hz"] = s.linewidth;
  j["seed"] = s.seed;
  return j;
}

// Keyed reader that records which keys were consumed and rejects the rest.
class Reader {
public:
  Reader(njson const &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(fmt::format("{}: expected an object", label()));
    }
  }

  njson const *find(char const *key) {
    seen_.insert(key);
    auto const it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T> void get(char const *key, T &out) {
    if (njson const *v = find(key)) out = as<T>(*v, sub(key));
  }

  std::string sub(char const *key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto const &[k, v] : j_.items()) {
      if (!seen_.count(k)) {
        throw ConfigError(fmt::format("{}: unknown key '{}'", label(), k));
      }
    }
  }

  template <class T> static T as(njson const &v, std::string const &path) {
    try {
      if constexpr (std::is_same_v<T, cx>) {
        if (!v.is_array() || v.size() != 2) throw ConfigError(fmt::format("{}: expected [re, im]", path));
        return {v.at(0).get<double>(), v.at(1).get<double>()};
      } else if constexpr (std::is_same_v<T, Vec3>) {
        if (!v.is_array() || v.size() != 3) throw ConfigError(fmt::format("{}: expected [x, y, z]", path));
        return {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()};
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(fmt::format("{}: expected a number", path));
        return v.get<double>();
      } else if constexpr (std::is_same_v<T, int>) {
        if (!v.is_number_integer()) throw ConfigError(fmt::format("{}: expected an integer", path));
        return v.get<int>();
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
          throw ConfigError(fmt::format("{}: expected a non-negative integer", path));
        }
        return v.get<std::uint64_t>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(fmt::format("{}: expected true or false", path));
        return v.get<bool>();
      } else {
        if (!v.is_string()) throw ConfigError(fmt::format("{}: expected a string", path));
        return v.get<std::string>();
      }
    } catch (njson::exception const &e) {
      throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
  }

private:
  std::string label() const { return path_.empty() ? "config" : path_; }

  njson const &j_;
  std::string path_;
  std::set<std::string> seen_;
};

Pose axis_pose(std::string const &axis, Vec3 const &t, std::string const &path) {
  if (axis == "x") return Pose::axis_x(t);
  if (axis == "y") return Pose::axis_y(t);
  if (axis == "z") return Pose::axis_z(t);
  throw ConfigError(fmt::format("{}: axis must be x, y or z (got '{}')", path, axis));
}

void read_coil(njson const &j, std::string const &path, CoilSpec &coil) {
  Reader r(j, path);
  std::string kind = coil_json(coil)["kind"].get<std::string>();
  r.get("kind", kind);
  std::string axis = axis_name(coil.pose);
  Vec3 pos = coil.pose.translation;
  r.get("axis", axis);
  r.get("position", pos);
  if (kind == "solenoid") {
    auto p = std::holds_alternative<SolenoidParams>(coil.params) ? std::get<SolenoidParams>(coil.params)
                                                                 : SolenoidParams{};
    r.get("radius", p.radius);
    r.get("length", p.length);
    r.get("turns", p.turns);
    coil.params = p;
  } else if (kind == "saddle") {
    auto p = std::holds_alternative<SaddleParams>(coil.params) ? std::get<SaddleParams>(coil.params) : SaddleParams{};
    r.get("radius", p.radius);
    r.get("length", p.length);
    r.get("arc_deg", p.arc_deg);
    r.get("turns", p.turns);
    coil.params = p;
  } else if (kind == "detection-loop") {
    auto p = std::holds_alternative<DetectionLoopParams>(coil.params) ? std::get<DetectionLoopParams>(coil.params)
                                                                      : DetectionLoopParams{};
    r.get("radius", p.radius);
    r.get("turns", p.turns);
    coil.params = p;
  } else if (kind == "cancellation-pair") {
    auto p = std::holds_alternative<CancellationPairParams>(coil.params)
               ? std::get<CancellationPairParams>(coil.params)
               : CancellationPairParams{};
    r.get("outer_width", p.outer_width);
    r.get("outer_height", p.outer_height);
    r.get("inner_width", p.inner_width);
    r.get("inner_height", p.inner_height);
    r.get("separation", p.separation);
    r.get("turns", p.turns);
    r.get("density_ratio", p.density_ratio);
    coil.params = p;
  } else {
    throw ConfigError(fmt::format("{}.kind: unknown coil kind '{}'", path, kind));
  }
  coil.pose = axis_pose(axis, pos, path + ".axis");
  r.finish();
}

Roi read_roi(njson const &j, std::string const &path) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(fmt::format("{}: expected a list of [row, col, rows, cols] rectangles", path));
  }
  Roi roi;
  for (std::size_t i = 0; i < j.size(); ++i) {
    njson const &q = j[i];
    std::string const p = fmt::format("{}[{}]", path, i);
    if (!q.is_array() || q.size() != 4) {
      throw ConfigError(fmt::format("{}: expected [row, col, rows, cols]", p));
    }
    roi.rects.push_back({Reader::as<int>(q[0], p), Reader::as<int>(q[1], p), Reader::as<int>(q[2], p),
                         Reader::as<int>(q[3], p)});
  }
  return roi;
}

InterfererKind parse_kind(std::string const &s, std::string const &path) {
  if (s == "tone") return InterfererKind::Tone;
  if (s == "harmonic-comb") return InterfererKind::HarmonicComb;
  if (s == "band-limited-noise") return InterfererKind::BandNoise;
  throw ConfigError(fmt::format("{}: unknown interferer kind '{}'", path, s));
}

CouplingPath parse_path(std::string const &s, std::string const &path) {
  if (s == "environmental") return CouplingPath::Environmental;
  if (s == "conducted") return CouplingPath::Conducted;
  throw ConfigError(fmt::format("{}: coupling path must be environmental or conducted (got '{}')", path, s));
}

InterfererSpec read_interferer(njson const &j, std::string const &path) {
  Reader r(j, path);
  InterfererSpec s;
  std::string kind = "tone";
  std::string cpath = "environmental";
  r.get("name", s.name);
  r.get("kind", kind);
  r.get("path", cpath);
  s.kind = parse_kind(kind, r.sub("kind"));
  s.path = parse_path(cpath, r.sub("path"));
  r.get("amplitude", s.amplitude);
  r.get("phase_deg", s.phase_deg);
  r.get("frequency_hz", s.frequency);
  r.get("spacing_hz", s.spacing);
  r.get("lines", s.lines);
  if (njson const *b = r.find("band_hz")) {
    if (!b->is_array() || b->size() != 2) {
      throw ConfigError(fmt::format("{}: expected [lo, hi]", r.sub("band_hz")));
    }
    s.band_lo = Reader::as<double>((*b)[0], r.sub("band_hz"));
    s.band_hi = Reader::as<double>((*b)[1], r.sub("band_hz"));
  }
  r.get("components", s.components);
  r.get("linewidth_hz", s.linewidth);
  r.get("seed", s.seed);
  r.finish();
  if (s.name.empty()) {
    throw ConfigError(fmt::format("{}.name: interferers need a name", path));
  }
  return s;
}

void read_sensitivity(njson const &j, std::string const &path, ChannelSensitivity &s) {
  Reader r(j, path);
  r.get("scale", s.scale);
  r.get("falloff", s.falloff);
  r.finish();
}

} // namespace

std::string to_json(ScenarioConfig const &c) {
  ojson j;
  j["seed"] = c.seed;
  j["preset"] = c.preset;
  j["output_dir"] = c.output_dir;
  j["cavity"] = {{"lx", c.cavity.lx},
                 {"ly", c.cavity.ly},
                 {"lz", c.cavity.lz},
                 {"f0", c.cavity.f0},
                 {"longitudinal_ratio", c.cavity.longitudinal_ratio}};
  j["incidence"] = {{"axis", c.incidence.axis == RotationAxis::AboutE ? "E" : "H"},
                    {"theta_deg", c.incidence.theta_deg},
                    {"h0", c.incidence.h0}};
  ojson coils;
  coils["saddle"] = coil_json(c.saddle);
  coils["solenoid"] = coil_json(c.solenoid);
  coils["cancellation"] = coil_json(c.cancellation);
  coils["detection"] = coil_json(c.detection);
  j["coils"] = coils;
  ojson refs = ojson::array();
  for (ReferenceEntry const &r : c.references) {
    refs.push_back({{"name", r.name}, {"coil", coil_json(r.coil)}, {"conducted", cx_json(r.conducted)},
                    {"noise_sigma", r.noise_sigma}});
  }
  j["references"] = refs;
  j["channels"] = {{"receiver_gain", c.receiver_gain},
                   {"thermal_sigma", c.thermal_sigma},
                   {"saddle_conducted", cx_json(c.saddle_conducted)},
                   {"solenoid_conducted", cx_json(c.solenoid_conducted)},
                   {"saddle_sensitivity",
                    {{"scale", cx_json(c.saddle_sensitivity.scale)}, {"falloff", c.saddle_sensitivity.falloff}}},
                   {"solenoid_sensitivity",
                    {{"scale", cx_json(c.solenoid_sensitivity.scale)}, {"falloff", c.solenoid_sensitivity.falloff}}},
                   {"coloration",
                    {{"enabled", c.coloration_enabled},
                     {"bands", c.coloration.bands},
                     {"magnitude_spread", c.coloration.magnitude_spread},
                     {"phase_step_deg", c.coloration.phase_step_deg}}}};
  ojson ints = ojson::array();
  for (InterfererSpec const &s : c.interferers) ints.push_back(interferer_json(s));
  j["interferers"] = ints;
  j["sequence"] = {{"n_read", c.sequence.n_read},
                   {"n_phase", c.sequence.n_phase},
                   {"dwell", c.sequence.dwell},
                   {"tr", c.sequence.tr},
                   {"averages", c.sequence.averages}};
  j["phantom"] = {{"file", c.phantom_file}, {"pixel_spacing", c.pixel_spacing}};
  j["anc"] = {{"gain_factor", c.anc.gain_factor},
              {"phase_error_deg", c.anc.phase_error_deg},
              {"target_center", vec_json(c.anc.region.center)},
              {"target_radius", c.anc.region.radius},
              {"target_samples", c.anc.region.samples_per_axis},
              {"quadrature_order", c.anc.quadrature_order},
              {"segments_per_turn", c.anc.segments_per_turn}};
  j["post"] = {{"bands", c.post.bands},
               {"periphery",
                {{"policy", c.post.periphery.kind == PeripheryPolicy::Kind::FirstRows ? "first-rows"
                                                                                       : "outer-phase-encodes"},
                 {"n", c.post.periphery.n}}},
               {"ridge_relative", c.post.ridge_relative}};
  if (c.post.ridge_absolute) j["post"]["ridge_absolute"] = *c.post.ridge_absolute;
  j["pipeline"] = {{"spatial_anc", c.toggles.spatial_anc},
                   {"post_anc", c.toggles.post_anc},
                   {"fusion", c.toggles.fusion}};
  j["roi"] = {{"signal", roi_json(c.signal_roi)}, {"noise", roi_json(c.noise_roi)}};
  return j.dump(2);
}

std::string config_hash(ScenarioConfig const &config) {
  return fmt::format("{:016x}", fnv1a(to_json(config)));
}

ScenarioConfig parse_scenario(std::string const &json_text) {
  njson j;
  try {
    j = njson::parse(json_text);
  } catch (njson::parse_error const &e) {
    throw ConfigError(fmt::format("malformed JSON: {}", e.what()));
  }
  Reader top(j, "");
  njson const *seed = top.find("seed");
  if (!seed) {
    throw ConfigError("config: 'seed' is mandatory");
  }
  std::string preset = "default";
  top.get("preset", preset);
  ScenarioConfig c = preset_scenario(preset, Reader::as<std::uint64_t>(*seed, "seed"));
  top.get("output_dir", c.output_dir);

  if (njson const *v = top.find("cavity")) {
    Reader r(*v, "cavity");
    r.get("lx", c.cavity.lx);
    r.get("ly", c.cavity.ly);
    r.get("lz", c.cavity.lz);
    r.get("f0", c.cavity.f0);
    r.get("longitudinal_ratio", c.cavity.longitudinal_ratio);
    r.finish();
  }
  if (njson const *v = top.find("incidence")) {
    Reader r(*v, "incidence");
    std::string axis = c.incidence.axis == RotationAxis::AboutE ? "E" : "H";
    r.get("axis", axis);
    if (axis != "E" && axis != "H") {
      throw ConfigError(fmt::format("incidence.axis: expected E or H (got '{}')", axis));
    }
    c.incidence.axis = axis == "E" ? RotationAxis::AboutE : RotationAxis::AboutH;
    r.get("theta_deg", c.incidence.theta_deg);
    r.get("h0", c.incidence.h0);
    r.finish();
  }
  if (njson const *v = top.find("coils")) {
    Reader r(*v, "coils");
    if (njson const *x = r.find("saddle")) read_coil(*x, "coils.saddle", c.saddle);
    if (njson const *x = r.find("solenoid")) read_coil(*x, "coils.solenoid", c.solenoid);
    if (njson const *x = r.find("cancellation")) read_coil(*x, "coils.cancellation", c.cancellation);
    if (njson const *x = r.find("detection")) read_coil(*x, "coils.detection", c.detection);
    r.finish();
  }
  if (njson const *v = top.find("references")) {
    if (!v->is_array()) throw ConfigError("references: expected a list");
    std::vector<ReferenceEntry> refs;
    for (std::size_t i = 0; i < v->size(); ++i) {
      std::string const p = fmt::format("references[{}]", i);
      Reader r((*v)[i], p);
      ReferenceEntry e;
      r.get("name", e.name);
      e.coil = {e.name, DetectionLoopParams{}, Pose::axis_y()};
      if (njson const *x = r.find("coil")) read_coil(*x, p + ".coil", e.coil);
      e.coil.name = e.name;
      r.get("conducted", e.conducted);
      r.get("noise_sigma", e.noise_sigma);
      r.finish();
      if (e.name.empty()) throw ConfigError(fmt::format("{}.name: references need a name", p));
      refs.push_back(std::move(e));
    }
    c.references = std::move(refs);
  }
  if (njson const *v = top.find("channels")) {
    Reader r(*v, "channels");
    r.get("receiver_gain", c.receiver_gain);
    r.get("thermal_sigma", c.thermal_sigma);
    r.get("saddle_conducted", c.saddle_conducted);
    r.get("solenoid_conducted", c.solenoid_conducted);
    if (njson const *x = r.find("saddle_sensitivity")) {
      read_sensitivity(*x, "channels.saddle_sensitivity", c.saddle_sensitivity);
    }
    if (njson const *x = r.find("solenoid_sensitivity")) {
      read_sensitivity(*x, "channels.solenoid_sensitivity", c.solenoid_sensitivity);
    }
    if (njson const *x = r.find("coloration")) {
      Reader q(*x, "channels.coloration");
      q.get("enabled", c.coloration_enabled);
      q.get("bands", c.coloration.bands);
      q.get("magnitude_spread", c.coloration.magnitude_spread);
      q.get("phase_step_deg", c.coloration.phase_step_deg);
      q.finish();
    }
    r.finish();
  }
  if (njson const *v = top.find("interferers")) {
    if (!v->is_array()) throw ConfigError("interferers: expected a list");
    c.interferers.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      c.interferers.push_back(read_interferer((*v)[i], fmt::format("interferers[{}]", i)));
    }
  }
  bool matrix_changed = false;
  if (njson const *v = top.find("sequence")) {
    Reader r(*v, "sequence");
    int const nr = c.sequence.n_read;
    int const np = c.sequence.n_phase;
    r.get("n_read", c.sequence.n_read);
    r.get("n_phase", c.sequence.n_phase);
    r.get("dwell", c.sequence.dwell);
    r.get("tr", c.sequence.tr);
    r.get("averages", c.sequence.averages);
    r.finish();
    matrix_changed = nr != c.sequence.n_read || np != c.sequence.n_phase;
  }
  if (njson const *v = top.find("phantom")) {
    Reader r(*v, "phantom");
    r.get("file", c.phantom_file);
    r.get("pixel_spacing", c.pixel_spacing);
    r.finish();
  }
  if (njson const *v = top.find("anc")) {
    Reader r(*v, "anc");
    r.get("gain_factor", c.anc.gain_factor);
    r.get("phase_error_deg", c.anc.phase_error_deg);
    r.get("target_center", c.anc.region.center);
    r.get("target_radius", c.anc.region.radius);
    r.get("target_samples", c.anc.region.samples_per_axis);
    r.get("quadrature_order", c.anc.quadrature_order);
    r.get("segments_per_turn", c.anc.segments_per_turn);
    r.finish();
  }
  if (njson const *v = top.find("post")) {
    Reader r(*v, "post");
    r.get("bands", c.post.bands);
    if (njson const *x = r.find("periphery")) {
      Reader q(*x, "post.periphery");
      std::string policy = "first-rows";
      q.get("policy", policy);
      q.get("n", c.post.periphery.n);
      if (policy == "first-rows") {
        c.post.periphery.kind = PeripheryPolicy::Kind::FirstRows;
      } else if (policy == "outer-phase-encodes") {
        c.post.periphery.kind = PeripheryPolicy::Kind::OuterPhaseEncodes;
      } else {
        throw ConfigError(fmt::format("post.periphery.policy: unknown policy '{}'", policy));
      }
      q.finish();
    }
    r.get("ridge_relative", c.post.ridge_relative);
    if (njson const *x = r.find("ridge_absolute")) c.post.ridge_absolute = Reader::as<double>(*x, "post.ridge_absolute");
    r.finish();
  }
  if (njson const *v = top.find("pipeline")) {
    Reader r(*v, "pipeline");
    r.get("spatial_anc", c.toggles.spatial_anc);
    r.get("post_anc", c.toggles.post_anc);
    r.get("fusion", c.toggles.fusion);
    r.finish();
  }
  if (matrix_changed) {
    c.signal_roi = default_signal_roi(c.sequence.n_read, c.sequence.n_phase);
    c.noise_roi = default_noise_roi(c.sequence.n_read, c.sequence.n_phase);
  }
  if (njson const *v = top.find("roi")) {
    Reader r(*v, "roi");
    if (njson const *x = r.find("signal")) c.signal_roi = read_roi(*x, "roi.signal");
    if (njson const *x = r.find("noise")) c.noise_roi = read_roi(*x, "roi.noise");
    r.finish();
  }
  top.finish();
  try {
    c.validate();
  } catch (Error const &e) {
    throw ConfigError(e.what());
  }
  return c;
}

} // namespace ulfemi
