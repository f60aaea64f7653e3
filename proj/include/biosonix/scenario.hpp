#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "anatomy.hpp"
#include "biomech.hpp"
#include "error.hpp"
#include "fft.hpp"
#include "mapping.hpp"
#include "network.hpp"
#include "trace_io.hpp"

namespace biosonix {

inline constexpr int kSchemaVersion = 1;
inline constexpr double kMinAudioRate = 8000.0;

struct GeometryConfig {
  double spacing = 0.01;  // m
  std::variant<LayerSpec, SphereSpec> spec;

  friend bool operator==(const GeometryConfig&, const GeometryConfig&) = default;
};

struct TrajectoryConfig {
  Vec3 entry;
  Vec3 direction{0.0, 0.0, 1.0};  // normalized when the trajectory is built
  double speed = 0.01;            // m/s
  double duration = 25.0;         // s

  friend bool operator==(const TrajectoryConfig&, const TrajectoryConfig&) = default;
};

struct SynthConfig {
  TopologyKind topology = TopologyKind::String1D;
  int cross_width = 3;
  double damping_tau = 0.5;  // s
  std::optional<std::vector<std::size_t>> listeners;  // sound node indices
  bool master = true;
  std::optional<double> driver_radius;  // m around the target start; all nodes when unset

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct AnalysisConfig {
  std::size_t stft_window = 2048;
  std::size_t stft_hop = 441;
  std::size_t envelope_frame = 1024;
  double envelope_rate = 100.0;  // Hz
  std::size_t smoothing_frames = 5;
  double k_sigma = 4.0;
  std::optional<ClassId> target_class;
  double sonic_area_radius = 0.05;  // m
  std::vector<double> radii{0.0, 0.02, 0.05, 0.1, 0.3};
  std::vector<int> driver_counts{1, 2, 4, 8};
  double impulse = 1.0;           // N, nodal characterization
  double nodal_duration = 0.5;    // s

  std::size_t envelope_hop(double audio_rate) const {
    return static_cast<std::size_t>(std::llround(audio_rate / envelope_rate));
  }

  friend bool operator==(const AnalysisConfig&, const AnalysisConfig&) = default;
};

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::vector<TissueClass> classes;
  GeometryConfig geometry;
  TrajectoryConfig trajectory;
  InsertionParams insertion;
  MappingConfig mapping;
  SynthConfig synth;
  AnalysisConfig analysis;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

namespace config_detail {

using nlohmann::json;

inline const json& member(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(path + "." + key, "missing required field");
  return *it;
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
  return d;
}

inline double number_or(const json& obj, const char* key, const std::string& path, double fallback) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, path + "." + key);
}

inline long long integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  return v.get<long long>();
}

inline long long integer_or(const json& obj, const char* key, const std::string& path,
                            long long fallback) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : integer(*it, path + "." + key);
}

inline std::size_t count_or(const json& obj, const char* key, const std::string& path,
                            std::size_t fallback) {
  const long long v = integer_or(obj, key, path, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError(path + "." + key, "must be >= 0");
  return static_cast<std::size_t>(v);
}

inline Vec3 vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(path, "expected [x, y, z]");
  return {number(v[0], path + "[0]"), number(v[1], path + "[1]"), number(v[2], path + "[2]")};
}

inline std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

inline void positive(double v, const std::string& path) {
  if (!(v > 0.0)) throw ConfigError(path, "must be > 0");
}

inline const json* section(const json& root, const char* key) {
  auto it = root.find(key);
  if (it == root.end()) return nullptr;
  if (!it->is_object()) throw ConfigError(key, "expected an object");
  return &*it;
}

}  // namespace config_detail

// Cross-field checks. Errors name the offending field path.
inline void validate_config(const ScenarioConfig& c) {
  using config_detail::positive;
  if (c.schema_version != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version " + std::to_string(c.schema_version));
  }
  if (c.classes.empty()) throw ConfigError("classes", "at least one class is required");
  std::set<ClassId> ids;
  for (std::size_t i = 0; i < c.classes.size(); ++i) {
    const auto& k = c.classes[i];
    const std::string p = "classes[" + std::to_string(i) + "]";
    if (!ids.insert(k.id).second) throw ConfigError(p + ".id", "duplicate class id");
    positive(k.density, p + ".rho_kg_m3");
    positive(k.youngs_modulus, p + ".E_pa");
    if (k.poisson_ratio < 0.0 || k.poisson_ratio >= 0.5) {
      throw ConfigError(p + ".nu", "must lie in [0, 0.5)");
    }
    if (k.puncture_spike_gain < 0.0) throw ConfigError(p + ".spike_gain", "must be >= 0");
  }
  auto known = [&](ClassId id, const std::string& path) {
    if (!ids.contains(id)) throw ConfigError(path, "unknown class id " + std::to_string(id));
  };
  positive(c.geometry.spacing, "geometry.spacing_m");
  if (const auto* layered = std::get_if<LayerSpec>(&c.geometry.spec)) {
    positive(layered->side, "geometry.side_m");
    if (layered->layers.empty()) throw ConfigError("geometry.layers", "at least one layer is required");
    for (std::size_t i = 0; i < layered->layers.size(); ++i) {
      const std::string p = "geometry.layers[" + std::to_string(i) + "]";
      known(layered->layers[i].class_id, p + ".class_id");
      positive(layered->layers[i].thickness, p + ".thickness_m");
    }
  } else {
    const auto& s = std::get<SphereSpec>(c.geometry.spec);
    positive(s.side, "geometry.side_m");
    positive(s.radius, "geometry.radius_m");
    known(s.medium, "geometry.medium_class_id");
    known(s.inclusion, "geometry.inclusion_class_id");
  }
  if (!(norm(c.trajectory.direction) > 0.0)) {
    throw ConfigError("trajectory.direction", "must be a non-zero vector");
  }
  positive(c.trajectory.speed, "trajectory.speed_m_s");
  positive(c.trajectory.duration, "trajectory.duration_s");
  positive(c.insertion.nominal_tip_force, "insertion.F0_n");
  positive(c.insertion.kernel_sigma, "insertion.sigma_m");
  positive(c.insertion.influence_radius, "insertion.influence_radius_m");
  positive(c.insertion.frame_rate, "insertion.frame_rate_hz");
  if (c.insertion.frame_rate * c.trajectory.duration < 2.0 - 1e-9) {
    throw ConfigError("trajectory.duration_s", "yields fewer than two trace frames");
  }
  positive(c.mapping.spring_rest_length, "mapping.spring_length_m");
  if (!(c.mapping.reference_frequency > 20.0 && c.mapping.reference_frequency < 2000.0)) {
    throw ConfigError("mapping.f_ref_hz", "must lie in (20, 2000) Hz");
  }
  if (!(c.mapping.low_percentile >= 0.0 && c.mapping.low_percentile < c.mapping.high_percentile &&
        c.mapping.high_percentile <= 100.0)) {
    throw ConfigError("mapping.low_percentile", "percentiles must satisfy 0 <= low < high <= 100");
  }
  positive(c.mapping.out_max, "mapping.out_max");
  if (c.mapping.audio_rate < kMinAudioRate) {
    throw ConfigError("mapping.audio_rate_hz", "must be at least 8000 Hz");
  }
  if (c.mapping.audio_rate < 2.0 * c.insertion.frame_rate) {
    throw ConfigError("mapping.audio_rate_hz", "must be at least twice insertion.frame_rate_hz");
  }
  if (c.synth.topology == TopologyKind::Lattice3D &&
      (c.synth.cross_width < 3 || c.synth.cross_width % 2 == 0)) {
    throw ConfigError("synth.cross_width", "must be odd and >= 3");
  }
  if (c.synth.damping_tau < 0.0) throw ConfigError("synth.damping_tau_s", "must be >= 0");
  if (c.synth.driver_radius && *c.synth.driver_radius < 0.0) {
    throw ConfigError("synth.driver_radius_m", "must be >= 0");
  }
  if (c.synth.driver_radius && !c.analysis.target_class) {
    throw ConfigError("analysis.target_class_id", "required when synth.driver_radius_m is set");
  }
  const auto& a = c.analysis;
  if (!is_power_of_two(a.stft_window)) {
    throw ConfigError("analysis.stft_window", "must be a power of two");
  }
  if (a.stft_hop < 1 || a.stft_hop > a.stft_window) {
    throw ConfigError("analysis.stft_hop", "must lie in [1, stft_window]");
  }
  if (a.envelope_frame < 1) throw ConfigError("analysis.envelope_frame", "must be >= 1");
  positive(a.envelope_rate, "analysis.envelope_rate_hz");
  if (a.envelope_hop(c.mapping.audio_rate) < 1) {
    throw ConfigError("analysis.envelope_rate_hz", "exceeds the audio rate");
  }
  if (a.smoothing_frames < 1) throw ConfigError("analysis.smoothing_frames", "must be >= 1");
  positive(a.k_sigma, "analysis.k_sigma");
  if (a.target_class) known(*a.target_class, "analysis.target_class_id");
  if (a.sonic_area_radius < 0.0) throw ConfigError("analysis.sonic_area_radius_m", "must be >= 0");
  for (std::size_t i = 0; i < a.radii.size(); ++i) {
    if (a.radii[i] < 0.0) throw ConfigError("analysis.radii_m[" + std::to_string(i) + "]", "must be >= 0");
  }
  for (std::size_t i = 0; i < a.driver_counts.size(); ++i) {
    if (a.driver_counts[i] < 0) {
      throw ConfigError("analysis.driver_counts[" + std::to_string(i) + "]", "must be >= 0");
    }
  }
  positive(a.impulse, "analysis.impulse_n");
  positive(a.nodal_duration, "analysis.nodal_duration_s");
}

inline ScenarioConfig parse_config(const nlohmann::json& root) {
  using namespace config_detail;
  if (!root.is_object()) throw ConfigError("$", "scenario must be a JSON object");
  ScenarioConfig c;
  c.schema_version = static_cast<int>(integer_or(root, "schema_version", "", kSchemaVersion));

  const json& classes = member(root, "classes", "$");
  if (!classes.is_array()) throw ConfigError("classes", "expected an array");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string p = "classes[" + std::to_string(i) + "]";
    const json& k = classes[i];
    TissueClass tc;
    tc.id = static_cast<ClassId>(integer(member(k, "id", p), p + ".id"));
    tc.name = text(member(k, "name", p), p + ".name");
    tc.density = number(member(k, "rho_kg_m3", p), p + ".rho_kg_m3");
    tc.youngs_modulus = number(member(k, "E_pa", p), p + ".E_pa");
    tc.poisson_ratio = number_or(k, "nu", p, 0.4);
    tc.puncture_spike_gain = number_or(k, "spike_gain", p, 0.0);
    c.classes.push_back(tc);
  }

  const json& geo = member(root, "geometry", "$");
  const std::string kind = text(member(geo, "kind", "geometry"), "geometry.kind");
  c.geometry.spacing = number_or(geo, "spacing_m", "geometry", 0.01);
  if (kind == "layered") {
    LayerSpec spec;
    spec.side = number(member(geo, "side_m", "geometry"), "geometry.side_m");
    const json& layers = member(geo, "layers", "geometry");
    if (!layers.is_array()) throw ConfigError("geometry.layers", "expected an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "geometry.layers[" + std::to_string(i) + "]";
      spec.layers.push_back(
          {static_cast<ClassId>(integer(member(layers[i], "class_id", p), p + ".class_id")),
           number(member(layers[i], "thickness_m", p), p + ".thickness_m")});
    }
    c.geometry.spec = spec;
  } else if (kind == "sphere_inclusion") {
    SphereSpec spec;
    spec.side = number(member(geo, "side_m", "geometry"), "geometry.side_m");
    spec.medium = static_cast<ClassId>(
        integer(member(geo, "medium_class_id", "geometry"), "geometry.medium_class_id"));
    spec.inclusion = static_cast<ClassId>(
        integer(member(geo, "inclusion_class_id", "geometry"), "geometry.inclusion_class_id"));
    spec.center = vec3(member(geo, "center_m", "geometry"), "geometry.center_m");
    spec.radius = number(member(geo, "radius_m", "geometry"), "geometry.radius_m");
    c.geometry.spec = spec;
  } else {
    throw ConfigError("geometry.kind", "expected 'layered' or 'sphere_inclusion'");
  }

  const json& traj = member(root, "trajectory", "$");
  c.trajectory.entry = vec3(member(traj, "entry_m", "trajectory"), "trajectory.entry_m");
  if (traj.contains("direction")) c.trajectory.direction = vec3(traj["direction"], "trajectory.direction");
  c.trajectory.speed = number_or(traj, "speed_m_s", "trajectory", c.trajectory.speed);
  c.trajectory.duration = number(member(traj, "duration_s", "trajectory"), "trajectory.duration_s");

  if (const json* ins = section(root, "insertion")) {
    c.insertion.nominal_tip_force = number_or(*ins, "F0_n", "insertion", c.insertion.nominal_tip_force);
    c.insertion.kernel_sigma = number_or(*ins, "sigma_m", "insertion", c.insertion.kernel_sigma);
    c.insertion.influence_radius =
        number_or(*ins, "influence_radius_m", "insertion", c.insertion.influence_radius);
    c.insertion.frame_rate = number_or(*ins, "frame_rate_hz", "insertion", c.insertion.frame_rate);
  }
  if (const json* m = section(root, "mapping")) {
    auto& mc = c.mapping;
    mc.spring_rest_length = number_or(*m, "spring_length_m", "mapping", mc.spring_rest_length);
    mc.reference_frequency = number_or(*m, "f_ref_hz", "mapping", mc.reference_frequency);
    mc.low_percentile = number_or(*m, "low_percentile", "mapping", mc.low_percentile);
    mc.high_percentile = number_or(*m, "high_percentile", "mapping", mc.high_percentile);
    mc.out_max = number_or(*m, "out_max", "mapping", mc.out_max);
    mc.audio_rate = number_or(*m, "audio_rate_hz", "mapping", mc.audio_rate);
  }
  if (const json* s = section(root, "synth")) {
    auto& sc = c.synth;
    if (s->contains("topology")) {
      const std::string topo = text((*s)["topology"], "synth.topology");
      if (topo == "string") {
        sc.topology = TopologyKind::String1D;
      } else if (topo == "lattice") {
        sc.topology = TopologyKind::Lattice3D;
      } else {
        throw ConfigError("synth.topology", "expected 'string' or 'lattice'");
      }
    }
    sc.cross_width = static_cast<int>(integer_or(*s, "cross_width", "synth", sc.cross_width));
    sc.damping_tau = number_or(*s, "damping_tau_s", "synth", sc.damping_tau);
    if (s->contains("listeners")) {
      const json& ls = (*s)["listeners"];
      if (!ls.is_array()) throw ConfigError("synth.listeners", "expected an array of sound node indices");
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < ls.size(); ++i) {
        const long long v = integer(ls[i], "synth.listeners[" + std::to_string(i) + "]");
        if (v < 0) throw ConfigError("synth.listeners[" + std::to_string(i) + "]", "must be >= 0");
        idx.push_back(static_cast<std::size_t>(v));
      }
      sc.listeners = idx;
    }
    if (s->contains("master")) {
      if (!(*s)["master"].is_boolean()) throw ConfigError("synth.master", "expected a boolean");
      sc.master = (*s)["master"].get<bool>();
    }
    if (s->contains("driver_radius_m") && !(*s)["driver_radius_m"].is_null()) {
      sc.driver_radius = number((*s)["driver_radius_m"], "synth.driver_radius_m");
    }
  }
  if (const json* a = section(root, "analysis")) {
    auto& ac = c.analysis;
    ac.stft_window = count_or(*a, "stft_window", "analysis", ac.stft_window);
    ac.stft_hop = count_or(*a, "stft_hop", "analysis", ac.stft_hop);
    ac.envelope_frame = count_or(*a, "envelope_frame", "analysis", ac.envelope_frame);
    ac.envelope_rate = number_or(*a, "envelope_rate_hz", "analysis", ac.envelope_rate);
    ac.smoothing_frames = count_or(*a, "smoothing_frames", "analysis", ac.smoothing_frames);
    ac.k_sigma = number_or(*a, "k_sigma", "analysis", ac.k_sigma);
    if (a->contains("target_class_id") && !(*a)["target_class_id"].is_null()) {
      ac.target_class = static_cast<ClassId>(integer((*a)["target_class_id"], "analysis.target_class_id"));
    }
    ac.sonic_area_radius = number_or(*a, "sonic_area_radius_m", "analysis", ac.sonic_area_radius);
    if (a->contains("radii_m")) {
      const json& r = (*a)["radii_m"];
      if (!r.is_array()) throw ConfigError("analysis.radii_m", "expected an array");
      ac.radii.clear();
      for (std::size_t i = 0; i < r.size(); ++i) {
        ac.radii.push_back(number(r[i], "analysis.radii_m[" + std::to_string(i) + "]"));
      }
    }
    if (a->contains("driver_counts")) {
      const json& d = (*a)["driver_counts"];
      if (!d.is_array()) throw ConfigError("analysis.driver_counts", "expected an array");
      ac.driver_counts.clear();
      for (std::size_t i = 0; i < d.size(); ++i) {
        ac.driver_counts.push_back(
            static_cast<int>(integer(d[i], "analysis.driver_counts[" + std::to_string(i) + "]")));
      }
    }
    ac.impulse = number_or(*a, "impulse_n", "analysis", ac.impulse);
    ac.nodal_duration = number_or(*a, "nodal_duration_s", "analysis", ac.nodal_duration);
  }
  validate_config(c);
  return c;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
  using nlohmann::json;
  auto v3 = [](Vec3 v) { return json::array({v.x, v.y, v.z}); };
  json root;
  root["schema_version"] = c.schema_version;
  root["classes"] = json::array();
  for (const auto& k : c.classes) {
    root["classes"].push_back({{"id", k.id},
                               {"name", k.name},
                               {"rho_kg_m3", k.density},
                               {"E_pa", k.youngs_modulus},
                               {"nu", k.poisson_ratio},
                               {"spike_gain", k.puncture_spike_gain}});
  }
  json geo;
  geo["spacing_m"] = c.geometry.spacing;
  if (const auto* layered = std::get_if<LayerSpec>(&c.geometry.spec)) {
    geo["kind"] = "layered";
    geo["side_m"] = layered->side;
    geo["layers"] = json::array();
    for (const auto& l : layered->layers) {
      geo["layers"].push_back({{"class_id", l.class_id}, {"thickness_m", l.thickness}});
    }
  } else {
    const auto& s = std::get<SphereSpec>(c.geometry.spec);
    geo["kind"] = "sphere_inclusion";
    geo["side_m"] = s.side;
    geo["medium_class_id"] = s.medium;
    geo["inclusion_class_id"] = s.inclusion;
    geo["center_m"] = v3(s.center);
    geo["radius_m"] = s.radius;
  }
  root["geometry"] = geo;
  root["trajectory"] = {{"entry_m", v3(c.trajectory.entry)},
                        {"direction", v3(c.trajectory.direction)},
                        {"speed_m_s", c.trajectory.speed},
                        {"duration_s", c.trajectory.duration}};
  root["insertion"] = {{"F0_n", c.insertion.nominal_tip_force},
                       {"sigma_m", c.insertion.kernel_sigma},
                       {"influence_radius_m", c.insertion.influence_radius},
                       {"frame_rate_hz", c.insertion.frame_rate}};
  root["mapping"] = {{"spring_length_m", c.mapping.spring_rest_length},
                     {"f_ref_hz", c.mapping.reference_frequency},
                     {"low_percentile", c.mapping.low_percentile},
                     {"high_percentile", c.mapping.high_percentile},
                     {"out_max", c.mapping.out_max},
                     {"audio_rate_hz", c.mapping.audio_rate}};
  json synth = {{"topology", c.synth.topology == TopologyKind::String1D ? "string" : "lattice"},
                {"cross_width", c.synth.cross_width},
                {"damping_tau_s", c.synth.damping_tau},
                {"master", c.synth.master}};
  if (c.synth.listeners) synth["listeners"] = *c.synth.listeners;
  if (c.synth.driver_radius) synth["driver_radius_m"] = *c.synth.driver_radius;
  root["synth"] = synth;
  const auto& a = c.analysis;
  json analysis = {{"stft_window", a.stft_window},
                   {"stft_hop", a.stft_hop},
                   {"envelope_frame", a.envelope_frame},
                   {"envelope_rate_hz", a.envelope_rate},
                   {"smoothing_frames", a.smoothing_frames},
                   {"k_sigma", a.k_sigma},
                   {"sonic_area_radius_m", a.sonic_area_radius},
                   {"radii_m", a.radii},
                   {"driver_counts", a.driver_counts},
                   {"impulse_n", a.impulse},
                   {"nodal_duration_s", a.nodal_duration}};
  if (a.target_class) analysis["target_class_id"] = *a.target_class;
  root["analysis"] = analysis;
  return root;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  const std::string text = detail::read_all(path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("$", path.string() + ": invalid JSON (" + e.what() + ")");
  }
  return parse_config(root);
}

inline void save_config(const ScenarioConfig& config, const std::filesystem::path& path) {
  const std::string text = to_json(config).dump(2) + "\n";
  write_file_atomic(path, [&](std::ostream& out) { out << text; });
}

}  // namespace biosonix
