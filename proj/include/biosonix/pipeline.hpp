#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "analysis.hpp"
#include "anatomy.hpp"
#include "biomech.hpp"
#include "error.hpp"
#include "mapping.hpp"
#include "network.hpp"
#include "render.hpp"
#include "scenario.hpp"

namespace biosonix {

// Everything derived from a validated config that does not depend on a trace.
struct Scenario {
  ScenarioConfig config;
  AnatomicalDomain domain;
  Trajectory trajectory;
  SegmentedPath path;
  MaterialMap materials;
};

inline AnatomicalDomain build_domain(const ScenarioConfig& c) {
  if (const auto* layered = std::get_if<LayerSpec>(&c.geometry.spec)) {
    return build_layered_domain(layered->layers, layered->side, c.geometry.spacing, c.classes);
  }
  const auto& s = std::get<SphereSpec>(c.geometry.spec);
  return build_inclusion_domain(s.medium, s.inclusion, s.center, s.radius, s.side,
                                c.geometry.spacing, c.classes);
}

inline StabilityContext stability_context(const ScenarioConfig& c) {
  StabilityContext ctx;
  ctx.max_degree = c.synth.topology == TopologyKind::String1D ? 2 : 6;
  ctx.dt = 1.0 / c.mapping.audio_rate;
  ctx.damping_tau = c.synth.damping_tau;
  return ctx;
}

inline Scenario build_scenario(const ScenarioConfig& config) {
  validate_config(config);
  AnatomicalDomain domain = build_domain(config);
  Trajectory traj(config.trajectory.entry, config.trajectory.direction, config.trajectory.speed,
                  config.trajectory.duration);
  SegmentedPath path = project_to_path(domain, traj, config.mapping);
  MaterialMap materials = map_properties(config.classes, config.mapping, stability_context(config));
  return {config, std::move(domain), traj, std::move(path), std::move(materials)};
}

inline MassSpringNetwork build_network(const Scenario& s) {
  if (s.config.synth.topology == TopologyKind::String1D) {
    return build_string_topology(s.path, s.materials, s.config.synth.damping_tau);
  }
  return build_lattice_topology(s.path, s.materials, s.config.synth.cross_width,
                                s.config.synth.damping_tau);
}

inline std::size_t sample_count(const Scenario& s) {
  return static_cast<std::size_t>(std::llround(s.config.trajectory.duration * s.config.mapping.audio_rate));
}

inline bool is_end_node(const Scenario& s, std::size_t k) {
  return k == 0 || k + 1 == s.path.sound_node_count();
}

// Sound nodes that can carry a driver: everything except the fixed ends.
inline std::vector<std::size_t> free_sound_nodes(const Scenario& s) {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k + 1 < s.path.sound_node_count(); ++k) out.push_back(k);
  return out;
}

// First sound node of the target class along the path.
inline std::size_t target_start_node(const Scenario& s, ClassId target) {
  for (std::size_t k = 0; k < s.path.sound_node_count(); ++k) {
    if (s.path.sound_node_classes[k] == target) return k;
  }
  fail(ErrorCode::UnknownClass,
       "trajectory does not reach target class " + std::to_string(target));
}

// Free sound nodes within `radius` (path distance) of the target start node.
inline std::vector<std::size_t> sonic_area_nodes(const Scenario& s, ClassId target, double radius) {
  require(radius >= 0.0, ErrorCode::InvalidArgument, "sonic-area radius must be >= 0");
  const std::size_t anchor = target_start_node(s, target);
  const double s0 = s.path.sound_node_positions[anchor];
  std::vector<std::size_t> out;
  for (std::size_t k : free_sound_nodes(s)) {
    if (std::abs(s.path.sound_node_positions[k] - s0) <= radius + 1e-9) out.push_back(k);
  }
  return out;
}

inline std::vector<std::size_t> default_drivers(const Scenario& s) {
  const auto& synth = s.config.synth;
  if (synth.driver_radius) {
    return sonic_area_nodes(s, *s.config.analysis.target_class, *synth.driver_radius);
  }
  return free_sound_nodes(s);
}

// Configured listeners, else the axial midpoint plus the centre of the target segment.
inline std::vector<std::size_t> default_listener_nodes(const Scenario& s) {
  const std::size_t n = s.path.sound_node_count();
  auto free_near = [&](std::size_t k) { return std::clamp<std::size_t>(k, 1, n - 2); };
  std::vector<std::size_t> nodes;
  if (s.config.synth.listeners) {
    for (std::size_t k : *s.config.synth.listeners) {
      require(k < n, ErrorCode::UnknownNode,
              "listener sound node " + std::to_string(k) + " is outside the path (" +
                  std::to_string(n) + " nodes)");
      nodes.push_back(k);
    }
    return nodes;
  }
  std::set<std::size_t> picked{free_near(n / 2)};
  if (const auto target = s.config.analysis.target_class) {
    if (const auto extent = s.path.segment_extent(*target)) {
      picked.insert(free_near(s.path.nearest_sound_node(0.5 * (extent->first + extent->second))));
    }
  }
  return {picked.begin(), picked.end()};
}

inline std::vector<Listener> make_listeners(const MassSpringNetwork& net,
                                            const std::vector<std::size_t>& sound_nodes) {
  std::vector<std::size_t> masses;
  for (std::size_t k : sound_nodes) masses.push_back(mass_for_sound_node(net, k));
  return equal_gain_listeners(masses);
}

struct SonifyResult {
  RenderResult render;
  SoundNodeEnvelopes envelopes;
  std::vector<std::size_t> drivers;    // sound node indices
  std::vector<std::size_t> listeners;  // sound node indices
};

// Maps a trace onto the network and renders it with the given drivers and listeners.
inline SonifyResult sonify(const Scenario& s, const DisplacementTrace& trace,
                           const std::vector<std::size_t>& drivers,
                           const std::vector<std::size_t>& listeners, bool master,
                           std::optional<ClassId> only_class = std::nullopt) {
  SonifyResult out;
  out.envelopes = sound_node_envelopes(trace, s.path, s.config.mapping, only_class);
  out.drivers = drivers;
  out.listeners = listeners;
  const std::size_t samples = sample_count(s);
  auto net = build_network(s);
  std::vector<Driver> ds;
  for (const auto& e : compute_excitation(out.envelopes, s.path, s.materials, s.config.mapping,
                                          drivers, samples)) {
    require(!is_end_node(s, e.sound_node), ErrorCode::InvalidArgument,
            "sound node " + std::to_string(e.sound_node) + " is a fixed end and cannot be driven");
    ds.push_back({mass_for_sound_node(net, e.sound_node), e.force});
  }
  RenderOptions opts;
  opts.master = master;
  out.render = render(net, ds, make_listeners(net, listeners), samples,
                      s.config.mapping.audio_rate, opts);
  return out;
}

inline SonifyResult sonify(const Scenario& s, const DisplacementTrace& trace) {
  return sonify(s, trace, default_drivers(s), default_listener_nodes(s), s.config.synth.master);
}

// Unmastered render driven only by the displacement of anatomical nodes of class `cls`:
// every free sound node that has such nodes mapped onto it becomes a driver. Silent when the
// class never comes near the path.
inline SonifyResult class_contribution(const Scenario& s, const DisplacementTrace& trace, ClassId cls) {
  const auto env = sound_node_envelopes(trace, s.path, s.config.mapping, cls);
  std::vector<std::size_t> drivers;
  for (std::size_t k : free_sound_nodes(s)) {
    if (env.per_node[k]) drivers.push_back(k);
  }
  return sonify(s, trace, drivers, default_listener_nodes(s), false, cls);
}

inline DisplacementTrace simulate(const Scenario& s) {
  return simulate_insertion(s.domain, s.trajectory, s.config.insertion);
}

// Mean |u| over the trace nodes mapped onto the path, per frame.
inline EnvelopeSeries pooled_displacement_envelope(const DisplacementTrace& trace,
                                                   const SegmentedPath& path) {
  std::unordered_map<NodeId, std::size_t> column;
  for (std::size_t n = 0; n < trace.node_count(); ++n) column[trace.node_ids[n]] = n;
  std::vector<std::size_t> used;
  for (const auto& [node, sound] : path.node_map) {
    if (auto it = column.find(node); it != column.end()) used.push_back(it->second);
  }
  require(!used.empty(), ErrorCode::UnmappedNode,
          "trace contains none of the anatomical nodes mapped onto the sound path");
  EnvelopeSeries out{trace.times, std::vector<double>(trace.frame_count(), 0.0)};
  for (std::size_t f = 0; f < trace.frame_count(); ++f) {
    double acc = 0.0;
    for (std::size_t c : used) acc += trace.norm_at(f, c);
    out.values[f] = acc / static_cast<double>(used.size());
  }
  return out;
}

inline EnvelopeSeries audio_envelope(const Scenario& s, const AudioBuffer& audio) {
  const auto& a = s.config.analysis;
  return rms_envelope(audio, a.envelope_frame, a.envelope_hop(audio.sample_rate));
}

struct AnalysisReport {
  std::optional<double> correlation;  // undefined when either series is constant
  std::vector<double> transitions;
  std::vector<BoundaryCrossing> crossings;
  EnvelopeSeries rms;
  EnvelopeSeries centroid;
  Spectrogram spectrogram;
};

inline std::optional<double> try_correlate(const EnvelopeSeries& a, const EnvelopeSeries& b) {
  try {
    return correlate(a, b);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) return std::nullopt;
    throw;
  }
}

inline AnalysisReport analyze(const Scenario& s, const AudioBuffer& audio,
                              const DisplacementTrace& trace) {
  require(std::abs(audio.sample_rate - s.config.mapping.audio_rate) < 0.5, ErrorCode::InvalidArgument,
          "audio sample rate does not match the scenario");
  const auto& a = s.config.analysis;
  AnalysisReport r;
  r.spectrogram = stft(audio, a.stft_window, a.stft_hop);
  r.centroid = spectral_centroid(r.spectrogram);
  r.rms = audio_envelope(s, audio);
  r.transitions = detect_transitions(r.rms, a.smoothing_frames, a.k_sigma);
  r.crossings = boundary_crossing_times(s.domain, s.trajectory);
  r.correlation = try_correlate(pooled_displacement_envelope(trace, s.path), r.rms);
  return r;
}

inline void write_analysis_csv(const AnalysisReport& r, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    std::string line;
    auto row = [&](const char* metric, long long index, std::optional<double> value) {
      line.clear();
      line += metric;
      line += ',';
      detail::append_number(line, index);
      line += ',';
      if (value) {
        detail::append_number(line, *value);
      } else {
        line += "n/a";
      }
      out << line << '\n';
    };
    out << "metric,index,value\n";
    row("correlation", 0, r.correlation);
    for (std::size_t i = 0; i < r.transitions.size(); ++i) {
      row("transition_s", static_cast<long long>(i), r.transitions[i]);
    }
    for (std::size_t i = 0; i < r.crossings.size(); ++i) {
      row("crossing_s", static_cast<long long>(i), r.crossings[i].time);
    }
    double mean_centroid = 0.0;
    for (double c : r.centroid.values) mean_centroid += c;
    if (!r.centroid.values.empty()) mean_centroid /= static_cast<double>(r.centroid.size());
    row("mean_centroid_hz", 0, mean_centroid);
  });
}

}  // namespace biosonix
