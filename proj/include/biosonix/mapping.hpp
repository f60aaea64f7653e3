#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "anatomy.hpp"
#include "biomech.hpp"
#include "error.hpp"
#include "signal.hpp"

namespace biosonix {

struct MappingConfig {
  double spring_rest_length = 0.01;  // L, m
  double reference_frequency = 220.0;  // Hz
  double low_percentile = 10.0;
  double high_percentile = 90.0;
  double out_max = 0.1;
  double audio_rate = 44100.0;

  void validate() const {
    require(spring_rest_length > 0.0, ErrorCode::InvalidArgument, "spring length must be > 0");
    require(reference_frequency > 20.0 && reference_frequency < 2000.0, ErrorCode::InvalidArgument,
            "reference frequency must lie in (20, 2000) Hz");
    require(low_percentile >= 0.0 && low_percentile < high_percentile && high_percentile <= 100.0,
            ErrorCode::InvalidArgument, "percentiles must satisfy 0 <= low < high <= 100");
    require(out_max > 0.0, ErrorCode::InvalidArgument, "normalization ceiling must be > 0");
    require(audio_rate > 0.0, ErrorCode::InvalidArgument, "audio rate must be > 0");
  }

  friend bool operator==(const MappingConfig&, const MappingConfig&) = default;
};

// ---------------------------------------------------------------------------------------
// T: projection of the anatomical domain onto the 1D tool axis.

struct Segment {
  ClassId class_id = 0;
  double length = 0.0;
};

struct SegmentedPath {
  Vec3 origin;
  Vec3 direction;
  double path_begin = 0.0;  // path parameter where the axis enters the domain
  double path_length = 0.0;
  std::vector<Segment> segments;
  std::vector<double> sound_node_positions;  // path parameter of each sound node
  std::vector<ClassId> sound_node_classes;
  std::vector<std::pair<NodeId, std::size_t>> node_map;  // anatomical node -> sound node
  std::vector<ClassId> node_map_classes;                 // tissue class of each mapped node

  std::size_t sound_node_count() const { return sound_node_positions.size(); }

  // Path parameter where the first segment of `cls` begins, if the path crosses it.
  std::optional<double> segment_start(ClassId cls) const {
    double s = path_begin;
    for (const auto& seg : segments) {
      if (seg.class_id == cls) return s;
      s += seg.length;
    }
    return std::nullopt;
  }
  std::optional<std::pair<double, double>> segment_extent(ClassId cls) const {
    double s = path_begin;
    for (const auto& seg : segments) {
      if (seg.class_id == cls) return std::pair{s, s + seg.length};
      s += seg.length;
    }
    return std::nullopt;
  }
  std::size_t nearest_sound_node(double s) const {
    const auto& pos = sound_node_positions;
    auto it = std::lower_bound(pos.begin(), pos.end(), s);
    if (it == pos.begin()) return 0;
    if (it == pos.end()) return pos.size() - 1;
    const auto hi = static_cast<std::size_t>(it - pos.begin());
    return (s - pos[hi - 1] <= pos[hi] - s) ? hi - 1 : hi;
  }
};

inline SegmentedPath project_to_path(const AnatomicalDomain& domain, const Trajectory& traj,
                                     const MappingConfig& config) {
  config.validate();
  const RayInterval span = domain.chord(traj);
  const double L = config.spring_rest_length;

  SegmentedPath path;
  path.origin = traj.entry();
  path.direction = traj.direction();
  path.path_begin = span.t_in;
  path.path_length = span.length();
  for (const auto& piece : domain.intervals_along(traj)) {
    path.segments.push_back({piece.class_id, piece.end - piece.begin});
  }

  const double len = span.length();
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(len / L - 1e-9)));
  for (std::size_t k = 0; k < steps; ++k) {
    const double a = static_cast<double>(k) * L;
    const double b = std::min(static_cast<double>(k + 1) * L, len);
    const double s = span.t_in + 0.5 * (a + b);
    path.sound_node_positions.push_back(s);
    path.sound_node_classes.push_back(domain.classify_point(traj.point_at(s)));
  }

  const double r_map = 1.5 * L;
  for (const auto& node : domain.nodes()) {
    if (distance_to_segment(node.position, path.origin, path.direction, span.t_in, span.t_out) >
        r_map + 1e-12) {
      continue;
    }
    // Step of length L containing the projection; grid planes on step borders go deeper.
    const double along = dot(node.position - path.origin, path.direction) - span.t_in;
    const double bin = std::floor(along / L + 1e-9);
    const auto k = static_cast<std::size_t>(std::clamp(bin, 0.0, static_cast<double>(steps - 1)));
    path.node_map.emplace_back(node.id, k);
    path.node_map_classes.push_back(node.class_id);
  }
  return path;
}

// ---------------------------------------------------------------------------------------
// M: material properties to lumped mass and spring stiffness.

struct ClassMaterial {
  ClassId class_id = 0;
  double mass = 0.0;           // kg
  double raw_stiffness = 0.0;  // N/m, before the global scale
  double stiffness = 0.0;      // N/m
  double frequency() const { return std::sqrt(stiffness / mass) / (2.0 * std::numbers::pi); }
};

// What the integrator needs to know to bound the global stiffness scale.
struct StabilityContext {
  int max_degree = 2;         // springs per mass: 2 for a string, 6 for a lattice
  double dt = 1.0 / 44100.0;  // s
  double damping_tau = 0.5;   // 60 dB decay time, s; <= 0 disables damping

  static constexpr double kEpsilon = 0.05;
};

// Viscous coefficient giving a 60 dB amplitude decay over `tau` seconds.
inline double damping_for(double mass, double tau) {
  if (tau <= 0.0) return 0.0;
  return 2.0 * mass * std::log(1000.0) / tau;
}

struct MaterialMap {
  std::vector<ClassMaterial> materials;
  double scale = 1.0;
  bool scale_reduced = false;
  std::vector<std::string> warnings;

  const ClassMaterial& of(ClassId id) const {
    for (const auto& m : materials) {
      if (m.class_id == id) return m;
    }
    fail(ErrorCode::UnknownClass, "no material for class " + std::to_string(id));
  }
};

// Lumps an L-cube of each class into m = rho L^3 and K = E L, then scales every stiffness
// by one factor so the softest class rings at the reference frequency. The factor is
// lowered when the stiffest class would break the explicit integrator's stability bound.
inline MaterialMap map_properties(std::span<const TissueClass> classes, const MappingConfig& config,
                                  const StabilityContext& stability = {}) {
  config.validate();
  validate_classes(classes);
  require(stability.max_degree >= 1 && stability.dt > 0.0, ErrorCode::InvalidArgument,
          "invalid stability context");
  const double L = config.spring_rest_length;
  const double two_pi = 2.0 * std::numbers::pi;

  MaterialMap out;
  double k_raw_max = 0.0;
  const ClassMaterial* softest = nullptr;
  for (const auto& c : classes) {
    out.materials.push_back({c.id, c.density * L * L * L, c.youngs_modulus * L, 0.0});
  }
  for (const auto& m : out.materials) {
    k_raw_max = std::max(k_raw_max, m.raw_stiffness);
    if (!softest || m.raw_stiffness / m.mass < softest->raw_stiffness / softest->mass) softest = &m;
  }

  const double omega_ref = two_pi * config.reference_frequency;
  const double target = omega_ref * omega_ref * softest->mass / softest->raw_stiffness;

  // (dt^2 * deg * s * K_max + dt * z) / (2 m) <= 1 - eps, for every class mass.
  double stable = std::numeric_limits<double>::infinity();
  const double dt = stability.dt;
  for (const auto& m : out.materials) {
    const double z = damping_for(m.mass, stability.damping_tau);
    const double headroom = 2.0 * m.mass * (1.0 - StabilityContext::kEpsilon) - dt * z;
    require(headroom > 0.0, ErrorCode::StabilityInfeasible,
            "damping alone exceeds the stability bound for class " + std::to_string(m.class_id));
    stable = std::min(stable, headroom / (dt * dt * stability.max_degree * k_raw_max));
  }

  out.scale = target;
  if (target > stable) {
    out.scale = stable;
    out.scale_reduced = true;
    const double f_soft =
        std::sqrt(stable * softest->raw_stiffness / softest->mass) / two_pi;
    require(f_soft >= 20.0, ErrorCode::StabilityInfeasible,
            "stiffness contrast cannot be made stable while keeping the softest class audible (" +
                std::to_string(f_soft) + " Hz)");
    out.warnings.push_back("stiffness scale reduced from " + std::to_string(target) + " to " +
                           std::to_string(stable) + " for integrator stability; softest class at " +
                           std::to_string(f_soft) + " Hz");
  }
  for (auto& m : out.materials) m.stiffness = out.scale * m.raw_stiffness;
  return out;
}

// ---------------------------------------------------------------------------------------
// Displacement normalization.

// Percentile with linear interpolation between order statistics (q in [0, 100]).
inline double percentile_sorted(std::span<const double> sorted, double q) {
  require(!sorted.empty(), ErrorCode::InvalidArgument, "percentile of an empty series");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct NormalizationBounds {
  double low = 0.0;
  double high = 0.0;
};

inline NormalizationBounds pooled_bounds(const std::vector<std::vector<double>>& series,
                                         const MappingConfig& config) {
  std::vector<double> pooled;
  for (const auto& s : series) pooled.insert(pooled.end(), s.begin(), s.end());
  require(!pooled.empty(), ErrorCode::InvalidArgument, "cannot normalize an empty series");
  for (double v : pooled) {
    require(std::isfinite(v), ErrorCode::NonFiniteValue, "series holds a non-finite value");
  }
  std::sort(pooled.begin(), pooled.end());
  return {percentile_sorted(pooled, config.low_percentile),
          percentile_sorted(pooled, config.high_percentile)};
}

inline double normalize_value(double v, NormalizationBounds b, double out_max) {
  if (!(b.high > b.low)) return 0.0;
  const double clamped = std::clamp(v, b.low, b.high);
  return (clamped - b.low) / (b.high - b.low) * out_max;
}

// Clamps every value to the pooled [p_low, p_high] band and maps it affinely onto [0, out_max].
inline std::vector<std::vector<double>> normalize_displacements(
    const std::vector<std::vector<double>>& series, const MappingConfig& config) {
  const NormalizationBounds b = pooled_bounds(series, config);
  std::vector<std::vector<double>> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    auto& o = out.emplace_back(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) o[i] = normalize_value(s[i], b, config.out_max);
  }
  return out;
}

// Normalized |u| per sound node: mapped anatomical nodes present in the trace are pooled for
// the percentile bounds, normalized, and averaged onto their sound node.
struct SoundNodeEnvelopes {
  double frame_rate = 0.0;
  std::size_t frame_count = 0;
  std::vector<std::optional<std::vector<double>>> per_node;  // indexed by sound node
  std::vector<double> pooled_mean;  // mean normalized |u| over all mapped nodes, per frame
};

// With `only_class`, bounds are still pooled over every mapped node but only nodes of that
// class feed the per-node series (pooled_mean keeps all of them).
inline SoundNodeEnvelopes sound_node_envelopes(const DisplacementTrace& trace,
                                               const SegmentedPath& path,
                                               const MappingConfig& config,
                                               std::optional<ClassId> only_class = std::nullopt) {
  trace.validate();
  std::unordered_map<NodeId, std::size_t> column;
  for (std::size_t n = 0; n < trace.node_count(); ++n) column[trace.node_ids[n]] = n;

  std::vector<std::vector<double>> raw;
  std::vector<std::size_t> target;
  std::vector<ClassId> cls;
  for (std::size_t m = 0; m < path.node_map.size(); ++m) {
    auto it = column.find(path.node_map[m].first);
    if (it == column.end()) continue;
    raw.push_back(trace.norm_series(it->second));
    target.push_back(path.node_map[m].second);
    cls.push_back(path.node_map_classes[m]);
  }
  require(!raw.empty(), ErrorCode::UnmappedNode,
          "trace contains none of the anatomical nodes mapped onto the sound path");
  const auto normalized = normalize_displacements(raw, config);

  SoundNodeEnvelopes out;
  out.frame_rate = trace.frame_rate;
  out.frame_count = trace.frame_count();
  out.per_node.resize(path.sound_node_count());
  std::vector<std::size_t> counts(path.sound_node_count(), 0);
  out.pooled_mean.assign(out.frame_count, 0.0);
  for (std::size_t k = 0; k < normalized.size(); ++k) {
    for (std::size_t f = 0; f < out.frame_count; ++f) out.pooled_mean[f] += normalized[k][f];
    if (only_class && cls[k] != *only_class) continue;
    auto& slot = out.per_node[target[k]];
    if (!slot) slot.emplace(out.frame_count, 0.0);
    for (std::size_t f = 0; f < out.frame_count; ++f) {
      (*slot)[f] += normalized[k][f];
    }
    ++counts[target[k]];
  }
  for (std::size_t s = 0; s < out.per_node.size(); ++s) {
    if (!out.per_node[s]) continue;
    for (double& v : *out.per_node[s]) v /= static_cast<double>(counts[s]);
  }
  for (double& v : out.pooled_mean) v /= static_cast<double>(normalized.size());
  return out;
}

// ---------------------------------------------------------------------------------------
// I: excitation forces F = K_i * normalized |u|, upsampled to the audio rate.

struct Excitation {
  std::size_t sound_node = 0;
  ForceSignal force;
};

inline std::vector<Excitation> compute_excitation(const SoundNodeEnvelopes& envelopes,
                                                  const SegmentedPath& path,
                                                  const MaterialMap& materials,
                                                  const MappingConfig& config,
                                                  std::span<const std::size_t> driver_nodes,
                                                  std::size_t sample_count) {
  require(config.audio_rate >= 2.0 * envelopes.frame_rate, ErrorCode::InvalidArgument,
          "audio rate must be at least twice the trace frame rate");
  std::vector<Excitation> out;
  out.reserve(driver_nodes.size());
  for (std::size_t node : driver_nodes) {
    require(node < path.sound_node_count(), ErrorCode::UnmappedNode,
            "driver sound node " + std::to_string(node) + " is outside the path");
    const auto& env = envelopes.per_node[node];
    require(env.has_value(), ErrorCode::UnmappedNode,
            "sound node " + std::to_string(node) + " has no mapped displacement series");
    const double k = materials.of(path.sound_node_classes[node]).stiffness;
    out.push_back({node, ForceSignal::interpolated(*env, envelopes.frame_rate, config.audio_rate,
                                                   k, sample_count)});
  }
  return out;
}

}  // namespace biosonix
