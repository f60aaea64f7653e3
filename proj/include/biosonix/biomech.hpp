#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "anatomy.hpp"
#include "error.hpp"
#include "geometry.hpp"

namespace biosonix {

enum class TraceSource { Ingested, Simulated };

// Time-major per-node displacement vectors: frames[f * node_count + n].
struct DisplacementTrace {
  double frame_rate = 0.0;
  std::vector<double> times;
  std::vector<NodeId> node_ids;
  std::vector<Vec3> frames;
  TraceSource source = TraceSource::Simulated;

  std::size_t frame_count() const { return times.size(); }
  std::size_t node_count() const { return node_ids.size(); }

  const Vec3& at(std::size_t frame, std::size_t node) const {
    return frames[frame * node_ids.size() + node];
  }
  Vec3& at(std::size_t frame, std::size_t node) { return frames[frame * node_ids.size() + node]; }

  double norm_at(std::size_t frame, std::size_t node) const { return norm(at(frame, node)); }

  // |u| series of one node across all frames.
  std::vector<double> norm_series(std::size_t node) const {
    std::vector<double> out(frame_count());
    for (std::size_t f = 0; f < out.size(); ++f) out[f] = norm_at(f, node);
    return out;
  }

  void validate() const {
    require(frame_rate > 0.0 && std::isfinite(frame_rate), ErrorCode::InvalidArgument,
            "trace frame rate must be > 0");
    require(times.size() >= 2, ErrorCode::InvalidArgument, "trace needs at least two frames");
    require(!node_ids.empty(), ErrorCode::InvalidArgument, "trace has no nodes");
    require(frames.size() == times.size() * node_ids.size(), ErrorCode::InvalidArgument,
            "trace frame storage does not match frame and node counts");
    for (const auto& v : frames) {
      require(is_finite(v), ErrorCode::NonFiniteValue, "trace holds a non-finite displacement");
    }
  }
};

struct InsertionParams {
  double nominal_tip_force = 1.0;    // F0, N
  double kernel_sigma = 0.02;        // m
  double influence_radius = 0.03;    // R, m
  double frame_rate = 100.0;         // Hz

  static constexpr double kSpikeDecay = 0.2;  // s

  void validate() const {
    require(nominal_tip_force > 0.0, ErrorCode::InvalidArgument, "F0 must be > 0");
    require(kernel_sigma > 0.0, ErrorCode::InvalidArgument, "kernel sigma must be > 0");
    require(influence_radius > 0.0, ErrorCode::InvalidArgument, "influence radius must be > 0");
    require(frame_rate > 0.0, ErrorCode::InvalidArgument, "frame rate must be > 0");
  }

  friend bool operator==(const InsertionParams&, const InsertionParams&) = default;
};

struct BoundaryCrossing {
  double time = 0.0;  // s
  ClassId from = 0;
  ClassId to = 0;
  double path_position = 0.0;  // m from the entry point
};

// Interface crossings along the path at constant speed, ascending in time.
inline std::vector<BoundaryCrossing> boundary_crossing_times(const AnatomicalDomain& domain,
                                                             const Trajectory& traj) {
  const auto intervals = domain.intervals_along(traj);
  std::vector<BoundaryCrossing> out;
  for (std::size_t k = 1; k < intervals.size(); ++k) {
    const double s = intervals[k].begin;
    out.push_back({s / traj.speed(), intervals[k - 1].class_id, intervals[k].class_id, s});
  }
  return out;
}

// Number of frames produced for a trajectory: round(frame_rate * duration).
inline std::size_t insertion_frame_count(const Trajectory& traj, const InsertionParams& params) {
  return static_cast<std::size_t>(std::llround(params.frame_rate * traj.duration()));
}

// Closed-form needle-insertion proxy. Each node within the influence radius of the path
// receives a compression kernel that follows the tip, scaled by 1/E of its class, plus a
// decaying puncture transient when the tip crosses the interface nearest to it.
inline DisplacementTrace simulate_insertion(const AnatomicalDomain& domain,
                                            const Trajectory& traj,
                                            const InsertionParams& params) {
  params.validate();
  const RayInterval span = domain.chord(traj);
  const double path_length = span.t_out;
  const auto crossings = boundary_crossing_times(domain, traj);
  const double L = domain.spacing();
  const double F0 = params.nominal_tip_force;
  const double two_sigma2 = 2.0 * params.kernel_sigma * params.kernel_sigma;
  const double two_r2 = 2.0 * params.influence_radius * params.influence_radius;
  const Vec3 o = traj.entry();
  const Vec3 d = traj.direction();

  struct Affected {
    NodeId id;
    Vec3 position;
    Vec3 direction;
    double base;         // F0/(E L) * lateral kernel
    double spike_peak;   // 0 when no contrasted interface
    double spike_time;
  };
  std::vector<Affected> affected;
  for (const auto& node : domain.nodes()) {
    if (distance_to_segment(node.position, o, d, span.t_in, span.t_out) >
        params.influence_radius + 1e-12) {
      continue;
    }
    const TissueClass& tissue = domain.tissue(node.class_id);
    const double compliance = F0 / (tissue.youngs_modulus * L);
    const Vec3 rel = node.position - o;
    const Vec3 perp = rel - dot(rel, d) * d;
    const double r_perp = norm(perp);
    const Vec3 dir = r_perp > 1e-12 ? (1.0 / r_perp) * perp : d;

    double spike_peak = 0.0;
    double spike_time = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : crossings) {
      const double dist = distance(node.position, traj.point_at(c.path_position));
      if (dist < best) {
        best = dist;
        const double ea = domain.tissue(c.from).youngs_modulus;
        const double eb = domain.tissue(c.to).youngs_modulus;
        spike_peak = tissue.puncture_spike_gain * std::abs(ea - eb) / (ea + eb) * compliance;
        spike_time = c.time;
      }
    }
    affected.push_back({node.id, node.position, dir,
                        compliance * std::exp(-r_perp * r_perp / two_r2), spike_peak,
                        spike_time});
  }
  require(!affected.empty(), ErrorCode::TrajectoryMissesDomain,
          "no nodes lie within the influence radius of the path");

  DisplacementTrace trace;
  trace.frame_rate = params.frame_rate;
  trace.source = TraceSource::Simulated;
  const std::size_t frame_count = insertion_frame_count(traj, params);
  require(frame_count >= 2, ErrorCode::InvalidArgument,
          "duration yields fewer than two trace frames");
  trace.times.resize(frame_count);
  for (std::size_t f = 0; f < frame_count; ++f) {
    trace.times[f] = static_cast<double>(f) / params.frame_rate;
  }
  trace.node_ids.reserve(affected.size());
  for (const auto& a : affected) trace.node_ids.push_back(a.id);
  trace.frames.resize(frame_count * affected.size());

  for (std::size_t f = 0; f < frame_count; ++f) {
    const double t = trace.times[f];
    const Vec3 tip = traj.point_at(std::min(traj.speed() * t, path_length));
    for (std::size_t n = 0; n < affected.size(); ++n) {
      const auto& a = affected[n];
      const Vec3 gap = a.position - tip;
      double magnitude = a.base * std::exp(-dot(gap, gap) / two_sigma2);
      if (t >= a.spike_time) {
        magnitude += a.spike_peak * std::exp(-(t - a.spike_time) / InsertionParams::kSpikeDecay);
      }
      trace.at(f, n) = magnitude * a.direction;
    }
  }
  return trace;
}

}  // namespace biosonix
