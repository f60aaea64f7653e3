#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "mapping.hpp"

namespace biosonix {

enum class TopologyKind { String1D, Lattice3D };

struct Mass {
  double mass = 0.0;     // kg
  ClassId class_id = 0;
  bool fixed = false;
  double damping = 0.0;  // z, N s/m
};

struct Spring {
  std::size_t i = 0;
  std::size_t j = 0;
  double stiffness = 0.0;  // N/m
};

struct StabilityReport {
  double max_utilization = 0.0;
  std::vector<std::size_t> offending;
  bool pass = true;
};

// Damped network of scalar-displacement masses joined by linear springs. Fixed masses stay
// at zero. Integration is the explicit two-step scheme
//   y+ = 2y - y- + dt^2/m [F - sum K (y - y_k) - z/dt (y - y-)].
class MassSpringNetwork {
 public:
  explicit MassSpringNetwork(TopologyKind kind = TopologyKind::String1D) : kind_(kind) {}

  std::size_t add_mass(const Mass& m) {
    require(m.mass > 0.0 && std::isfinite(m.mass), ErrorCode::InvalidArgument, "mass must be > 0");
    require(m.damping >= 0.0, ErrorCode::InvalidArgument, "damping must be >= 0");
    masses_.push_back(m);
    y_.push_back(0.0);
    y_prev_.push_back(0.0);
    force_.push_back(0.0);
    return masses_.size() - 1;
  }

  void add_spring(std::size_t i, std::size_t j, double stiffness) {
    require(i < masses_.size() && j < masses_.size(), ErrorCode::InvalidArgument,
            "spring endpoint out of range");
    require(i != j, ErrorCode::InvalidArgument, "spring connects a mass to itself");
    require(stiffness > 0.0 && std::isfinite(stiffness), ErrorCode::InvalidArgument,
            "spring stiffness must be > 0");
    const auto key = std::minmax(i, j);
    require(pairs_.insert(key).second, ErrorCode::InvalidArgument,
            "duplicate spring between " + std::to_string(i) + " and " + std::to_string(j));
    springs_.push_back({i, j, stiffness});
  }

  TopologyKind kind() const { return kind_; }
  const std::vector<Mass>& masses() const { return masses_; }
  const std::vector<Spring>& springs() const { return springs_; }
  std::size_t size() const { return masses_.size(); }

  // Lattice bookkeeping; width 1 for strings.
  int cross_width() const { return cross_width_; }
  std::size_t station_count() const { return masses_.size() / (cross_width_ * cross_width_); }
  std::size_t axial_mass(std::size_t station) const {
    const std::size_t w = static_cast<std::size_t>(cross_width_);
    return station * w * w + (w / 2) * w + (w / 2);
  }
  void set_cross_width(int w) { cross_width_ = w; }

  // Copy in which every mass except `j` is clamped, leaving `j` to ring on its own springs.
  MassSpringNetwork isolated(std::size_t j) const {
    require(j < masses_.size(), ErrorCode::InvalidArgument, "mass index out of range");
    MassSpringNetwork out = *this;
    for (std::size_t i = 0; i < out.masses_.size(); ++i) out.masses_[i].fixed = i != j;
    out.reset();
    return out;
  }

  void validate() const {
    std::vector<int> degree(masses_.size(), 0);
    for (const auto& s : springs_) {
      ++degree[s.i];
      ++degree[s.j];
    }
    for (std::size_t j = 0; j < masses_.size(); ++j) {
      require(masses_[j].fixed || degree[j] > 0, ErrorCode::InvalidArgument,
              "free mass " + std::to_string(j) + " has no spring");
    }
  }

  std::span<const double> displacement() const { return y_; }
  std::span<const double> previous_displacement() const { return y_prev_; }
  double displacement(std::size_t j) const { return y_[j]; }

  void reset() {
    std::fill(y_.begin(), y_.end(), 0.0);
    std::fill(y_prev_.begin(), y_prev_.end(), 0.0);
  }

  // Initial condition for tests: sets current and previous displacement.
  void set_state(std::size_t j, double y, double y_prev) {
    require(!masses_[j].fixed || (y == 0.0 && y_prev == 0.0), ErrorCode::InvalidArgument,
            "fixed masses stay at zero");
    y_[j] = y;
    y_prev_[j] = y_prev;
  }

  // Advances one step. `external` is indexed by mass (may be empty for no forcing).
  void step(std::span<const double> external, double dt) {
    const std::size_t n = masses_.size();
    if (external.empty()) {
      std::fill(force_.begin(), force_.end(), 0.0);
    } else {
      require(external.size() == n, ErrorCode::InvalidArgument, "force vector size mismatch");
      std::copy(external.begin(), external.end(), force_.begin());
    }
    for (const auto& s : springs_) {
      const double f = s.stiffness * (y_[s.i] - y_[s.j]);
      force_[s.i] -= f;
      force_[s.j] += f;
    }
    const double dt2 = dt * dt;
    for (std::size_t j = 0; j < n; ++j) {
      const Mass& m = masses_[j];
      if (m.fixed) continue;
      const double y = y_[j];
      const double damp = m.damping / dt * (y - y_prev_[j]);
      const double next = 2.0 * y - y_prev_[j] + dt2 / m.mass * (force_[j] - damp);
      y_prev_[j] = y;
      y_[j] = next;
    }
  }

  // Discrete energy at the half step between the previous and current state:
  //   sum 1/2 (m - dt z / 2) v^2 + sum 1/2 K d_prev d_cur,  v = (y - y_prev) / dt.
  // Conserved exactly without damping; non-increasing with z > 0.
  double energy(double dt) const {
    double e = 0.0;
    for (std::size_t j = 0; j < masses_.size(); ++j) {
      const double v = (y_[j] - y_prev_[j]) / dt;
      e += 0.5 * (masses_[j].mass - 0.5 * dt * masses_[j].damping) * v * v;
    }
    for (const auto& s : springs_) {
      e += 0.5 * s.stiffness * (y_[s.i] - y_[s.j]) * (y_prev_[s.i] - y_prev_[s.j]);
    }
    return e;
  }

 private:
  TopologyKind kind_;
  int cross_width_ = 1;
  std::vector<Mass> masses_;
  std::vector<Spring> springs_;
  std::set<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<double> y_;
  std::vector<double> y_prev_;
  std::vector<double> force_;
};

// Utilization u_j = (dt^2 sum K + dt z) / (2 m_j); passes when every u_j <= 1 - eps.
// Gershgorin bounds the network's top eigenvalue by 2 sum K / m, and with z proportional to m
// each mode is stable while dt^2 lambda + 2 dt z / m < 4. Dividing by 4 m only covers a mass
// ringing on its own.
inline StabilityReport stability_check(const MassSpringNetwork& net, double dt) {
  std::vector<double> k_sum(net.size(), 0.0);
  for (const auto& s : net.springs()) {
    k_sum[s.i] += s.stiffness;
    k_sum[s.j] += s.stiffness;
  }
  StabilityReport report;
  const double limit = 1.0 - StabilityContext::kEpsilon;
  for (std::size_t j = 0; j < net.size(); ++j) {
    const Mass& m = net.masses()[j];
    if (m.fixed) continue;
    const double u = (dt * dt * k_sum[j] + dt * m.damping) / (2.0 * m.mass);
    report.max_utilization = std::max(report.max_utilization, u);
    if (!(u <= limit)) report.offending.push_back(j);
  }
  report.pass = report.offending.empty();
  return report;
}

// One mass per sound node; springs join neighbours with the deeper node's stiffness. Both
// ends are fixed.
inline MassSpringNetwork build_string_topology(const SegmentedPath& path,
                                               const MaterialMap& materials,
                                               double damping_tau = 0.5) {
  const std::size_t n = path.sound_node_count();
  require(n >= 3, ErrorCode::InvalidArgument, "a string needs at least three sound nodes");
  MassSpringNetwork net(TopologyKind::String1D);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& mat = materials.of(path.sound_node_classes[k]);
    net.add_mass({mat.mass, mat.class_id, k == 0 || k + 1 == n, damping_for(mat.mass, damping_tau)});
  }
  for (std::size_t k = 1; k < n; ++k) {
    net.add_spring(k - 1, k, materials.of(path.sound_node_classes[k]).stiffness);
  }
  net.validate();
  return net;
}

// W x W masses per axial station with 6-neighbour springs. Every mass inherits the class of
// its station; axial springs take the deeper station's stiffness. End slabs are fixed.
inline MassSpringNetwork build_lattice_topology(const SegmentedPath& path,
                                                const MaterialMap& materials, int cross_width,
                                                double damping_tau = 0.5) {
  require(cross_width >= 3 && cross_width % 2 == 1, ErrorCode::InvalidArgument,
          "lattice cross width must be odd and >= 3");
  const std::size_t stations = path.sound_node_count();
  require(stations >= 3, ErrorCode::InvalidArgument, "a lattice needs at least three stations");
  const auto w = static_cast<std::size_t>(cross_width);
  MassSpringNetwork net(TopologyKind::Lattice3D);
  net.set_cross_width(cross_width);
  auto index = [w](std::size_t s, std::size_t a, std::size_t b) { return s * w * w + a * w + b; };

  for (std::size_t s = 0; s < stations; ++s) {
    const auto& mat = materials.of(path.sound_node_classes[s]);
    const bool fixed = s == 0 || s + 1 == stations;
    for (std::size_t i = 0; i < w * w; ++i) {
      net.add_mass({mat.mass, mat.class_id, fixed, damping_for(mat.mass, damping_tau)});
    }
  }
  for (std::size_t s = 0; s < stations; ++s) {
    const double k = materials.of(path.sound_node_classes[s]).stiffness;
    for (std::size_t a = 0; a < w; ++a) {
      for (std::size_t b = 0; b < w; ++b) {
        if (s > 0) net.add_spring(index(s - 1, a, b), index(s, a, b), k);
        if (a + 1 < w) net.add_spring(index(s, a, b), index(s, a + 1, b), k);
        if (b + 1 < w) net.add_spring(index(s, a, b), index(s, a, b + 1), k);
      }
    }
  }
  net.validate();
  return net;
}

// Mass driven / observed for a given sound node.
inline std::size_t mass_for_sound_node(const MassSpringNetwork& net, std::size_t sound_node) {
  return net.kind() == TopologyKind::String1D ? sound_node : net.axial_mass(sound_node);
}

}  // namespace biosonix
