#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"

namespace biosonix {

using ClassId = int;
using NodeId = std::int64_t;

struct TissueClass {
  ClassId id = 0;
  std::string name;
  double density = 0.0;           // kg/m^3
  double youngs_modulus = 0.0;    // Pa
  double poisson_ratio = 0.4;     // stored only
  double puncture_spike_gain = 0.0;

  friend bool operator==(const TissueClass&, const TissueClass&) = default;
};

struct Layer {
  ClassId class_id = 0;
  double thickness = 0.0;  // m

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct LayerSpec {
  std::vector<Layer> layers;  // top to bottom
  double side = 0.0;          // cross-section edge, m

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct SphereSpec {
  ClassId medium = 0;
  ClassId inclusion = 0;
  Vec3 center;
  double radius = 0.0;
  double side = 0.0;  // cube edge, m

  friend bool operator==(const SphereSpec&, const SphereSpec&) = default;
};

enum class GeometryKind { Layered, SphereInclusion };

struct Node {
  NodeId id = 0;
  Vec3 position;
  ClassId class_id = 0;
};

inline void validate_classes(std::span<const TissueClass> classes) {
  require(!classes.empty(), ErrorCode::InvalidArgument, "class table is empty");
  std::set<ClassId> ids;
  for (const auto& c : classes) {
    const std::string where = "class " + std::to_string(c.id) + " (" + c.name + ")";
    require(c.density > 0.0 && std::isfinite(c.density), ErrorCode::InvalidArgument,
            where + ": density must be > 0");
    require(c.youngs_modulus > 0.0 && std::isfinite(c.youngs_modulus), ErrorCode::InvalidArgument,
            where + ": Young's modulus must be > 0");
    require(c.poisson_ratio >= 0.0 && c.poisson_ratio < 0.5, ErrorCode::InvalidArgument,
            where + ": Poisson ratio must lie in [0, 0.5)");
    require(c.puncture_spike_gain >= 0.0, ErrorCode::InvalidArgument,
            where + ": spike gain must be >= 0");
    require(ids.insert(c.id).second, ErrorCode::InvalidArgument,
            "duplicate class id " + std::to_string(c.id));
  }
}

// Straight constant-velocity tool path. `direction` is normalized on construction.
class Trajectory {
 public:
  Trajectory(Vec3 entry, Vec3 direction, double speed, double duration)
      : entry_(entry), speed_(speed), duration_(duration) {
    const double len = norm(direction);
    require(len > 0.0 && std::isfinite(len), ErrorCode::InvalidArgument,
            "trajectory direction must be a non-zero vector");
    direction_ = (1.0 / len) * direction;
    require(speed > 0.0 && std::isfinite(speed), ErrorCode::InvalidArgument,
            "trajectory speed must be > 0");
    require(duration > 0.0 && std::isfinite(duration), ErrorCode::InvalidArgument,
            "trajectory duration must be > 0");
  }

  Vec3 entry() const { return entry_; }
  Vec3 direction() const { return direction_; }
  double speed() const { return speed_; }
  double duration() const { return duration_; }
  Vec3 point_at(double s) const { return entry_ + s * direction_; }

 private:
  Vec3 entry_;
  Vec3 direction_;
  double speed_;
  double duration_;
};

// Piece of the tool path lying inside one class. Path parameters are measured from the
// trajectory entry point.
struct PathInterval {
  double begin = 0.0;
  double end = 0.0;
  ClassId class_id = 0;
};

class AnatomicalDomain {
 public:
  static constexpr double kTieTolerance = 1e-9;

  AnatomicalDomain(std::vector<Node> nodes, std::vector<TissueClass> classes, Box bounds,
                   double spacing, std::variant<LayerSpec, SphereSpec> geometry)
      : nodes_(std::move(nodes)), classes_(std::move(classes)), bounds_(bounds),
        spacing_(spacing), geometry_(std::move(geometry)) {
    for (std::size_t i = 0; i < classes_.size(); ++i) class_index_[classes_[i].id] = i;
    if (is_layered()) {
      double depth = bounds_.lo.z;
      for (const auto& layer : layered().layers) {
        depth += layer.thickness;
        interfaces_.push_back(depth);
      }
      interfaces_.pop_back();
    }
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<TissueClass>& classes() const { return classes_; }
  const Box& bounds() const { return bounds_; }
  double spacing() const { return spacing_; }
  GeometryKind geometry_kind() const {
    return is_layered() ? GeometryKind::Layered : GeometryKind::SphereInclusion;
  }
  bool is_layered() const { return std::holds_alternative<LayerSpec>(geometry_); }
  const LayerSpec& layered() const { return std::get<LayerSpec>(geometry_); }
  const SphereSpec& sphere() const { return std::get<SphereSpec>(geometry_); }

  bool has_class(ClassId id) const { return class_index_.contains(id); }
  const TissueClass& tissue(ClassId id) const {
    auto it = class_index_.find(id);
    require(it != class_index_.end(), ErrorCode::UnknownClass,
            "unknown class id " + std::to_string(id));
    return classes_[it->second];
  }

  // Depth of each layer interface (layered only), ascending.
  const std::vector<double>& interface_depths() const { return interfaces_; }

  // Class of the subdomain holding `p`; interface points belong to the deeper layer.
  ClassId classify_point(Vec3 p) const {
    require(bounds_.contains(p, kTieTolerance), ErrorCode::OutOfBounds,
            "point outside domain bounds");
    return classify_unchecked(p);
  }

  std::size_t index_of(NodeId id) const {
    require(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(), ErrorCode::UnknownNode,
            "unknown node id " + std::to_string(id));
    return static_cast<std::size_t>(id);
  }
  bool has_node(NodeId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < nodes_.size();
  }

  // Clip the trajectory's ray against the bounds. The entry point must lie on or in the box.
  RayInterval chord(const Trajectory& traj) const {
    require(bounds_.contains(traj.entry(), kTieTolerance), ErrorCode::TrajectoryMissesDomain,
            "trajectory entry point lies outside the domain");
    auto clipped = clip_ray(bounds_, traj.entry(), traj.direction());
    require(clipped.has_value() && clipped->length() > kTieTolerance,
            ErrorCode::TrajectoryMissesDomain, "trajectory does not traverse the domain");
    return *clipped;
  }

  // Exact class intervals along the path, computed from interface geometry (not sampling).
  std::vector<PathInterval> intervals_along(const Trajectory& traj) const {
    const RayInterval span = chord(traj);
    const Vec3 o = traj.entry();
    const Vec3 d = traj.direction();
    std::vector<double> cuts{span.t_in};
    if (is_layered()) {
      if (d.z != 0.0) {
        for (double depth : interfaces_) {
          const double s = (depth - o.z) / d.z;
          if (s > span.t_in && s < span.t_out) cuts.push_back(s);
        }
      }
    } else {
      const auto& sp = sphere();
      const Vec3 rel = o - sp.center;
      const double b = dot(rel, d);
      const double c = dot(rel, rel) - sp.radius * sp.radius;
      const double disc = b * b - c;
      if (disc > 0.0) {
        const double root = std::sqrt(disc);
        for (double s : {-b - root, -b + root}) {
          if (s > span.t_in && s < span.t_out) cuts.push_back(s);
        }
      }
    }
    std::sort(cuts.begin() + 1, cuts.end());
    cuts.push_back(span.t_out);

    std::vector<PathInterval> out;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double a = cuts[k];
      const double b = cuts[k + 1];
      if (!(b > a)) continue;
      const ClassId cls = classify_unchecked(traj.point_at(0.5 * (a + b)));
      if (!out.empty() && out.back().class_id == cls) {
        out.back().end = b;
      } else {
        out.push_back({a, b, cls});
      }
    }
    return out;
  }

 private:
  ClassId classify_unchecked(Vec3 p) const {
    if (is_layered()) {
      const auto& layers = layered().layers;
      for (std::size_t k = 0; k < interfaces_.size(); ++k) {
        if (p.z < interfaces_[k] - kTieTolerance) return layers[k].class_id;
      }
      return layers.back().class_id;
    }
    const auto& sp = sphere();
    return distance(p, sp.center) <= sp.radius + kTieTolerance ? sp.inclusion : sp.medium;
  }

  std::vector<Node> nodes_;
  std::vector<TissueClass> classes_;
  Box bounds_;
  double spacing_;
  std::variant<LayerSpec, SphereSpec> geometry_;
  std::unordered_map<ClassId, std::size_t> class_index_;
  std::vector<double> interfaces_;
};

namespace detail {

inline int grid_cells(double extent, double spacing, const char* what) {
  const double ratio = extent / spacing;
  const double rounded = std::round(ratio);
  require(rounded >= 1.0 && std::abs(ratio - rounded) <= 1e-6 * std::max(1.0, ratio),
          ErrorCode::InvalidArgument,
          std::string("node spacing does not divide the ") + what);
  return static_cast<int>(rounded);
}

template <typename ClassifyFn>
std::vector<Node> fill_grid(int cells_x, int cells_y, int cells_z, double spacing,
                            ClassifyFn&& classify) {
  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(cells_x + 1) * (cells_y + 1) * (cells_z + 1));
  NodeId id = 0;
  for (int k = 0; k <= cells_z; ++k) {
    for (int j = 0; j <= cells_y; ++j) {
      for (int i = 0; i <= cells_x; ++i) {
        const Vec3 p{i * spacing, j * spacing, k * spacing};
        nodes.push_back({id++, p, classify(p)});
      }
    }
  }
  return nodes;
}

}  // namespace detail

// Box of stacked layers: x, y span the cross-section and z is depth below the top face.
inline AnatomicalDomain build_layered_domain(const std::vector<Layer>& layers,
                                             double cross_section_side, double node_spacing,
                                             std::vector<TissueClass> classes) {
  validate_classes(classes);
  require(!layers.empty(), ErrorCode::InvalidArgument, "layer list is empty");
  require(node_spacing > 0.0, ErrorCode::InvalidArgument, "node spacing must be > 0");
  require(cross_section_side > 0.0, ErrorCode::InvalidArgument, "cross-section side must be > 0");
  double depth = 0.0;
  for (const auto& layer : layers) {
    require(std::any_of(classes.begin(), classes.end(),
                        [&](const TissueClass& c) { return c.id == layer.class_id; }),
            ErrorCode::UnknownClass, "layer references unknown class " +
                                         std::to_string(layer.class_id));
    require(layer.thickness > 0.0, ErrorCode::InvalidArgument, "layer thickness must be > 0");
    require(layer.thickness >= node_spacing * (1.0 - 1e-9), ErrorCode::InvalidArgument,
            "layer of class " + std::to_string(layer.class_id) +
                " is thinner than the node spacing");
    depth += layer.thickness;
  }
  const int nx = detail::grid_cells(cross_section_side, node_spacing, "cross-section side");
  const int nz = detail::grid_cells(depth, node_spacing, "total depth");

  std::vector<double> interfaces;
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    acc += layers[k].thickness;
    interfaces.push_back(acc);
  }
  auto classify = [&](Vec3 p) {
    for (std::size_t k = 0; k < interfaces.size(); ++k) {
      if (p.z < interfaces[k] - AnatomicalDomain::kTieTolerance) return layers[k].class_id;
    }
    return layers.back().class_id;
  };
  auto nodes = detail::fill_grid(nx, nx, nz, node_spacing, classify);
  const Box bounds{{0.0, 0.0, 0.0}, {nx * node_spacing, nx * node_spacing, nz * node_spacing}};
  return AnatomicalDomain(std::move(nodes), std::move(classes), bounds, node_spacing,
                          LayerSpec{layers, cross_section_side});
}

// Cube of `medium` holding a spherical inclusion of class `inclusion`.
inline AnatomicalDomain build_inclusion_domain(ClassId medium, ClassId inclusion,
                                               Vec3 sphere_center, double sphere_radius,
                                               double box_side, double node_spacing,
                                               std::vector<TissueClass> classes) {
  validate_classes(classes);
  auto known = [&](ClassId id) {
    return std::any_of(classes.begin(), classes.end(),
                       [&](const TissueClass& c) { return c.id == id; });
  };
  require(known(medium), ErrorCode::UnknownClass, "unknown medium class " + std::to_string(medium));
  require(known(inclusion), ErrorCode::UnknownClass,
          "unknown inclusion class " + std::to_string(inclusion));
  require(node_spacing > 0.0, ErrorCode::InvalidArgument, "node spacing must be > 0");
  require(sphere_radius >= 2.0 * node_spacing, ErrorCode::InvalidArgument,
          "sphere radius must be at least twice the node spacing");
  for (int a = 0; a < 3; ++a) {
    require(sphere_center[a] - sphere_radius >= -1e-12 &&
                sphere_center[a] + sphere_radius <= box_side + 1e-12,
            ErrorCode::InvalidArgument, "sphere does not fit inside the box");
  }
  const int n = detail::grid_cells(box_side, node_spacing, "box side");
  auto classify = [&](Vec3 p) {
    return distance(p, sphere_center) <= sphere_radius + AnatomicalDomain::kTieTolerance
               ? inclusion
               : medium;
  };
  auto nodes = detail::fill_grid(n, n, n, node_spacing, classify);
  const double side = n * node_spacing;
  return AnatomicalDomain(std::move(nodes), std::move(classes), Box{{0, 0, 0}, {side, side, side}},
                          node_spacing,
                          SphereSpec{medium, inclusion, sphere_center, sphere_radius, box_side});
}

}  // namespace biosonix
