#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "analysis.hpp"
#include "fft.hpp"
#include "pipeline.hpp"
#include "wav.hpp"

namespace biosonix {

// Worker threads for sweeps: BIOSONIX_THREADS when set to a positive integer, else the
// hardware concurrency. Never more than the number of tasks.
inline std::size_t worker_count(std::size_t tasks) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BIOSONIX_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, tasks));
}

// Runs f(0..n-1) on a small pool. Results keep task order; the first failing task (by index)
// is rethrown after all workers finish.
template <class F>
auto parallel_map(std::size_t n, F f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = worker_count(n);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct ReportRow {
  double swept_value = 0.0;
  std::optional<ClassId> class_id;
  std::size_t drivers = 0;
  std::optional<double> dominant_hz;
  std::optional<double> centroid_hz;
  std::optional<double> rms;
  std::optional<double> correlation;
  std::optional<double> smoothness;
  std::string note;
};

struct ExperimentReport {
  std::string kind;
  std::vector<ReportRow> rows;
  std::vector<std::string> warnings;
  std::optional<double> minimal_radius;  // sonic-area sweep only
};

inline void write_report_csv(const ExperimentReport& report, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "experiment,swept_value,class_id,drivers,dominant_hz,centroid_hz,rms,r,smoothness,note\n";
    std::string line;
    auto opt = [&](std::optional<double> v) {
      line += ',';
      if (v) {
        detail::append_number(line, *v);
      } else {
        line += "n/a";
      }
    };
    for (const auto& row : report.rows) {
      line = report.kind;
      line += ',';
      detail::append_number(line, row.swept_value);
      line += ',';
      if (row.class_id) {
        detail::append_number(line, static_cast<long long>(*row.class_id));
      } else {
        line += "n/a";
      }
      line += ',';
      detail::append_number(line, static_cast<long long>(row.drivers));
      opt(row.dominant_hz);
      opt(row.centroid_hz);
      opt(row.rms);
      opt(row.correlation);
      opt(row.smoothness);
      line += ',';
      line += row.note;
      out << line << '\n';
    }
  });
}

inline double rms_of(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

// Magnitude-weighted mean frequency of the whole signal.
inline double signal_centroid(std::span<const double> x, double sample_rate) {
  const std::size_t n_fft = std::bit_ceil(std::max<std::size_t>(x.size(), 2));
  const auto mag = magnitude_spectrum(x, n_fft);
  std::vector<double> freqs(mag.size());
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    freqs[k] = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
  }
  return centroid_of(mag, freqs);
}

// Mean absolute second difference; 0 for fewer than three points.
inline double second_difference_roughness(std::span<const double> x) {
  if (x.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 2; i < x.size(); ++i) acc += std::abs(x[i] - 2.0 * x[i - 1] + x[i - 2]);
  return acc / static_cast<double>(x.size() - 2);
}

inline void write_artifact(const std::vector<double>& premaster, double rate,
                           const std::optional<std::filesystem::path>& dir, const std::string& name) {
  if (!dir) return;
  double gain = 1.0;
  std::size_t clipped = 0;
  write_wav(master_buffer(premaster, rate, true, gain, clipped), *dir / name);
}

// Every free sound node receives the same impulse. Dominant frequency and centroid come from
// the node ringing with all other masses clamped; RMS is its contribution heard at the default
// listeners of the full network. Fixed ends get a row without metrics.
inline ExperimentReport run_nodal_characterization(
    const Scenario& s, const std::optional<std::filesystem::path>& artifacts = std::nullopt) {
  const std::size_t n = s.path.sound_node_count();
  const double rate = s.config.mapping.audio_rate;
  const auto samples = static_cast<std::size_t>(std::llround(s.config.analysis.nodal_duration * rate));
  require(samples >= 2, ErrorCode::InvalidArgument, "nodal render is too short");
  const auto listener_nodes = default_listener_nodes(s);
  ExperimentReport report;
  report.kind = "nodal";
  report.rows = parallel_map(n, [&](std::size_t k) {
    ReportRow row;
    row.swept_value = static_cast<double>(k);
    row.class_id = s.path.sound_node_classes[k];
    if (is_end_node(s, k)) {
      row.note = "fixed";
      return row;
    }
    auto net = build_network(s);
    const std::size_t mass = mass_for_sound_node(net, k);
    std::vector<double> impulse(samples, 0.0);
    impulse[0] = s.config.analysis.impulse;
    const std::vector<Driver> drivers{{mass, ForceSignal::dense(std::move(impulse))}};
    RenderOptions opts;
    opts.master = false;

    auto alone = net.isolated(mass);
    const auto local = render(alone, drivers, {{mass, 1.0}}, samples, rate, opts);
    row.dominant_hz = dominant_frequency(local.premaster, rate).frequency;
    row.centroid_hz = signal_centroid(local.premaster, rate);

    const auto mixed = render(net, drivers, make_listeners(net, listener_nodes), samples, rate, opts);
    row.rms = rms_of(mixed.premaster);
    row.drivers = 1;
    write_artifact(mixed.premaster, rate, artifacts, "nodal_" + std::to_string(k) + ".wav");
    return row;
  });
  return report;
}

inline std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline std::string millimetres(double metres) {
  return std::to_string(std::llround(metres * 1000.0)) + "mm";
}

namespace experiment_detail {

inline ClassId require_target(const Scenario& s) {
  if (!s.config.analysis.target_class) {
    throw ConfigError("analysis.target_class_id", "required for sonic-area experiments");
  }
  return *s.config.analysis.target_class;
}

// Renders the trace through `drivers` (unmastered) and fills the common metrics.
inline void measure(const Scenario& s, const DisplacementTrace& trace,
                    const EnvelopeSeries& displacement, const std::vector<std::size_t>& drivers,
                    ReportRow& row, std::vector<double>& premaster,
                    std::vector<double>* centroid_series) {
  row.drivers = drivers.size();
  const double rate = s.config.mapping.audio_rate;
  if (drivers.empty()) {
    premaster.assign(sample_count(s), 0.0);
    row.rms = 0.0;
    row.centroid_hz = 0.0;
    row.note = "silence";
    return;
  }
  const auto out = sonify(s, trace, drivers, default_listener_nodes(s), false);
  premaster = out.render.premaster;
  const auto& a = s.config.analysis;
  const auto spec = stft(premaster, rate, a.stft_window, a.stft_hop);
  row.rms = rms_of(premaster);
  const auto centroid = spectral_centroid(spec);
  row.centroid_hz = mean_in_window(centroid, 0.0, static_cast<double>(premaster.size()) / rate);
  const auto audio_env = rms_envelope(premaster, rate, a.envelope_frame, a.envelope_hop(rate));
  row.correlation = try_correlate(displacement, audio_env);
  if (centroid_series) *centroid_series = centroid.values;
}

}  // namespace experiment_detail

// Drives the network from every free sound node within each radius of the target start.
// The minimal sufficient radius is the smallest one whose r is within 5% of the r obtained
// with the largest radius.
inline ExperimentReport run_sonic_area_sweep(
    const Scenario& s, const DisplacementTrace& trace, std::vector<double> radii,
    const std::optional<std::filesystem::path>& artifacts = std::nullopt) {
  const ClassId target = experiment_detail::require_target(s);
  radii = sorted_unique(std::move(radii));
  require(!radii.empty(), ErrorCode::InvalidArgument, "no radii to sweep");
  for (double r : radii) require(r >= 0.0, ErrorCode::InvalidArgument, "radii must be >= 0");
  const auto displacement = pooled_displacement_envelope(trace, s.path);
  ExperimentReport report;
  report.kind = "sonic_area";
  report.rows = parallel_map(radii.size(), [&](std::size_t i) {
    ReportRow row;
    row.swept_value = radii[i];
    row.class_id = target;
    std::vector<double> premaster;
    experiment_detail::measure(s, trace, displacement, sonic_area_nodes(s, target, radii[i]), row,
                               premaster, nullptr);
    write_artifact(premaster, s.config.mapping.audio_rate, artifacts,
                   "area_" + millimetres(radii[i]) + ".wav");
    return row;
  });
  const auto& ref = report.rows.back().correlation;
  if (ref) {
    for (auto& row : report.rows) {
      if (row.correlation && std::abs(*row.correlation - *ref) <= 0.05 * std::abs(*ref)) {
        report.minimal_radius = row.swept_value;
        row.note += row.note.empty() ? "minimal sufficient radius" : "; minimal sufficient radius";
        break;
      }
    }
  } else {
    report.warnings.push_back("correlation undefined at the largest radius; no minimal radius");
  }
  return report;
}

// Evenly spaced subset of `pool` with `d` members (d <= pool.size()).
inline std::vector<std::size_t> evenly_spaced(const std::vector<std::size_t>& pool, std::size_t d) {
  require(d <= pool.size(), ErrorCode::InvalidArgument, "subset larger than its pool");
  if (d == 0) return {};
  if (d == pool.size()) return pool;
  if (d == 1) return {pool[0]};
  std::vector<std::size_t> out;
  const double step = static_cast<double>(pool.size() - 1) / static_cast<double>(d - 1);
  for (std::size_t i = 0; i < d; ++i) {
    out.push_back(pool[static_cast<std::size_t>(std::llround(step * static_cast<double>(i)))]);
  }
  return out;
}

// Varies how many drivers inside the configured sonic area carry the trace.
inline ExperimentReport run_contribution_sweep(
    const Scenario& s, const DisplacementTrace& trace, const std::vector<int>& counts,
    const std::optional<std::filesystem::path>& artifacts = std::nullopt) {
  const ClassId target = experiment_detail::require_target(s);
  const auto pool = sonic_area_nodes(s, target, s.config.analysis.sonic_area_radius);
  std::vector<int> ds = counts;
  std::sort(ds.begin(), ds.end());
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
  require(!ds.empty(), ErrorCode::InvalidArgument, "no driver counts to sweep");
  ExperimentReport report;
  report.kind = "contribution";
  for (int d : ds) {
    require(d >= 0, ErrorCode::InvalidArgument, "driver counts must be >= 0");
    if (static_cast<std::size_t>(d) > pool.size()) {
      report.warnings.push_back("driver count " + std::to_string(d) + " exceeds the " +
                                std::to_string(pool.size()) +
                                " nodes in the sonic area; clamped");
    }
  }
  const auto displacement = pooled_displacement_envelope(trace, s.path);
  report.rows = parallel_map(ds.size(), [&](std::size_t i) {
    ReportRow row;
    row.swept_value = ds[i];
    row.class_id = target;
    const auto used = std::min(static_cast<std::size_t>(ds[i]), pool.size());
    std::vector<double> premaster;
    std::vector<double> centroids;
    experiment_detail::measure(s, trace, displacement, evenly_spaced(pool, used), row, premaster,
                               &centroids);
    row.smoothness = second_difference_roughness(centroids);
    if (used < static_cast<std::size_t>(ds[i])) {
      row.note += row.note.empty() ? "clamped" : "; clamped";
    }
    write_artifact(premaster, s.config.mapping.audio_rate, artifacts,
                   "drivers_" + std::to_string(ds[i]) + ".wav");
    return row;
  });
  return report;
}

}  // namespace biosonix
