#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <biosonix/biosonix.hpp>

namespace fs = std::filesystem;
using namespace biosonix;

namespace {

// A failure tagged with the pipeline stage it came from.
struct StageError {
  std::string stage;
  std::string message;
};

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw StageError{name, e.what()};
  }
}

void print_crossings(const Scenario& s) {
  const auto crossings = boundary_crossing_times(s.domain, s.trajectory);
  std::printf("boundary crossings: %zu\n", crossings.size());
  for (const auto& c : crossings) {
    std::printf("  t=%.6f s  s=%.6f m  class %d -> %d\n", c.time, c.path_position, c.from, c.to);
  }
}

void print_sonify(const Scenario& s, const SonifyResult& r) {
  for (const auto& w : s.materials.warnings) std::printf("warning: %s\n", w.c_str());
  std::printf("global stiffness scale s = %.9g%s\n", s.materials.scale,
              s.materials.scale_reduced ? " (reduced for stability)" : "");
  std::printf("stability: %s (max utilization %.6g)\n", r.render.stability.pass ? "pass" : "FAIL",
              r.render.stability.max_utilization);
  std::printf("drivers: %zu  listeners: %zu\n", r.drivers.size(), r.listeners.size());
  std::printf("master gain %.9g, clipped samples %zu\n", r.render.master_gain, r.render.clipped);
}

fs::path sibling_nodes_path(const fs::path& trace_path) {
  const fs::path dir = trace_path.has_parent_path() ? trace_path.parent_path() : fs::path(".");
  return dir / (trace_path.stem().string() + "_nodes.csv");
}

void write_trace_files(const Scenario& s, const DisplacementTrace& trace, const fs::path& trace_path,
                       const fs::path& nodes_path) {
  save_trace(trace, trace_path);
  save_nodes(s.domain, trace.node_ids, nodes_path);
  std::printf("trace: %zu frames x %zu nodes at %.6g Hz -> %s\n", trace.frame_count(),
              trace.node_count(), trace.frame_rate, trace_path.string().c_str());
}

int cmd_simulate(const fs::path& config, const fs::path& out, std::optional<fs::path> nodes) {
  const Scenario s = build_scenario(load_config(config));
  const auto trace = simulate(s);
  write_trace_files(s, trace, out, nodes.value_or(sibling_nodes_path(out)));
  print_crossings(s);
  return 0;
}

int cmd_sonify(const fs::path& config, const fs::path& trace_path, const fs::path& out) {
  const Scenario s = build_scenario(load_config(config));
  const auto trace = load_trace(trace_path, s.domain);
  const auto r = sonify(s, trace);
  write_wav(r.render.audio, out);
  print_sonify(s, r);
  std::printf("audio: %.6g s at %.6g Hz -> %s\n", r.render.audio.duration(),
              r.render.audio.sample_rate, out.string().c_str());
  return 0;
}

void print_analysis(const AnalysisReport& r) {
  if (r.correlation) {
    std::printf("displacement/audio correlation r = %.6f\n", *r.correlation);
  } else {
    std::printf("displacement/audio correlation r = n/a\n");
  }
  std::printf("transitions detected: %zu\n", r.transitions.size());
  for (double t : r.transitions) std::printf("  t=%.3f s\n", t);
  std::printf("analytic crossings:");
  for (const auto& c : r.crossings) std::printf(" %.3f", c.time);
  std::printf("\n");
}

int cmd_analyze(const fs::path& config, const fs::path& trace_path, const fs::path& wav,
                const fs::path& out) {
  const Scenario s = build_scenario(load_config(config));
  const auto trace = load_trace(trace_path, s.domain);
  const auto audio = read_wav(wav);
  const auto report = analyze(s, audio, trace);
  write_analysis_csv(report, out);
  print_analysis(report);
  return 0;
}

int cmd_experiment(const std::string& kind, const fs::path& config, const fs::path& out_dir,
                   std::optional<fs::path> trace_path) {
  const Scenario s = build_scenario(load_config(config));
  fs::create_directories(out_dir);
  auto trace = [&] { return trace_path ? load_trace(*trace_path, s.domain) : simulate(s); };
  ExperimentReport report;
  if (kind == "nodal") {
    report = run_nodal_characterization(s, out_dir);
  } else if (kind == "area") {
    report = run_sonic_area_sweep(s, trace(), s.config.analysis.radii, out_dir);
  } else {
    report = run_contribution_sweep(s, trace(), s.config.analysis.driver_counts, out_dir);
  }
  for (const auto& w : report.warnings) std::printf("warning: %s\n", w.c_str());
  const fs::path csv = out_dir / (kind + "_report.csv");
  write_report_csv(report, csv);
  if (report.minimal_radius) std::printf("minimal sufficient radius: %.6g m\n", *report.minimal_radius);
  std::printf("%zu rows -> %s\n", report.rows.size(), csv.string().c_str());
  return 0;
}

int cmd_pipeline(const fs::path& config, const fs::path& out_dir) {
  const Scenario s = stage("config", [&] { return build_scenario(load_config(config)); });
  fs::create_directories(out_dir);
  const auto trace = stage("simulate", [&] {
    auto t = simulate(s);
    write_trace_files(s, t, out_dir / "trace.csv", out_dir / "nodes.csv");
    print_crossings(s);
    return t;
  });
  const auto audio = stage("sonify", [&] {
    auto r = sonify(s, trace);
    write_wav(r.render.audio, out_dir / "out.wav");
    print_sonify(s, r);
    return r.render.audio;
  });
  stage("analyze", [&] {
    const auto report = analyze(s, audio, trace);
    write_analysis_csv(report, out_dir / "report.csv");
    write_spectrogram_pgm(report.spectrogram, out_dir / "spectrogram.pgm");
    print_analysis(report);
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-based sonification of tool-tissue interaction"};
  app.require_subcommand(1);
  fs::path config;
  fs::path out;
  fs::path trace;
  fs::path wav;
  fs::path nodes;
  std::string kind;

  auto* sim = app.add_subcommand("simulate", "Run the insertion proxy and write a displacement trace");
  sim->add_option("--config", config, "Scenario JSON")->required();
  sim->add_option("--out", out, "Trace CSV")->required();
  sim->add_option("--nodes", nodes, "Node table CSV (default: <out stem>_nodes.csv)");

  auto* son = app.add_subcommand("sonify", "Render a trace to a WAV file");
  son->add_option("--config", config, "Scenario JSON")->required();
  son->add_option("--trace", trace, "Trace CSV")->required();
  son->add_option("--out", out, "Output WAV")->required();

  auto* ana = app.add_subcommand("analyze", "Correlation and transition report for a render");
  ana->add_option("--config", config, "Scenario JSON")->required();
  ana->add_option("--trace", trace, "Trace CSV")->required();
  ana->add_option("--wav", wav, "Rendered WAV")->required();
  ana->add_option("--out", out, "Report CSV")->required();

  auto* exp = app.add_subcommand("experiment", "Run a sweep experiment");
  exp->add_option("--kind", kind, "nodal, area or contribution")
      ->required()
      ->check(CLI::IsMember({"nodal", "area", "contribution"}));
  exp->add_option("--config", config, "Scenario JSON")->required();
  exp->add_option("--out", out, "Output directory")->required();
  exp->add_option("--trace", trace, "Trace CSV (default: simulate)");

  auto* pipe = app.add_subcommand("pipeline", "simulate, sonify and analyze into one directory");
  pipe->add_option("--config", config, "Scenario JSON")->required();
  pipe->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(config, out, nodes.empty() ? std::nullopt : std::optional(nodes));
    if (*son) return cmd_sonify(config, trace, out);
    if (*ana) return cmd_analyze(config, trace, wav, out);
    if (*exp) {
      return cmd_experiment(kind, config, out, trace.empty() ? std::nullopt : std::optional(trace));
    }
    return cmd_pipeline(config, out);
  } catch (const StageError& e) {
    std::fprintf(stderr, "biosonix: %s stage failed: %s\n", e.stage.c_str(), e.message.c_str());
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "biosonix: invalid config field '%s': %s\n", e.field().c_str(), e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "biosonix: %s\n", e.what());
  }
  return 1;
}
