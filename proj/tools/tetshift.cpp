// Copyright 2026 The tetshift Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Every artifact is plain text so runs can be
// diffed directly.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "tetshift/conformity.hpp"
#include "tetshift/decomp.hpp"
#include "tetshift/error.hpp"
#include "tetshift/mesh_io.hpp"
#include "tetshift/metric.hpp"
#include "tetshift/orchestrator/driver.hpp"

namespace fs = std::filesystem;
using namespace tetshift;

namespace {

struct MetricArgs {
  std::string spec = "uniform:0.25";
  double complexity = 0.0;  // 0 keeps the field unscaled
};

void add_metric_flags(CLI::App* app, MetricArgs& m) {
  app->add_option("--metric", m.spec,
                  "uniform:h | linear-boundary-layer:h0,growth,axis | radial:h0,growth | file:path")
      ->capture_default_str();
  app->add_option("--complexity", m.complexity, "rescale the field to this target complexity")
      ->check(CLI::NonNegativeNumber);
}

MetricField load_metric(const MetricArgs& m, const TetMesh& mesh) {
  auto field = parse_metric_spec(m.spec, mesh);
  if (m.complexity > 0.0) field = scale_to_complexity(field, mesh, m.complexity);
  return field;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + p.string());
  os.precision(10);
  return os;
}

fs::path prepare_dir(const std::string& dir) {
  fs::path d(dir);
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir + ": " + ec.message());
  return d;
}

struct DecompArgs {
  int subdomains = 1;
  std::string axisOrder = "xyz";
  std::string splits;
};

void add_decomp_flags(CLI::App* app, DecompArgs& d) {
  app->add_option("--subdomains", d.subdomains, "number of subdomains")->check(CLI::PositiveNumber);
  app->add_option("--axis-order", d.axisOrder, "cut order, a permutation of xyz")->capture_default_str();
  app->add_option("--splits", d.splits, "parts along x,y,z, e.g. 2,2,2");
}

int cmd_adapt(const std::string& input, const MetricArgs& m, const DecompArgs& d,
              orch::RunConfig cfg, const std::string& outDir) {
  auto mesh = read_mesh_file(input);
  auto field = load_metric(m, mesh);
  cfg.subdomains = d.subdomains;
  cfg.axisOrder = d.axisOrder;
  cfg.splits = d.splits;

  auto before = quality_report(mesh, field, cfg.quality);
  auto res = orch::run_distributed(mesh, field, cfg);
  auto after = quality_report(res.mesh, field, cfg.quality);

  auto dir = prepare_dir(outDir);
  write_mesh_file((dir / "adapted.mesh").string(), res.mesh, true);
  {
    auto os = open_out(dir / "quality.csv");
    write_quality_csv(os, after);
  }
  {
    auto os = open_out(dir / "phases.csv");
    orch::write_phase_report(os, res.phases);
  }
  {
    auto os = open_out(dir / "convergence.csv");
    orch::write_convergence_log(os, res.log);
  }
  if (cfg.audit) {
    auto os = open_out(dir / "audit.log");
    os << "phase,context,event,detail\n";
    for (const auto& l : res.auditLog) os << l << '\n';
  }

  std::cout << "input:  " << mesh.vertices.size() << " vertices, " << mesh.tets.size() << " tets\n";
  std::cout << "output: " << res.mesh.vertices.size() << " vertices, " << res.mesh.tets.size()
            << " tets\n";
  std::cout << "iterations: " << res.iterations << (res.converged ? " (converged)" : " (stopped)")
            << "\n";
  std::cout << "unit-band fraction: " << before.unit_band_fraction() << " -> "
            << after.unit_band_fraction() << "\n";
  std::cout << "mean quality: " << before.meanQ << " -> " << after.meanQ << "\n";
  std::cout << "seconds: " << res.seconds << "\n";
  for (const auto& v : res.violations) std::cerr << "invariant violation: " << v << "\n";
  return res.exit_code();
}

int cmd_decompose(const std::string& input, const DecompArgs& d, const std::string& outDir) {
  auto mesh = read_mesh_file(input);
  auto plan = DecompositionPlan::parse(d.subdomains, d.axisOrder, d.splits);
  auto subs = decompose(mesh, plan);
  auto dir = prepare_dir(outDir);
  for (const auto& s : subs)
    write_mesh_file((dir / ("subdomain_" + std::to_string(s.id) + ".mesh")).string(), s.mesh, true);
  auto graph = build_neighbor_graph(subs);
  auto os = open_out(dir / "neighbors.csv");
  os << "a,b\n";
  for (int a = 0; a < static_cast<int>(graph.size()); ++a)
    for (int b : graph[a])
      if (a < b) os << a << "," << b << "\n";
  for (const auto& s : subs)
    std::cout << "subdomain " << s.id << ": " << s.mesh.tets.size() << " tets, "
              << s.neighbors.size() << " neighbors\n";
  return 0;
}

int cmd_quality(const std::string& input, const MetricArgs& m, const std::string& reference,
                const std::string& csv) {
  auto mesh = read_mesh_file(input);
  auto field = load_metric(m, mesh);
  auto r = quality_report(mesh, field, {});
  if (!csv.empty()) {
    auto os = open_out(csv);
    write_quality_csv(os, r);
  }
  write_quality_summary(std::cout, r);
  if (!reference.empty()) {
    auto ref = read_mesh_file(reference);
    auto rr = quality_report(ref, field, {});
    write_quality_comparison(std::cout, r, rr);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tetshift: distributed anisotropic tetrahedral mesh adaptation"};
  app.require_subcommand(1);

  std::string input, outDir = "out", reference, csv, output = "cube.mesh";
  MetricArgs metric;
  DecompArgs decomp;
  orch::RunConfig cfg;
  std::string coloring = "decentralized", seeds = "point";

  auto* adapt = app.add_subcommand("adapt", "adapt a mesh to a metric field");
  adapt->add_option("mesh", input, "input mesh")->required()->check(CLI::ExistingFile);
  add_metric_flags(adapt, metric);
  add_decomp_flags(adapt, decomp);
  adapt->add_option("--iterations", cfg.maxIterations, "maximum interface-shift iterations")
      ->capture_default_str();
  adapt->add_option("--seed", cfg.seed, "fixes every random choice")->capture_default_str();
  adapt->add_option("--contexts", cfg.contexts, "simulated execution contexts")
      ->check(CLI::PositiveNumber);
  adapt->add_option("--threads", cfg.threads, "kernel threads per adapt call")
      ->check(CLI::PositiveNumber);
  adapt->add_option("--workers", cfg.handlerWorkers, "handler workers per context")
      ->check(CLI::PositiveNumber);
  adapt->add_option("--layers-fresh", cfg.layersFresh, "shift layers for a never-adapted sender")
      ->check(CLI::PositiveNumber);
  adapt->add_option("--layers-adapted", cfg.layersAdapted, "shift layers after an MII pass")
      ->check(CLI::PositiveNumber);
  adapt->add_option("--coloring", coloring, "receiver selection")
      ->check(CLI::IsMember({"centralized", "decentralized"}))
      ->capture_default_str();
  adapt->add_option("--seed-connectivity", seeds, "shipment seed rule")
      ->check(CLI::IsMember({"point", "face"}))
      ->capture_default_str();
  adapt->add_flag("--audit", cfg.audit, "record the runtime message audit log");
  adapt->add_flag("--balance", cfg.balance, "enable greedy load balancing between contexts");
  adapt->add_flag("--check", cfg.checkInvariants, "run the global invariant suite every iteration");
  adapt->add_option("--output-dir", outDir, "artifact directory")->capture_default_str();

  auto* dec = app.add_subcommand("decompose", "split a mesh into subdomain files");
  dec->add_option("mesh", input, "input mesh")->required()->check(CLI::ExistingFile);
  add_decomp_flags(dec, decomp);
  dec->add_option("--output-dir", outDir, "output directory")->capture_default_str();

  auto* qual = app.add_subcommand("quality", "edge length and shape histograms");
  qual->add_option("mesh", input, "mesh to evaluate")->required()->check(CLI::ExistingFile);
  add_metric_flags(qual, metric);
  qual->add_option("--reference", reference, "compare against this mesh bin by bin")
      ->check(CLI::ExistingFile);
  qual->add_option("--csv", csv, "histogram CSV path");

  int n = 10;
  double size = 1.0, jitter = 0.0;
  std::uint64_t cubeSeed = 1;
  auto* cube = app.add_subcommand("cube", "write a structured unit-cube tetrahedral mesh");
  cube->add_option("--n", n, "cells per side")->check(CLI::PositiveNumber)->capture_default_str();
  cube->add_option("--size", size, "side length")->check(CLI::PositiveNumber);
  cube->add_option("--jitter", jitter, "interior vertex perturbation, fraction of a cell")
      ->check(CLI::Range(0.0, 0.24));
  cube->add_option("--seed", cubeSeed, "jitter seed");
  cube->add_option("--output", output, "mesh path")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*adapt) {
      cfg.coloring = coloring == "centralized" ? orch::ColoringMode::Centralized
                                               : orch::ColoringMode::Decentralized;
      cfg.seeds = seeds == "face" ? orch::SeedConnectivity::FaceConnected
                                  : orch::SeedConnectivity::PointConnected;
      return cmd_adapt(input, metric, decomp, cfg, outDir);
    }
    if (*dec) return cmd_decompose(input, decomp, outDir);
    if (*qual) return cmd_quality(input, metric, reference, csv);
    if (*cube) {
      write_mesh_file(output, make_cube_mesh(n, size, jitter, cubeSeed), false);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
