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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tetshift/conformity.hpp"
#include "tetshift/kernel/adapt.hpp"
#include "tetshift/mesh.hpp"
#include "tetshift/metric.hpp"
#include "tetshift/orchestrator/coloring.hpp"
#include "tetshift/runtime/runtime.hpp"

namespace tetshift::orch {

struct RunConfig {
  int subdomains = 1;
  std::string axisOrder = "xyz";
  // "a,b,c"; empty cuts along the first axis only.
  std::string splits;
  int contexts = 1;
  int threads = 1;  // kernel workers per adapt call
  int handlerWorkers = 1;
  int layersFresh = 5;
  int layersAdapted = 10;
  SeedConnectivity seeds = SeedConnectivity::PointConnected;
  double maxShipFraction = 0.6;
  int maxIterations = 12;
  std::uint64_t seed = 1;
  ColoringMode coloring = ColoringMode::Decentralized;
  bool audit = false;
  bool balance = false;
  // Ship every subdomain to the master at each iteration boundary and run
  // the global invariant suite there. Expensive; meant for tests.
  bool checkInvariants = false;
  kernel::AdaptConfig kernel;
  QualityOptions quality;

  // Throws Error(InvalidArgument).
  void validate() const;
};

struct IterationLog {
  int iteration = 0;
  std::int64_t tets = 0;
  std::int64_t lowQuality = 0;
  std::int64_t lowQualityFrozen = 0;
  double minQ = 0.0;
  double meanQ = 0.0;
  // Interface edges are counted once per subdomain holding them.
  std::int64_t edges = 0;
  std::int64_t edgesInBand = 0;
  int receivers = 0;
  int shipments = 0;
  int rejected = 0;
  int overGathered = 0;
};

struct PhaseRow {
  int context = 0;
  std::string phase;
  double seconds = 0.0;
  double fraction = 0.0;
};

struct RunResult {
  std::vector<Subdomain> subdomains;
  TetMesh mesh;
  bool converged = false;
  // Shift iterations carried out.
  int iterations = 0;
  std::vector<IterationLog> log;
  // Receiver sets and senders per iteration, reassembled from role reports.
  std::map<int, ShiftPlan> plans;
  // Neighbor graph at the start of every iteration.
  std::map<int, std::vector<std::set<int>>> graphs;
  std::vector<std::string> violations;
  runtime::MessageAudit audit;
  std::vector<std::string> auditLog;
  std::vector<PhaseRow> phases;
  double seconds = 0.0;

  // 0 converged, 2 stopped at maxIterations, 3 invariant violation.
  int exit_code() const;
};

inline constexpr const char* kPhaseNames[] = {"coloring",  "gather",       "scatter",
                                              "topologyUpdate", "conversion", "qualityCheck",
                                              "adaptation", "misc"};

// Decomposes, adapts every interior, then shifts interfaces until every
// subdomain is free of low-quality tets or maxIterations shifts have run,
// and finishes with the collapse and quality passes. `field` must already
// carry the target complexity.
RunResult run_distributed(const TetMesh& input, const MetricField& field, const RunConfig& cfg);

// `context,phase,seconds,fraction`
void write_phase_report(std::ostream& os, const std::vector<PhaseRow>& rows);
void write_convergence_log(std::ostream& os, const std::vector<IterationLog>& log);

}  // namespace tetshift::orch
