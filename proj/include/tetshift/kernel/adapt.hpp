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

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tetshift/kernel/operators.hpp"
#include "tetshift/mesh.hpp"
#include "tetshift/metric.hpp"

namespace tetshift::kernel {

struct AdaptConfig {
  enum class Phase { InitialInterior, MII, FinalCollapse, QualityImprovement };

  int passBudget = 8;
  double splitThreshold = std::sqrt(2.0);
  double collapseThreshold = 1.0 / std::sqrt(2.0);
  double qualityFloor = 0.8;
  int bufferLayers = 1;
  Phase phase = Phase::InitialInterior;
  std::uint64_t seed = 1;
  double smoothRelax = 0.5;
  double collapseMinQuality = 0.2;
  // Longest edge a collapse may create when a split sweep follows in the same
  // pass; otherwise collapses stay within splitThreshold.
  double collapseEdgeCap = 1.5;
  // MII only: leave tets with unit edges and Q >= qualityFloor alone.
  bool skipAdapted = true;
  bool recordLog = false;
  MetricInterpolation interpolation = MetricInterpolation::LogEuclidean;

  // Throws Error(InvalidArgument) unless splitThreshold > 1 > collapseThreshold > 0.
  void validate() const;
  OpParams op_params() const;
};

const char* to_string(AdaptConfig::Phase phase);

struct OpCounters {
  std::int64_t attempted = 0;
  std::int64_t committed = 0;
  std::int64_t rolledBack = 0;  // lock contention or a frozen/buffer element
  std::int64_t rejected = 0;    // invalid, no improvement, or target gone

  OpCounters& operator+=(const OpCounters& o) {
    attempted += o.attempted;
    committed += o.committed;
    rolledBack += o.rolledBack;
    rejected += o.rejected;
    return *this;
  }
};

struct TaskOutcome {
  std::array<OpCounters, kOpKinds> ops{};
  int sweeps = 0;
  // A sweep with over- or under-length edges pending committed nothing.
  bool stalled = false;
  std::vector<std::string> stalls;
  std::int64_t newVertices = 0;
  std::vector<CommitRecord> log;

  OpCounters total() const;
  const OpCounters& of(OpKind k) const { return ops[static_cast<int>(k)]; }
  TaskOutcome& operator+=(const TaskOutcome& o);
};

// Adapts the non-frozen part of `sub` toward unit edges and good shape under
// `field`. Frozen tets keep their vertices and coordinates; new points get
// ids (sub.id, nextLocalId++) once the call finishes.
TaskOutcome adapt(Subdomain& sub, const MetricField& field, const AdaptConfig& cfg,
                  int threads = 1);

// FNV-1a over the ids and coordinates of every frozen tet, in order.
std::uint64_t frozen_geometry_hash(const TetMesh& mesh);

}  // namespace tetshift::kernel
