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
#include <atomic>
#include <cstdint>
#include <mutex>
#include <vector>

#include "tetshift/kernel/work_mesh.hpp"
#include "tetshift/metric.hpp"

namespace tetshift::kernel {

enum class OpKind { Collapse, Split, Swap23, Swap32, Smooth };
inline constexpr int kOpKinds = 5;
const char* to_string(OpKind kind);

enum class OpStatus {
  Committed,
  LockFailed,  // contention; worth retrying
  Blocked,     // frozen element or buffer zone in the way
  Rejected,    // invalid or not an improvement, or the target vanished
};

struct OpParams {
  double splitThreshold = 1.4142135623730951;
  double collapseThreshold = 0.7071067811865476;
  double qualityFloor = 0.8;
  double smoothRelax = 0.5;
  // Collapses may not leave a tet below min(this, previous worst).
  double collapseMinQuality = 0.2;
  // Longest edge a collapse may create.
  double collapseEdgeCap = 1.4142135623730951;
  MetricInterpolation interpolation = MetricInterpolation::LogEuclidean;
};

struct CommitRecord {
  OpKind kind = OpKind::Split;
  std::uint64_t stamp = 0;
  int sweep = 0;  // tet ids are only meaningful within one sweep
  std::vector<int> consumed;
  std::vector<int> created;
};

struct CommitLog {
  std::mutex mu;
  std::vector<CommitRecord> records;
};

// Cavity-local operators for one worker. Every call locks what it touches,
// validates, commits or rolls back, and releases all locks before returning.
class Operators {
 public:
  Operators(WorkMesh& wm, const OpParams& params, int owner, std::atomic<std::uint64_t>& stamp,
            CommitLog* log = nullptr)
      : wm_(wm), p_(params), owner_(owner), stamp_(stamp), log_(log) {}

  // Inserts the midpoint of edge (a, b).
  OpStatus split(int a, int b, int hint = -1);
  // Removes a by merging it into b.
  OpStatus collapse(int a, int b);
  // Removes edge (a, b): its ring of 3 to 7 tets is replaced by the best
  // triangulation of the ring polygon coned to a and b (3-2 for three tets).
  OpStatus swap32(int a, int b, int hint = -1);
  // Replaces tet t and its neighbor across face f by three.
  OpStatus swap23(int t, int f);
  OpStatus smooth(int v);

  // Unlocked reads; callers must hold a tet containing the vertices or be
  // single-threaded.
  double edge_length(int a, int b) const;
  double quality(const std::array<int, 4>& v) const;

 private:
  class Held;
  enum class Take { Ok, Busy, Frozen };

  OpStatus vertex_start(Held& h, int v, bool cavity, int& out);
  OpStatus ball(Held& h, int v, int start, bool cavity, std::vector<int>& out, bool& open);
  OpStatus edge_start(Held& h, int a, int b, int hint, int& out);
  OpStatus shell(Held& h, int a, int b, int start, std::vector<int>& out, bool& open);

  struct SplitInfo {
    int a = -1, b = -1, m = -1;
  };
  OpStatus commit(Held& h, OpKind kind, const std::vector<int>& cavity,
                  const std::vector<std::array<int, 4>>& fresh, const SplitInfo& split);

  double q_of(const std::array<Vec3, 4>& p, const std::array<MetricTensor, 4>& m) const;
  static bool volume_ok(const std::array<Vec3, 4>& p);

  WorkMesh& wm_;
  const OpParams& p_;
  int owner_;
  std::atomic<std::uint64_t>& stamp_;
  CommitLog* log_;
};

}  // namespace tetshift::kernel
