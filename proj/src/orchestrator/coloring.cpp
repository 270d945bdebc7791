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

#include "tetshift/orchestrator/coloring.hpp"

#include <random>

#include "tetshift/error.hpp"

namespace tetshift::orch {

std::uint64_t luby_tiebreak(std::uint64_t seed, int iteration, int id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(id)};
  std::mt19937_64 gen(seq);
  return gen();
}

Priority make_priority(int id, std::int64_t lowQuality, std::uint64_t seed, int iteration) {
  return {lowQuality, luby_tiebreak(seed, iteration, id), id};
}

LubyState luby_decide(const Priority& self,
                      std::span<const std::pair<Priority, LubyState>> neighbors) {
  for (const auto& [p, s] : neighbors)
    if (s == LubyState::In) return LubyState::Out;
  for (const auto& [p, s] : neighbors)
    if (s == LubyState::Undecided && !(self > p)) return LubyState::Undecided;
  return LubyState::In;
}

int ShiftPlan::receiver_of(int s) const {
  for (const auto& [r, set] : senders)
    if (set.count(s)) return r;
  return -1;
}

ShiftPlan color_receivers(const std::vector<std::set<int>>& graph,
                          std::span<const std::int64_t> lowQualityCounts, std::uint64_t seed,
                          int iteration, std::span<const bool> eligible) {
  const int n = static_cast<int>(graph.size());
  if (static_cast<int>(lowQualityCounts.size()) != n ||
      (!eligible.empty() && static_cast<int>(eligible.size()) != n))
    throw Error(ErrorCode::InvalidArgument, "coloring inputs do not match the graph");
  for (int u = 0; u < n; ++u)
    for (int v : graph[u])
      if (v < 0 || v >= n || v == u || !graph[v].count(u))
        throw Error(ErrorCode::InvalidArgument, "neighbor graph is not symmetric");

  std::vector<Priority> prio(n);
  std::vector<LubyState> state(n, LubyState::Out);
  for (int u = 0; u < n; ++u) {
    prio[u] = make_priority(u, lowQualityCounts[u], seed, iteration);
    bool ok = lowQualityCounts[u] > 0 && (eligible.empty() || eligible[u]);
    if (ok) state[u] = LubyState::Undecided;
  }
  std::vector<std::pair<Priority, LubyState>> nb;
  for (bool changed = true; changed;) {
    changed = false;
    auto next = state;
    for (int u = 0; u < n; ++u) {
      if (state[u] != LubyState::Undecided) continue;
      nb.clear();
      for (int v : graph[u]) nb.emplace_back(prio[v], state[v]);
      next[u] = luby_decide(prio[u], nb);
      changed = changed || next[u] != LubyState::Undecided;
    }
    state = std::move(next);
  }

  ShiftPlan plan;
  for (int u = 0; u < n; ++u)
    if (state[u] == LubyState::In) {
      plan.receivers.insert(u);
      plan.senders[u];
    }
  for (int u = 0; u < n; ++u) {
    if (state[u] == LubyState::In) continue;
    int best = -1;
    for (int v : graph[u])
      if (state[v] == LubyState::In && (best < 0 || prio[v] > prio[best])) best = v;
    if (best >= 0) plan.senders[best].insert(u);
  }
  return plan;
}

bool is_independent(const std::vector<std::set<int>>& graph, const std::set<int>& set) {
  for (int u : set)
    for (int v : graph[u])
      if (set.count(v)) return false;
  return true;
}

bool is_maximal(const std::vector<std::set<int>>& graph, const std::set<int>& set,
                const std::vector<bool>& candidate) {
  for (int u = 0; u < static_cast<int>(graph.size()); ++u) {
    if (!candidate[u] || set.count(u)) continue;
    bool covered = false;
    for (int v : graph[u]) covered = covered || set.count(v);
    if (!covered) return false;
  }
  return true;
}

}  // namespace tetshift::orch
