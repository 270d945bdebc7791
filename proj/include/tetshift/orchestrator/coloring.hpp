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

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace tetshift::orch {

enum class ColoringMode { Centralized, Decentralized };
enum class SeedConnectivity { PointConnected, FaceConnected };

// Higher compares greater and wins.
struct Priority {
  std::int64_t lowQuality = 0;
  std::uint64_t tiebreak = 0;
  int id = 0;

  friend bool operator==(const Priority&, const Priority&) = default;
  friend auto operator<=>(const Priority&, const Priority&) = default;
};

// Draw from a generator seeded with (seed, iteration, id), so every
// subdomain can recompute any neighbor's tiebreak without asking.
std::uint64_t luby_tiebreak(std::uint64_t seed, int iteration, int id);
Priority make_priority(int id, std::int64_t lowQuality, std::uint64_t seed, int iteration);

enum class LubyState : std::uint8_t { Undecided = 0, In = 1, Out = 2 };

// One round for an undecided node given each neighbor's state after the
// previous round: Out next to an In, In when it beats every undecided
// neighbor, otherwise still undecided.
LubyState luby_decide(const Priority& self,
                      std::span<const std::pair<Priority, LubyState>> neighbors);

struct ShiftPlan {
  std::set<int> receivers;
  // receiver -> the neighbors shipping to it this iteration
  std::map<int, std::set<int>> senders;
  int layersFresh = 5;
  int layersAdapted = 10;
  SeedConnectivity seedConnectivity = SeedConnectivity::PointConnected;

  // -1 when `s` ships to nobody.
  int receiver_of(int s) const;
};

// Maximal independent set over the eligible nodes by synchronous rounds of
// luby_decide, then each remaining neighbor of a receiver is assigned to its
// highest-priority receiver. A node is eligible when its count is positive
// and `eligible` (if given) allows it.
ShiftPlan color_receivers(const std::vector<std::set<int>>& graph,
                          std::span<const std::int64_t> lowQualityCounts, std::uint64_t seed,
                          int iteration = 0, std::span<const bool> eligible = {});

bool is_independent(const std::vector<std::set<int>>& graph, const std::set<int>& set);
// Every candidate outside the set has a neighbor inside it.
bool is_maximal(const std::vector<std::set<int>>& graph, const std::set<int>& set,
                const std::vector<bool>& candidate);

}  // namespace tetshift::orch
