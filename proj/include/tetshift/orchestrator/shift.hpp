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

#include <map>
#include <set>
#include <span>
#include <vector>

#include "tetshift/mesh.hpp"
#include "tetshift/orchestrator/coloring.hpp"
#include "tetshift/serialize.hpp"

namespace tetshift::orch {

struct GatherOptions {
  int layers = 5;
  SeedConnectivity seeds = SeedConnectivity::PointConnected;
  double maxShipFraction = 0.6;
};

// layersAdapted once the sender has been through an MII pass, else layersFresh.
int layers_for(const Subdomain& sender, const ShiftPlan& plan);

// Tets of `sender` to ship to `receiver`, ascending: the seeds, L-1 rings of
// face neighbors around them, and whatever else must go so the sender stays
// simply connected. Empty when nothing is shared with the receiver. Throws
// Error(OverGather) past maxShipFraction of the sender's tets.
std::vector<int> select_shipment(const Subdomain& sender, int receiver, const GatherOptions& opts);

// Face-hop depth of every tet from the seed set (seeds are depth 1, tets
// never reached are 0), for tets within `layers`.
std::vector<int> layer_depths(const Subdomain& sender, int receiver, int layers,
                              SeedConnectivity seeds);

// Copies `tets` into a shipment without touching the sender. Each vertex
// carries the holders known to the sender before the shift, sender included.
Shipment build_shipment(const Subdomain& sender, int receiver, std::span<const int> tets);

// A holder-set change for one gid: `added` gained it, `removed` dropped it.
struct HolderDelta {
  GlobalId gid;
  int added = -1;
  int removed = -1;

  friend bool operator==(const HolderDelta&, const HolderDelta&) = default;
};

Bytes pack_deltas(std::span<const HolderDelta> deltas);
std::vector<HolderDelta> unpack_deltas(std::span<const std::uint8_t> bytes);

// Deletes the shipped tets from the sender, drops vertices nothing uses any
// more and records the receiver as a sharer of every shipped gid the sender
// keeps. Returns, per neighbor, the deltas that neighbor must apply.
std::map<int, std::vector<HolderDelta>> remove_shipped(Subdomain& sender, int receiver,
                                                       std::span<const int> tets);

// Applies deltas to the sharers of gids `sub` holds; other gids are ignored.
void apply_deltas(Subdomain& sub, std::span<const HolderDelta> deltas);

// Applies deltas to an explicit holder table (used by senders to finish the
// holder lists of gids they shipped and may no longer hold).
void apply_deltas(std::map<GlobalId, std::set<int>>& holders,
                  std::span<const HolderDelta> deltas);

// True when receiver plus every shipment still forms one simply connected
// piece. Does not modify `receiver`.
bool merge_keeps_connectivity(const Subdomain& receiver, std::span<const Shipment> shipments);

}  // namespace tetshift::orch
