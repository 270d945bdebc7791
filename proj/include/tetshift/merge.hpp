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

#include <set>

#include "tetshift/mesh.hpp"
#include "tetshift/serialize.hpp"

namespace tetshift {

// vertex.interface <=> gid in sharedGids; a tet is interface (and frozen) iff
// any of its vertices is.
void classify_interface(Subdomain& sub, const std::set<GlobalId>& sharedGids);
inline void classify_interface(Subdomain& sub) { classify_interface(sub, sub.shared_gids()); }

// Scatters a shipment into the receiver. Vertices already present (by gid)
// are unified; new ones are appended. Sharers are updated from the
// shipment's holder lists and the receiver is reclassified, so tets that
// just became interior are unfrozen.
// Throws Error(ConformityBreak) naming the offending gids when the result
// would not conform; the receiver is left untouched in that case.
void merge_scatter(Subdomain& receiver, const Shipment& shipment);

}  // namespace tetshift
