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

#include <span>
#include <string>
#include <vector>

#include "tetshift/mesh.hpp"

namespace tetshift::orch {

struct InvariantReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Checks a consistent cut of all subdomains:
//  - every face, keyed by its GlobalId triple, is used by two tets or by one
//    tet and one boundary facet;
//  - a gid names one point: no duplicates inside a subdomain, equal
//    coordinates everywhere, and no two gids at one point;
//  - every tet is positively oriented and the total volume matches
//    `expectedVolume` to `volumeTol` relative (skipped when <= 0);
//  - every non-empty subdomain is simply connected;
//  - sharers and neighbor sets equal the ones rebuilt from scratch.
InvariantReport check_global_invariants(std::span<const Subdomain> subs, double expectedVolume,
                                        double volumeTol = 1e-9);

// One mesh from all subdomains: vertices unified by gid in ascending gid
// order, then tets and facets subdomain by subdomain.
TetMesh assemble(std::span<const Subdomain> subs);

}  // namespace tetshift::orch
