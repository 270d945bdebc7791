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
#include <utility>
#include <vector>

#include "tetshift/mesh.hpp"

namespace tetshift {

struct ConnectivityReport {
  bool connected = true;
  int components = 0;
  std::vector<int> pinchVertices;
  std::vector<std::pair<int, int>> pinchEdges;
};

// A tet set is simply connected when it forms one face-connected component and
// the tets around every vertex and every edge are face-connected as well.
ConnectivityReport check_simple_connectivity(const TetMesh& mesh);
ConnectivityReport check_simple_connectivity(const TetMesh& mesh, std::span<const int> tets);

// Face-connected component label per entry of "tets"; returns component count.
int label_components(const TetMesh& mesh, std::span<const int> tets, std::vector<int>& label);

}  // namespace tetshift
