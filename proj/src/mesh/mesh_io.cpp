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

#include "tetshift/mesh_io.hpp"

#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <vector>

#include "tetshift/error.hpp"

namespace tetshift {

namespace {

// Yields non-empty, comment-stripped lines.
class LineSource {
 public:
  explicit LineSource(std::istream& in) : in_(in) {}

  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++lineNo_;
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      std::istringstream ss(line);
      tokens.clear();
      for (std::string tok; ss >> tok;) tokens.push_back(tok);
      if (!tokens.empty()) return true;
    }
    return false;
  }
  int line() const { return lineNo_; }

 private:
  std::istream& in_;
  int lineNo_ = 0;
};

template <typename T>
T parse(const std::string& s, int line) {
  std::istringstream ss(s);
  T x;
  if (!(ss >> x) || !ss.eof())
    throw Error(ErrorCode::Io, "line " + std::to_string(line) + ": cannot parse '" + s + "'");
  return x;
}

}  // namespace

TetMesh read_mesh(std::istream& in) {
  LineSource src(in);
  std::vector<std::string> tok;
  if (!src.next(tok) || tok.size() != 3) throw Error(ErrorCode::Io, "missing mesh header");
  auto nv = parse<long>(tok[0], src.line());
  auto nt = parse<long>(tok[1], src.line());
  auto nf = parse<long>(tok[2], src.line());
  if (nv < 0 || nt < 0 || nf < 0) throw Error(ErrorCode::Io, "negative counts in header");

  TetMesh m;
  m.vertices.resize(nv);
  for (auto& v : m.vertices) {
    if (!src.next(tok) || (tok.size() != 3 && tok.size() != 5))
      throw Error(ErrorCode::Io, "line " + std::to_string(src.line()) + ": expected vertex");
    v.pos = Vec3(parse<double>(tok[0], src.line()), parse<double>(tok[1], src.line()),
                 parse<double>(tok[2], src.line()));
    if (tok.size() == 5)
      v.gid = GlobalId{parse<long>(tok[3], src.line()), parse<long>(tok[4], src.line())};
  }
  auto index = [&](const std::string& s) {
    auto i = parse<long>(s, src.line());
    if (i < 0 || i >= nv)
      throw Error(ErrorCode::Io, "line " + std::to_string(src.line()) + ": vertex index out of range");
    return static_cast<int>(i);
  };
  m.tets.resize(nt);
  for (auto& t : m.tets) {
    if (!src.next(tok) || tok.size() != 4)
      throw Error(ErrorCode::Io, "line " + std::to_string(src.line()) + ": expected tet");
    for (int j = 0; j < 4; ++j) t.v[j] = index(tok[j]);
  }
  m.facets.resize(nf);
  for (auto& f : m.facets) {
    if (!src.next(tok) || tok.size() != 4)
      throw Error(ErrorCode::Io, "line " + std::to_string(src.line()) + ": expected facet");
    for (int j = 0; j < 3; ++j) f.v[j] = index(tok[j]);
    f.tag = parse<int>(tok[3], src.line());
  }
  m.mark_boundary_vertices();
  return m;
}

TetMesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_mesh(in);
}

void write_mesh(std::ostream& out, const TetMesh& mesh, bool withGids) {
  out << mesh.vertices.size() << ' ' << mesh.tets.size() << ' ' << mesh.facets.size() << '\n';
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) {
    out << v.pos.x() << ' ' << v.pos.y() << ' ' << v.pos.z();
    if (withGids) out << ' ' << v.gid.owner << ' ' << v.gid.local;
    out << '\n';
  }
  for (const auto& t : mesh.tets)
    out << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' ' << t.v[3] << '\n';
  for (const auto& f : mesh.facets)
    out << f.v[0] << ' ' << f.v[1] << ' ' << f.v[2] << ' ' << f.tag << '\n';
}

void write_mesh_file(const std::string& path, const TetMesh& mesh, bool withGids) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  write_mesh(out, mesh, withGids);
}

TetMesh make_cube_mesh(int n, double size, double jitter, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "cube resolution must be >= 1");
  if (jitter < 0 || jitter >= 0.25)
    throw Error(ErrorCode::InvalidArgument, "cube jitter must lie in [0, 0.25)");
  TetMesh m;
  auto id = [n](int i, int j, int k) { return (k * (n + 1) + j) * (n + 1) + i; };
  const double h = size / n;
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        Vertex v;
        // Snap the far layer to exactly 'size' so boundary planes are exact.
        v.pos = Vec3(i == n ? size : i * h, j == n ? size : j * h, k == n ? size : k * h);
        m.vertices.push_back(v);
      }
  // Kuhn subdivision: one tet per monotone path from corner 000 to 111.
  static constexpr int kPaths[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                       {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (const auto& path : kPaths) {
          int c[3] = {i, j, k};
          Tetrahedron t;
          t.v[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[path[s]];
            t.v[s + 1] = id(c[0], c[1], c[2]);
          }
          m.tets.push_back(t);
          auto& back = m.tets.back();
          if (m.volume(static_cast<int>(m.tets.size()) - 1) < 0) std::swap(back.v[2], back.v[3]);
        }
  // Boundary facets: tet faces lying on a cube side, oriented outward.
  for (const auto& t : m.tets)
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> tri = {t.v[kTetFace[f][0]], t.v[kTetFace[f][1]], t.v[kTetFace[f][2]]};
      for (int axis = 0; axis < 3; ++axis)
        for (int side = 0; side < 2; ++side) {
          double plane = side ? size : 0.0;
          bool on = true;
          for (int v : tri) on = on && m.vertices[v].pos[axis] == plane;
          if (on) m.facets.push_back({tri, 2 * axis + side});
        }
    }
  m.mark_boundary_vertices();
  if (jitter > 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-jitter * h, jitter * h);
    for (auto& v : m.vertices) {
      if (v.boundary()) continue;
      for (int d = 0; d < 3; ++d) v.pos[d] += u(rng);
    }
  }
  return m;
}

}  // namespace tetshift
