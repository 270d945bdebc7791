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
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tetshift/geometry.hpp"
#include "tetshift/mesh.hpp"

namespace tetshift {

// Symmetric 3x3 tensor stored as m11 m12 m13 m22 m23 m33 (units 1/length^2).
struct MetricTensor {
  std::array<double, 6> m{1, 0, 0, 1, 0, 1};

  static MetricTensor identity() { return {}; }
  static MetricTensor isotropic(double lambda) { return {{lambda, 0, 0, lambda, 0, lambda}}; }
  static MetricTensor diagonal(double a, double b, double c) { return {{a, 0, 0, b, 0, c}}; }
  static MetricTensor from_matrix(const Eigen::Matrix3d& a);

  Eigen::Matrix3d matrix() const;
  double det() const;
  bool spd() const;
  // v^T M v
  double quad(const Vec3& v) const {
    return m[0] * v.x() * v.x() + m[3] * v.y() * v.y() + m[5] * v.z() * v.z() +
           2.0 * (m[1] * v.x() * v.y() + m[2] * v.x() * v.z() + m[4] * v.y() * v.z());
  }
  MetricTensor scaled(double s) const {
    MetricTensor r = *this;
    for (double& x : r.m) x *= s;
    return r;
  }

  friend bool operator==(const MetricTensor&, const MetricTensor&) = default;
};

// Matrix logarithm / exponential of symmetric matrices via eigendecomposition.
Eigen::Matrix3d log_spd(const MetricTensor& t);
MetricTensor exp_sym(const Eigen::Matrix3d& a);

enum class MetricInterpolation { LogEuclidean, Arithmetic };

// Weighted mean of tensors; weights need not be normalized.
MetricTensor interpolate(std::span<const MetricTensor> tensors, std::span<const double> weights,
                         MetricInterpolation mode = MetricInterpolation::LogEuclidean);

// Either an analytic closure over positions or one tensor per mesh vertex.
class MetricField {
 public:
  using Fn = std::function<MetricTensor(const Vec3&)>;

  static MetricField analytic(std::string name, Fn fn);
  static MetricField discrete(std::vector<MetricTensor> tensors);

  bool is_analytic() const { return static_cast<bool>(fn_); }
  const std::string& name() const { return name_; }
  const std::vector<MetricTensor>& tensors() const { return tensors_; }

  // Analytic fields only.
  MetricTensor eval(const Vec3& x) const;
  MetricTensor at(const TetMesh& mesh, int vertex) const;
  // Throws Error(InvalidArgument) if a discrete field does not match the mesh.
  void check_aligned(const TetMesh& mesh) const;

  MetricField scaled(double factor) const;

 private:
  std::string name_;
  Fn fn_;
  std::vector<MetricTensor> tensors_;
};

// h^-2 I everywhere.
MetricField uniform_metric(double h);
// Size h0 + growth * x[axis] along the axis and h0 + growth across it.
MetricField linear_boundary_layer_metric(double h0, double growth, int axis);
// Isotropic size h0 + growth * |x| growing away from the origin.
MetricField radial_metric(double h0, double growth);

// Piecewise interpolation of per-vertex tensors over a background mesh,
// usable wherever an analytic field is required.
MetricField background_metric(const TetMesh& background, std::vector<MetricTensor> tensors,
                              MetricInterpolation mode = MetricInterpolation::LogEuclidean);

// "uniform:h", "linear-boundary-layer:h0,growth,axis", "radial:h0,growth",
// or "file:path" (discrete, interpolated over the given background mesh).
MetricField parse_metric_spec(const std::string& spec, const TetMesh& background);

// ASCII: nVerts, then "m11 m12 m13 m22 m23 m33" per line.
std::vector<MetricTensor> read_metric(std::istream& in);
std::vector<MetricTensor> read_metric_file(const std::string& path);
void write_metric(std::ostream& out, std::span<const MetricTensor> tensors);

}  // namespace tetshift
