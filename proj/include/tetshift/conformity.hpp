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
#include <iosfwd>
#include <vector>

#include "tetshift/mesh.hpp"
#include "tetshift/metric.hpp"

namespace tetshift {

// C(M) = sum_i sqrt(det M_i) V_i, with V_i the barycentric dual volume
// (a quarter of each incident tet). Throws Error(NonSPD) naming the vertex.
double discrete_complexity(const TetMesh& mesh, const MetricField& field);

// Integral of sqrt(det M(x)) over the mesh, by collapsed Gauss-Legendre
// quadrature with `order` points per direction on every tet.
double continuous_complexity(const MetricField& field, const TetMesh& domain, int order = 4);

// Multiplies the field by (target / C(M))^(2/3) so that its discrete
// complexity on `mesh` becomes `target`. Throws Error(InvalidTarget) when
// target <= 0.
MetricField scale_to_complexity(const MetricField& field, const TetMesh& mesh, double target);

// Threshold on |L_a - L_b| separating the logarithmic and arithmetic means.
inline constexpr double kEdgeLengthBranch = 0.001;

// Edge length in the metric, interpolating the endpoint lengths
// L_a = sqrt(v^T M_a v), L_b = sqrt(v^T M_b v) geometrically. Throws
// Error(ZeroEdge) when a == b.
double metric_edge_length(const Vec3& a, const Vec3& b, const MetricTensor& ma,
                          const MetricTensor& mb);

inline double edge_length_from_endpoints(double la, double lb) {
  if (std::abs(la - lb) > kEdgeLengthBranch) return (la - lb) / std::log(la / lb);
  return 0.5 * (la + lb);
}

// Mean ratio of a tet under a single tensor; 1 for the equilateral element.
// Returns a value <= 0 for inverted or flat tets instead of throwing.
double mean_ratio_signed(const std::array<Vec3, 4>& p, const MetricTensor& mean);

// Mean ratio using the tensor interpolated at the centroid from the four
// vertex tensors. Throws Error(DegenerateTet) when the volume is not
// positive beyond round-off.
double mean_ratio(const std::array<Vec3, 4>& p, const std::array<MetricTensor, 4>& vertexMetrics,
                  MetricInterpolation mode = MetricInterpolation::LogEuclidean);
double mean_ratio(const std::array<Vec3, 4>& p, const MetricField& field,
                  MetricInterpolation mode = MetricInterpolation::LogEuclidean);

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::int64_t> counts;

  static Histogram log_spaced(int bins, double lo, double hi);
  static Histogram linear(int bins, double lo, double hi);

  // Out-of-range values land in the first or last bin.
  void add(double x);
  std::int64_t total() const;
  double fraction(std::size_t bin) const;
};

struct QualityOptions {
  double qualityFloor = 0.8;
  double unitLow = 1.0 / std::sqrt(2.0);
  double unitHigh = std::sqrt(2.0);
  MetricInterpolation interpolation = MetricInterpolation::LogEuclidean;
};

struct QualityReport {
  Histogram edgeLength = Histogram::log_spaced(50, 1.0 / 16.0, 16.0);
  Histogram meanRatio = Histogram::linear(50, 0.0, 1.0);
  std::int64_t edgeCount = 0;
  std::int64_t tetCount = 0;
  std::int64_t edgesInUnitBand = 0;
  std::int64_t tetsAboveFloor = 0;
  double minEdge = 0, meanEdge = 0, maxEdge = 0;
  double minQ = 0, meanQ = 0, maxQ = 0;

  double unit_band_fraction() const {
    return edgeCount ? static_cast<double>(edgesInUnitBand) / edgeCount : 1.0;
  }
  double above_floor_fraction() const {
    return tetCount ? static_cast<double>(tetsAboveFloor) / tetCount : 1.0;
  }
};

std::vector<MetricTensor> sample_vertices(const TetMesh& mesh, const MetricField& field);

QualityReport quality_report(const TetMesh& mesh, const MetricField& field,
                             const QualityOptions& opts = {});

// A tet is low quality if any of its edges falls outside the unit band or its
// mean ratio is below the floor.
struct LowQualityCount {
  std::int64_t total = 0;
  std::int64_t frozen = 0;
};
LowQualityCount count_low_quality(const TetMesh& mesh, const MetricField& field,
                                  const QualityOptions& opts = {});

// Histogram CSV: "histogram,bin,lo,hi,count".
void write_quality_csv(std::ostream& out, const QualityReport& r);
void write_quality_summary(std::ostream& out, const QualityReport& r);
// Per-bin absolute differences of normalized histograms:
// "histogram,bin,lo,hi,fraction_a,fraction_b,abs_diff".
void write_quality_comparison(std::ostream& out, const QualityReport& a, const QualityReport& b);

}  // namespace tetshift
