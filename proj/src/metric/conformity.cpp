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

#include "tetshift/conformity.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <ostream>

#include "tetshift/adjacency.hpp"
#include "tetshift/error.hpp"

namespace tetshift {

namespace {

// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

double max_edge_sq(const std::array<Vec3, 4>& p) {
  double m = 0;
  for (const auto& e : kTetEdge) m = std::max(m, (p[e[1]] - p[e[0]]).squaredNorm());
  return m;
}

}  // namespace

double discrete_complexity(const TetMesh& mesh, const MetricField& field) {
  field.check_aligned(mesh);
  std::vector<double> dual(mesh.vertices.size(), 0.0);
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    double q = std::abs(mesh.volume(static_cast<int>(t))) / 4.0;
    for (int v : mesh.tets[t].v) dual[v] += q;
  }
  double c = 0.0;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (dual[i] == 0.0) continue;
    auto m = field.at(mesh, static_cast<int>(i));
    double d = m.det();
    if (!(d > 0) || !m.spd())
      throw Error(ErrorCode::NonSPD, "metric at vertex " + std::to_string(i) + " is not SPD");
    c += std::sqrt(d) * dual[i];
  }
  return c;
}

double continuous_complexity(const MetricField& field, const TetMesh& domain, int order) {
  std::vector<double> x, w;
  gauss_legendre(std::max(order, 1), x, w);
  double total = 0.0;
  for (std::size_t t = 0; t < domain.tets.size(); ++t) {
    const auto& q = domain.tets[t].v;
    const Vec3& a = domain.pos(q[0]);
    Vec3 e1 = domain.pos(q[1]) - a, e2 = domain.pos(q[2]) - a, e3 = domain.pos(q[3]) - a;
    double jac = std::abs(e1.dot(e2.cross(e3)));
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < x.size(); ++j)
        for (std::size_t k = 0; k < x.size(); ++k) {
          double u = x[i], v = x[j], s = x[k];
          double xi = u, eta = (1 - u) * v, zeta = (1 - u) * (1 - v) * s;
          double dj = (1 - u) * (1 - u) * (1 - v);
          Vec3 p = a + xi * e1 + eta * e2 + zeta * e3;
          double d = field.eval(p).det();
          acc += w[i] * w[j] * w[k] * dj * std::sqrt(std::max(d, 0.0));
        }
    total += acc * jac;
  }
  return total;
}

MetricField scale_to_complexity(const MetricField& field, const TetMesh& mesh, double target) {
  if (!(target > 0)) throw Error(ErrorCode::InvalidTarget, "target complexity must be positive");
  double c = discrete_complexity(mesh, field);
  if (!(c > 0)) throw Error(ErrorCode::InvalidTarget, "field has zero complexity on this mesh");
  if (c == target) return field;
  return field.scaled(std::pow(target / c, 2.0 / 3.0));
}

double metric_edge_length(const Vec3& a, const Vec3& b, const MetricTensor& ma,
                          const MetricTensor& mb) {
  Vec3 v = b - a;
  if (v.squaredNorm() == 0.0) throw Error(ErrorCode::ZeroEdge, "edge endpoints coincide");
  return edge_length_from_endpoints(std::sqrt(ma.quad(v)), std::sqrt(mb.quad(v)));
}

double mean_ratio_signed(const std::array<Vec3, 4>& p, const MetricTensor& mean) {
  double vol = signed_volume(p[0], p[1], p[2], p[3]);
  double d = mean.det();
  double denom = 0.0;
  for (const auto& e : kTetEdge) denom += mean.quad(p[e[1]] - p[e[0]]);
  if (!(denom > 0) || !(d > 0)) return 0.0;
  static const double kNorm = 36.0 / std::cbrt(3.0);
  double s = vol * std::sqrt(d);
  double num = std::cbrt(s * s);
  return (vol > 0 ? kNorm : -kNorm) * num / denom;
}

double mean_ratio(const std::array<Vec3, 4>& p, const std::array<MetricTensor, 4>& vertexMetrics,
                  MetricInterpolation mode) {
  double vol = signed_volume(p[0], p[1], p[2], p[3]);
  double l = max_edge_sq(p);
  if (!(vol > 1e-14 * l * std::sqrt(l)))
    throw Error(ErrorCode::DegenerateTet, "tet volume is not positive");
  static const std::array<double, 4> kQuarter = {0.25, 0.25, 0.25, 0.25};
  return mean_ratio_signed(p, interpolate(vertexMetrics, kQuarter, mode));
}

double mean_ratio(const std::array<Vec3, 4>& p, const MetricField& field,
                  MetricInterpolation mode) {
  std::array<MetricTensor, 4> m;
  for (int j = 0; j < 4; ++j) m[j] = field.eval(p[j]);
  return mean_ratio(p, m, mode);
}

Histogram Histogram::log_spaced(int bins, double lo, double hi) {
  Histogram h;
  h.counts.assign(bins, 0);
  for (int i = 0; i <= bins; ++i)
    h.edges.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / bins));
  h.edges.front() = lo;
  h.edges.back() = hi;
  return h;
}

Histogram Histogram::linear(int bins, double lo, double hi) {
  Histogram h;
  h.counts.assign(bins, 0);
  for (int i = 0; i <= bins; ++i) h.edges.push_back(lo + (hi - lo) * i / bins);
  return h;
}

void Histogram::add(double x) {
  auto it = std::upper_bound(edges.begin(), edges.end(), x);
  auto bin = static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
  bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(counts.size()) - 1);
  ++counts[bin];
}

std::int64_t Histogram::total() const {
  std::int64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

double Histogram::fraction(std::size_t bin) const {
  auto t = total();
  return t ? static_cast<double>(counts[bin]) / t : 0.0;
}

std::vector<MetricTensor> sample_vertices(const TetMesh& mesh, const MetricField& field) {
  field.check_aligned(mesh);
  if (!field.is_analytic()) return field.tensors();
  std::vector<MetricTensor> out(mesh.vertices.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = field.eval(mesh.vertices[i].pos);
  return out;
}

namespace {

double tet_quality(const TetMesh& mesh, const Tetrahedron& t, const std::vector<MetricTensor>& vm,
                   MetricInterpolation mode) {
  std::array<Vec3, 4> p;
  std::array<MetricTensor, 4> m;
  for (int j = 0; j < 4; ++j) {
    p[j] = mesh.pos(t.v[j]);
    m[j] = vm[t.v[j]];
  }
  static const std::array<double, 4> kQuarter = {0.25, 0.25, 0.25, 0.25};
  return mean_ratio_signed(p, interpolate(m, kQuarter, mode));
}

}  // namespace

QualityReport quality_report(const TetMesh& mesh, const MetricField& field,
                             const QualityOptions& opts) {
  auto vm = sample_vertices(mesh, field);
  QualityReport r;
  r.minEdge = r.minQ = std::numeric_limits<double>::infinity();
  r.maxEdge = r.maxQ = -std::numeric_limits<double>::infinity();
  double sumL = 0, sumQ = 0;
  for (const auto& e : unique_edges(mesh)) {
    const Vec3 &a = mesh.pos(e.v[0]), &b = mesh.pos(e.v[1]);
    double len = metric_edge_length(a, b, vm[e.v[0]], vm[e.v[1]]);
    r.edgeLength.add(len);
    ++r.edgeCount;
    if (len >= opts.unitLow && len <= opts.unitHigh) ++r.edgesInUnitBand;
    sumL += len;
    r.minEdge = std::min(r.minEdge, len);
    r.maxEdge = std::max(r.maxEdge, len);
  }
  for (const auto& t : mesh.tets) {
    double q = tet_quality(mesh, t, vm, opts.interpolation);
    r.meanRatio.add(q);
    ++r.tetCount;
    if (q >= opts.qualityFloor) ++r.tetsAboveFloor;
    sumQ += q;
    r.minQ = std::min(r.minQ, q);
    r.maxQ = std::max(r.maxQ, q);
  }
  if (r.edgeCount) r.meanEdge = sumL / r.edgeCount;
  else r.minEdge = r.maxEdge = 0;
  if (r.tetCount) r.meanQ = sumQ / r.tetCount;
  else r.minQ = r.maxQ = 0;
  return r;
}

LowQualityCount count_low_quality(const TetMesh& mesh, const MetricField& field,
                                  const QualityOptions& opts) {
  auto vm = sample_vertices(mesh, field);
  LowQualityCount out;
  for (const auto& t : mesh.tets) {
    bool low = tet_quality(mesh, t, vm, opts.interpolation) < opts.qualityFloor;
    for (int e = 0; e < 6 && !low; ++e) {
      int a = t.v[kTetEdge[e][0]], b = t.v[kTetEdge[e][1]];
      double len = metric_edge_length(mesh.pos(a), mesh.pos(b), vm[a], vm[b]);
      low = len < opts.unitLow || len > opts.unitHigh;
    }
    if (!low) continue;
    ++out.total;
    if (t.frozen()) ++out.frozen;
  }
  return out;
}

void write_quality_csv(std::ostream& out, const QualityReport& r) {
  out << "histogram,bin,lo,hi,count\n" << std::setprecision(10);
  auto dump = [&](const char* name, const Histogram& h) {
    for (std::size_t i = 0; i < h.counts.size(); ++i)
      out << name << ',' << i << ',' << h.edges[i] << ',' << h.edges[i + 1] << ',' << h.counts[i]
          << '\n';
  };
  dump("edge_length", r.edgeLength);
  dump("mean_ratio", r.meanRatio);
}

void write_quality_summary(std::ostream& out, const QualityReport& r) {
  out << std::setprecision(6);
  out << "edges " << r.edgeCount << " tets " << r.tetCount << '\n';
  out << "edge length min " << r.minEdge << " mean " << r.meanEdge << " max " << r.maxEdge << '\n';
  out << "mean ratio min " << r.minQ << " mean " << r.meanQ << '\n';
  out << "unit-band fraction " << r.unit_band_fraction() << '\n';
  out << "above-floor fraction " << r.above_floor_fraction() << '\n';
}

void write_quality_comparison(std::ostream& out, const QualityReport& a, const QualityReport& b) {
  out << "histogram,bin,lo,hi,fraction_a,fraction_b,abs_diff\n" << std::setprecision(10);
  auto dump = [&](const char* name, const Histogram& ha, const Histogram& hb) {
    for (std::size_t i = 0; i < ha.counts.size(); ++i) {
      double fa = ha.fraction(i), fb = hb.fraction(i);
      out << name << ',' << i << ',' << ha.edges[i] << ',' << ha.edges[i + 1] << ',' << fa << ','
          << fb << ',' << std::abs(fa - fb) << '\n';
    }
  };
  dump("edge_length", a.edgeLength, b.edgeLength);
  dump("mean_ratio", a.meanRatio, b.meanRatio);
}

}  // namespace tetshift
