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

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "tetshift/conformity.hpp"
#include "tetshift/error.hpp"
#include "tetshift/metric.hpp"

namespace tetshift {
namespace {

using testing::random_spd;
using testing::regular_tet;
using testing::regular_tet_points;

// Shape measure written out directly from its definition, for one tensor.
double q_oracle(const std::array<Vec3, 4>& p, const Eigen::Matrix3d& m) {
  double vol = std::abs((p[1] - p[0]).dot((p[2] - p[0]).cross(p[3] - p[0]))) / 6.0;
  double sum = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      Vec3 e = p[j] - p[i];
      sum += e.dot(m * e);
    }
  return 36.0 / std::cbrt(3.0) * std::pow(vol * std::sqrt(m.determinant()), 2.0 / 3.0) / sum;
}

TEST(MetricTensor, MatrixRoundTripAndSpd) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    auto t = random_spd(rng);
    EXPECT_TRUE(t.spd());
    auto back = MetricTensor::from_matrix(t.matrix());
    for (int k = 0; k < 6; ++k) EXPECT_DOUBLE_EQ(back.m[k], t.m[k]);
    EXPECT_NEAR(t.det(), t.matrix().determinant(), 1e-12 * std::abs(t.det()));
  }
  EXPECT_FALSE(MetricTensor::diagonal(1, -1, 1).spd());
  EXPECT_FALSE(MetricTensor::diagonal(1, 0, 1).spd());
}

TEST(MetricTensor, LogExpRoundTrip) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 50; ++i) {
    auto t = random_spd(rng, 1e-3, 1e3);
    auto back = exp_sym(log_spd(t));
    Eigen::Matrix3d d = back.matrix() - t.matrix();
    EXPECT_LT(d.norm(), 1e-9 * t.matrix().norm());
  }
}

TEST(Interpolation, LogEuclideanProperties) {
  std::mt19937_64 rng(13);
  auto a = random_spd(rng);
  std::array<MetricTensor, 3> same{a, a, a};
  std::array<double, 3> w{0.2, 5.0, 1.0};
  auto r = interpolate(same, w);
  EXPECT_LT((r.matrix() - a.matrix()).norm(), 1e-10 * a.matrix().norm());

  // M and its inverse average to the identity.
  std::array<MetricTensor, 2> pair{a, MetricTensor::from_matrix(a.matrix().inverse())};
  std::array<double, 2> half{3.0, 3.0};
  auto id = interpolate(pair, half);
  EXPECT_LT((id.matrix() - Eigen::Matrix3d::Identity()).norm(), 1e-10);

  auto b = random_spd(rng);
  std::array<MetricTensor, 2> ab{a, b};
  std::array<double, 2> wab{1.0, 3.0};
  auto ar = interpolate(ab, wab, MetricInterpolation::Arithmetic);
  Eigen::Matrix3d expect = 0.25 * a.matrix() + 0.75 * b.matrix();
  EXPECT_LT((ar.matrix() - expect).norm(), 1e-12 * expect.norm());
  EXPECT_TRUE(interpolate(ab, wab).spd());
}

TEST(EdgeLength, UniformAndConstantFields) {
  Vec3 a(0.1, 0.2, 0.3), b(0.7, -0.4, 1.1);
  auto u = MetricTensor::isotropic(1.0 / (0.25 * 0.25));
  EXPECT_NEAR(metric_edge_length(a, b, u, u), (b - a).norm() / 0.25, 1e-12);

  std::mt19937_64 rng(14);
  for (int i = 0; i < 20; ++i) {
    auto m = random_spd(rng);
    Vec3 e = b - a;
    EXPECT_NEAR(metric_edge_length(a, b, m, m), std::sqrt(e.dot(m.matrix() * e)), 1e-12);
  }
  EXPECT_THROW(metric_edge_length(a, a, u, u), Error);
}

TEST(EdgeLength, VaryingEndpointsUseTheLogarithmicMean) {
  Vec3 a(0, 0, 0), b(1, 0, 0);
  auto ma = MetricTensor::isotropic(1.0);
  auto mb = MetricTensor::isotropic(4.0);
  // L_a = 1, L_b = 2 -> (1 - 2) / ln(1/2)
  EXPECT_NEAR(metric_edge_length(a, b, ma, mb), 1.0 / std::log(2.0), 1e-12);
  EXPECT_NEAR(metric_edge_length(a, b, ma, mb), metric_edge_length(b, a, mb, ma), 1e-15);
  EXPECT_DOUBLE_EQ(edge_length_from_endpoints(2.0, 2.0005), 2.00025);
}

TEST(MeanRatio, RegularTetIsOneAndScaleInvariant) {
  auto p = regular_tet_points(0.37);
  EXPECT_NEAR(mean_ratio_signed(p, MetricTensor::identity()), 1.0, 1e-12);
  for (double alpha : {1e-3, 0.1, 10.0, 1e3})
    EXPECT_NEAR(mean_ratio_signed(p, MetricTensor::isotropic(alpha)), 1.0, 1e-9);
}

TEST(MeanRatio, AffineOracle) {
  // For M = A^T A, the quality of p under M equals the Euclidean quality of A p.
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 200; ++i) {
    auto m = random_spd(rng);
    Eigen::LLT<Eigen::Matrix3d> llt(m.matrix());
    Eigen::Matrix3d a = llt.matrixL().transpose();
    std::array<Vec3, 4> p, ap;
    for (int k = 0; k < 4; ++k) {
      p[k] = Vec3(u(rng), u(rng), u(rng));
      ap[k] = a * p[k];
    }
    double q = mean_ratio_signed(p, m);
    double qi = mean_ratio_signed(ap, MetricTensor::identity());
    EXPECT_NEAR(q, qi, 1e-9);
    EXPECT_NEAR(std::abs(q), q_oracle(p, m.matrix()), 1e-9);
    EXPECT_LE(std::abs(q), 1.0 + 1e-12);
  }
}

TEST(MeanRatio, StretchedRegularTetIsUnitUnderMatchingMetric) {
  std::mt19937_64 rng(16);
  auto reg = regular_tet_points();
  for (int i = 0; i < 20; ++i) {
    auto m = random_spd(rng);
    Eigen::LLT<Eigen::Matrix3d> llt(m.matrix());
    Eigen::Matrix3d a = llt.matrixL().transpose();
    std::array<Vec3, 4> p;
    for (int k = 0; k < 4; ++k) p[k] = a.inverse() * reg[k];
    EXPECT_NEAR(mean_ratio_signed(p, m), 1.0, 1e-9);
  }
}

TEST(MeanRatio, InvertedAndFlatTets) {
  auto p = regular_tet_points();
  std::swap(p[0], p[1]);
  EXPECT_LT(mean_ratio_signed(p, MetricTensor::identity()), 0.0);
  std::array<Vec3, 4> flat{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  EXPECT_LE(mean_ratio_signed(flat, MetricTensor::identity()), 0.0);
  std::array<MetricTensor, 4> ms;
  try {
    mean_ratio(flat, ms);
    ADD_FAILURE() << "flat tet accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateTet);
  }
}

TEST(MeanRatio, VertexTensorsAreAveragedAtTheCentroid) {
  std::mt19937_64 rng(17);
  auto p = regular_tet_points();
  std::array<MetricTensor, 4> ms{random_spd(rng), random_spd(rng), random_spd(rng), random_spd(rng)};
  std::array<double, 4> w{1, 1, 1, 1};
  auto mean = interpolate(ms, w);
  EXPECT_NEAR(mean_ratio(p, ms), q_oracle(p, mean.matrix()), 1e-9);
}

TEST(Complexity, UniformFieldIsVolumeOverHCubed) {
  auto m = make_cube_mesh(4, 2.0, 0.2, 3);
  auto f = uniform_metric(0.1);
  EXPECT_NEAR(discrete_complexity(m, f), 8.0 / 1e-3, 1e-9 * 8e3);
  EXPECT_NEAR(continuous_complexity(f, m), 8.0 / 1e-3, 1e-9 * 8e3);
}

TEST(Complexity, ContinuousAgreesForSmoothFields) {
  auto m = make_cube_mesh(8, 1.0, 0.0, 1);
  auto f = linear_boundary_layer_metric(0.05, 0.5, 2);
  double c = continuous_complexity(f, m, 6);
  double d = discrete_complexity(m, f);
  EXPECT_NEAR(d / c, 1.0, 0.05);
}

TEST(Complexity, ScalingHitsTheTarget) {
  std::mt19937_64 rng(18);
  auto m = make_cube_mesh(5, 1.0, 0.2, 4);
  for (const auto& f : {uniform_metric(0.3), radial_metric(0.05, 0.4),
                        linear_boundary_layer_metric(0.01, 0.3, 1)}) {
    for (double target : {10.0, 1000.0, 123456.0}) {
      auto s = scale_to_complexity(f, m, target);
      EXPECT_NEAR(discrete_complexity(m, s), target, 1e-9 * target) << f.name();
    }
  }
  EXPECT_THROW(scale_to_complexity(uniform_metric(1), m, 0.0), Error);
}

TEST(Complexity, NonSpdTensorIsReported) {
  auto m = regular_tet();
  std::vector<MetricTensor> t(4, MetricTensor::identity());
  t[2] = MetricTensor::diagonal(1, -2, 1);
  try {
    discrete_complexity(m, MetricField::discrete(t));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonSPD);
  }
}

TEST(MetricSpec, ParsesEveryKind) {
  auto m = make_cube_mesh(2);
  auto u = parse_metric_spec("uniform:0.5", m);
  EXPECT_NEAR(u.eval(Vec3(0.3, 0.3, 0.3)).m[0], 4.0, 1e-12);
  auto bl = parse_metric_spec("linear-boundary-layer:0.01,0.5,2", m);
  EXPECT_TRUE(bl.eval(Vec3(0.5, 0.5, 0.0)).spd());
  auto r = parse_metric_spec("radial:0.1,1", m);
  EXPECT_GT(r.eval(Vec3(0, 0, 0)).m[0], r.eval(Vec3(1, 1, 1)).m[0]);
  for (const char* bad : {"", "uniform", "uniform:-1", "uniform:abc", "spiral:1", "radial:1"})
    EXPECT_THROW(parse_metric_spec(bad, m), Error) << bad;
}

TEST(MetricSpec, DiscreteFileIsInterpolatedOverTheBackground) {
  auto m = make_cube_mesh(2, 1.0, 0.1, 2);
  std::mt19937_64 rng(19);
  std::vector<MetricTensor> t;
  for (std::size_t i = 0; i < m.vertices.size(); ++i) t.push_back(random_spd(rng));
  std::string path = ::testing::TempDir() + "metric.txt";
  {
    std::ofstream os(path);
    os.precision(17);
    write_metric(os, t);
  }
  auto back = read_metric_file(path);
  ASSERT_EQ(back.size(), t.size());
  auto f = parse_metric_spec("file:" + path, m);
  for (std::size_t i = 0; i < t.size(); i += 3) {
    auto at = f.eval(m.vertices[i].pos);
    EXPECT_LT((at.matrix() - t[i].matrix()).norm(), 1e-8 * t[i].matrix().norm());
  }
  std::remove(path.c_str());

  std::vector<MetricTensor> shortList(t.begin(), t.end() - 1);
  EXPECT_THROW(MetricField::discrete(shortList).check_aligned(m), Error);
}

TEST(Quality, RegularTetUnderMatchingMetric) {
  auto m = regular_tet(0.25);
  auto r = quality_report(m, uniform_metric(0.25));
  EXPECT_EQ(r.edgeCount, 6);
  EXPECT_EQ(r.tetCount, 1);
  EXPECT_DOUBLE_EQ(r.unit_band_fraction(), 1.0);
  EXPECT_NEAR(r.minQ, 1.0, 1e-12);
  EXPECT_NEAR(r.meanEdge, 1.0, 1e-12);
  auto lq = count_low_quality(m, uniform_metric(0.25));
  EXPECT_EQ(lq.total, 0);
  auto lq2 = count_low_quality(m, uniform_metric(0.1));
  EXPECT_EQ(lq2.total, 1);
  EXPECT_EQ(lq2.frozen, 0);
}

TEST(Quality, HistogramsCountEverything) {
  auto m = make_cube_mesh(3, 1.0, 0.2, 5);
  auto r = quality_report(m, uniform_metric(0.2));
  EXPECT_EQ(r.edgeLength.total(), r.edgeCount);
  EXPECT_EQ(r.meanRatio.total(), r.tetCount);
  EXPECT_EQ(r.tetCount, static_cast<std::int64_t>(m.tets.size()));

  auto h = Histogram::log_spaced(4, 0.25, 4.0);
  EXPECT_NEAR(h.edges[1], 0.5, 1e-12);
  EXPECT_NEAR(h.edges[3], 2.0, 1e-12);
  h.add(1e-9);
  h.add(1e9);
  h.add(1.0);
  EXPECT_EQ(h.counts.front(), 1);
  EXPECT_EQ(h.counts.back(), 1);
  EXPECT_EQ(h.total(), 3);
}

TEST(Quality, CsvAndComparisonAreParseable) {
  auto m = make_cube_mesh(2, 1.0, 0.1, 5);
  auto r = quality_report(m, uniform_metric(0.3));
  std::stringstream csv;
  write_quality_csv(csv, r);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "histogram,bin,lo,hi,count");
  std::int64_t edges = 0;
  while (std::getline(csv, line)) {
    std::stringstream ls(line);
    std::string name, field;
    std::getline(ls, name, ',');
    std::vector<std::string> f;
    while (std::getline(ls, field, ',')) f.push_back(field);
    ASSERT_EQ(f.size(), 4u) << line;
    if (name == "edge_length") edges += std::stoll(f[3]);
  }
  EXPECT_EQ(edges, r.edgeCount);

  std::stringstream cmp;
  write_quality_comparison(cmp, r, r);
  std::getline(cmp, line);
  EXPECT_EQ(line, "histogram,bin,lo,hi,fraction_a,fraction_b,abs_diff");
  while (std::getline(cmp, line)) EXPECT_EQ(line.substr(line.rfind(',') + 1), "0") << line;
}

}  // namespace
}  // namespace tetshift
