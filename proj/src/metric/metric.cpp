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

#include "tetshift/metric.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Dense>

#include "tetshift/error.hpp"

namespace tetshift {

MetricTensor MetricTensor::from_matrix(const Eigen::Matrix3d& a) {
  // Symmetrize so round-off in products never leaks asymmetry.
  return {{a(0, 0), 0.5 * (a(0, 1) + a(1, 0)), 0.5 * (a(0, 2) + a(2, 0)), a(1, 1),
           0.5 * (a(1, 2) + a(2, 1)), a(2, 2)}};
}

Eigen::Matrix3d MetricTensor::matrix() const {
  Eigen::Matrix3d a;
  a << m[0], m[1], m[2], m[1], m[3], m[4], m[2], m[4], m[5];
  return a;
}

double MetricTensor::det() const {
  return m[0] * (m[3] * m[5] - m[4] * m[4]) - m[1] * (m[1] * m[5] - m[4] * m[2]) +
         m[2] * (m[1] * m[4] - m[3] * m[2]);
}

bool MetricTensor::spd() const {
  // Sylvester's criterion.
  return m[0] > 0 && (m[0] * m[3] - m[1] * m[1]) > 0 && det() > 0;
}

Eigen::Matrix3d log_spd(const MetricTensor& t) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(t.matrix());
  Eigen::Vector3d l = es.eigenvalues();
  if (l.minCoeff() <= 0) throw Error(ErrorCode::NonSPD, "logarithm of non-SPD tensor");
  return es.eigenvectors() * l.array().log().matrix().asDiagonal() * es.eigenvectors().transpose();
}

MetricTensor exp_sym(const Eigen::Matrix3d& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(a);
  Eigen::Vector3d l = es.eigenvalues().array().exp();
  return MetricTensor::from_matrix(es.eigenvectors() * l.asDiagonal() *
                                   es.eigenvectors().transpose());
}

MetricTensor interpolate(std::span<const MetricTensor> tensors, std::span<const double> weights,
                         MetricInterpolation mode) {
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  bool same = true;
  for (const auto& t : tensors) same = same && t == tensors[0];
  if (same) return tensors[0];
  if (mode == MetricInterpolation::Arithmetic) {
    MetricTensor r;
    r.m.fill(0.0);
    for (std::size_t i = 0; i < tensors.size(); ++i)
      for (int c = 0; c < 6; ++c) r.m[c] += weights[i] / wsum * tensors[i].m[c];
    return r;
  }
  Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < tensors.size(); ++i) acc += weights[i] / wsum * log_spd(tensors[i]);
  return exp_sym(acc);
}

MetricField MetricField::analytic(std::string name, Fn fn) {
  MetricField f;
  f.name_ = std::move(name);
  f.fn_ = std::move(fn);
  return f;
}

MetricField MetricField::discrete(std::vector<MetricTensor> tensors) {
  MetricField f;
  f.name_ = "discrete";
  f.tensors_ = std::move(tensors);
  return f;
}

MetricTensor MetricField::eval(const Vec3& x) const {
  if (!fn_) throw Error(ErrorCode::InvalidArgument, "point evaluation of a discrete metric field");
  return fn_(x);
}

MetricTensor MetricField::at(const TetMesh& mesh, int vertex) const {
  if (fn_) return fn_(mesh.vertices[vertex].pos);
  return tensors_[vertex];
}

void MetricField::check_aligned(const TetMesh& mesh) const {
  if (!fn_ && tensors_.size() != mesh.vertices.size())
    throw Error(ErrorCode::InvalidArgument,
                "metric has " + std::to_string(tensors_.size()) + " tensors but mesh has " +
                    std::to_string(mesh.vertices.size()) + " vertices");
}

MetricField MetricField::scaled(double factor) const {
  if (fn_) {
    auto inner = fn_;
    return analytic(name_, [inner, factor](const Vec3& x) { return inner(x).scaled(factor); });
  }
  std::vector<MetricTensor> t = tensors_;
  for (auto& x : t) x = x.scaled(factor);
  auto f = discrete(std::move(t));
  f.name_ = name_;
  return f;
}

MetricField uniform_metric(double h) {
  if (!(h > 0)) throw Error(ErrorCode::InvalidArgument, "uniform metric needs h > 0");
  auto t = MetricTensor::isotropic(1.0 / (h * h));
  return MetricField::analytic("uniform", [t](const Vec3&) { return t; });
}

MetricField linear_boundary_layer_metric(double h0, double growth, int axis) {
  if (!(h0 > 0) || growth < 0 || axis < 0 || axis > 2)
    throw Error(ErrorCode::InvalidArgument, "linear-boundary-layer needs h0 > 0, growth >= 0");
  return MetricField::analytic("linear-boundary-layer", [=](const Vec3& x) {
    double hn = h0 + growth * std::abs(x[axis]);
    double ht = h0 + growth;
    std::array<double, 3> d{1.0 / (ht * ht), 1.0 / (ht * ht), 1.0 / (ht * ht)};
    d[axis] = 1.0 / (hn * hn);
    return MetricTensor::diagonal(d[0], d[1], d[2]);
  });
}

MetricField radial_metric(double h0, double growth) {
  if (!(h0 > 0) || growth < 0)
    throw Error(ErrorCode::InvalidArgument, "radial needs h0 > 0, growth >= 0");
  return MetricField::analytic("radial", [=](const Vec3& x) {
    double h = h0 + growth * x.norm();
    return MetricTensor::isotropic(1.0 / (h * h));
  });
}

namespace {

// Uniform bucket grid over tet bounding boxes.
class PointLocator {
 public:
  PointLocator(const TetMesh& mesh, std::vector<MetricTensor> tensors, MetricInterpolation mode)
      : mesh_(mesh), tensors_(std::move(tensors)), mode_(mode) {
    lo_ = Vec3::Constant(1e300);
    hi_ = Vec3::Constant(-1e300);
    for (const auto& v : mesh_.vertices) {
      lo_ = lo_.cwiseMin(v.pos);
      hi_ = hi_.cwiseMax(v.pos);
    }
    res_ = std::max(1, static_cast<int>(std::cbrt(static_cast<double>(mesh_.tets.size()) / 4.0)));
    cells_.resize(static_cast<std::size_t>(res_) * res_ * res_);
    for (std::size_t t = 0; t < mesh_.tets.size(); ++t) {
      Vec3 a = Vec3::Constant(1e300), b = Vec3::Constant(-1e300);
      for (int v : mesh_.tets[t].v) {
        a = a.cwiseMin(mesh_.pos(v));
        b = b.cwiseMax(mesh_.pos(v));
      }
      auto ca = cell(a), cb = cell(b);
      for (int k = ca[2]; k <= cb[2]; ++k)
        for (int j = ca[1]; j <= cb[1]; ++j)
          for (int i = ca[0]; i <= cb[0]; ++i)
            cells_[(static_cast<std::size_t>(k) * res_ + j) * res_ + i].push_back(static_cast<int>(t));
    }
  }

  MetricTensor operator()(const Vec3& x) const {
    auto c = cell(x);
    const auto& cand = cells_[(static_cast<std::size_t>(c[2]) * res_ + c[1]) * res_ + c[0]];
    int best = -1;
    std::array<double, 4> bestW{};
    double bestMin = -1e300;
    auto consider = [&](int t) {
      auto w = barycentric(t, x);
      double mn = std::min(std::min(w[0], w[1]), std::min(w[2], w[3]));
      if (mn > bestMin) {
        bestMin = mn;
        best = t;
        bestW = w;
      }
    };
    for (int t : cand) consider(t);
    if (best < 0 || bestMin < -1e-9)
      for (std::size_t t = 0; t < mesh_.tets.size(); ++t) consider(static_cast<int>(t));
    for (double& w : bestW) w = std::max(w, 0.0);
    std::array<MetricTensor, 4> m;
    for (int j = 0; j < 4; ++j) m[j] = tensors_[mesh_.tets[best].v[j]];
    return interpolate(m, bestW, mode_);
  }

 private:
  std::array<int, 3> cell(const Vec3& x) const {
    std::array<int, 3> c{};
    for (int d = 0; d < 3; ++d) {
      double span = hi_[d] - lo_[d];
      double s = span > 0 ? (x[d] - lo_[d]) / span : 0.0;
      c[d] = std::clamp(static_cast<int>(s * res_), 0, res_ - 1);
    }
    return c;
  }

  std::array<double, 4> barycentric(int t, const Vec3& x) const {
    const auto& q = mesh_.tets[t].v;
    const Vec3 &a = mesh_.pos(q[0]), &b = mesh_.pos(q[1]), &c = mesh_.pos(q[2]), &d = mesh_.pos(q[3]);
    double vol = signed_volume(a, b, c, d);
    return {signed_volume(x, b, c, d) / vol, signed_volume(a, x, c, d) / vol,
            signed_volume(a, b, x, d) / vol, signed_volume(a, b, c, x) / vol};
  }

  TetMesh mesh_;
  std::vector<MetricTensor> tensors_;
  MetricInterpolation mode_;
  Vec3 lo_, hi_;
  int res_ = 1;
  std::vector<std::vector<int>> cells_;
};

std::vector<double> parse_params(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad metric parameter '" + tok + "'");
    }
  }
  return out;
}

}  // namespace

MetricField background_metric(const TetMesh& background, std::vector<MetricTensor> tensors,
                              MetricInterpolation mode) {
  if (tensors.size() != background.vertices.size())
    throw Error(ErrorCode::InvalidArgument, "metric file does not match background mesh");
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (!tensors[i].spd())
      throw Error(ErrorCode::NonSPD, "tensor at vertex " + std::to_string(i) + " is not SPD");
  auto loc = std::make_shared<const PointLocator>(background, std::move(tensors), mode);
  return MetricField::analytic("background", [loc](const Vec3& x) { return (*loc)(x); });
}

MetricField parse_metric_spec(const std::string& spec, const TetMesh& background) {
  auto colon = spec.find(':');
  std::string name = spec.substr(0, colon);
  std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (name == "file") return background_metric(background, read_metric_file(rest));
  if (name == "uniform") {
    auto p = parse_params(rest);
    if (p.size() != 1) throw Error(ErrorCode::InvalidArgument, "uniform:h");
    return uniform_metric(p[0]);
  }
  if (name == "linear-boundary-layer") {
    // Axis may be given as a letter.
    auto lastComma = rest.rfind(',');
    std::string axisTok = lastComma == std::string::npos ? "" : rest.substr(lastComma + 1);
    int axis = -1;
    if (axisTok == "x") axis = 0;
    if (axisTok == "y") axis = 1;
    if (axisTok == "z") axis = 2;
    auto p = parse_params(axis >= 0 ? rest.substr(0, lastComma) : rest);
    if (axis < 0 && p.size() == 3) {
      axis = static_cast<int>(p[2]);
      p.pop_back();
    }
    if (p.size() != 2) throw Error(ErrorCode::InvalidArgument, "linear-boundary-layer:h0,growth,axis");
    return linear_boundary_layer_metric(p[0], p[1], axis);
  }
  if (name == "radial") {
    auto p = parse_params(rest);
    if (p.size() != 2) throw Error(ErrorCode::InvalidArgument, "radial:h0,growth");
    return radial_metric(p[0], p[1]);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + name + "'");
}

std::vector<MetricTensor> read_metric(std::istream& in) {
  long n = -1;
  std::string line;
  std::vector<MetricTensor> out;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    if (n < 0) {
      if (!(ss >> n)) continue;
      if (n < 0) throw Error(ErrorCode::Io, "negative tensor count");
      out.reserve(n);
      continue;
    }
    MetricTensor t;
    int got = 0;
    for (double& x : t.m)
      if (ss >> x) ++got;
    if (got == 0) continue;
    if (got != 6) throw Error(ErrorCode::Io, "metric line needs 6 components");
    out.push_back(t);
  }
  if (n < 0 || static_cast<long>(out.size()) != n)
    throw Error(ErrorCode::Io, "metric file count mismatch");
  return out;
}

std::vector<MetricTensor> read_metric_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_metric(in);
}

void write_metric(std::ostream& out, std::span<const MetricTensor> tensors) {
  out << tensors.size() << '\n' << std::setprecision(17);
  for (const auto& t : tensors)
    out << t.m[0] << ' ' << t.m[1] << ' ' << t.m[2] << ' ' << t.m[3] << ' ' << t.m[4] << ' '
        << t.m[5] << '\n';
}

}  // namespace tetshift
