// SPDX-License-Identifier: Apache-2.0
//
// Finite-dimensional quantum channels in Kraus form, Choi matrices, and
// computable distance bounds between channels.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>
#include <algorithm>
#include <utility>
#include <vector>

#include "nlqc/common.hpp"
#include "nlqc/dense.hpp"

namespace nlqc {

struct KrausChannel {
  std::int64_t dim_in = 0;
  std::int64_t dim_out = 0;
  std::vector<Mat> kraus;

  KrausChannel() = default;
  KrausChannel(std::int64_t din, std::int64_t dout, std::vector<Mat> ks, bool check_tp = true)
      : dim_in(din), dim_out(dout), kraus(std::move(ks)) {
    require(!kraus.empty(), "channel needs at least one Kraus operator");
    for (const Mat& k : kraus)
      require(k.rows() == dim_out && k.cols() == dim_in, "Kraus operator shape mismatch");
    if (check_tp) {
      Mat s = Mat::Zero(dim_in, dim_in);
      for (const Mat& k : kraus) s += k.adjoint() * k;
      double err = (s - Mat::Identity(dim_in, dim_in)).cwiseAbs().maxCoeff();
      require(err <= 1e-8, "Kraus operators are not trace preserving (defect ", err, ")");
    }
  }
};

inline KrausChannel unitary_channel(const Mat& u) {
  require(u.rows() == u.cols(), "unitary channel needs a square matrix");
  return KrausChannel(u.cols(), u.rows(), {u});
}

inline KrausChannel identity_channel(std::int64_t d) {
  return KrausChannel(d, d, {Mat::Identity(d, d)});
}

inline Mat apply_channel(const KrausChannel& ch, const Mat& rho) {
  require(rho.rows() == ch.dim_in && rho.cols() == ch.dim_in, "state dimension mismatch");
  Mat out = Mat::Zero(ch.dim_out, ch.dim_out);
  for (const Mat& k : ch.kraus) out += k * rho * k.adjoint();
  return out;
}

// b after a.
inline KrausChannel compose_channels(const KrausChannel& b, const KrausChannel& a) {
  require(a.dim_out == b.dim_in, "composition dimension mismatch");
  std::vector<Mat> ks;
  ks.reserve(a.kraus.size() * b.kraus.size());
  for (const Mat& kb : b.kraus)
    for (const Mat& ka : a.kraus) ks.push_back(kb * ka);
  return KrausChannel(a.dim_in, b.dim_out, std::move(ks), false);
}

inline KrausChannel tensor_channels(const KrausChannel& a, const KrausChannel& b) {
  std::vector<Mat> ks;
  ks.reserve(a.kraus.size() * b.kraus.size());
  for (const Mat& ka : a.kraus)
    for (const Mat& kb : b.kraus) ks.push_back(Eigen::kroneckerProduct(ka, kb).eval());
  return KrausChannel(a.dim_in * b.dim_in, a.dim_out * b.dim_out, std::move(ks), false);
}

// Unnormalized Choi matrix: sum_{ij} |i><j| (x) Lambda(|i><j|).
inline Mat choi_matrix(const KrausChannel& ch) {
  std::int64_t di = ch.dim_in, dout = ch.dim_out;
  Mat c = Mat::Zero(di * dout, di * dout);
  for (const Mat& k : ch.kraus) {
    // vectorize K columnwise into |i> (x) K|i>
    Vec v(di * dout);
    for (std::int64_t i = 0; i < di; ++i) v.segment(i * dout, dout) = k.col(i);
    c += v * v.adjoint();
  }
  return c;
}

// (lower, upper) bounds on the diamond-norm distance between two channels:
// twice the trace distance of the normalized Choi states on both ends of the
// sandwich, scaled so that lower <= ||a-b||_diamond <= upper.
inline std::pair<double, double> channel_distance_bounds(const KrausChannel& a,
                                                         const KrausChannel& b) {
  require(a.dim_in == b.dim_in && a.dim_out == b.dim_out, "channel shapes differ");
  Mat ca = choi_matrix(a) / double(a.dim_in);
  Mat cb = choi_matrix(b) / double(b.dim_in);
  double lower = trace_distance(ca, cb);
  return {lower, double(a.dim_in) * lower};
}

namespace detail {

inline double point_segment_distance(cx p, cx q) {
  cx d = q - p;
  double len2 = std::norm(d);
  if (len2 < 1e-30) return std::abs(p);
  double t = std::clamp(-(p.real() * d.real() + p.imag() * d.imag()) / len2, 0.0, 1.0);
  return std::abs(p + t * d);
}

// Distance from the origin to the convex hull of points on (or near) the
// unit circle. Zero iff no open half-plane through the origin avoids all
// points, i.e. the largest cyclic angular gap is at most pi.
inline double hull_distance_to_origin(const std::vector<cx>& pts) {
  require(!pts.empty(), "no eigenvalues supplied");
  if (pts.size() == 1) return std::abs(pts[0]);
  std::vector<double> ang;
  ang.reserve(pts.size());
  for (cx p : pts) ang.push_back(std::arg(p));
  std::sort(ang.begin(), ang.end());
  double max_gap = ang.front() + 2 * pi - ang.back();
  for (size_t i = 0; i + 1 < ang.size(); ++i) max_gap = std::max(max_gap, ang[i + 1] - ang[i]);
  if (max_gap <= pi + 1e-12) return 0.0;
  double best = std::abs(pts[0]);
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i; j < pts.size(); ++j)
      best = std::min(best, point_segment_distance(pts[i], pts[j]));
  return best;
}

}  // namespace detail

// Exact diamond-norm distance between the channels of two unitaries:
// 2 sqrt(1 - r^2), r the distance from the origin to conv(spec(U^dag V)).
inline double unitary_diamond_distance(const Mat& u, const Mat& v) {
  require(u.rows() == u.cols() && v.rows() == v.cols() && u.rows() == v.rows(),
          "unitary_diamond_distance needs square matrices of equal size");
  Mat w = u.adjoint() * v;
  Eigen::ComplexEigenSolver<Mat> es(w, false);
  std::vector<cx> eig(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  double r = detail::hull_distance_to_origin(eig);
  double s = std::max(0.0, 1.0 - r * r);
  return 2.0 * std::sqrt(s);
}

// Diamond-norm distance between isometry channels rho -> V rho V^dag.
// Exact when the isometries are square (unitary); otherwise the standard
// stabilized bound 2 ||V - W||_inf, which is tight up to a factor <= 2.
inline double isometry_channel_distance(const Mat& v, const Mat& w) {
  require(v.rows() == w.rows() && v.cols() == w.cols(), "isometry shapes differ");
  require(v.rows() >= v.cols(), "isometry must not shrink the space");
  double vdef = (v.adjoint() * v - Mat::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff();
  double wdef = (w.adjoint() * w - Mat::Identity(w.cols(), w.cols())).cwiseAbs().maxCoeff();
  require(vdef <= 1e-8 && wdef <= 1e-8, "inputs are not isometries (defects ", vdef, ", ", wdef, ")");
  if (v.rows() == v.cols()) return unitary_diamond_distance(v, w);
  return 2.0 * schatten_norm(v - w, Schatten::inf);
}

// Entanglement fidelity of a channel with respect to the identity,
// F_e = <Omega| (id (x) Lambda)(Omega) |Omega>, from the Choi matrix.
inline double entanglement_fidelity(const KrausChannel& ch) {
  require(ch.dim_in == ch.dim_out, "entanglement fidelity needs equal in/out dimensions");
  double f = 0;
  for (const Mat& k : ch.kraus) f += std::norm(k.trace() / double(ch.dim_in));
  return f;
}

inline double average_fidelity_from_entanglement(double f_e, std::int64_t d) {
  return (double(d) * f_e + 1.0) / (double(d) + 1.0);
}

}  // namespace nlqc
