// SPDX-License-Identifier: Apache-2.0
//
// Dense operators and states on an ordered list of finite factors.
//
// A DenseOperator stores its matrix only on the factors it acts on, together
// with the (ascending) factor ids and their dimensions. Ordering convention:
// ascending factor index is row-major, i.e. factor 0 is the most significant
// digit of a basis index, so embedding Z at factor 0 of a two-qubit system
// gives diag(1,1,-1,-1).
#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "nlqc/common.hpp"

namespace nlqc {

struct DenseOperator {
  std::vector<int> support;  // ascending, distinct factor ids
  std::vector<int> dims;     // dimension per supported factor
  Mat entries;               // square, rows == product of dims

  DenseOperator() = default;
  DenseOperator(std::vector<int> support_, std::vector<int> dims_, Mat entries_)
      : support(std::move(support_)), dims(std::move(dims_)), entries(std::move(entries_)) {
    require(support.size() == dims.size(), "support/dims size mismatch");
    for (size_t i = 0; i + 1 < support.size(); ++i)
      require(support[i] < support[i + 1], "support must be ascending and distinct");
    std::int64_t d = checked_product(dims);
    require(entries.rows() == d && entries.cols() == d,
            "entries must be ", d, "x", d, ", got ", entries.rows(), "x", entries.cols());
  }

  std::int64_t dim() const { return entries.rows(); }
  int arity() const { return int(support.size()); }
};

struct StateVector {
  std::vector<int> dims;  // one entry per factor, factor ids are 0..n-1
  Vec amps;

  StateVector() = default;
  StateVector(std::vector<int> dims_, Vec amps_) : dims(std::move(dims_)), amps(std::move(amps_)) {
    require(amps.size() == checked_product(dims), "amplitude length does not match dims");
  }

  int n_factors() const { return int(dims.size()); }
  std::int64_t dim() const { return amps.size(); }
  double norm() const { return amps.norm(); }
};

namespace detail {

// Offset tables for addressing a sub-support inside a larger factor list.
struct EmbedMap {
  std::vector<std::int64_t> sub_offsets;   // one per sub-space basis index
  std::vector<std::int64_t> rest_offsets;  // one per complement assignment
};

inline EmbedMap make_embed_map(const std::vector<int>& full_dims,
                               const std::vector<std::int64_t>& full_strides,
                               const std::vector<int>& positions) {
  EmbedMap m;
  std::int64_t sub_dim = 1;
  for (int p : positions) sub_dim *= full_dims[size_t(p)];
  m.sub_offsets.assign(size_t(sub_dim), 0);
  for (std::int64_t idx = 0; idx < sub_dim; ++idx) {
    std::int64_t rem = idx, off = 0;
    for (int k = int(positions.size()) - 1; k >= 0; --k) {
      int p = positions[size_t(k)];
      int d = full_dims[size_t(p)];
      off += (rem % d) * full_strides[size_t(p)];
      rem /= d;
    }
    m.sub_offsets[size_t(idx)] = off;
  }
  std::vector<int> rest;
  for (int p = 0; p < int(full_dims.size()); ++p)
    if (std::find(positions.begin(), positions.end(), p) == positions.end()) rest.push_back(p);
  std::int64_t rest_dim = 1;
  for (int p : rest) rest_dim *= full_dims[size_t(p)];
  m.rest_offsets.assign(size_t(rest_dim), 0);
  for (std::int64_t idx = 0; idx < rest_dim; ++idx) {
    std::int64_t rem = idx, off = 0;
    for (int k = int(rest.size()) - 1; k >= 0; --k) {
      int p = rest[size_t(k)];
      int d = full_dims[size_t(p)];
      off += (rem % d) * full_strides[size_t(p)];
      rem /= d;
    }
    m.rest_offsets[size_t(idx)] = off;
  }
  return m;
}

// Positions (not ids) of `sub` inside `sup`; requires containment.
inline std::vector<int> positions_in(const std::vector<int>& sup, const std::vector<int>& sub) {
  std::vector<int> pos;
  pos.reserve(sub.size());
  for (int id : sub) {
    auto it = std::lower_bound(sup.begin(), sup.end(), id);
    require(it != sup.end() && *it == id, "factor ", id, " not present in the enclosing support");
    pos.push_back(int(it - sup.begin()));
  }
  return pos;
}

}  // namespace detail

inline DenseOperator identity_op(std::vector<int> support, std::vector<int> dims) {
  std::int64_t d = checked_product(dims);
  return DenseOperator(std::move(support), std::move(dims), Mat::Identity(d, d));
}

// Dense matrix of `op` viewed on the larger factor set (target_support, target_dims).
inline Mat embed_matrix(const DenseOperator& op, const std::vector<int>& target_support,
                        const std::vector<int>& target_dims) {
  auto pos = detail::positions_in(target_support, op.support);
  for (size_t k = 0; k < pos.size(); ++k)
    require(target_dims[size_t(pos[k])] == op.dims[k], "factor ", op.support[k],
            " has mismatched dimension in the enclosing space");
  std::int64_t d = checked_product(target_dims);
  require(d <= (1 << 13), "embedding onto dimension ", d, " exceeds the dense-operator cap");
  auto strides = strides_of(target_dims);
  auto map = detail::make_embed_map(target_dims, strides, pos);
  Mat out = Mat::Zero(d, d);
  std::int64_t m = op.dim();
  for (std::int64_t r : map.rest_offsets)
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < m; ++j)
        out(r + map.sub_offsets[size_t(i)], r + map.sub_offsets[size_t(j)]) += op.entries(i, j);
  return out;
}

// Embed onto the full factor list 0..n-1 with the given dims.
inline DenseOperator embed(const DenseOperator& op, const std::vector<int>& full_dims) {
  std::vector<int> full_support(full_dims.size());
  for (size_t i = 0; i < full_dims.size(); ++i) full_support[i] = int(i);
  Mat e = embed_matrix(op, full_support, full_dims);
  return DenseOperator(full_support, full_dims, std::move(e));
}

// Product a*b on the union support.
inline DenseOperator compose(const DenseOperator& a, const DenseOperator& b) {
  std::vector<int> u;
  std::vector<int> udims;
  size_t i = 0, j = 0;
  while (i < a.support.size() || j < b.support.size()) {
    if (j == b.support.size() || (i < a.support.size() && a.support[i] < b.support[j])) {
      u.push_back(a.support[i]);
      udims.push_back(a.dims[i]);
      ++i;
    } else if (i == a.support.size() || b.support[j] < a.support[i]) {
      u.push_back(b.support[j]);
      udims.push_back(b.dims[j]);
      ++j;
    } else {
      require(a.dims[i] == b.dims[j], "shared factor ", a.support[i], " has mismatched dims");
      u.push_back(a.support[i]);
      udims.push_back(a.dims[i]);
      ++i;
      ++j;
    }
  }
  Mat ae = embed_matrix(a, u, udims);
  Mat be = embed_matrix(b, u, udims);
  return DenseOperator(u, udims, ae * be);
}

inline DenseOperator dagger(const DenseOperator& op) {
  return DenseOperator(op.support, op.dims, op.entries.adjoint());
}

// Partial trace over the listed factor ids (must be inside the support).
inline DenseOperator partial_trace(const DenseOperator& op, const std::vector<int>& traced) {
  std::vector<int> tr = traced;
  std::sort(tr.begin(), tr.end());
  tr.erase(std::unique(tr.begin(), tr.end()), tr.end());
  auto pos = detail::positions_in(op.support, tr);
  std::vector<int> kept_support, kept_dims;
  for (size_t k = 0; k < op.support.size(); ++k) {
    if (std::find(tr.begin(), tr.end(), op.support[k]) == tr.end()) {
      kept_support.push_back(op.support[k]);
      kept_dims.push_back(op.dims[k]);
    }
  }
  auto strides = strides_of(op.dims);
  auto map = detail::make_embed_map(op.dims, strides, pos);  // sub = traced here
  std::int64_t kd = 1;
  for (int d : kept_dims) kd *= d;
  Mat out = Mat::Zero(kd, kd);
  // rest_offsets of the traced map enumerate exactly the kept-factor assignments,
  // in kept-ascending order, which matches the kept space's own row-major order.
  for (std::int64_t a = 0; a < kd; ++a)
    for (std::int64_t b = 0; b < kd; ++b) {
      cx s = 0;
      for (std::int64_t t : map.sub_offsets)
        s += op.entries(map.rest_offsets[size_t(a)] + t, map.rest_offsets[size_t(b)] + t);
      out(a, b) = s;
    }
  return DenseOperator(kept_support, kept_dims, std::move(out));
}

// Haar twirl over the given factors: (tr_R op / d_R) (x) 1_R, support unchanged.
// Factors in `region` not touched by op contribute nothing.
inline DenseOperator twirl(const DenseOperator& op, const std::vector<int>& region) {
  std::vector<int> r;
  for (int id : region)
    if (std::binary_search(op.support.begin(), op.support.end(), id)) r.push_back(id);
  std::sort(r.begin(), r.end());
  if (r.empty()) return op;
  std::int64_t d_r = 1;
  for (int id : r) {
    auto it = std::lower_bound(op.support.begin(), op.support.end(), id);
    d_r *= op.dims[size_t(it - op.support.begin())];
  }
  DenseOperator t = partial_trace(op, r);
  t.entries /= double(d_r);
  // tensor the identity back on the traced factors and restore the support
  std::vector<int> rdims;
  for (int id : r) {
    auto it = std::lower_bound(op.support.begin(), op.support.end(), id);
    rdims.push_back(op.dims[size_t(it - op.support.begin())]);
  }
  DenseOperator one = identity_op(r, rdims);
  DenseOperator out = compose(t, one);
  return out;
}

// Compress an operator that acts (numerically) as identity outside `sub`.
// When `verify` is set, throws if the compression loses more than tol_input.
inline DenseOperator restrict_to(const DenseOperator& op, const std::vector<int>& sub,
                                 bool verify = true) {
  std::vector<int> s = sub;
  std::sort(s.begin(), s.end());
  std::vector<int> comp;
  for (int id : op.support)
    if (!std::binary_search(s.begin(), s.end(), id)) comp.push_back(id);
  std::int64_t d_c = 1;
  for (int id : comp) {
    auto it = std::lower_bound(op.support.begin(), op.support.end(), id);
    d_c *= op.dims[size_t(it - op.support.begin())];
  }
  DenseOperator small = partial_trace(op, comp);
  small.entries /= double(d_c);
  if (verify && !comp.empty()) {
    Mat back = embed_matrix(small, op.support, op.dims);
    double err = (back - op.entries).cwiseAbs().maxCoeff();
    require(err <= tol_input, "operator is not supported on the requested factors (leak ", err, ")");
  }
  return small;
}

enum class Schatten { one, two, inf };

inline double schatten_norm(const Mat& m, Schatten p) {
  if (p == Schatten::two) return m.norm();
  Eigen::BDCSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  if (p == Schatten::inf) return sv.size() ? sv(0) : 0.0;
  return sv.sum();
}

inline double schatten_norm(const DenseOperator& op, Schatten p) {
  return schatten_norm(op.entries, p);
}

// Deterministic power-method estimate of the largest singular value; used on
// matrices too large for a full SVD sweep. Two starts guard against an
// unlucky orthogonal initialization.
inline double op_norm_estimate(const Mat& m, int iters = 60) {
  if (m.rows() == 0) return 0.0;
  auto run = [&](Vec v) {
    for (int it = 0; it < iters; ++it) {
      Vec w = m * v;
      v = m.adjoint() * w;
      double n = v.norm();
      if (n < 1e-300) return 0.0;
      v /= n;
    }
    return (m * v).norm();
  };
  Vec v1 = Vec::Ones(m.cols());
  for (int i = 0; i < v1.size(); ++i) v1(i) += cx(0.3 * std::sin(1.7 * i), 0.2 * std::cos(2.3 * i));
  v1.normalize();
  Vec v2 = Vec::Zero(m.cols());
  for (int i = 0; i < v2.size(); ++i) v2(i) = cx(std::cos(0.9 * i + 0.4), std::sin(1.3 * i));
  v2.normalize();
  return std::max(run(v1), run(v2));
}

// Closest unitary in Frobenius/operator norm: U V^dag from the SVD.
// Refuses nearly singular inputs, naming the offending singular value.
inline DenseOperator polar_unitary(const DenseOperator& op) {
  Eigen::BDCSVD<Mat> svd(op.entries, Eigen::ComputeFullU | Eigen::ComputeFullV);
  double smin = svd.singularValues().size() ? svd.singularValues().minCoeff() : 0.0;
  require(smin > tol_singular,
          "polar_unitary: operator is numerically singular (smallest singular value ", smin, ")");
  Mat u = svd.matrixU() * svd.matrixV().adjoint();
  return DenseOperator(op.support, op.dims, std::move(u));
}

inline double trace_distance(const Mat& a, const Mat& b) {
  Mat d = a - b;
  Mat h = (d + d.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// In-place application of op (unitary or not) to a state.
inline void apply_to_state(StateVector& psi, const DenseOperator& op) {
  auto pos = detail::positions_in([&] {
    std::vector<int> ids(psi.dims.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = int(i);
    return ids;
  }(), op.support);
  for (size_t k = 0; k < pos.size(); ++k)
    require(psi.dims[size_t(pos[k])] == op.dims[k], "state/operator dimension mismatch at factor ",
            op.support[k]);
  auto strides = strides_of(psi.dims);
  auto map = detail::make_embed_map(psi.dims, strides, pos);
  std::int64_t m = op.dim();
  Vec x(m), y(m);
  for (std::int64_t r : map.rest_offsets) {
    for (std::int64_t i = 0; i < m; ++i) x(i) = psi.amps(r + map.sub_offsets[size_t(i)]);
    y.noalias() = op.entries * x;
    for (std::int64_t i = 0; i < m; ++i) psi.amps(r + map.sub_offsets[size_t(i)]) = y(i);
  }
}

// m := embed(op_small at factor) * m, without forming the embedding.
inline void site_mult_left(Mat& m, const Mat& op_small, int factor, const std::vector<int>& dims) {
  auto strides = strides_of(dims);
  auto map = detail::make_embed_map(dims, strides, {factor});
  std::int64_t k = op_small.rows();
  require(k == dims[size_t(factor)], "site operator dimension mismatch");
  Vec x(k), y(k);
  for (std::int64_t c = 0; c < m.cols(); ++c)
    for (std::int64_t r : map.rest_offsets) {
      for (std::int64_t i = 0; i < k; ++i) x(i) = m(r + map.sub_offsets[size_t(i)], c);
      y.noalias() = op_small * x;
      for (std::int64_t i = 0; i < k; ++i) m(r + map.sub_offsets[size_t(i)], c) = y(i);
    }
}

// m := m * embed(op_small at factor).
inline void site_mult_right(Mat& m, const Mat& op_small, int factor, const std::vector<int>& dims) {
  auto strides = strides_of(dims);
  auto map = detail::make_embed_map(dims, strides, {factor});
  std::int64_t k = op_small.rows();
  require(k == dims[size_t(factor)], "site operator dimension mismatch");
  Vec x(k), y(k);
  Mat opt = op_small.transpose();
  for (std::int64_t r0 = 0; r0 < m.rows(); ++r0)
    for (std::int64_t r : map.rest_offsets) {
      for (std::int64_t i = 0; i < k; ++i) x(i) = m(r0, r + map.sub_offsets[size_t(i)]);
      y.noalias() = opt * x;
      for (std::int64_t i = 0; i < k; ++i) m(r0, r + map.sub_offsets[size_t(i)]) = y(i);
    }
}

// Reduced density matrix of a pure state on the given factors.
inline DenseOperator reduced_density(const StateVector& psi, const std::vector<int>& region) {
  std::vector<int> reg = region;
  std::sort(reg.begin(), reg.end());
  reg.erase(std::unique(reg.begin(), reg.end()), reg.end());
  std::vector<int> all(psi.dims.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = int(i);
  auto pos = detail::positions_in(all, reg);
  auto strides = strides_of(psi.dims);
  auto map = detail::make_embed_map(psi.dims, strides, pos);
  std::vector<int> rdims;
  for (int p : pos) rdims.push_back(psi.dims[size_t(p)]);
  std::int64_t m = 1;
  for (int d : rdims) m *= d;
  Mat rho = Mat::Zero(m, m);
  for (std::int64_t r : map.rest_offsets)
    for (std::int64_t a = 0; a < m; ++a) {
      cx va = psi.amps(r + map.sub_offsets[size_t(a)]);
      if (va == cx(0, 0)) continue;
      for (std::int64_t b = 0; b < m; ++b)
        rho(a, b) += va * std::conj(psi.amps(r + map.sub_offsets[size_t(b)]));
    }
  return DenseOperator(reg, rdims, std::move(rho));
}

inline double entropy_of_spectrum(const Eigen::VectorXd& eig) {
  double s = 0;
  for (int i = 0; i < eig.size(); ++i) {
    double l = eig(i);
    require(l > -tol_input, "density matrix is not positive semidefinite (eigenvalue ", l, ")");
    if (l > tol_eig) s -= l * std::log2(l);
  }
  return s;
}

// Base-2 entanglement entropy of `region` for a pure state.
inline double entropy(const StateVector& psi, const std::vector<int>& region) {
  require(std::abs(psi.norm() - 1.0) <= tol_input, "state is not normalized");
  // use the smaller side; entropies of complementary regions agree for pure states
  std::vector<int> reg = region;
  std::sort(reg.begin(), reg.end());
  std::int64_t d_reg = 1;
  for (int f : reg) d_reg *= psi.dims[size_t(f)];
  if (d_reg * d_reg > psi.dim()) {
    std::vector<int> comp;
    for (int f = 0; f < psi.n_factors(); ++f)
      if (!std::binary_search(reg.begin(), reg.end(), f)) comp.push_back(f);
    reg = comp;
  }
  DenseOperator rho = reduced_density(psi, reg);
  Eigen::SelfAdjointEigenSolver<Mat> es(rho.entries, Eigen::EigenvaluesOnly);
  return entropy_of_spectrum(es.eigenvalues());
}

// Entropy of a sub-region of a density operator.
inline double entropy(const DenseOperator& rho, const std::vector<int>& region) {
  require(std::abs(rho.entries.trace().real() - 1.0) <= 1e-8 &&
              std::abs(rho.entries.trace().imag()) <= 1e-8,
          "density matrix must have unit trace");
  std::vector<int> traced;
  for (int id : rho.support)
    if (std::find(region.begin(), region.end(), id) == region.end()) traced.push_back(id);
  DenseOperator red = traced.empty() ? rho : partial_trace(rho, traced);
  Eigen::SelfAdjointEigenSolver<Mat> es(red.entries, Eigen::EigenvaluesOnly);
  return entropy_of_spectrum(es.eigenvalues());
}

// --- single-qubit constants and helpers -------------------------------------

inline const Mat& pauli_x() {
  static const Mat m = (Mat(2, 2) << 0, 1, 1, 0).finished();
  return m;
}
inline const Mat& pauli_y() {
  static const Mat m = (Mat(2, 2) << 0, cx(0, -1), cx(0, 1), 0).finished();
  return m;
}
inline const Mat& pauli_z() {
  static const Mat m = (Mat(2, 2) << 1, 0, 0, -1).finished();
  return m;
}

inline DenseOperator site_op(int factor, const Mat& m2, int dim = 2) {
  require(m2.rows() == dim && m2.cols() == dim, "site operator has wrong dimension");
  return DenseOperator({factor}, {dim}, m2);
}

inline StateVector random_product_state(const std::vector<int>& dims, Rng& rng) {
  Vec amps = Vec::Ones(1);
  for (int d : dims) {
    Vec f = haar_state(d, rng);
    Vec next(amps.size() * d);
    for (std::int64_t i = 0; i < amps.size(); ++i)
      for (int j = 0; j < d; ++j) next(i * d + j) = amps(i) * f(j);
    amps = std::move(next);
  }
  return StateVector(dims, std::move(amps));
}

inline StateVector basis_state(const std::vector<int>& dims, std::int64_t index = 0) {
  Vec amps = Vec::Zero(checked_product(dims));
  amps(index) = 1.0;
  return StateVector(dims, std::move(amps));
}

}  // namespace nlqc
