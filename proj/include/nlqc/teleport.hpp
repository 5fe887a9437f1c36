// SPDX-License-Identifier: Apache-2.0
// Teleportation primitives for the error-corrected transfer layer: exact Bell
// teleportation, port-based teleportation with the pretty-good measurement,
// and the three-party cascade whose resource carries no sender/receiver
// mutual information.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nlqc/common.hpp"
#include "nlqc/dense.hpp"
#include "nlqc/stabilizer.hpp"

namespace nlqc {

// Joint-state dimension cap for teleportation builds.
inline constexpr std::int64_t teleport_dim_cap = std::int64_t(1) << 20;

// N port pairs, each pair maximally entangled. Factor layout of `joint` is
// [A_1..A_N, B_1..B_N] with one dim-2^q factor per port; the A side is
// measured by the sender, the B side belongs to the receiver.
struct PortResource {
  int n_ports = 0;
  int qubits_per_port = 0;
  StateVector joint;

  int port_dim() const { return 1 << qubits_per_port; }
};

namespace detail {

inline Vec kron_vec(const Vec& a, const Vec& b) {
  Vec out(a.size() * b.size());
  for (std::int64_t i = 0; i < a.size(); ++i)
    for (std::int64_t j = 0; j < b.size(); ++j) out(i * b.size() + j) = a(i) * b(j);
  return out;
}

inline Mat kron_mat(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// |Phi> = sum_i |ii> / sqrt(d) on two dim-d factors.
inline Vec bell_vec(int d) {
  Vec out = Vec::Zero(std::int64_t(d) * d);
  for (int i = 0; i < d; ++i) out(std::int64_t(i) * d + i) = 1.0 / std::sqrt(double(d));
  return out;
}

inline Mat pauli_dense(const PauliVec& p) {
  int d = 1 << p.n_sites();
  Mat out(d, d);
  for (int j = 0; j < d; ++j) {
    Vec e = Vec::Zero(d);
    e(j) = 1.0;
    out.col(j) = apply_pauli_to_vec(p, e);
  }
  return out;
}

inline double herm_op_norm(const Mat& m) {
  Mat h = (m + m.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Purification of a d x d density matrix on factors [system, environment],
// both of dimension d, system most significant.
inline Vec purify(const Mat& rho) {
  int d = int(rho.rows());
  Mat h = (rho + rho.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Vec out = Vec::Zero(std::int64_t(d) * d);
  for (int k = 0; k < d; ++k) {
    double l = std::max(0.0, es.eigenvalues()(k));
    if (l <= 0.0) continue;
    for (int i = 0; i < d; ++i) out(std::int64_t(i) * d + k) = std::sqrt(l) * es.eigenvectors()(i, k);
  }
  double n = out.norm();
  require(n > 0.5, "purification input has trace far from one");
  out /= n;
  return out;
}

inline double clamp01(double v) {
  require(v >= -1e-8 && v <= 1.0 + 1e-8, "value ", v, " escapes [0,1] beyond roundoff");
  return std::min(1.0, std::max(0.0, v));
}

inline int sample_index(const std::vector<double>& probs, Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double r = uni(rng), acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (r < acc) return int(i);
  }
  return int(probs.size()) - 1;
}

}  // namespace detail

// Uhlmann fidelity F(rho, sigma) = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double state_fidelity(const Mat& rho, const Mat& sigma) {
  require(rho.rows() == sigma.rows() && rho.cols() == sigma.cols(),
          "fidelity needs equal-shaped density matrices");
  Mat h = (rho + rho.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Mat sq = Mat::Zero(rho.rows(), rho.cols());
  for (int k = 0; k < es.eigenvalues().size(); ++k) {
    double l = std::max(0.0, es.eigenvalues()(k));
    sq += std::sqrt(l) * es.eigenvectors().col(k) * es.eigenvectors().col(k).adjoint();
  }
  Mat mid = sq * ((sigma + sigma.adjoint()) / 2.0) * sq;
  mid = (mid + mid.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es2(mid, Eigen::EigenvaluesOnly);
  double tr = 0.0;
  for (int k = 0; k < es2.eigenvalues().size(); ++k)
    tr += std::sqrt(std::max(0.0, es2.eigenvalues()(k)));
  return detail::clamp01(tr * tr);
}

inline PortResource make_port_resource(int n_ports, int qubits_per_port) {
  require(n_ports >= 1, "port resource needs at least one port, got ", n_ports);
  require(qubits_per_port >= 1, "ports need at least one qubit, got ", qubits_per_port);
  int d = 1 << qubits_per_port;
  double logdim = 2.0 * n_ports * qubits_per_port;
  require(logdim <= std::log2(double(teleport_dim_cap)) + 0.5,
          "port resource with ", n_ports, " ports of ", qubits_per_port,
          " qubits exceeds the state-vector cap");
  std::int64_t half = 1;
  for (int x = 0; x < n_ports; ++x) half *= d;
  Vec amps = Vec::Zero(half * half);
  double a = std::pow(double(d), -0.5 * n_ports);
  // A-block digits equal B-block digits exactly when index = k*half + k
  for (std::int64_t k = 0; k < half; ++k) amps(k * half + k) = a;
  PortResource out;
  out.n_ports = n_ports;
  out.qubits_per_port = qubits_per_port;
  out.joint = StateVector(std::vector<int>(size_t(2 * n_ports), d), std::move(amps));
  return out;
}

// One sampled teleportation branch. `rho` mirrors the input layout: the
// received register sits in the message slot (factor 0 of `dims`) with the
// untouched reference factors after it. For Bell teleportation it is the raw
// post-measurement state and applying `label` on the received factor restores
// the input, while `fidelity` already accounts for that correction.
struct TeleportOutcome {
  int index = -1;
  PauliVec label;
  Mat rho;
  std::vector<int> dims;
  double fidelity = 0.0;
  double probability = 0.0;
};

// Bell teleportation of factor 0 of `psi` through a single maximally
// entangled pair. Exact: every Pauli outcome has probability 1/d^2 and the
// corrected output equals the input.
inline TeleportOutcome teleport_normal(const StateVector& psi, const PortResource& bell,
                                       std::uint64_t seed) {
  require(bell.n_ports == 1, "Bell teleportation uses a single pair, got ", bell.n_ports,
          " ports");
  int d = bell.port_dim();
  require(psi.n_factors() >= 1 && psi.dims[0] == d, "message factor has dimension ",
          psi.n_factors() ? psi.dims[0] : 0, " but the Bell pair carries dimension ", d);
  require(std::abs(psi.norm() - 1.0) <= tol_input, "input state must be normalized");
  int nref = psi.n_factors() - 1;
  std::int64_t refdim = psi.dim() / d;

  // joint layout [M, A', B', refs...] so the received factor lands first in
  // the reduced state and the references keep their order behind it
  StateVector joint;
  joint.dims = {d, d, d};
  for (int r = 1; r <= nref; ++r) joint.dims.push_back(psi.dims[size_t(r)]);
  joint.amps = Vec::Zero(psi.dim() * std::int64_t(d) * d);
  double w = 1.0 / std::sqrt(double(d));
  for (std::int64_t m = 0; m < d; ++m)
    for (std::int64_t a = 0; a < d; ++a)
      for (std::int64_t r = 0; r < refdim; ++r)
        joint.amps(((m * d + a) * d + a) * refdim + r) = w * psi.amps(m * refdim + r);

  Mat iref = Mat::Identity(refdim, refdim);
  Vec phi = detail::bell_vec(d);

  struct Branch {
    PauliVec label;
    double p = 0.0, fid = 0.0;
    DenseOperator rho;
  };
  std::vector<Branch> branches;
  std::vector<double> probs;
  std::vector<int> kept{2};
  for (int r = 1; r <= nref; ++r) kept.push_back(2 + r);

  for (int xm = 0; xm < d; ++xm)
    for (int zm = 0; zm < d; ++zm) {
      PauliVec p(bell.qubits_per_port);
      for (int q = 0; q < bell.qubits_per_port; ++q) {
        p.x[size_t(q)] = std::uint8_t((xm >> (bell.qubits_per_port - 1 - q)) & 1);
        p.z[size_t(q)] = std::uint8_t((zm >> (bell.qubits_per_port - 1 - q)) & 1);
      }
      p.phase = canonical_phase(p);  // hermitian sign convention for the record
      Mat pm = detail::pauli_dense(p);
      Vec beta = detail::kron_mat(pm, Mat::Identity(d, d)) * phi;
      StateVector c = joint;
      apply_to_state(c, DenseOperator({0, 1}, {d, d}, beta * beta.adjoint()));
      double prob = c.norm() * c.norm();
      Branch br;
      br.label = p;
      br.p = prob;
      if (prob > 1e-14) {
        c.amps /= c.norm();
        br.rho = reduced_density(c, kept);
        Mat corr = detail::kron_mat(pm, iref);
        Mat fixed = corr * br.rho.entries * corr.adjoint();
        br.fid = detail::clamp01((psi.amps.adjoint() * fixed * psi.amps)(0, 0).real());
      }
      branches.push_back(std::move(br));
      probs.push_back(prob);
    }

  double total = 0.0;
  for (double p : probs) total += p;
  require(std::abs(total - 1.0) <= 1e-9, "branch probabilities sum to ", total,
          ", measurement is not complete");

  Rng rng(seed);
  int pick = detail::sample_index(probs, rng);
  TeleportOutcome out;
  out.index = pick;
  out.label = branches[size_t(pick)].label;
  out.rho = branches[size_t(pick)].rho.entries;
  out.dims.push_back(d);
  for (int r = 1; r <= nref; ++r) out.dims.push_back(psi.dims[size_t(r)]);
  out.fidelity = branches[size_t(pick)].fid;
  out.probability = branches[size_t(pick)].p;
  return out;
}

// Pretty-good-measurement POVM for port-based teleportation: signal states
// sigma_x = Phi_{M A_x} (x) 1/d^{N-1} on the rest, elements
// rho^{-1/2} sigma_x rho^{-1/2} completed with the normalized kernel
// projector so they resolve the identity.
struct PbtPovm {
  int n_ports = 0;
  int dim = 0;
  std::vector<Mat> elements;
  std::vector<Mat> sqrt_elements;
  double completeness_defect = 0.0;
};

inline PbtPovm pbt_povm(int n_ports, int dim) {
  require(n_ports >= 1, "POVM needs at least one port, got ", n_ports);
  require(dim >= 2, "port dimension must be at least 2, got ", dim);
  std::int64_t big = 1;
  for (int x = 0; x <= n_ports; ++x) {
    big *= dim;
    require(big <= (std::int64_t(1) << 14), "POVM dimension ", dim, "^", n_ports + 1,
            " exceeds the dense cap");
  }

  // digit table over factors (M, A_1..A_N), M most significant
  std::vector<std::vector<int>> digit(size_t(big), std::vector<int>(size_t(n_ports) + 1));
  for (std::int64_t r = 0; r < big; ++r) {
    std::int64_t v = r;
    for (int f = n_ports; f >= 0; --f) {
      digit[size_t(r)][size_t(f)] = int(v % dim);
      v /= dim;
    }
  }

  double rest = std::pow(double(dim), double(n_ports - 1));
  std::vector<Mat> sigma(size_t(n_ports), Mat::Zero(big, big));
  for (std::int64_t r = 0; r < big; ++r)
    for (std::int64_t c = 0; c < big; ++c) {
      const auto& dr = digit[size_t(r)];
      const auto& dc = digit[size_t(c)];
      for (int x = 0; x < n_ports; ++x) {
        if (dr[size_t(1 + x)] != dr[0] || dc[size_t(1 + x)] != dc[0]) continue;
        bool match = true;
        for (int y = 0; y < n_ports; ++y)
          if (y != x && dr[size_t(1 + y)] != dc[size_t(1 + y)]) {
            match = false;
            break;
          }
        if (match) sigma[size_t(x)](r, c) += 1.0 / (dim * rest);
      }
    }

  Mat rho = Mat::Zero(big, big);
  for (const Mat& s : sigma) rho += s;
  Eigen::SelfAdjointEigenSolver<Mat> es((rho + rho.adjoint()) / 2.0);
  Eigen::VectorXd iw = Eigen::VectorXd::Zero(big);
  for (int k = 0; k < big; ++k)
    if (es.eigenvalues()(k) > tol_singular) iw(k) = 1.0 / std::sqrt(es.eigenvalues()(k));
  Mat isq = es.eigenvectors() * iw.cast<cx>().asDiagonal() * es.eigenvectors().adjoint();

  PbtPovm out;
  out.n_ports = n_ports;
  out.dim = dim;
  Mat sum = Mat::Zero(big, big);
  for (int x = 0; x < n_ports; ++x) {
    Mat e = isq * sigma[size_t(x)] * isq;
    e = (e + e.adjoint()) / 2.0;
    out.elements.push_back(e);
    sum += e;
  }
  Mat kernel = Mat::Identity(big, big) - sum;
  kernel = (kernel + kernel.adjoint()) / 2.0;
  sum.setZero();
  for (int x = 0; x < n_ports; ++x) {
    out.elements[size_t(x)] += kernel / double(n_ports);
    sum += out.elements[size_t(x)];
  }
  out.completeness_defect = detail::herm_op_norm(sum - Mat::Identity(big, big));
  require(out.completeness_defect <= 1e-9, "POVM completeness defect ",
          out.completeness_defect, " exceeds 1e-9");

  for (int x = 0; x < n_ports; ++x) {
    Eigen::SelfAdjointEigenSolver<Mat> ee(out.elements[size_t(x)]);
    require(ee.eigenvalues().minCoeff() >= -1e-9, "POVM element ", x,
            " is not positive semidefinite (eigenvalue ", ee.eigenvalues().minCoeff(), ")");
    Eigen::VectorXd w = ee.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    out.sqrt_elements.push_back(ee.eigenvectors() * w.cast<cx>().asDiagonal() *
                                ee.eigenvectors().adjoint());
  }
  return out;
}

namespace detail {

struct PbtBranch {
  double probability = 0.0;
  DenseOperator rho;  // on [refs..., received port(s)]
};

// All measurement branches of one port-based teleportation. Factor 0 of psi
// is the message, the rest ride along as references. With keep_all_ports the
// reduced state keeps every receiver port, otherwise only the selected one.
// Joint layout is [M, A_1..A_N, B_1..B_N, refs...]: the measured factors lead,
// so each sqrt-element application is a single dense product.
inline std::vector<PbtBranch> pbt_branches(const StateVector& psi, const PortResource& ports,
                                           const PbtPovm& povm, bool keep_all_ports) {
  int d = ports.port_dim();
  int n = ports.n_ports;
  require(povm.n_ports == n && povm.dim == d, "POVM was built for ", povm.n_ports,
          " ports of dimension ", povm.dim, ", resource has ", n, " of ", d);
  require(psi.n_factors() >= 1 && psi.dims[0] == d, "message factor has dimension ",
          psi.n_factors() ? psi.dims[0] : 0, " but ports carry dimension ", d);
  require(std::abs(psi.norm() - 1.0) <= tol_input, "input state must be normalized");
  require(psi.dim() <= teleport_dim_cap / ports.joint.dim(), "joint state of ", psi.dim(),
          " x ", ports.joint.dim(), " amplitudes exceeds the state-vector cap");

  int nref = psi.n_factors() - 1;
  std::int64_t refdim = psi.dim() / d;
  std::int64_t portdim = ports.joint.dim();

  StateVector joint;
  joint.dims.push_back(d);
  for (int f : ports.joint.dims) joint.dims.push_back(f);
  for (int r = 1; r <= nref; ++r) joint.dims.push_back(psi.dims[size_t(r)]);
  joint.amps = Vec::Zero(psi.dim() * portdim);
  for (std::int64_t ab = 0; ab < portdim; ++ab) {
    cx w = ports.joint.amps(ab);
    if (w == cx(0, 0)) continue;
    for (std::int64_t m = 0; m < d; ++m) {
      std::int64_t src = m * refdim;
      std::int64_t dst = (m * portdim + ab) * refdim;
      for (std::int64_t r = 0; r < refdim; ++r) joint.amps(dst + r) = w * psi.amps(src + r);
    }
  }

  std::int64_t big = povm.sqrt_elements[0].rows();  // d^{n+1}, the leading factors
  std::int64_t rest = joint.amps.size() / big;
  using RowMat = Eigen::Matrix<cx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  std::vector<PbtBranch> out;
  double total = 0.0;
  for (int x = 0; x < n; ++x) {
    StateVector c = joint;
    Eigen::Map<RowMat> view(c.amps.data(), big, rest);
    RowMat moved = povm.sqrt_elements[size_t(x)] * view;
    view = moved;
    double p = c.norm() * c.norm();
    total += p;
    std::vector<int> keep;
    if (keep_all_ports)
      for (int y = 0; y < n; ++y) keep.push_back(1 + n + y);
    else
      keep.push_back(1 + n + x);
    for (int r = 1; r <= nref; ++r) keep.push_back(2 * n + r);
    PbtBranch br;
    br.probability = p;
    if (p > 1e-14) {
      c.amps /= c.norm();
      br.rho = reduced_density(c, keep);
    } else {
      std::vector<int> kdims;
      std::int64_t kd = 1;
      for (int id : keep) {
        kdims.push_back(joint.dims[size_t(id)]);
        kd *= joint.dims[size_t(id)];
      }
      br.rho = DenseOperator(keep, kdims, Mat::Zero(kd, kd));
    }
    out.push_back(std::move(br));
  }
  require(std::abs(total - 1.0) <= 1e-8, "branch probabilities sum to ", total,
          ", POVM is not complete on this input");
  return out;
}

// POVMs depend only on (n_ports, dim); reuse them across calls. Single
// threaded by design, like the rest of the dense layer.
inline const PbtPovm& povm_cached(int n_ports, int dim) {
  static std::map<std::pair<int, int>, PbtPovm> cache;
  auto key = std::make_pair(n_ports, dim);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, pbt_povm(n_ports, dim)).first;
  return it->second;
}

}  // namespace detail

// Port-based teleportation of factor 0 of `psi`: measure the message against
// the sender halves with the pretty-good measurement, hand the receiver the
// selected port. No correction is applied; the fidelity reported is against
// the input as-is.
inline TeleportOutcome run_pbt(const StateVector& psi, const PortResource& ports,
                               std::uint64_t seed) {
  require(psi.dim() <= teleport_dim_cap / ports.joint.dim(), "joint state of ", psi.dim(),
          " x ", ports.joint.dim(), " amplitudes exceeds the state-vector cap");
  const PbtPovm& povm = detail::povm_cached(ports.n_ports, ports.port_dim());
  auto branches = detail::pbt_branches(psi, ports, povm, false);
  std::vector<double> probs;
  for (const auto& b : branches) probs.push_back(b.probability);
  Rng rng(seed);
  int pick = detail::sample_index(probs, rng);

  TeleportOutcome out;
  out.index = pick;
  out.rho = branches[size_t(pick)].rho.entries;
  out.dims.push_back(ports.port_dim());
  for (int r = 1; r < psi.n_factors(); ++r) out.dims.push_back(psi.dims[size_t(r)]);
  out.probability = branches[size_t(pick)].probability;
  out.fidelity = detail::clamp01((psi.amps.adjoint() * out.rho * psi.amps)(0, 0).real());
  return out;
}

// Average single-qubit teleportation fidelity via the channel's entanglement
// fidelity: F_avg = (d F_e + 1) / (d + 1) with the Choi state evaluated
// exactly over all measurement branches.
inline double pbt_average_fidelity_choi(int n_ports) {
  PortResource ports = make_port_resource(n_ports, 1);
  const PbtPovm& povm = detail::povm_cached(n_ports, 2);
  Vec phi = detail::bell_vec(2);
  StateVector s({2, 2}, phi);
  auto branches = detail::pbt_branches(s, ports, povm, false);
  double fe = 0.0;
  for (const auto& b : branches) {
    if (b.probability <= 1e-14) continue;
    fe += b.probability * (phi.adjoint() * b.rho.entries * phi)(0, 0).real();
  }
  return (2.0 * fe + 1.0) / 3.0;
}

// Same average by exact trajectory enumeration over the six single-qubit
// stabilizer states, which form a 2-design, so the two routes must agree.
inline double pbt_average_fidelity_direct(int n_ports) {
  PortResource ports = make_port_resource(n_ports, 1);
  const PbtPovm& povm = detail::povm_cached(n_ports, 2);
  const double s2 = 1.0 / std::sqrt(2.0);
  std::vector<Vec> states;
  auto push = [&](cx a, cx b) {
    Vec v(2);
    v << a, b;
    states.push_back(v);
  };
  push(1, 0);
  push(0, 1);
  push(s2, s2);
  push(s2, -s2);
  push(s2, cx(0, 1) * s2);
  push(s2, cx(0, -1) * s2);

  double acc = 0.0;
  for (const Vec& v : states) {
    StateVector s({2}, v);
    auto branches = detail::pbt_branches(s, ports, povm, false);
    for (const auto& b : branches) {
      if (b.probability <= 1e-14) continue;
      acc += b.probability * (v.adjoint() * b.rho.entries * v)(0, 0).real();
    }
  }
  return acc / double(states.size());
}

// Three-party cascade: Alice and Bob Bell-teleport single qubits to Charlie,
// Charlie port-teleports the pair to Alice, Alice to Charlie, Charlie to Bob,
// with Pauli corrections resolved from the classical records. The report also
// measures the pre-protocol resource: Alice/Bob mutual information blockwise
// and the one-time-pad behaviour of Charlie's outcome records.
struct AppendixDReport {
  int n_ports = 0;
  bool otp = false;
  std::uint64_t seed = 0;
  std::string label_a, label_b;  // Bell outcome Paulis
  int x1 = -1, y2 = -1, z3 = -1;  // surviving chain's port indices per stage
  std::array<double, 5> stage_fidelities{};  // bell a, bell b, C->A, A->C, C->B
  double stage_fidelity_product = 0.0;
  double final_fidelity = 0.0;
  double block1_mutual_information = 0.0;
  double block3_mutual_information = 0.0;
  double resource_mutual_information = 0.0;
  double x0_uniform_distance = 0.0;
  double x0_conditional_distance = 0.0;
};

namespace detail {

// Trace distance between two classical distributions.
inline double dist_l1_half(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / 2.0;
}

// Distance of the X'0 record from uniform and from independence of its X'1
// copy, with or without the one-time pad on X'0.
inline void record_metrics(const std::vector<double>& q, bool otp, double& unif, double& cond) {
  int n = int(q.size());
  std::vector<double> uniform(size_t(n), 1.0 / n);
  std::vector<double> marginal(size_t(n), 0.0);
  double worst = 0.0;
  for (int r = 0; r < n; ++r) {
    std::vector<double> given(size_t(n), 0.0);
    if (otp) {
      // X'0 stores r + k mod n with the uniform key k retained in V'0;
      // tracing the key leaves the record uniform whatever r was
      for (int k = 0; k < n; ++k) given[size_t((r + k) % n)] += 1.0 / n;
    } else {
      given[size_t(r)] = 1.0;
    }
    for (int j = 0; j < n; ++j) marginal[size_t(j)] += q[size_t(r)] * given[size_t(j)];
    if (q[size_t(r)] > 1e-12) worst = std::max(worst, dist_l1_half(given, uniform));
  }
  unif = dist_l1_half(marginal, uniform);
  cond = worst;
}

}  // namespace detail

inline AppendixDReport run_appendix_d(const Vec& psi_a, const Vec& psi_b, int n_ports,
                                      bool one_time_pad, std::uint64_t seed) {
  require(psi_a.size() == 2 && psi_b.size() == 2, "cascade takes single-qubit inputs, got ",
          psi_a.size(), " and ", psi_b.size());
  require(std::abs(psi_a.norm() - 1.0) <= tol_input && std::abs(psi_b.norm() - 1.0) <= tol_input,
          "input states must be normalized");
  require(n_ports >= 1 && n_ports <= 3, "port count ", n_ports,
          " outside the supported range 1..3; the receiver register count grows as N^3");

  Rng rng(seed);
  AppendixDReport rep;
  rep.n_ports = n_ports;
  rep.otp = one_time_pad;
  rep.seed = seed;

  // Bell stages into Charlie's hands
  PortResource bell = make_port_resource(1, 1);
  TeleportOutcome oa = teleport_normal(StateVector({2}, psi_a), bell, rng());
  TeleportOutcome ob = teleport_normal(StateVector({2}, psi_b), bell, rng());
  rep.label_a = pauli_to_string(oa.label);
  rep.label_b = pauli_to_string(ob.label);
  rep.stage_fidelities[0] = oa.fidelity;
  rep.stage_fidelities[1] = ob.fidelity;

  // chain state on one dim-4 factor, Alice's qubit most significant
  Mat chain = detail::kron_mat(oa.rho, ob.rho);

  PortResource ports = make_port_resource(n_ports, 2);
  const PbtPovm& povm = detail::povm_cached(n_ports, 4);

  // One port-teleportation hop of the surviving chain: purify, measure, keep
  // the sampled receiver port. Junk ports never touch the chain again, so the
  // trajectory only tracks the resolved one.
  auto hop = [&](const Mat& rho_in, int& index, double& fid) -> Mat {
    StateVector s({4, 4}, detail::purify(rho_in));
    auto branches = detail::pbt_branches(s, ports, povm, false);
    std::vector<double> probs;
    for (const auto& b : branches) probs.push_back(b.probability);
    index = detail::sample_index(probs, rng);
    require(index >= 0 && index < n_ports,
            "inconsistent classical records: sampled port index ", index, " of ", n_ports);
    DenseOperator got = partial_trace(branches[size_t(index)].rho, {2 * n_ports + 1});
    Mat out = got.entries;
    double tr = out.trace().real();
    require(std::abs(tr - 1.0) <= 1e-8, "hop output trace ", tr, " is not one");
    fid = state_fidelity(rho_in, out);
    return out;
  };

  Mat r1 = hop(chain, rep.x1, rep.stage_fidelities[2]);
  Mat ca = detail::kron_mat(detail::pauli_dense(oa.label), Mat::Identity(2, 2));
  r1 = ca * r1 * ca.adjoint();  // Alice fixes her half from the Bell record

  Mat r2 = hop(r1, rep.y2, rep.stage_fidelities[3]);
  Mat r3 = hop(r2, rep.z3, rep.stage_fidelities[4]);
  Mat cb = detail::kron_mat(Mat::Identity(2, 2), detail::pauli_dense(ob.label));
  r3 = cb * r3 * cb.adjoint();  // Bob fixes his half at the end

  Vec targ = detail::kron_vec(psi_a, psi_b);
  rep.final_fidelity = detail::clamp01((targ.adjoint() * r3 * targ)(0, 0).real());
  rep.stage_fidelity_product = 1.0;
  for (double f : rep.stage_fidelities) rep.stage_fidelity_product *= f;

  // Pre-protocol resource blocks: Charlie measures only registers on his side,
  // so tracing them leaves the Alice/Bob marginal in product form. Block 1 is
  // his Bell halves ported toward Alice against the retained halves a and b;
  // block 3 is one stage-2 port pair whose Charlie half rides toward Bob.
  // Mutual informations add over the N^2 independent stage-3 blocks.
  {
    Vec amps = Vec::Zero(16);  // factors [M(4), a(2), b(2)]
    for (int ia = 0; ia < 2; ++ia)
      for (int jb = 0; jb < 2; ++jb) amps((ia * 2 + jb) * 4 + ia * 2 + jb) = 0.5;
    StateVector s({4, 2, 2}, amps);
    auto branches = detail::pbt_branches(s, ports, povm, true);
    DenseOperator acc = branches[0].rho;
    acc.entries *= branches[0].probability;
    std::vector<double> dist{branches[0].probability};
    for (size_t x = 1; x < branches.size(); ++x) {
      acc.entries += branches[x].probability * branches[x].rho.entries;
      dist.push_back(branches[x].probability);
    }
    // kept ids: receiver ports 1+n..2n, then refs a at 2n+1 and b at 2n+2
    std::vector<int> alice;
    for (int y = 0; y < n_ports; ++y) alice.push_back(1 + n_ports + y);
    alice.push_back(2 * n_ports + 1);
    std::vector<int> all = alice;
    all.push_back(2 * n_ports + 2);
    rep.block1_mutual_information =
        entropy(acc, alice) + entropy(acc, {2 * n_ports + 2}) - entropy(acc, all);

    double u1 = 0.0, c1 = 0.0;
    detail::record_metrics(dist, one_time_pad, u1, c1);
    rep.x0_uniform_distance = u1;
    rep.x0_conditional_distance = c1;
  }
  {
    Vec amps = Vec::Zero(16);  // factors [M(4), alice ref(4)], maximally entangled
    for (int m = 0; m < 4; ++m) amps(m * 4 + m) = 0.5;
    StateVector s({4, 4}, amps);
    auto branches = detail::pbt_branches(s, ports, povm, true);
    DenseOperator acc = branches[0].rho;
    acc.entries *= branches[0].probability;
    std::vector<double> dist{branches[0].probability};
    for (size_t x = 1; x < branches.size(); ++x) {
      acc.entries += branches[x].probability * branches[x].rho.entries;
      dist.push_back(branches[x].probability);
    }
    // kept ids: receiver ports 1+n..2n, Alice's retained half at 2n+1
    std::vector<int> bob;
    for (int y = 0; y < n_ports; ++y) bob.push_back(1 + n_ports + y);
    std::vector<int> all = bob;
    all.push_back(2 * n_ports + 1);
    rep.block3_mutual_information =
        entropy(acc, {2 * n_ports + 1}) + entropy(acc, bob) - entropy(acc, all);

    double u3 = 0.0, c3 = 0.0;
    detail::record_metrics(dist, one_time_pad, u3, c3);
    rep.x0_uniform_distance = std::max(rep.x0_uniform_distance, u3);
    rep.x0_conditional_distance = std::max(rep.x0_conditional_distance, c3);
  }
  rep.resource_mutual_information =
      rep.block1_mutual_information +
      double(n_ports) * double(n_ports) * rep.block3_mutual_information;
  return rep;
}

}  // namespace nlqc
