// SPDX-License-Identifier: Apache-2.0
//
// Model library over a ring: brickwork circuits and nearest-neighbor local
// Hamiltonians, dense evolution operators, and Krylov apply-to-state for
// systems past the dense cap.
#pragma once

#include <unsupported/Eigen/MatrixFunctions>
#include <variant>
#include <vector>

#include "nlqc/common.hpp"
#include "nlqc/dense.hpp"
#include "nlqc/ring.hpp"

namespace nlqc {

struct BrickGate {
  int a = 0, b = 0;  // sites, adjacent on the ring
  Mat u;             // 4x4 (local_dim^2) unitary; factor order (min, max) ascending

  BrickGate() = default;
  BrickGate(int a_, int b_, Mat u_) : a(a_), b(b_), u(std::move(u_)) {}
};

struct BrickworkCircuit {
  std::vector<std::vector<BrickGate>> layers;  // gates within a layer are disjoint
};

struct HamiltonianTerm {
  std::vector<int> sites;  // 1 or 2 sites, 2-site terms on ring-adjacent pairs
  Mat h;                   // hermitian, dim = local_dim^{|sites|}
};

struct LocalHamiltonian {
  std::vector<HamiltonianTerm> terms;
  double time = 0.0;  // evolution time; light speed normalized to 1 radian per unit
};

using ModelSpec = std::variant<BrickworkCircuit, LocalHamiltonian>;

inline void validate_model(const ModelSpec& spec, const Ring& ring) {
  if (const auto* c = std::get_if<BrickworkCircuit>(&spec)) {
    for (const auto& layer : c->layers) {
      std::vector<int> used;
      for (const auto& g : layer) {
        require(g.a >= 0 && g.a < ring.n_sites && g.b >= 0 && g.b < ring.n_sites && g.a != g.b,
                "gate sites out of range");
        require(ring.site_distance(g.a, g.b) <= ring.spacing() + 1e-12,
                "brickwork gate on non-adjacent sites ", g.a, ",", g.b);
        int d2 = ring.local_dim * ring.local_dim;
        require(g.u.rows() == d2 && g.u.cols() == d2, "gate matrix has wrong dimension");
        double defect = (g.u.adjoint() * g.u - Mat::Identity(d2, d2)).cwiseAbs().maxCoeff();
        require(defect <= 1e-10, "brickwork gate is not unitary (defect ", defect, ")");
        used.push_back(g.a);
        used.push_back(g.b);
      }
      std::sort(used.begin(), used.end());
      require(std::adjacent_find(used.begin(), used.end()) == used.end(),
              "gates within a layer must be disjoint");
    }
  } else {
    const auto& h = std::get<LocalHamiltonian>(spec);
    for (const auto& term : h.terms) {
      require(!term.sites.empty() && term.sites.size() <= 2, "terms act on 1 or 2 sites");
      if (term.sites.size() == 2)
        require(ring.site_distance(term.sites[0], term.sites[1]) <= ring.spacing() + 1e-12,
                "two-site term must be nearest-neighbor");
      double herm = (term.h - term.h.adjoint()).cwiseAbs().maxCoeff();
      require(herm <= 1e-12, "Hamiltonian term is not hermitian (defect ", herm, ")");
    }
  }
}

inline DenseOperator gate_operator(const BrickGate& g, const Ring& ring) {
  // stored matrix uses (a, b) order; flip to ascending-factor order if needed
  if (g.a < g.b) return DenseOperator({g.a, g.b}, {ring.local_dim, ring.local_dim}, g.u);
  int d = ring.local_dim;
  Mat flipped(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) flipped(j * d + i, l * d + k) = g.u(i * d + j, k * d + l);
  return DenseOperator({g.b, g.a}, {d, d}, std::move(flipped));
}

inline Mat hamiltonian_matrix(const LocalHamiltonian& h, const Ring& ring) {
  std::int64_t dim = checked_product(ring.dims());
  require(dim <= (1 << 12), "Hamiltonian dimension ", dim, " exceeds the dense cap");
  Mat out = Mat::Zero(dim, dim);
  for (const auto& term : h.terms) {
    std::vector<int> sup = term.sites;
    Mat m = term.h;
    if (sup.size() == 2 && sup[0] > sup[1]) {
      int d = ring.local_dim;
      Mat flipped(d * d, d * d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l) flipped(j * d + i, l * d + k) = m(i * d + j, k * d + l);
      m = flipped;
      std::swap(sup[0], sup[1]);
    }
    std::vector<int> tdims(sup.size(), ring.local_dim);
    out += embed(DenseOperator(sup, tdims, m), ring.dims()).entries;
  }
  return out;
}

// Full dense unitary of the model: layer product for circuits, exp(-iHt) by
// scaling-and-squaring for Hamiltonians.
inline DenseOperator evolve_model(const ModelSpec& spec, const Ring& ring) {
  validate_model(spec, ring);
  std::int64_t dim = checked_product(ring.dims());
  require(dim <= (1 << 12), "system dimension ", dim,
          " exceeds the dense cap; use apply_model_to_state");
  if (const auto* c = std::get_if<BrickworkCircuit>(&spec)) {
    Mat u = Mat::Identity(dim, dim);
    for (const auto& layer : c->layers)
      for (const auto& g : layer) u = embed(gate_operator(g, ring), ring.dims()).entries * u;
    return DenseOperator(ring.all_sites(), ring.dims(), std::move(u));
  }
  const auto& h = std::get<LocalHamiltonian>(spec);
  Mat hm = hamiltonian_matrix(h, ring);
  Mat u = (cx(0, -1) * h.time * hm).exp();
  return DenseOperator(ring.all_sites(), ring.dims(), std::move(u));
}

inline ModelSpec at_time(const LocalHamiltonian& h, double t) {
  LocalHamiltonian copy = h;
  copy.time = t;
  return copy;
}

// Haar-random depth-layer brickwork with alternating nearest-neighbor
// pairings; deterministic for a fixed seed.
inline ModelSpec random_brickwork(const Ring& ring, int depth, std::uint64_t seed) {
  Rng rng(seed);
  BrickworkCircuit c;
  int d2 = ring.local_dim * ring.local_dim;
  for (int layer = 0; layer < depth; ++layer) {
    std::vector<BrickGate> gates;
    int start = layer % 2;
    for (int a = start; a < ring.n_sites + start - 1; a += 2) {
      int i = a % ring.n_sites;
      int j = (a + 1) % ring.n_sites;
      gates.emplace_back(i, j, haar_unitary(d2, rng));
    }
    c.layers.push_back(std::move(gates));
  }
  return c;
}

// Transverse-field Ising chain on the ring: H = -j sum Z_i Z_{i+1} - g sum X_i.
inline LocalHamiltonian tfim_model(const Ring& ring, double j, double g, double time) {
  require(ring.local_dim == 2, "tfim_model needs qubits");
  LocalHamiltonian h;
  h.time = time;
  Mat zz = Eigen::kroneckerProduct(pauli_z(), pauli_z());
  for (int i = 0; i < ring.n_sites; ++i) {
    h.terms.push_back({{i, (i + 1) % ring.n_sites}, (-j) * zz});
    h.terms.push_back({{i}, (-g) * pauli_x()});
  }
  return h;
}

// --- state-vector paths for systems past the dense cap ----------------------

inline void apply_hamiltonian(const LocalHamiltonian& h, const Ring& ring, const Vec& x, Vec& y) {
  y.setZero(x.size());
  for (const auto& term : h.terms) {
    std::vector<int> sup = term.sites;
    Mat m = term.h;
    if (sup.size() == 2 && sup[0] > sup[1]) {
      int d = ring.local_dim;
      Mat flipped(d * d, d * d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l) flipped(j * d + i, l * d + k) = m(i * d + j, k * d + l);
      m = flipped;
      std::swap(sup[0], sup[1]);
    }
    StateVector part(ring.dims(), x);
    apply_to_state(part, DenseOperator(sup, std::vector<int>(sup.size(), ring.local_dim), m));
    y += part.amps;
  }
}

// Lanczos with full reorthogonalization; returns the Krylov basis and the
// real tridiagonal coefficients.
namespace detail {
struct LanczosData {
  std::vector<Vec> basis;
  std::vector<double> alpha, beta;  // beta[i] couples basis[i] and basis[i+1]
};

template <typename MatVec>
inline LanczosData lanczos(const MatVec& mv, const Vec& start, int m) {
  LanczosData out;
  Vec v = start.normalized();
  out.basis.push_back(v);
  Vec w;
  for (int it = 0; it < m; ++it) {
    mv(out.basis.back(), w);
    double a = (out.basis.back().adjoint() * w).value().real();
    out.alpha.push_back(a);
    w -= a * out.basis.back();
    if (out.basis.size() > 1) w -= out.beta.back() * out.basis[out.basis.size() - 2];
    for (const Vec& b : out.basis) w -= (b.adjoint() * w).value() * b;  // reorthogonalize
    double nb = w.norm();
    if (nb < 1e-12) break;
    out.beta.push_back(nb);
    out.basis.push_back(w / nb);
  }
  return out;
}
}  // namespace detail

// |psi> -> exp(-i t H)|psi> in a Krylov subspace; accuracy controlled by m.
inline StateVector krylov_evolve(const LocalHamiltonian& h, const Ring& ring,
                                 const StateVector& psi, double t, int m = 64) {
  auto mv = [&](const Vec& x, Vec& y) { apply_hamiltonian(h, ring, x, y); };
  double nrm = psi.amps.norm();
  auto data = detail::lanczos(mv, psi.amps, m);
  int k = int(data.alpha.size());
  Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    tri(i, i) = data.alpha[size_t(i)];
    if (i + 1 < k) tri(i, i + 1) = tri(i + 1, i) = data.beta[size_t(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
  Eigen::VectorXcd phases(k);
  for (int i = 0; i < k; ++i) phases(i) = std::exp(cx(0, -t * es.eigenvalues()(i)));
  Eigen::VectorXcd coeff =
      es.eigenvectors().cast<cx>() * (phases.asDiagonal() * es.eigenvectors().row(0).adjoint());
  Vec out = Vec::Zero(psi.amps.size());
  for (int i = 0; i < k; ++i) out += coeff(i) * data.basis[size_t(i)];
  return StateVector(psi.dims, out * nrm);
}

// Lowest eigenvector by Lanczos plus a Rayleigh-quotient residual check.
inline StateVector ground_state(const LocalHamiltonian& h, const Ring& ring, int m = 160) {
  std::int64_t dim = checked_product(ring.dims());
  Rng rng(20260823u);
  Vec start = haar_state(int(dim), rng);
  auto mv = [&](const Vec& x, Vec& y) { apply_hamiltonian(h, ring, x, y); };
  auto data = detail::lanczos(mv, start, std::min<int>(m, int(dim)));
  int k = int(data.alpha.size());
  Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    tri(i, i) = data.alpha[size_t(i)];
    if (i + 1 < k) tri(i, i + 1) = tri(i + 1, i) = data.beta[size_t(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
  Vec gs = Vec::Zero(dim);
  for (int i = 0; i < k; ++i) gs += cx(es.eigenvectors()(i, 0), 0) * data.basis[size_t(i)];
  gs.normalize();
  Vec hg;
  mv(gs, hg);
  double e0 = (gs.adjoint() * hg).value().real();
  double resid = (hg - e0 * gs).norm();
  require(resid <= 1e-6, "ground-state Lanczos did not converge (residual ", resid, ")");
  return StateVector(ring.dims(), std::move(gs));
}

// Apply the model's unitary to a state without forming the dense matrix.
inline StateVector apply_model_to_state(const ModelSpec& spec, const Ring& ring,
                                        const StateVector& psi) {
  validate_model(spec, ring);
  if (const auto* c = std::get_if<BrickworkCircuit>(&spec)) {
    StateVector out = psi;
    for (const auto& layer : c->layers)
      for (const auto& g : layer) apply_to_state(out, gate_operator(g, ring));
    return out;
  }
  const auto& h = std::get<LocalHamiltonian>(spec);
  return krylov_evolve(h, ring, psi, h.time);
}

}  // namespace nlqc
