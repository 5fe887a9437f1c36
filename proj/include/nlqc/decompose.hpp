// SPDX-License-Identifier: Apache-2.0
//
// Four-piece decomposition U ~ U_N U_S U_W U_E of a low-spread ring unitary,
// by circuit regrouping and by the auxiliary-copy swap-conjugate method with
// optional twirl truncation, plus the residual certificate.
#pragma once

#include <array>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nlqc/channel.hpp"
#include "nlqc/spread.hpp"

namespace nlqc {

enum class PartyTag { alice_pre, bob_pre, alice_post, bob_post };

inline const char* party_name(PartyTag t) {
  switch (t) {
    case PartyTag::alice_pre: return "Alice-pre";
    case PartyTag::bob_pre: return "Bob-pre";
    case PartyTag::alice_post: return "Alice-post";
    case PartyTag::bob_post: return "Bob-post";
  }
  return "?";
}

struct DecompositionPiece {
  std::string name;  // U_N, U_S, U_W, U_E
  DenseOperator op;
  std::vector<int> declared_support;  // factor ids; primed copies are n..2n-1
  PartyTag tag = PartyTag::alice_pre;
};

// Pieces are stored in product order: assembled = pieces[0] * pieces[1] * ...,
// i.e. the last listed piece acts first.
struct QuarterDecomposition {
  std::vector<DecompositionPiece> pieces;
  bool uses_aux_copy = false;
  double residual_bound = 0.0;
  std::optional<double> measured_residual;
  int n_sites = 0;
  int local_dim = 2;
  Mat aux_unitary;  // claimed U' on the copy (swap method); empty otherwise

  std::vector<int> system_dims() const {
    return std::vector<int>(size_t(uses_aux_copy ? 2 * n_sites : n_sites), local_dim);
  }
};

namespace detail {

// Geometric spread of a brickwork layout: light-cone growth through the
// layers, independent of the gate entries.
inline double layout_spread(const BrickworkCircuit& c, const Ring& ring) {
  double worst = 0.0;
  for (int phi = 0; phi < ring.n_sites; ++phi) {
    std::vector<bool> reach(size_t(ring.n_sites), false);
    reach[size_t(phi)] = true;
    for (const auto& layer : c.layers) {
      std::vector<int> add;
      for (const auto& g : layer)
        if (reach[size_t(g.a)] || reach[size_t(g.b)]) {
          add.push_back(g.a);
          add.push_back(g.b);
        }
      for (int s : add) reach[size_t(s)] = true;
    }
    for (int s = 0; s < ring.n_sites; ++s)
      if (reach[size_t(s)]) worst = std::max(worst, ring.site_distance(phi, s));
  }
  return worst;
}

}  // namespace detail

// Regroup a shallow brickwork circuit into quarter pieces: gates wholly inside
// W or E whose sites were not already consumed by a post-exchange gate go to
// U_W / U_E; the remainder goes to U_N / U_S. Composing N*S*W*E reproduces the
// circuit exactly.
inline QuarterDecomposition decompose_circuit(const BrickworkCircuit& circuit, const Ring& ring) {
  validate_model(ModelSpec(circuit), ring);
  double geo = detail::layout_spread(circuit, ring);
  require(geo <= pi / 2 + 1e-12, "circuit layout spread ", geo,
          " exceeds 2*pi/4; gates are unassignable to quarters");
  QuarterRegions q = quarter_regions(ring);
  std::vector<bool> poisoned(size_t(ring.n_sites), false);

  struct Group {
    Half half;
    const Region* region;
    std::vector<BrickGate> gates;  // in time order
  };
  std::array<Group, 4> groups = {Group{Half::N, &q.n, {}}, Group{Half::S, &q.s, {}},
                                 Group{Half::W, &q.w, {}}, Group{Half::E, &q.e, {}}};
  auto& gn = groups[0].gates;
  auto& gs = groups[1].gates;
  auto& gw = groups[2].gates;
  auto& ge = groups[3].gates;

  for (size_t l = 0; l < circuit.layers.size(); ++l) {
    for (const auto& g : circuit.layers[l]) {
      bool clean = !poisoned[size_t(g.a)] && !poisoned[size_t(g.b)];
      auto inside = [&](const Region& r) { return r.contains(g.a) && r.contains(g.b); };
      if (clean && inside(q.w)) {
        gw.push_back(g);
      } else if (clean && inside(q.e)) {
        ge.push_back(g);
      } else if (inside(q.n)) {
        gn.push_back(g);
        poisoned[size_t(g.a)] = poisoned[size_t(g.b)] = true;
      } else if (inside(q.s)) {
        gs.push_back(g);
        poisoned[size_t(g.a)] = poisoned[size_t(g.b)] = true;
      } else {
        fail("gate on sites (", g.a, ",", g.b, ") in layer ", l,
             " straddles a quarter boundary and is unassignable");
      }
    }
  }

  QuarterDecomposition dec;
  dec.uses_aux_copy = false;
  dec.residual_bound = 0.0;
  dec.n_sites = ring.n_sites;
  dec.local_dim = ring.local_dim;
  const PartyTag tags[4] = {PartyTag::alice_post, PartyTag::bob_post, PartyTag::alice_pre,
                            PartyTag::bob_pre};
  const char* names[4] = {"U_N", "U_S", "U_W", "U_E"};
  for (size_t k = 0; k < 4; ++k) {
    const Group& grp = groups[k];
    std::vector<int> sup = grp.region->sites;
    DenseOperator piece = identity_op(sup, std::vector<int>(sup.size(), ring.local_dim));
    for (const auto& g : grp.gates) piece = compose(gate_operator(g, ring), piece);
    dec.pieces.push_back({names[k], std::move(piece), sup, tags[k]});
  }

  // exactness audit against the dense circuit unitary
  Mat u = evolve_model(ModelSpec(circuit), ring).entries;
  Mat assembled = Mat::Identity(u.rows(), u.cols());
  for (auto it = dec.pieces.rbegin(); it != dec.pieces.rend(); ++it)
    assembled = embed(it->op, ring.dims()).entries * assembled;
  dec.measured_residual = op_norm_estimate(assembled - u);
  return dec;
}

// Greedy quarter assignment of the swap-conjugate operators: each site goes to
// the containing half whose far (opposite) half is at maximal distance, ties
// broken toward W, then E, then N, then S. Returned in half order W, E, N, S.
inline std::array<std::vector<int>, 4> k_group_assignment(const Ring& ring) {
  QuarterRegions q = quarter_regions(ring);
  std::array<std::vector<int>, 4> out;  // W, E, N, S
  for (int phi = 0; phi < ring.n_sites; ++phi) {
    Half c1 = in_half(ring, phi, Half::W) ? Half::W : Half::E;
    Half c2 = in_half(ring, phi, Half::N) ? Half::N : Half::S;
    Region site({phi});
    double d1 = region_distance(ring, site, q.of(opposite_half(c1)));
    double d2 = region_distance(ring, site, q.of(opposite_half(c2)));
    Half pick = (d2 > d1 + 1e-12) ? c2 : c1;  // W/E preferred on ties
    size_t idx = pick == Half::W ? 0 : pick == Half::E ? 1 : pick == Half::N ? 2 : 3;
    out[idx].push_back(phi);
  }
  return out;
}

namespace detail {

inline Mat swap_matrix(int d) {
  Mat s = Mat::Zero(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) s(i * d + j, j * d + i) = 1.0;
  return s;
}

// Product of site swaps Sigma_phi between each phi in `sites` and its copy.
inline DenseOperator swap_product(const std::vector<int>& sites, const Ring& ring) {
  require(!sites.empty(), "empty swap group");
  DenseOperator out({sites[0], ring.n_sites + sites[0]}, {ring.local_dim, ring.local_dim},
                    swap_matrix(ring.local_dim));
  for (size_t k = 1; k < sites.size(); ++k) {
    DenseOperator s({sites[k], ring.n_sites + sites[k]}, {ring.local_dim, ring.local_dim},
                    swap_matrix(ring.local_dim));
    out = compose(out, s);
  }
  return out;
}

// K_phi = U_{S'} Sigma_phi U_{S'}^dag = sum_ij E_ij^(phi) (x) (U E_ji U^dag)',
// with the primed part restricted to `prime_sites` (original-ring labels).
inline DenseOperator swap_conjugate(const DenseOperator& u, const Ring& ring, int phi,
                                    const std::vector<int>& prime_sites) {
  int d = ring.local_dim;
  int n = ring.n_sites;
  std::vector<Mat> blocks(size_t(d) * size_t(d));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      Mat e = Mat::Zero(d, d);
      e(j, i) = 1.0;  // E_ji
      Mat m = u.entries;
      site_mult_right(m, e, phi, u.dims);
      m = m * u.entries.adjoint();
      DenseOperator full(ring.all_sites(), ring.dims(), std::move(m));
      blocks[size_t(i * d + j)] = restrict_to(full, prime_sites).entries;
    }
  std::vector<int> sup{phi};
  std::vector<int> dims{d};
  for (int s : prime_sites) {
    sup.push_back(n + s);
    dims.push_back(d);
  }
  std::int64_t bd = blocks[0].rows();
  Mat k = Mat::Zero(d * bd, d * bd);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      k.block(i * bd, j * bd, bd, bd) = blocks[size_t(i * d + j)];
  return DenseOperator(std::move(sup), std::move(dims), std::move(k));
}

}  // namespace detail

// Auxiliary-copy decomposition: doubles the ring with a copy S' = |0...0>,
// conjugates each site swap by U on the copy, groups the mutually commuting
// K_phi into quarters, and absorbs the global swap into the post pieces. With
// truncate set, each K group is twirled over its far primed half and
// re-unitarized by polar decomposition.
inline QuarterDecomposition decompose_swap(const DenseOperator& u, const Ring& ring, bool truncate,
                                           double residual_bound = 0.0) {
  int n = ring.n_sites;
  require(int(u.support.size()) == n, "decompose_swap needs a full-ring unitary");
  std::int64_t dim = u.dim();
  double udef = (u.entries.adjoint() * u.entries - Mat::Identity(dim, dim)).cwiseAbs().maxCoeff();
  require(udef <= 1e-8, "decompose_swap needs a unitary input (defect ", udef, ")");
  require(2 * n <= 24, "doubled system exceeds the state-vector cap");

  double s = pi / 4;
  if (!truncate) {
    s = exact_spread(u, ring);
    require(s <= pi / 4 + 1e-9, "exact spread ", s,
            " exceeds 2*pi/8; use the truncated path with a light-cone certificate");
  }

  QuarterRegions q = quarter_regions(ring);
  auto groups = k_group_assignment(ring);  // W, E, N, S
  const Half halves[4] = {Half::W, Half::E, Half::N, Half::S};

  std::array<DenseOperator, 4> kgroup;
  for (size_t gi = 0; gi < 4; ++gi) {
    const auto& members = groups[gi];
    require(!members.empty(), "quarter ", half_name(halves[gi]), " received no swap operators");
    for (size_t m = 0; m < members.size(); ++m) {
      std::vector<int> prime_sites;
      if (truncate) {
        prime_sites = ring.all_sites();  // tails handled by the group twirl
      } else {
        for (int psi = 0; psi < n; ++psi)
          if (ring.site_distance(members[m], psi) <= s + 1e-9) prime_sites.push_back(psi);
      }
      DenseOperator k = detail::swap_conjugate(u, ring, members[m], prime_sites);
      kgroup[gi] = m == 0 ? std::move(k) : compose(kgroup[gi], k);
    }
    if (truncate) {
      const Region& far = q.of(opposite_half(halves[gi]));
      std::vector<int> far_primed;
      for (int f : far.sites) far_primed.push_back(n + f);
      DenseOperator tw = twirl(kgroup[gi], far_primed);
      std::vector<int> keep;
      for (int f : tw.support)
        if (std::find(far_primed.begin(), far_primed.end(), f) == far_primed.end())
          keep.push_back(f);
      kgroup[gi] = polar_unitary(restrict_to(tw, keep));
    }
  }

  QuarterDecomposition dec;
  dec.uses_aux_copy = true;
  dec.residual_bound = residual_bound;
  dec.n_sites = n;
  dec.local_dim = ring.local_dim;
  dec.aux_unitary = u.entries.adjoint();

  DenseOperator un = compose(detail::swap_product(q.n.sites, ring), kgroup[2]);
  DenseOperator us = compose(detail::swap_product(q.s.sites, ring), kgroup[3]);
  auto doubled = [&](const Region& r) {
    std::vector<int> sup = r.sites;
    for (int f : r.sites) sup.push_back(n + f);
    std::sort(sup.begin(), sup.end());
    return sup;
  };
  dec.pieces.push_back({"U_N", std::move(un), doubled(q.n), PartyTag::alice_post});
  dec.pieces.push_back({"U_S", std::move(us), doubled(q.s), PartyTag::bob_post});
  dec.pieces.push_back({"U_W", std::move(kgroup[0]), doubled(q.w), PartyTag::alice_pre});
  dec.pieces.push_back({"U_E", std::move(kgroup[1]), doubled(q.e), PartyTag::bob_pre});
  return dec;
}

inline QuarterDecomposition decompose_swap(const ModelSpec& spec, const Ring& ring, bool truncate,
                                           const LightConeFit* fit = nullptr);

// epsilon_spread certificate 4 a exp(-b (2pi/8 - v t)). Vacuous (+inf with a
// warning) once the light cone reaches the quarter distance.
inline double certify_residual(const LightConeFit& fit, double t, const Ring& ring) {
  (void)ring;
  require(t >= 0, "negative evolution time");
  require(fit.a > 0 && fit.b > 0 && fit.v > 0, "light-cone fit is not physical");
  if (fit.v * t >= pi / 4) {
    std::cerr << "warning: light cone v*t = " << fit.v * t
              << " reaches 2*pi/8; spread certificate is vacuous\n";
    return std::numeric_limits<double>::infinity();
  }
  return 4.0 * fit.a * std::exp(-fit.b * (pi / 4 - fit.v * t));
}

inline QuarterDecomposition decompose_swap(const ModelSpec& spec, const Ring& ring, bool truncate,
                                           const LightConeFit* fit) {
  DenseOperator u = evolve_model(spec, ring);
  double bound = 0.0;
  if (truncate) {
    require(fit != nullptr, "truncated decompose_swap needs a light-cone fit for its certificate");
    double t = 0.0;
    if (const auto* h = std::get_if<LocalHamiltonian>(&spec)) t = h->time;
    bound = certify_residual(*fit, t, ring);
  }
  return decompose_swap(u, ring, truncate, bound);
}

// Max deviation ||assembled |psi>|0> - (U (x) U') |psi>|0>|| over seeded
// random product states, after auditing every piece's declared support.
inline double verify_decomposition(const QuarterDecomposition& dec, const DenseOperator& u,
                                   const Ring& ring, int trials, std::uint64_t seed) {
  int n = ring.n_sites;
  require(dec.n_sites == n, "decomposition does not match the ring");
  const struct {
    const Mat& p;
    const char* name;
  } probes[3] = {{pauli_x(), "X"}, {pauli_y(), "Y"}, {pauli_z(), "Z"}};
  for (const auto& piece : dec.pieces) {
    for (size_t f = 0; f < piece.op.support.size(); ++f) {
      int site = piece.op.support[f];
      if (std::find(piece.declared_support.begin(), piece.declared_support.end(), site) !=
          piece.declared_support.end())
        continue;
      for (const auto& pr : probes) {
        Mat c = piece.op.entries;
        site_mult_right(c, pr.p, int(f), piece.op.dims);
        Mat c2 = piece.op.entries;
        site_mult_left(c2, pr.p, int(f), piece.op.dims);
        c -= c2;
        if (c.cwiseAbs().maxCoeff() > 1e-9)
          fail("piece ", piece.name, " acts outside its declared support: witness ", pr.name,
               " at factor ", site);
      }
    }
  }

  Rng rng(seed);
  std::vector<int> full_dims = dec.system_dims();
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    StateVector psi = random_product_state(ring.dims(), rng);
    Vec amps;
    Vec target;
    if (dec.uses_aux_copy) {
      Vec aux0 = dec.aux_unitary.col(0);  // U' |0...0>
      std::int64_t da = aux0.size(), ds = psi.amps.size();
      Vec t1 = u.entries * psi.amps;
      amps = Vec::Zero(ds * da);
      target.resize(ds * da);
      for (std::int64_t i = 0; i < ds; ++i) {
        amps(i * da) = psi.amps(i);
        for (std::int64_t j = 0; j < da; ++j) target(i * da + j) = t1(i) * aux0(j);
      }
    } else {
      amps = psi.amps;
      target = u.entries * psi.amps;
    }
    StateVector state(full_dims, std::move(amps));
    for (auto it = dec.pieces.rbegin(); it != dec.pieces.rend(); ++it)
      apply_to_state(state, it->op);
    worst = std::max(worst, (state.amps - target).norm());
  }
  return worst;
}

}  // namespace nlqc
