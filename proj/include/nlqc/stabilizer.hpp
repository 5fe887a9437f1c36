// SPDX-License-Identifier: Apache-2.0
//
// Stabilizer engine: symplectic GF(2) Pauli vectors with mod-4 phases, CHP
// tableaus with seeded measurement, logical-operator cleaning over codes,
// region recoverability, and integer entropies of stabilizer states.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nlqc/common.hpp"
#include "nlqc/dense.hpp"

namespace nlqc {

// ---------------------------------------------------------------------------
// Pauli vectors.
//
// A Pauli on n qubits is stored as i^phase * prod_j X_j^{x_j} Z_j^{z_j} with
// phase tracked mod 4 so that S-gate conjugation stays exact. Hermitian
// vectors expose a plain +/- sign; Y = i X Z has x = z = 1, phase = 1.

struct PauliVec {
  std::vector<std::uint8_t> x, z;  // one GF(2) bit per site
  int phase = 0;                   // power of i, mod 4

  PauliVec() = default;
  explicit PauliVec(int n) : x(size_t(n), 0), z(size_t(n), 0) {
    require(n >= 1, "Pauli vector needs at least one site, got ", n);
  }

  int n_sites() const { return int(x.size()); }

  int y_count() const {
    int c = 0;
    for (size_t j = 0; j < x.size(); ++j) c += int(x[j] & z[j]);
    return c;
  }

  bool is_identity() const {
    for (size_t j = 0; j < x.size(); ++j)
      if (x[j] || z[j]) return false;
    return (phase & 3) == 0;
  }

  bool is_hermitian() const { return ((phase - y_count()) & 1) == 0; }

  // +1 or -1; only hermitian vectors have a real sign.
  int sign() const {
    int d = ((phase - y_count()) % 4 + 4) % 4;
    if (d == 0) return +1;
    if (d == 2) return -1;
    fail("Pauli vector with phase i^", phase, " is not hermitian");
  }

  std::vector<int> support() const {
    std::vector<int> s;
    for (size_t j = 0; j < x.size(); ++j)
      if (x[j] || z[j]) s.push_back(int(j));
    return s;
  }

  int weight() const { return int(support().size()); }

  bool same_bits(const PauliVec& o) const { return x == o.x && z == o.z; }

  bool operator==(const PauliVec& o) const {
    return x == o.x && z == o.z && ((phase - o.phase) & 3) == 0;
  }
};

inline PauliVec pauli_term(int n, int site, char letter) {
  PauliVec p(n);
  require(site >= 0 && site < n, "site ", site, " out of range for ", n, " qubits");
  switch (letter) {
    case 'I': break;
    case 'X': p.x[size_t(site)] = 1; break;
    case 'Z': p.z[size_t(site)] = 1; break;
    case 'Y':
      p.x[size_t(site)] = 1;
      p.z[size_t(site)] = 1;
      p.phase = 1;
      break;
    default: fail("unknown Pauli letter '", std::string(1, letter), "'");
  }
  return p;
}

// Group product a*b (a acts after b as operators; order matters for the phase).
inline PauliVec pauli_mul(const PauliVec& a, const PauliVec& b) {
  require(a.n_sites() == b.n_sites(), "Pauli size mismatch: ", a.n_sites(), " vs ", b.n_sites());
  PauliVec out(a.n_sites());
  int cross = 0;  // Z bits of a sweeping past X bits of b
  for (size_t j = 0; j < a.x.size(); ++j) {
    cross += int(a.z[j] & b.x[j]);
    out.x[j] = a.x[j] ^ b.x[j];
    out.z[j] = a.z[j] ^ b.z[j];
  }
  out.phase = (a.phase + b.phase + 2 * (cross & 1)) & 3;
  return out;
}

inline int symplectic_product(const PauliVec& a, const PauliVec& b) {
  require(a.n_sites() == b.n_sites(), "Pauli size mismatch: ", a.n_sites(), " vs ", b.n_sites());
  int s = 0;
  for (size_t j = 0; j < a.x.size(); ++j) s += int((a.x[j] & b.z[j]) ^ (a.z[j] & b.x[j]));
  return s & 1;
}

inline bool paulis_commute(const PauliVec& a, const PauliVec& b) {
  return symplectic_product(a, b) == 0;
}

// Canonical phase making the vector equal +prod_j sigma_j with the standard
// X/Y/Z letters (used for destabilizers and fresh stabilizer rows).
inline int canonical_phase(const PauliVec& p) { return p.y_count() & 3; }

inline PauliVec pauli_from_string(const std::string& s) {
  require(!s.empty(), "empty Pauli string");
  size_t off = 0;
  int want_sign = +1;
  if (s[0] == '+' || s[0] == '-') {
    want_sign = s[0] == '+' ? +1 : -1;
    off = 1;
  }
  require(s.size() > off, "Pauli string '", s, "' has no letters");
  PauliVec p(int(s.size() - off));
  for (size_t j = off; j < s.size(); ++j) {
    char c = s[j];
    require(c == 'I' || c == 'X' || c == 'Y' || c == 'Z',
            "bad Pauli letter '", std::string(1, c), "' in '", s, "'");
    if (c == 'X' || c == 'Y') p.x[j - off] = 1;
    if (c == 'Z' || c == 'Y') p.z[j - off] = 1;
  }
  p.phase = (canonical_phase(p) + (want_sign < 0 ? 2 : 0)) & 3;
  return p;
}

inline std::string pauli_to_string(const PauliVec& p) {
  std::string out(1, p.sign() > 0 ? '+' : '-');
  for (size_t j = 0; j < p.x.size(); ++j) {
    int code = int(p.x[j]) + 2 * int(p.z[j]);
    out += "IXZY"[code];
  }
  return out;
}

// Apply the Pauli to a qubit-register state vector (factor 0 most significant,
// matching StateVector layout): P|b> = i^phase (-1)^{z.b} |b xor x>.
inline Vec apply_pauli_to_vec(const PauliVec& p, const Vec& v) {
  int n = p.n_sites();
  require(n <= 30, "Pauli dense application capped at 30 qubits, got ", n);
  require(v.size() == (std::int64_t(1) << n), "state dimension ", v.size(),
          " does not match ", n, " qubits");
  std::int64_t xmask = 0, zmask = 0;
  for (int j = 0; j < n; ++j) {
    std::int64_t bit = std::int64_t(1) << (n - 1 - j);
    if (p.x[size_t(j)]) xmask |= bit;
    if (p.z[size_t(j)]) zmask |= bit;
  }
  static const cx iphase[4] = {cx(1, 0), cx(0, 1), cx(-1, 0), cx(0, -1)};
  cx front = iphase[p.phase & 3];
  Vec out(v.size());
  for (std::int64_t idx = 0; idx < v.size(); ++idx) {
    int par = std::popcount(std::uint64_t(idx & zmask)) & 1;
    out[idx ^ xmask] = front * (par ? -v[idx] : v[idx]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Clifford gates.

enum class CliffordGate { h, s, sdg, x, y, z, cnot, cz, swap };

inline int gate_arity(CliffordGate g) {
  switch (g) {
    case CliffordGate::cnot:
    case CliffordGate::cz:
    case CliffordGate::swap: return 2;
    default: return 1;
  }
}

inline const char* gate_name(CliffordGate g) {
  switch (g) {
    case CliffordGate::h: return "h";
    case CliffordGate::s: return "s";
    case CliffordGate::sdg: return "sdg";
    case CliffordGate::x: return "x";
    case CliffordGate::y: return "y";
    case CliffordGate::z: return "z";
    case CliffordGate::cnot: return "cnot";
    case CliffordGate::cz: return "cz";
    case CliffordGate::swap: return "swap";
  }
  return "?";
}

struct CliffordOp {
  CliffordGate gate;
  std::vector<int> sites;
};

using CliffordCircuit = std::vector<CliffordOp>;

namespace detail {

inline void check_gate_sites(CliffordGate g, const std::vector<int>& sites, int n) {
  require(int(sites.size()) == gate_arity(g), "gate ", gate_name(g), " expects ",
          gate_arity(g), " sites, got ", sites.size());
  for (int s : sites)
    require(s >= 0 && s < n, "gate ", gate_name(g), " site ", s, " out of range for ", n,
            " qubits");
  if (sites.size() == 2)
    require(sites[0] != sites[1], "gate ", gate_name(g), " sites must be distinct");
}

// Conjugation P -> G P G^dagger in the i^p X^x Z^z convention. CNOT and SWAP
// are phase free here; H picks up (-1)^{xz}, S/Sdg a factor i^{+-x}, CZ a
// (-1)^{x_a x_b} from reordering the induced Z past the partner X.
inline void conjugate_in_place(PauliVec& p, CliffordGate g, const std::vector<int>& sites) {
  switch (g) {
    case CliffordGate::h: {
      size_t j = size_t(sites[0]);
      p.phase = (p.phase + 2 * (p.x[j] & p.z[j])) & 3;
      std::swap(p.x[j], p.z[j]);
      break;
    }
    case CliffordGate::s: {
      size_t j = size_t(sites[0]);
      p.phase = (p.phase + p.x[j]) & 3;
      p.z[j] ^= p.x[j];
      break;
    }
    case CliffordGate::sdg: {
      size_t j = size_t(sites[0]);
      p.phase = (p.phase + 3 * p.x[j]) & 3;
      p.z[j] ^= p.x[j];
      break;
    }
    case CliffordGate::x: {
      size_t j = size_t(sites[0]);
      p.phase = (p.phase + 2 * p.z[j]) & 3;
      break;
    }
    case CliffordGate::y: {
      size_t j = size_t(sites[0]);
      p.phase = (p.phase + 2 * (p.x[j] ^ p.z[j])) & 3;
      break;
    }
    case CliffordGate::z: {
      size_t j = size_t(sites[0]);
      p.phase = (p.phase + 2 * p.x[j]) & 3;
      break;
    }
    case CliffordGate::cnot: {
      size_t c = size_t(sites[0]), t = size_t(sites[1]);
      p.x[t] ^= p.x[c];
      p.z[c] ^= p.z[t];
      break;
    }
    case CliffordGate::cz: {
      size_t a = size_t(sites[0]), b = size_t(sites[1]);
      p.phase = (p.phase + 2 * (p.x[a] & p.x[b])) & 3;
      p.z[a] ^= p.x[b];
      p.z[b] ^= p.x[a];
      break;
    }
    case CliffordGate::swap: {
      size_t a = size_t(sites[0]), b = size_t(sites[1]);
      std::swap(p.x[a], p.x[b]);
      std::swap(p.z[a], p.z[b]);
      break;
    }
  }
}

}  // namespace detail

inline PauliVec conjugate_pauli(PauliVec p, CliffordGate g, const std::vector<int>& sites) {
  detail::check_gate_sites(g, sites, p.n_sites());
  detail::conjugate_in_place(p, g, sites);
  return p;
}

// Heisenberg pushforward through a whole circuit: P -> C P C^dagger with the
// first listed gate acting first.
inline PauliVec conjugate_pauli(PauliVec p, const CliffordCircuit& circuit) {
  for (const auto& op : circuit) p = conjugate_pauli(std::move(p), op.gate, op.sites);
  return p;
}

inline CliffordCircuit inverse_circuit(const CliffordCircuit& circuit) {
  CliffordCircuit inv;
  inv.reserve(circuit.size());
  for (auto it = circuit.rbegin(); it != circuit.rend(); ++it) {
    CliffordGate g = it->gate;
    if (g == CliffordGate::s) g = CliffordGate::sdg;
    else if (g == CliffordGate::sdg) g = CliffordGate::s;
    inv.push_back({g, it->sites});
  }
  return inv;
}

// Dense unitary of a gate embedded on the given sites of a qubit register.
inline DenseOperator clifford_dense(CliffordGate g, const std::vector<int>& sites, int n_factors) {
  detail::check_gate_sites(g, sites, n_factors);
  const cx iunit(0.0, 1.0);
  if (gate_arity(g) == 1) {
    Mat m(2, 2);
    switch (g) {
      case CliffordGate::h: m << 1, 1, 1, -1; m /= std::sqrt(2.0); break;
      case CliffordGate::s: m << 1, 0, 0, iunit; break;
      case CliffordGate::sdg: m << 1, 0, 0, -iunit; break;
      case CliffordGate::x: m = pauli_x(); break;
      case CliffordGate::y: m = pauli_y(); break;
      case CliffordGate::z: m = pauli_z(); break;
      default: fail("unreachable");
    }
    return DenseOperator({sites[0]}, {2}, m);
  }
  int a = sites[0], b = sites[1];
  int lo = std::min(a, b), hi = std::max(a, b);
  Mat m = Mat::Zero(4, 4);
  for (int in = 0; in < 4; ++in) {
    int v_lo = in >> 1, v_hi = in & 1;  // factor order within the sorted support
    int va = a == lo ? v_lo : v_hi, vb = b == lo ? v_lo : v_hi;
    cx amp = 1.0;
    int wa = va, wb = vb;
    switch (g) {
      case CliffordGate::cnot: wb = vb ^ va; break;
      case CliffordGate::cz: amp = (va & vb) ? -1.0 : 1.0; break;
      case CliffordGate::swap: std::swap(wa, wb); break;
      default: fail("unreachable");
    }
    int w_lo = a == lo ? wa : wb, w_hi = a == lo ? wb : wa;
    m(2 * w_lo + w_hi, in) += amp;
  }
  return DenseOperator({lo, hi}, {2, 2}, m);
}

// ---------------------------------------------------------------------------
// CHP tableau: rows [0, n) are destabilizers, rows [n, 2n) stabilizers.
// The initial tableau stabilizes |0...0>.

struct Tableau {
  int n = 0;
  std::vector<PauliVec> rows;

  Tableau() = default;
  explicit Tableau(int n_sites) : n(n_sites) {
    require(n >= 1, "tableau needs at least one qubit, got ", n);
    rows.reserve(size_t(2 * n));
    for (int i = 0; i < n; ++i) rows.push_back(pauli_term(n, i, 'X'));
    for (int i = 0; i < n; ++i) rows.push_back(pauli_term(n, i, 'Z'));
  }

  const PauliVec& destabilizer(int i) const {
    require(i >= 0 && i < n, "destabilizer index ", i, " out of range");
    return rows[size_t(i)];
  }
  const PauliVec& stabilizer(int i) const {
    require(i >= 0 && i < n, "stabilizer index ", i, " out of range");
    return rows[size_t(n + i)];
  }
};

inline Tableau apply_clifford(const Tableau& tab, CliffordGate g, const std::vector<int>& sites) {
  detail::check_gate_sites(g, sites, tab.n);
  Tableau out = tab;
  for (auto& row : out.rows) detail::conjugate_in_place(row, g, sites);
  return out;
}

inline Tableau apply_circuit(Tableau tab, const CliffordCircuit& circuit) {
  for (const auto& op : circuit) tab = apply_clifford(tab, op.gate, op.sites);
  return tab;
}

// Measure Z at one site. Indeterminate outcomes draw one bit from the rng;
// determinate ones leave the state unchanged.
inline std::pair<Tableau, int> measure_z(const Tableau& tab, int site, Rng& rng) {
  require(site >= 0 && site < tab.n, "measurement site ", site, " out of range for ", tab.n,
          " qubits");
  Tableau out = tab;
  int n = out.n;
  int pivot = -1;
  for (int i = 0; i < n; ++i) {
    if (out.rows[size_t(n + i)].x[size_t(site)]) {
      pivot = n + i;
      break;
    }
  }
  if (pivot >= 0) {
    // Indeterminate: anticommuting stabilizer row found.
    int outcome = int(rng() & 1ull);
    for (int r = 0; r < 2 * n; ++r) {
      if (r == pivot || !out.rows[size_t(r)].x[size_t(site)]) continue;
      out.rows[size_t(r)] = pauli_mul(out.rows[size_t(r)], out.rows[size_t(pivot)]);
    }
    out.rows[size_t(pivot - n)] = out.rows[size_t(pivot)];
    PauliVec fresh = pauli_term(n, site, 'Z');
    fresh.phase = outcome ? 2 : 0;
    out.rows[size_t(pivot)] = fresh;
    return {std::move(out), outcome};
  }
  // Determinate: accumulate the stabilizer combination that equals +-Z_site.
  PauliVec acc(n);
  for (int i = 0; i < n; ++i)
    if (out.rows[size_t(i)].x[size_t(site)]) acc = pauli_mul(acc, out.rows[size_t(n + i)]);
  require(acc.same_bits(pauli_term(n, site, 'Z')),
          "internal: determinate measurement did not reduce to Z at site ", site);
  return {std::move(out), acc.sign() > 0 ? 0 : 1};
}

// Expectation <P> in the tableau state: exactly -1, 0, or +1.
inline int pauli_expectation(const Tableau& tab, const PauliVec& p) {
  require(p.n_sites() == tab.n, "Pauli size ", p.n_sites(), " does not match tableau ", tab.n);
  require(p.is_hermitian(), "expectation of a non-hermitian Pauli vector");
  int n = tab.n;
  for (int i = 0; i < n; ++i)
    if (!paulis_commute(p, tab.stabilizer(i))) return 0;
  PauliVec acc(n);
  for (int i = 0; i < n; ++i)
    if (symplectic_product(p, tab.destabilizer(i))) acc = pauli_mul(acc, tab.stabilizer(i));
  require(acc.same_bits(p), "internal: commuting Pauli not generated by the stabilizer rows");
  return ((p.phase - acc.phase) & 3) == 0 ? +1 : -1;
}

// ---------------------------------------------------------------------------
// GF(2) elimination helpers.

namespace detail {

using Gf2Row = std::vector<std::uint8_t>;

inline int gf2_rank(std::vector<Gf2Row> m) {
  if (m.empty()) return 0;
  size_t w = m[0].size(), r = 0;
  for (size_t c = 0; c < w && r < m.size(); ++c) {
    size_t p = r;
    while (p < m.size() && !m[p][c]) ++p;
    if (p == m.size()) continue;
    std::swap(m[p], m[r]);
    for (size_t q = 0; q < m.size(); ++q)
      if (q != r && m[q][c])
        for (size_t j = c; j < w; ++j) m[q][j] ^= m[r][j];
    ++r;
  }
  return int(r);
}

struct Gf2Combine {
  bool ok = false;
  Gf2Row combo;  // coefficients over the input rows
};

// Express target as a GF(2) combination of the given rows. Pivot choice is
// deterministic: columns left to right, lowest-index available row first.
inline Gf2Combine gf2_combine(const std::vector<Gf2Row>& rows, Gf2Row target) {
  size_t m = rows.size(), w = target.size();
  std::vector<Gf2Row> work(m);
  for (size_t i = 0; i < m; ++i) {
    require(rows[i].size() == w, "GF(2) row width mismatch");
    work[i] = rows[i];
    work[i].resize(w + m, 0);
    work[i][w + i] = 1;
  }
  std::vector<std::pair<size_t, size_t>> pivots;  // (column, row)
  std::vector<bool> used(m, false);
  for (size_t c = 0; c < w; ++c) {
    size_t p = m;
    for (size_t i = 0; i < m; ++i)
      if (!used[i] && work[i][c]) {
        p = i;
        break;
      }
    if (p == m) continue;
    used[p] = true;
    pivots.push_back({c, p});
    for (size_t q = 0; q < m; ++q)
      if (q != p && work[q][c])
        for (size_t j = 0; j < w + m; ++j) work[q][j] ^= work[p][j];
  }
  Gf2Combine out;
  out.combo.assign(m, 0);
  for (auto [c, p] : pivots) {
    if (!target[c]) continue;
    for (size_t j = 0; j < w; ++j) target[j] ^= work[p][j];
    for (size_t j = 0; j < m; ++j) out.combo[j] ^= work[p][w + j];
  }
  out.ok = true;
  for (std::uint8_t b : target)
    if (b) out.ok = false;
  return out;
}

// Basis of {v : a v = 0} with deterministic free-variable order.
inline std::vector<Gf2Row> gf2_nullspace(std::vector<Gf2Row> a, size_t width) {
  for (const auto& row : a) require(row.size() == width, "GF(2) row width mismatch");
  std::vector<int> pivot_of_col(width, -1);
  size_t r = 0;
  for (size_t c = 0; c < width && r < a.size(); ++c) {
    size_t p = r;
    while (p < a.size() && !a[p][c]) ++p;
    if (p == a.size()) continue;
    std::swap(a[p], a[r]);
    for (size_t q = 0; q < a.size(); ++q)
      if (q != r && a[q][c])
        for (size_t j = 0; j < width; ++j) a[q][j] ^= a[r][j];
    pivot_of_col[c] = int(r);
    ++r;
  }
  std::vector<Gf2Row> basis;
  for (size_t f = 0; f < width; ++f) {
    if (pivot_of_col[f] >= 0) continue;
    Gf2Row v(width, 0);
    v[f] = 1;
    for (size_t c = 0; c < width; ++c)
      if (pivot_of_col[c] >= 0) v[c] = a[size_t(pivot_of_col[c])][f];
    basis.push_back(std::move(v));
  }
  return basis;
}

// Restriction of a Pauli to the listed sites, coordinate order (x, z) per
// site ascending.
inline Gf2Row restrict_bits(const PauliVec& p, const std::vector<int>& sites) {
  Gf2Row row;
  row.reserve(2 * sites.size());
  for (int s : sites) {
    row.push_back(p.x[size_t(s)]);
    row.push_back(p.z[size_t(s)]);
  }
  return row;
}

inline std::vector<int> sorted_sites(std::vector<int> region, int n, const char* what) {
  std::sort(region.begin(), region.end());
  region.erase(std::unique(region.begin(), region.end()), region.end());
  for (int s : region)
    require(s >= 0 && s < n, what, " site ", s, " out of range for ", n, " qubits");
  return region;
}

inline std::vector<int> complement_sites(const std::vector<int>& sorted_region, int n) {
  std::vector<int> comp;
  size_t k = 0;
  for (int s = 0; s < n; ++s) {
    if (k < sorted_region.size() && sorted_region[k] == s) ++k;
    else comp.push_back(s);
  }
  return comp;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stabilizer codes.

struct StabilizerCode {
  int n = 0;  // physical qubits
  int k = 0;  // logical qubits
  std::vector<PauliVec> generators;  // n - k stabilizer generators
  std::vector<PauliVec> logical_x;   // k logical X operators
  std::vector<PauliVec> logical_z;   // k logical Z operators

  void validate() const {
    require(n >= 1 && k >= 0 && k <= n, "bad code parameters n=", n, " k=", k);
    require(int(generators.size()) == n - k, "expected ", n - k, " generators, got ",
            generators.size());
    require(int(logical_x.size()) == k && int(logical_z.size()) == k,
            "expected ", k, " logical X and Z operators");
    auto check_size = [&](const PauliVec& p, const char* what) {
      require(p.n_sites() == n, what, " has ", p.n_sites(), " sites, expected ", n);
      require(p.is_hermitian(), what, " is not hermitian");
    };
    for (const auto& g : generators) check_size(g, "generator");
    for (const auto& l : logical_x) check_size(l, "logical X");
    for (const auto& l : logical_z) check_size(l, "logical Z");
    for (size_t i = 0; i < generators.size(); ++i)
      for (size_t j = i + 1; j < generators.size(); ++j)
        require(paulis_commute(generators[i], generators[j]),
                "generators ", i, " and ", j, " anticommute");
    std::vector<detail::Gf2Row> rows;
    for (const auto& g : generators) {
      detail::Gf2Row r(size_t(2 * n), 0);
      for (int s = 0; s < n; ++s) {
        r[size_t(2 * s)] = g.x[size_t(s)];
        r[size_t(2 * s + 1)] = g.z[size_t(s)];
      }
      rows.push_back(std::move(r));
    }
    require(detail::gf2_rank(rows) == n - k, "stabilizer generators are not independent");
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < int(generators.size()); ++j) {
        require(paulis_commute(logical_x[size_t(i)], generators[size_t(j)]),
                "logical X ", i, " anticommutes with generator ", j);
        require(paulis_commute(logical_z[size_t(i)], generators[size_t(j)]),
                "logical Z ", i, " anticommutes with generator ", j);
      }
      for (int j = 0; j < k; ++j) {
        int want = i == j ? 1 : 0;
        require(symplectic_product(logical_x[size_t(i)], logical_z[size_t(j)]) == want,
                "logical pair (", i, ",", j, ") has wrong commutation");
        require(paulis_commute(logical_x[size_t(i)], logical_x[size_t(j)]),
                "logical X operators ", i, " and ", j, " anticommute");
        require(paulis_commute(logical_z[size_t(i)], logical_z[size_t(j)]),
                "logical Z operators ", i, " and ", j, " anticommute");
      }
    }
  }
};

// Text form: header line "code n k", then one signed Pauli string per line
// tagged stab / logx / logz.
inline std::string code_to_text(const StabilizerCode& code) {
  std::ostringstream out;
  out << "code " << code.n << ' ' << code.k << '\n';
  for (const auto& g : code.generators) out << "stab " << pauli_to_string(g) << '\n';
  for (const auto& l : code.logical_x) out << "logx " << pauli_to_string(l) << '\n';
  for (const auto& l : code.logical_z) out << "logz " << pauli_to_string(l) << '\n';
  return out.str();
}

inline StabilizerCode code_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  StabilizerCode code;
  bool have_header = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;  // blank line
    if (!have_header) {
      require(tag == "code", "code text must start with a 'code n k' line, got '", line, "'");
      require(bool(ls >> code.n >> code.k), "bad code header '", line, "'");
      have_header = true;
      continue;
    }
    std::string body;
    require(bool(ls >> body), "missing Pauli string on line '", line, "'");
    PauliVec p = pauli_from_string(body);
    require(p.n_sites() == code.n, "line '", line, "' has ", p.n_sites(),
            " sites, expected ", code.n);
    if (tag == "stab") code.generators.push_back(std::move(p));
    else if (tag == "logx") code.logical_x.push_back(std::move(p));
    else if (tag == "logz") code.logical_z.push_back(std::move(p));
    else fail("unknown line tag '", tag, "'");
  }
  require(have_header, "code text has no header line");
  code.validate();
  return code;
}

// ---------------------------------------------------------------------------
// Cleaning and recoverability.

// Representative of logical_op * stabilizer supported inside region, or
// nullopt when none exists. Deterministic: Gaussian elimination walks the
// complement coordinates lowest site first.
inline std::optional<PauliVec> clean_logical(const StabilizerCode& code, const PauliVec& logical_op,
                                             const std::vector<int>& region) {
  require(logical_op.n_sites() == code.n, "logical operator has ", logical_op.n_sites(),
          " sites, expected ", code.n);
  for (size_t j = 0; j < code.generators.size(); ++j)
    require(paulis_commute(logical_op, code.generators[j]),
            "operator anticommutes with stabilizer generator ", j,
            "; not in the code's logical group");
  std::vector<int> reg = detail::sorted_sites(region, code.n, "region");
  std::vector<int> comp = detail::complement_sites(reg, code.n);
  if (comp.empty()) return logical_op;
  std::vector<detail::Gf2Row> rows;
  rows.reserve(code.generators.size());
  for (const auto& g : code.generators) rows.push_back(detail::restrict_bits(g, comp));
  detail::Gf2Combine sol = detail::gf2_combine(rows, detail::restrict_bits(logical_op, comp));
  if (!sol.ok) return std::nullopt;
  PauliVec rep = logical_op;
  for (size_t i = 0; i < sol.combo.size(); ++i)
    if (sol.combo[i]) rep = pauli_mul(rep, code.generators[i]);
  for (int s : comp)
    require(!rep.x[size_t(s)] && !rep.z[size_t(s)], "internal: cleaned representative leaks");
  return rep;
}

// True iff both logicals of the pair have representatives inside region.
// Cross-checked against erasure-correctability of the complement: by the
// cleaning lemma, a representative on R exists iff no normalizer element
// supported on the complement anticommutes with the logical.
inline bool recoverable(const StabilizerCode& code, const std::vector<int>& region,
                        int logical_index) {
  require(logical_index >= 0 && logical_index < code.k, "logical index ", logical_index,
          " out of range for k=", code.k);
  const PauliVec& lx = code.logical_x[size_t(logical_index)];
  const PauliVec& lz = code.logical_z[size_t(logical_index)];
  bool by_cleaning = clean_logical(code, lx, region).has_value() &&
                     clean_logical(code, lz, region).has_value();

  std::vector<int> reg = detail::sorted_sites(region, code.n, "region");
  std::vector<int> comp = detail::complement_sites(reg, code.n);
  std::vector<detail::Gf2Row> constraints;
  constraints.reserve(code.generators.size());
  for (const auto& g : code.generators) {
    detail::Gf2Row row;
    row.reserve(2 * comp.size());
    for (int s : comp) {
      // variable (s, x) pairs with g's z bit and vice versa
      row.push_back(g.z[size_t(s)]);
      row.push_back(g.x[size_t(s)]);
    }
    constraints.push_back(std::move(row));
  }
  bool by_erasure = true;
  for (const auto& v : detail::gf2_nullspace(constraints, 2 * comp.size())) {
    PauliVec q(code.n);
    for (size_t i = 0; i < comp.size(); ++i) {
      q.x[size_t(comp[i])] = v[2 * i];
      q.z[size_t(comp[i])] = v[2 * i + 1];
    }
    if (symplectic_product(q, lx) || symplectic_product(q, lz)) {
      by_erasure = false;
      break;
    }
  }
  if (comp.empty()) by_erasure = true;
  require(by_cleaning == by_erasure,
          "recoverability cross-check mismatch for logical ", logical_index);
  return by_cleaning;
}

// ---------------------------------------------------------------------------
// Entropies of (pure) tableau states. S(A) = |A| - dim of the stabilizer
// subgroup supported inside A, in bits; always an integer.

inline int region_entropy(const Tableau& tab, const std::vector<int>& region) {
  std::vector<int> reg = detail::sorted_sites(region, tab.n, "region");
  std::vector<int> comp = detail::complement_sites(reg, tab.n);
  std::vector<detail::Gf2Row> rows;
  rows.reserve(size_t(tab.n));
  for (int i = 0; i < tab.n; ++i) rows.push_back(detail::restrict_bits(tab.stabilizer(i), comp));
  int inside = tab.n - detail::gf2_rank(rows);  // generators cleanable into the region
  return int(reg.size()) - inside;
}

inline int mutual_information(const Tableau& tab, const std::vector<int>& r1,
                              const std::vector<int>& r2) {
  std::vector<int> a = detail::sorted_sites(r1, tab.n, "region R1");
  std::vector<int> b = detail::sorted_sites(r2, tab.n, "region R2");
  for (int s : a)
    require(!std::binary_search(b.begin(), b.end(), s), "regions overlap at site ", s);
  std::vector<int> both = a;
  both.insert(both.end(), b.begin(), b.end());
  return region_entropy(tab, a) + region_entropy(tab, b) - region_entropy(tab, both);
}

// ---------------------------------------------------------------------------
// Dense reconstruction and tableau construction from explicit generators.

// State vector of the tableau (global phase arbitrary). Measures every site
// with a fixed rng to land on a basis state of nonzero overlap, then applies
// the stabilizer projector to it.
inline StateVector stabilizer_state_vector(const Tableau& tab) {
  require(tab.n <= 22, "dense reconstruction capped at 22 qubits, got ", tab.n);
  Rng rng(0x5eedful);
  Tableau probe = tab;
  std::int64_t ref = 0;
  for (int s = 0; s < tab.n; ++s) {
    auto [next, outcome] = measure_z(probe, s, rng);
    probe = std::move(next);
    if (outcome) ref |= std::int64_t(1) << (tab.n - 1 - s);
  }
  Vec v = Vec::Zero(std::int64_t(1) << tab.n);
  v[ref] = 1.0;
  for (int i = 0; i < tab.n; ++i) v = 0.5 * (v + apply_pauli_to_vec(tab.stabilizer(i), v));
  double nrm = v.norm();
  require(nrm > 1e-9, "internal: projected reference state vanished");
  return StateVector(std::vector<int>(size_t(tab.n), 2), v / nrm);
}

// Tableau whose stabilizer rows are exactly the given (independent, commuting,
// hermitian) generators; destabilizers are solved for symplectically.
inline Tableau tableau_from_stabilizers(const std::vector<PauliVec>& gens) {
  require(!gens.empty(), "need at least one generator");
  int n = gens[0].n_sites();
  require(int(gens.size()) == n, "pure tableau needs exactly ", n, " generators, got ",
          gens.size());
  std::vector<detail::Gf2Row> rows;
  for (size_t i = 0; i < gens.size(); ++i) {
    require(gens[i].n_sites() == n, "generator size mismatch");
    require(gens[i].is_hermitian(), "generator ", i, " is not hermitian");
    for (size_t j = i + 1; j < gens.size(); ++j)
      require(paulis_commute(gens[i], gens[j]), "generators ", i, " and ", j, " anticommute");
    detail::Gf2Row r(size_t(2 * n), 0);
    for (int s = 0; s < n; ++s) {
      r[size_t(2 * s)] = gens[i].x[size_t(s)];
      r[size_t(2 * s + 1)] = gens[i].z[size_t(s)];
    }
    rows.push_back(std::move(r));
  }
  require(detail::gf2_rank(rows) == n, "generators are not independent");

  Tableau out;
  out.n = n;
  out.rows.assign(size_t(2 * n), PauliVec(n));
  for (int i = 0; i < n; ++i) out.rows[size_t(n + i)] = gens[size_t(i)];

  // Destabilizer d_i: <d_i, s_j> = delta_ij, <d_i, d_j> = 0 for j < i. Each is
  // one inhomogeneous GF(2) solve; a solution exists by nondegeneracy of the
  // symplectic form. Variables are d's bits in (x, z) per-site order, and the
  // pairing with a fixed Pauli v is the dot product with (v.z, v.x).
  auto pairing_row = [n](const PauliVec& v) {
    detail::Gf2Row r(size_t(2 * n), 0);
    for (int s = 0; s < n; ++s) {
      r[size_t(2 * s)] = v.z[size_t(s)];
      r[size_t(2 * s + 1)] = v.x[size_t(s)];
    }
    return r;
  };
  for (int i = 0; i < n; ++i) {
    std::vector<detail::Gf2Row> a;
    detail::Gf2Row b;
    for (int j = 0; j < n; ++j) {
      a.push_back(pairing_row(gens[size_t(j)]));
      b.push_back(i == j ? 1 : 0);
    }
    for (int j = 0; j < i; ++j) {
      a.push_back(pairing_row(out.rows[size_t(j)]));
      b.push_back(0);
    }
    // Solve a * d = b by elimination over the variable columns.
    size_t w = size_t(2 * n);
    std::vector<int> pivot_of_col(w, -1);
    size_t r = 0;
    for (size_t c = 0; c < w && r < a.size(); ++c) {
      size_t p = r;
      while (p < a.size() && !a[p][c]) ++p;
      if (p == a.size()) continue;
      std::swap(a[p], a[r]);
      std::swap(b[p], b[r]);
      for (size_t q = 0; q < a.size(); ++q)
        if (q != r && a[q][c]) {
          for (size_t j2 = 0; j2 < w; ++j2) a[q][j2] ^= a[r][j2];
          b[q] ^= b[r];
        }
      pivot_of_col[c] = int(r);
      ++r;
    }
    for (size_t q = r; q < a.size(); ++q)
      require(!b[q], "internal: destabilizer system inconsistent");
    PauliVec d(n);
    for (size_t c = 0; c < w; ++c) {
      if (pivot_of_col[c] < 0) continue;
      if (!b[size_t(pivot_of_col[c])]) continue;
      if (c % 2 == 0) d.x[c / 2] = 1;
      else d.z[c / 2] = 1;
    }
    d.phase = canonical_phase(d);
    out.rows[size_t(i)] = std::move(d);
  }
  return out;
}

}  // namespace nlqc
